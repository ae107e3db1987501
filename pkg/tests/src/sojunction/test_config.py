import numpy as np
import pytest
from pydantic import ValidationError

from sojunction.config import (
    COMMANDS,
    CompareConfig,
    InitialState,
    Linspace,
    ThresholdConfig,
    apply_overrides,
    load_config,
    parse_override,
    read_toml,
)
from sojunction.utils.error import ConfigError


@pytest.mark.parametrize(
    ("item", "path", "value"),
    [
        ("model.g=5", ["model", "g"], 5),
        ("model.beta = 0.1", ["model", "beta"], 0.1),
        ("dump_matrix=true", ["dump_matrix"], True),
        ("window=[10, 20]", ["window"], [10, 20]),
        ('side="quantum"', ["side"], "quantum"),
        ("side=quantum", ["side"], "quantum"),
    ],
)
def test_parse_override(item, path, value):
    assert parse_override(item) == (path, value)


@pytest.mark.parametrize("item", ["model.g", "=5"])
def test_parse_override_needs_key_and_value(item):
    with pytest.raises(ConfigError):
        parse_override(item)


def test_overrides_do_not_touch_the_source():
    data = {"model": {"g": 1.0, "N": 4}}
    merged = apply_overrides(data, ["model.g=5", "time.num=11"])
    assert merged == {"model": {"g": 5, "N": 4}, "time": {"num": 11}}
    assert data == {"model": {"g": 1.0, "N": 4}}


def test_override_cannot_descend_into_scalar():
    with pytest.raises(ConfigError):
        apply_overrides({"model": 1}, ["model.g=2"])


def test_every_command_has_defaults():
    for name, model in COMMANDS.items():
        config = load_config(name)
        assert isinstance(config, model)
        assert config.model.n_modes == 4


def test_compare_defaults():
    config = load_config("compare")
    assert isinstance(config, CompareConfig)
    assert config.time.values().shape == (3001,)
    assert config.window == (100.0, 300.0)
    np.testing.assert_allclose(config.initial.amplitudes().x, [0, 0, 0, 1])


def test_toml_file_and_overrides(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(
        "\n".join(
            [
                "dump_matrix = true",
                "[model]",
                "gamma = 0.5",
                "g = 5",
                "beta = 0.1",
                "N = 20",
            ]
        ),
        encoding="utf-8",
    )
    config = load_config("spectrum", path, ["model.N=4"])
    assert config.dump_matrix
    assert config.model.soc == 0.5
    assert config.model.interaction == 5.0
    assert config.model.loss == 0.1
    assert config.model.n_particles == 4


def test_read_toml_errors(tmp_path):
    with pytest.raises(ConfigError):
        read_toml(tmp_path / "missing.toml")
    broken = tmp_path / "broken.toml"
    broken.write_text("[model\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        read_toml(broken)


def test_unknown_command():
    with pytest.raises(ConfigError):
        load_config("plot")


@pytest.mark.parametrize(
    ("command", "override"),
    [
        ("spectrum", "model.beta=-1"),
        ("spectrum", "bogus=1"),
        ("evolve", "side=sideways"),
        ("evolve", "time.stop=-1"),
        ("compare", "initial.x0_re=[0, 0, 0, 2]"),
        ("threshold", "tol=0"),
        ("sweep-zbar", "burn_in=500"),
        ("steady-state", "initial.x0_re=[0, 0, 0, 0]"),
    ],
)
def test_inadmissible_values(command, override):
    with pytest.raises(ValidationError):
        load_config(command, overrides=[override])


def test_linspace():
    np.testing.assert_allclose(
        Linspace(start=0, stop=1, num=3).values(), [0, 0.5, 1]
    )
    assert Linspace(start=2, stop=2, num=1).values().tolist() == [2.0]
    with pytest.raises(ValidationError):
        Linspace(num=0)


def test_initial_state_parts():
    state = InitialState(x0_re=[0, 0.6, 0, 0], x0_im=[0, 0, 0, 0.8])
    np.testing.assert_allclose(state.amplitudes().x, [0, 0.6, 0, 0.8j])
    with pytest.raises(ValidationError):
        InitialState(x0_re=[1, 0], x0_im=[0])


def test_threshold_grid_falls_back_to_model():
    config = ThresholdConfig.model_validate(
        {"model": {"gamma": 0.3, "g": 2.0, "N": 6}, "gammas": [0.0, 0.5]}
    )
    assert config.grid() == [(0.0, 2.0, 6), (0.5, 2.0, 6)]
