"""Experiment configuration: one TOML document per run plus overrides."""

from __future__ import annotations

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Literal, Mapping, Sequence

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    field_validator,
    model_validator,
)

from sojunction.junction._fockspace import DEFAULT_MAX_DIMENSION
from sojunction.junction._params import ModelParams
from sojunction.junction.meanfield import CoherentAmplitudes
from sojunction.utils.error import ConfigError, ParameterError


class _Frozen(BaseModel):
    model_config = ConfigDict(
        frozen=True,
        populate_by_name=True,
        extra="forbid",
    )


class Linspace(_Frozen):
    start: float = 0.0
    stop: float = 100.0
    num: int = 1001

    @model_validator(mode="after")
    def _validate_range(self) -> "Linspace":
        if self.num < 1:
            raise ParameterError(f"num must be at least 1, got {self.num}.")
        if self.num > 1 and not self.stop > self.start:
            raise ParameterError(
                f"stop {self.stop} must exceed start {self.start}."
            )
        return self

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.num)


class InitialState(_Frozen):
    """Mean-field amplitudes; also seed the coherent quantum state."""

    x0_re: list[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0, 1.0])
    x0_im: list[float] | None = None

    @model_validator(mode="after")
    def _validate_lengths(self) -> "InitialState":
        if self.x0_im is not None and len(self.x0_im) != len(self.x0_re):
            raise ParameterError("x0_re and x0_im must have equal length.")
        if not any(self.x0_re) and not any(self.x0_im or []):
            raise ParameterError("the initial amplitudes vanish.")
        return self

    def amplitudes(self) -> CoherentAmplitudes:
        return CoherentAmplitudes.from_parts(self.x0_re, self.x0_im)


class _CommandConfig(_Frozen):
    model: ModelParams = Field(default_factory=ModelParams)
    max_dimension: int = DEFAULT_MAX_DIMENSION


class SpectrumConfig(_CommandConfig):
    dump_matrix: bool = False
    degeneracy_rel_tol: float = 1e-8


class ThresholdConfig(_CommandConfig):
    """Bisection over the product of the three grids.

    An omitted grid falls back to the single value in ``model``.
    """

    gammas: list[float] | None = None
    interactions: list[float] | None = None
    particle_numbers: list[int] | None = None
    beta_max: float = 4.0
    tol: float = 1e-3
    imag_tol: float | None = None

    @field_validator("beta_max", "tol")
    @classmethod
    def _validate_positive(cls, value: float) -> float:
        if not value > 0:
            raise ParameterError(f"{value} must be positive.")
        return value

    def grid(self) -> list[tuple[float, float, int]]:
        gammas = self.gammas or [self.model.soc]
        interactions = self.interactions or [self.model.interaction]
        sizes = self.particle_numbers or [self.model.n_particles]
        return [
            (gamma, g, n)
            for gamma in gammas
            for g in interactions
            for n in sizes
        ]


class PhaseDiagramConfig(_CommandConfig):
    gammas: Linspace = Linspace(start=0.0, stop=2.0, num=81)
    betas: Linspace = Linspace(start=0.0, stop=4.0, num=81)


class EvolveConfig(_CommandConfig):
    side: Literal["quantum", "meanfield", "both"] = "both"
    time: Linspace = Linspace()
    initial: InitialState = Field(default_factory=InitialState)
    method: Literal["spectral", "rk_adaptive"] = "spectral"
    form: Literal["gauged", "ungauged"] = "gauged"


class CompareConfig(_CommandConfig):
    time: Linspace = Linspace(start=0.0, stop=300.0, num=3001)
    initial: InitialState = Field(default_factory=InitialState)
    method: Literal["spectral", "rk_adaptive"] = "spectral"
    form: Literal["gauged", "ungauged"] = "gauged"
    window: tuple[float, float] = (100.0, 300.0)
    oscillating_variance: float = 1e-2
    settled_variance: float = 1e-4
    ratio_band: tuple[float, float] = (0.9, 1.1)
    min_overlap: float = 0.9

    @model_validator(mode="after")
    def _validate_unit_norm(self) -> "CompareConfig":
        norm = self.initial.amplitudes().norm
        if abs(norm - 1.0) > 1e-10:
            raise ParameterError(f"x0 must have unit norm, got {norm}.")
        return self


class SweepZbarConfig(_CommandConfig):
    interactions: list[float] = Field(default_factory=lambda: [0.1, 1, 5])
    particle_numbers: list[int] = Field(default_factory=lambda: [4, 10, 20])
    initial: InitialState = Field(default_factory=InitialState)
    horizon: float = 400.0
    burn_in: float = 200.0
    samples: int = 4001
    method: Literal["spectral", "rk_adaptive"] = "spectral"

    @model_validator(mode="after")
    def _validate_window(self) -> "SweepZbarConfig":
        if not self.horizon > self.burn_in >= 0:
            raise ParameterError("need 0 <= burn_in < horizon.")
        return self


class SteadyStateConfig(_CommandConfig):
    time: Linspace = Linspace(start=0.0, stop=200.0, num=2001)
    initial: InitialState = Field(default_factory=InitialState)
    imag_tol: float | None = None
    degeneracy_rel_tol: float = 1e-8


COMMANDS: dict[str, type[_CommandConfig]] = {
    "spectrum": SpectrumConfig,
    "threshold": ThresholdConfig,
    "phase-diagram": PhaseDiagramConfig,
    "evolve": EvolveConfig,
    "compare": CompareConfig,
    "sweep-zbar": SweepZbarConfig,
    "steady-state": SteadyStateConfig,
}


def parse_override(item: str) -> tuple[list[str], Any]:
    """Split ``a.b=value``; the value is read as TOML, else as a string."""
    key, sep, raw = item.partition("=")
    key = key.strip()
    if not sep or not key:
        raise ConfigError(f"override {item!r} is not of the form key=value.")
    try:
        value = tomllib.loads(f"value = {raw.strip()}")["value"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return key.split("."), value


def apply_overrides(
    data: Mapping[str, Any], overrides: Sequence[str]
) -> dict[str, Any]:
    merged = _deep_copy(data)
    for item in overrides:
        path, value = parse_override(item)
        node = merged
        for part in path[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"{'.'.join(path)} crosses a scalar.")
            node = child
        node[path[-1]] = value
    return merged


def _deep_copy(data: Mapping[str, Any]) -> dict[str, Any]:
    return {
        key: _deep_copy(value) if isinstance(value, Mapping) else value
        for key, value in data.items()
    }


def read_toml(path: Path | str) -> dict[str, Any]:
    path = Path(path)
    try:
        with path.open("rb") as handle:
            return tomllib.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path} is not valid TOML: {exc}") from exc


def load_config(
    command: str,
    path: Path | str | None = None,
    overrides: Sequence[str] = (),
) -> _CommandConfig:
    """Resolve the configuration of ``command``.

    Raises pydantic's ``ValidationError`` for inadmissible values.
    """
    try:
        model = COMMANDS[command]
    except KeyError as exc:
        raise ConfigError(f"unknown command {command!r}.") from exc
    data = read_toml(path) if path is not None else {}
    return model.model_validate(apply_overrides(data, overrides))
