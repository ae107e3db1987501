import math

import numpy as np
import pytest

from sojunction.junction._fockspace import enumerate_basis
from sojunction.junction._observables import ObservableRecord, series
from sojunction.junction._params import ModelParams
from sojunction.junction.meanfield import CoherentAmplitudes, evolve_meanfield
from sojunction.junction.model import build_many_body
from sojunction.junction.qcc import (
    ComparisonRun,
    DeviationSeries,
    breakdown_detector,
    dissipation_deviation,
    run_comparison,
    synchronization_metrics,
)
from sojunction.junction.qdyn import coherent_state, time_averaged_z
from sojunction.junction.spectra import breaking_threshold

TIMES = np.linspace(0, 20 * math.pi, 401)


def _imbalance_records(times, z):
    return [
        ObservableRecord.from_populations(
            t, 1.0, [(1 + v) / 2, 0, (1 - v) / 2, 0]
        )
        for t, v in zip(times, z)
    ]


def _spin_records(times, i_up, i_down):
    return [
        ObservableRecord.from_populations(
            t, 1.0, [0.25 + u / 2, 0.25 + d / 2, 0.25 - u / 2, 0.25 - d / 2]
        )
        for t, u, d in zip(times, i_up, i_down)
    ]


def _synthetic_run(z_quantum, z_meanfield):
    zeros = np.zeros(TIMES.size)
    return ComparisonRun(
        params=ModelParams(),
        x0=CoherentAmplitudes([0, 0, 0, 1]),
        times=TIMES,
        quantum=_imbalance_records(TIMES, z_quantum),
        meanfield=_imbalance_records(TIMES, z_meanfield),
        deviations=DeviationSeries(zeros, zeros, zeros),
    )


def test_initial_state_must_be_normalized():
    with pytest.raises(ValueError):
        run_comparison(ModelParams(N=2), [0, 0, 0, 2], [0.0, 1.0])


def test_non_interacting_runs_agree_exactly(generic_params):
    params = generic_params.replace(interaction=0.0, n_particles=4)
    x0 = np.array([0.6, 0.8j, 0.0, 0.0])
    run = run_comparison(params, x0, np.linspace(0, 20, 81))
    assert run.deviations.eps_n.max() < 1e-8
    assert run.deviations.z.max() < 1e-8
    assert run.deviations.i_spin.max() < 1e-8
    assert len(run.quantum) == len(run.meanfield) == 81


def test_long_lossy_run_keeps_finite_deviations():
    params = ModelParams(gamma=0.0, g=1.0, beta=1.0, N=4)
    run = run_comparison(params, [0, 0, 0, 1], np.linspace(0, 300, 301))
    assert series(run.quantum, "survival")[-1] == 0.0
    assert np.all(np.isfinite(run.deviations.eps_n))
    assert run.deviations.eps_n[0] == pytest.approx(0.0, abs=1e-12)


def test_stationary_coherent_eigenstate():
    params = ModelParams(J=1.0, Omega=1.0, gamma=0.0, N=4)
    x0 = np.array([1, 0, 0, 1]) / np.sqrt(2)
    run = run_comparison(params, x0, np.linspace(0, 10, 11))
    np.testing.assert_allclose(run.deviations.eps_n, 0.0, atol=1e-10)
    report = breakdown_detector(run, (2.0, 10.0))
    assert not report.breakdown
    assert report.oscillating_side is None


def test_breakdown_when_quantum_side_keeps_oscillating():
    report = breakdown_detector(
        _synthetic_run(np.cos(TIMES), np.full(TIMES.size, 0.5)),
        (10.0, 60.0),
    )
    assert report.breakdown
    assert report.oscillating_side == "quantum"
    assert report.quantum_variance == pytest.approx(0.5, abs=0.02)
    assert report.meanfield_variance == pytest.approx(0.0, abs=1e-15)


def test_breakdown_when_meanfield_side_keeps_oscillating():
    report = breakdown_detector(
        _synthetic_run(np.full(TIMES.size, 0.2), 0.8 * np.sin(TIMES)),
        (10.0, 60.0),
    )
    assert report.oscillating_side == "meanfield"


def test_no_breakdown_when_both_oscillate():
    report = breakdown_detector(
        _synthetic_run(np.cos(TIMES), 0.9 * np.cos(TIMES)), (10.0, 60.0)
    )
    assert not report.breakdown


@pytest.mark.parametrize("window", [(5.0, 5.0), (1000.0, 2000.0)])
def test_window_must_hold_samples(window):
    with pytest.raises(ValueError):
        breakdown_detector(
            _synthetic_run(np.cos(TIMES), np.cos(TIMES)), window
        )


def test_anti_phase_oscillation_is_synchronized():
    wave = 0.4 * np.sin(TIMES)
    report = synchronization_metrics(
        _spin_records(TIMES, wave, -wave), (0.0, 60.0)
    )
    assert report.amplitude_ratio == pytest.approx(1.0, abs=1e-3)
    assert report.overlap == pytest.approx(1.0, abs=1e-3)
    assert report.anti_phase_correlation == pytest.approx(1.0)
    assert report.synchronized


def test_unequal_amplitudes_are_not_synchronized():
    report = synchronization_metrics(
        _spin_records(TIMES, 0.4 * np.sin(TIMES), 0.05 * np.sin(TIMES)),
        (0.0, 60.0),
    )
    assert report.amplitude_ratio == pytest.approx(8.0, rel=1e-3)
    assert report.anti_phase_correlation == pytest.approx(-1.0)
    assert not report.synchronized


def test_flat_mirrored_components():
    report = synchronization_metrics(
        _spin_records(
            TIMES, np.full(TIMES.size, 0.2), np.full(TIMES.size, -0.2)
        ),
        (0.0, 60.0),
    )
    assert report.amplitude_ratio == 1.0
    assert report.overlap == 0.0
    assert report.anti_phase_correlation == 1.0
    assert not report.synchronized


def test_flat_spin_down_component():
    report = synchronization_metrics(
        _spin_records(
            TIMES, 0.3 * np.cos(TIMES), np.full(TIMES.size, 0.1)
        ),
        (0.0, 60.0),
    )
    assert math.isinf(report.amplitude_ratio)
    assert report.anti_phase_correlation == 0.0
    assert not report.synchronized


def test_spin_flip_swap_locks_mirrored_amplitudes():
    x0 = np.array([1, 0, 0, 1]) / np.sqrt(2)
    times = np.linspace(0, 300, 3001)
    reports = {}
    for gamma in (0.0, 0.01):
        trajectory = evolve_meanfield(
            x0, ModelParams(gamma=gamma, g=0.1), times
        )
        x = trajectory.amplitudes
        np.testing.assert_allclose(x[:, 0], x[:, 3], atol=1e-8)
        np.testing.assert_allclose(x[:, 1], x[:, 2], atol=1e-8)
        reports[gamma] = synchronization_metrics(
            trajectory.records(), (0.0, 300.0)
        )
        if gamma == 0.0:
            np.testing.assert_allclose(
                trajectory.populations(),
                np.tile([0.5, 0, 0, 0.5], (times.size, 1)),
                atol=1e-9,
            )

    assert not reports[0.0].synchronized
    assert reports[0.01].synchronized
    assert reports[0.01].amplitude_ratio == pytest.approx(1.0, abs=1e-6)
    assert reports[0.01].anti_phase_correlation == pytest.approx(1.0)


def test_dissipation_deviation():
    params = ModelParams(gamma=0.2, g=1.0)
    times = np.linspace(0, 2, 21)
    assert dissipation_deviation(params, [0, 0, 0, 1], times) == 0.0
    lossy = dissipation_deviation(
        params.replace(loss=0.05), [0, 0, 0, 1], times
    )
    assert 0.0 < lossy < 0.5


def test_half_integer_soc_self_traps_in_lossless_well():
    params = ModelParams(gamma=0.5, beta=0.1, g=1.0, N=4)
    basis = enumerate_basis(4, 4)
    average = time_averaged_z(
        build_many_body(params, basis),
        coherent_state([0, 0, 0, 1], basis),
        horizon=200.0,
        burn_in=100.0,
        samples=2001,
    )
    assert average.zbar > 0


@pytest.mark.slow
def test_half_integer_soc_threshold_vanishes_for_many_particles():
    params = ModelParams(gamma=0.5, g=0.1, N=20)
    result = breaking_threshold(
        params, enumerate_basis(20, 4), beta_max=1.0, tol=1e-3
    )
    assert result.broken_at_min


@pytest.mark.slow
def test_short_time_deviation_shrinks_with_particle_number():
    times = np.linspace(0, 10, 101)
    peaks = [
        run_comparison(
            ModelParams(g=0.1, beta=0.1, N=n), [0, 0, 0, 1], times
        ).deviations.eps_n.max()
        for n in (4, 10, 20)
    ]
    assert peaks[0] > peaks[1] > peaks[2]


@pytest.mark.slow
@pytest.mark.parametrize(
    ("n_particles", "breakdown"), [(4, True), (20, False)]
)
def test_correspondence_breaks_down_for_few_particles(
    n_particles, breakdown
):
    params = ModelParams(g=5.0, beta=0.1, N=n_particles)
    run = run_comparison(params, [0, 0, 0, 1], np.linspace(0, 300, 3001))
    report = breakdown_detector(run, (100.0, 300.0))
    assert report.breakdown is breakdown
    if breakdown:
        assert report.oscillating_side == "quantum"


@pytest.mark.slow
@pytest.mark.parametrize("g", [0.1, 1.0, 5.0])
@pytest.mark.parametrize("n_particles", [4, 10, 20])
def test_half_integer_soc_self_traps_for_every_size(g, n_particles):
    params = ModelParams(gamma=0.5, beta=0.1, g=g, N=n_particles)
    basis = enumerate_basis(n_particles, 4)
    average = time_averaged_z(
        build_many_body(params, basis), coherent_state([0, 0, 0, 1], basis)
    )
    assert average.zbar > 0
    assert average.converged
