"""Matched quantum and mean-field runs and their comparison metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from loguru import logger as _logger

from sojunction.junction._fockspace import (
    DEFAULT_MAX_DIMENSION,
    enumerate_basis,
)
from sojunction.junction._observables import ObservableRecord, series
from sojunction.junction._params import ModelParams
from sojunction.junction.meanfield import (
    CoherentAmplitudes,
    GaugeForm,
    evolve_meanfield,
)
from sojunction.junction.model import build_many_body
from sojunction.junction.qdyn import (
    Method,
    coherent_state,
    evolve_with_fallback,
    observable_series,
)

logger = _logger.bind(name=__name__)

UNIT_NORM_TOL = 1e-10
OSCILLATING_VARIANCE = 1e-2
SETTLED_VARIANCE = 1e-4
RATIO_BAND = (0.9, 1.1)
MIN_OVERLAP = 0.9


@dataclass(frozen=True)
class DeviationSeries:
    eps_n: np.ndarray
    z: np.ndarray
    i_spin: np.ndarray


@dataclass(frozen=True)
class ComparisonRun:
    params: ModelParams
    x0: CoherentAmplitudes
    times: np.ndarray
    quantum: list[ObservableRecord] = field(repr=False)
    meanfield: list[ObservableRecord] = field(repr=False)
    deviations: DeviationSeries = field(repr=False)


def run_comparison(
    params: ModelParams,
    x0: CoherentAmplitudes | np.ndarray,
    t_grid: Sequence[float] | np.ndarray,
    *,
    method: Method = "spectral",
    form: GaugeForm = "gauged",
    max_dimension: int = DEFAULT_MAX_DIMENSION,
) -> ComparisonRun:
    """Evolve ``coherent_state(x0)`` and ``x0`` side by side.

    ``eps_n`` compares the mean-field norm with the per-particle survival
    ``<psi|psi>^(1/N)``, taken through the log so that it does not
    underflow on long lossy runs.
    """
    if not isinstance(x0, CoherentAmplitudes):
        x0 = CoherentAmplitudes(x0)
    if abs(x0.norm - 1.0) > UNIT_NORM_TOL:
        raise ValueError(f"x0 must have unit norm, got {x0.norm:.12g}.")

    basis = enumerate_basis(
        params.n_particles, params.n_modes, max_dimension=max_dimension
    )
    hamiltonian = build_many_body(params, basis)
    psi0 = coherent_state(x0, basis)
    times = np.asarray(t_grid, dtype=float)
    states = evolve_with_fallback(hamiltonian, psi0, times, method)
    quantum = observable_series(states, basis)
    meanfield = evolve_meanfield(x0, params, times, form).records()

    log_survival = np.array([psi.log_survival for psi in states])
    per_particle = np.exp(log_survival / params.n_particles)
    n_mf = series(meanfield, "survival")
    deviations = DeviationSeries(
        eps_n=np.abs(n_mf - per_particle) / per_particle,
        z=np.abs(series(quantum, "z") - series(meanfield, "z")),
        i_spin=np.abs(
            series(quantum, "i_spin") - series(meanfield, "i_spin")
        ),
    )
    logger.debug(
        f"comparison {params!r}: max eps_n={deviations.eps_n.max():.3e}"
    )
    return ComparisonRun(
        params, x0, times, quantum, meanfield, deviations
    )


def _window(
    records: Sequence[ObservableRecord], window: tuple[float, float]
) -> np.ndarray:
    t1, t2 = window
    if not t2 > t1:
        raise ValueError(f"window end {t2:g} must exceed start {t1:g}.")
    times = series(records, "time")
    mask = (times >= t1) & (times <= t2)
    if mask.sum() < 2:
        raise ValueError(
            f"fewer than two samples in the window [{t1:g}, {t2:g}]."
        )
    return mask


@dataclass(frozen=True)
class BreakdownReport:
    quantum_variance: float
    meanfield_variance: float
    breakdown: bool
    oscillating_side: str | None


def breakdown_detector(
    run: ComparisonRun,
    window: tuple[float, float],
    *,
    oscillating_variance: float = OSCILLATING_VARIANCE,
    settled_variance: float = SETTLED_VARIANCE,
) -> BreakdownReport:
    """Flag one side still oscillating while the other has settled."""
    mask = _window(run.quantum, window)
    quantum = float(np.var(series(run.quantum, "z")[mask]))
    meanfield = float(np.var(series(run.meanfield, "z")[mask]))

    side = None
    if quantum > oscillating_variance and meanfield < settled_variance:
        side = "quantum"
    elif meanfield > oscillating_variance and quantum < settled_variance:
        side = "meanfield"
    return BreakdownReport(quantum, meanfield, side is not None, side)


@dataclass(frozen=True)
class SynchronizationReport:
    amplitude_ratio: float
    overlap: float
    anti_phase_correlation: float
    synchronized: bool


def _anti_phase_correlation(up: np.ndarray, down: np.ndarray) -> float:
    mirrored = -down
    flat_up = np.ptp(up) == 0
    flat_down = np.ptp(mirrored) == 0
    if flat_up and flat_down:
        return 1.0 if np.allclose(up, mirrored) else 0.0
    if flat_up or flat_down:
        return 0.0
    return float(np.corrcoef(up, mirrored)[0, 1])


def synchronization_metrics(
    records: Sequence[ObservableRecord],
    window: tuple[float, float],
    *,
    ratio_band: tuple[float, float] = RATIO_BAND,
    min_overlap: float = MIN_OVERLAP,
) -> SynchronizationReport:
    """Compare the spin-up and spin-down imbalance oscillations.

    The overlap is the length of the intersection of the two visited
    ranges over the length of their hull.
    """
    mask = _window(records, window)
    up = series(records, "i_up")[mask]
    down = series(records, "i_down")[mask]

    amp_up, amp_down = np.ptp(up) / 2, np.ptp(down) / 2
    if amp_down == 0:
        ratio = 1.0 if amp_up == 0 else float("inf")
    else:
        ratio = float(amp_up / amp_down)

    hull = max(up.max(), down.max()) - min(up.min(), down.min())
    shared = min(up.max(), down.max()) - max(up.min(), down.min())
    overlap = 1.0 if hull == 0 else float(max(shared, 0.0) / hull)

    synchronized = (
        ratio_band[0] <= ratio <= ratio_band[1] and overlap >= min_overlap
    )
    return SynchronizationReport(
        amplitude_ratio=ratio,
        overlap=overlap,
        anti_phase_correlation=_anti_phase_correlation(up, down),
        synchronized=bool(synchronized),
    )


def dissipation_deviation(
    params: ModelParams,
    x0: CoherentAmplitudes | np.ndarray,
    t_grid: Sequence[float] | np.ndarray,
    form: GaugeForm = "gauged",
) -> float:
    """Largest population change caused by switching the loss on."""
    lossy = evolve_meanfield(x0, params, t_grid, form).populations()
    lossless = evolve_meanfield(
        x0, params.replace(loss=0.0), t_grid, form
    ).populations()
    return float(np.max(np.abs(lossy - lossless)))
