"""Many-particle state preparation, propagation and observables.

States carry a logarithmic scale so long lossy runs do not underflow: the
physical vector is ``exp(log_scale) * amplitudes``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
import scipy.integrate
import scipy.linalg
from loguru import logger as _logger
from scipy import sparse
from scipy.special import gammaln

from sojunction.junction._fockspace import FockBasis
from sojunction.junction._integrate import check_time_grid, solve_on_grid
from sojunction.junction._observables import ObservableRecord, series
from sojunction.junction.meanfield import CoherentAmplitudes
from sojunction.junction.model import (
    ManyBodyMatrix,
    anti_hermitian_operator,
)
from sojunction.junction.spectra import SpectrumResult, eigendecompose
from sojunction.utils.error import (
    BiorthogonalityError,
    DefectiveMatrixError,
    DegenerateNorm,
    DimensionMismatch,
)

logger = _logger.bind(name=__name__)

Method = Literal["spectral", "rk_adaptive"]

QD_RTOL = 1e-10
QD_ATOL = 1e-12
UNDERFLOW = 1e-300
BIORTHOGONALITY_TOL = 1e-6
DEFAULT_HORIZON = 400.0
DEFAULT_BURN_IN = 200.0


@dataclass(frozen=True)
class QuantumState:
    amplitudes: np.ndarray = field(repr=False)
    time: float = 0.0
    log_scale: float = 0.0

    @property
    def dimension(self) -> int:
        return self.amplitudes.size

    @property
    def norm_squared(self) -> float:
        """Squared norm of the stored amplitudes, scale excluded."""
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    @property
    def survival(self) -> float:
        return float(np.exp(2 * self.log_scale) * self.norm_squared)

    @property
    def log_survival(self) -> float:
        """``log <psi|psi>``; stays finite after ``survival`` underflows."""
        norm_squared = self.norm_squared
        if norm_squared <= 0:
            return float("-inf")
        return 2 * self.log_scale + float(np.log(norm_squared))

    def vector(self) -> np.ndarray:
        return np.exp(self.log_scale) * self.amplitudes


def _rescaled(state: QuantumState) -> QuantumState:
    norm_squared = state.norm_squared
    if 0 < norm_squared < UNDERFLOW:
        logger.warning(
            f"state norm^2 {norm_squared:.3e} at t={state.time:g}; "
            "renormalizing"
        )
        norm = np.sqrt(norm_squared)
        return QuantumState(
            state.amplitudes / norm,
            state.time,
            state.log_scale + float(np.log(norm)),
        )
    return state


def coherent_state(
    x: CoherentAmplitudes | np.ndarray, basis: FockBasis
) -> QuantumState:
    """``(1/sqrt(N!)) (sum_i x_i a_i^+)^N |0>`` in the occupation basis."""
    if not isinstance(x, CoherentAmplitudes):
        x = CoherentAmplitudes(x)
    if x.n_modes != basis.n_modes:
        raise DimensionMismatch(
            f"{x.n_modes} amplitudes for {basis.n_modes} modes."
        )
    states = basis.states
    log_multinomial = 0.5 * (
        gammaln(basis.n_particles + 1) - gammaln(states + 1).sum(axis=1)
    )
    powers = np.power(
        np.broadcast_to(x.x, states.shape),
        states,
        out=np.ones(states.shape, dtype=complex),
        where=states > 0,
    )
    amplitudes = np.exp(log_multinomial) * powers.prod(axis=1)
    return QuantumState(amplitudes)


def _check_state(hamiltonian: ManyBodyMatrix, psi: QuantumState) -> None:
    if psi.dimension != hamiltonian.dimension:
        raise DimensionMismatch(
            f"state of length {psi.dimension} for a "
            f"{hamiltonian.dimension}-dimensional Hamiltonian."
        )


def _prepare_grid(
    psi0: QuantumState, t_grid: Sequence[float] | np.ndarray
) -> np.ndarray:
    times = check_time_grid(t_grid)
    if not np.isclose(times[0], psi0.time):
        raise ValueError(
            f"t_grid starts at {times[0]:g} but the state is at "
            f"t={psi0.time:g}."
        )
    return times


def _spectral(
    spectrum: SpectrumResult, psi0: QuantumState, times: np.ndarray
) -> list[QuantumState]:
    if spectrum.is_defective:
        raise DefectiveMatrixError(
            f"eigenvector condition number {spectrum.condition_number:.3e}; "
            "use method='rk_adaptive'."
        )
    energies = spectrum.eigenvalues
    vectors = spectrum.eigenvectors
    coefficients = scipy.linalg.solve(vectors, psi0.amplitudes)
    out = []
    for t in times:
        exponents = -1j * energies * (t - psi0.time)
        shift = float(np.max(exponents.real))
        amplitudes = vectors @ (coefficients * np.exp(exponents - shift))
        state = QuantumState(amplitudes, float(t), psi0.log_scale + shift)
        out.append(_rescaled(state))
    return out


def _runge_kutta(
    hamiltonian: ManyBodyMatrix, psi0: QuantumState, times: np.ndarray
) -> list[QuantumState]:
    matrix = hamiltonian.matrix

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        return -1j * (matrix @ y)

    out = [psi0]
    for start, stop in zip(times[:-1], times[1:]):
        previous = out[-1]
        sampled = solve_on_grid(
            rhs,
            previous.amplitudes,
            np.array([start, stop]),
            rtol=QD_RTOL,
            atol=QD_ATOL,
        )
        state = QuantumState(sampled[-1], float(stop), previous.log_scale)
        out.append(_rescaled(state))
    return out


def evolve_quantum(
    hamiltonian: ManyBodyMatrix,
    psi0: QuantumState,
    t_grid: Sequence[float] | np.ndarray,
    method: Method = "spectral",
    *,
    spectrum: SpectrumResult | None = None,
) -> list[QuantumState]:
    """Propagate ``i d psi/dt = H psi``; states are not normalized.

    ``spectrum`` may be passed to reuse an existing eigendecomposition
    of ``hamiltonian``.
    """
    _check_state(hamiltonian, psi0)
    times = _prepare_grid(psi0, t_grid)
    if method == "spectral":
        if spectrum is None:
            spectrum = eigendecompose(hamiltonian)
        return _spectral(spectrum, psi0, times)
    if method == "rk_adaptive":
        return _runge_kutta(hamiltonian, psi0, times)
    raise ValueError(f"unknown propagation method {method!r}.")


def evolve_with_fallback(
    hamiltonian: ManyBodyMatrix,
    psi0: QuantumState,
    t_grid: Sequence[float] | np.ndarray,
    method: Method = "spectral",
) -> list[QuantumState]:
    """Like ``evolve_quantum`` but switches to Runge-Kutta when the
    eigenvectors are near-defective."""
    try:
        return evolve_quantum(hamiltonian, psi0, t_grid, method)
    except DefectiveMatrixError as exc:
        logger.warning(f"{exc} Falling back to rk_adaptive.")
        return evolve_quantum(hamiltonian, psi0, t_grid, "rk_adaptive")


def mode_populations(psi: QuantumState, basis: FockBasis) -> np.ndarray:
    """Normalized per-particle populations ``<n_i> / N``."""
    norm_squared = psi.norm_squared
    if not np.isfinite(norm_squared) or norm_squared <= 0:
        raise DegenerateNorm(f"state at t={psi.time:g} has zero norm.")
    weights = np.abs(psi.amplitudes) ** 2 / norm_squared
    return weights @ basis.states / basis.n_particles


def observables(psi: QuantumState, basis: FockBasis) -> ObservableRecord:
    if psi.dimension != len(basis):
        raise DimensionMismatch(
            f"state of length {psi.dimension} for a basis of {len(basis)}."
        )
    if basis.n_modes != 4:
        raise DimensionMismatch("observables are defined for four modes.")
    return ObservableRecord.from_populations(
        psi.time, psi.survival, mode_populations(psi, basis)
    )


def observable_series(
    states: Sequence[QuantumState], basis: FockBasis
) -> list[ObservableRecord]:
    return [observables(psi, basis) for psi in states]


def imbalance_operators(basis: FockBasis) -> dict[str, sparse.csr_matrix]:
    """Diagonal many-body operators ``Z``, ``I`` and ``n_R`` (totals)."""
    n = basis.states
    values = {
        "z": n[:, 0] + n[:, 1] - n[:, 2] - n[:, 3],
        "i_spin": n[:, 0] - n[:, 2] - n[:, 1] + n[:, 3],
        "n_right": n[:, 2] + n[:, 3],
    }
    return {
        name: sparse.diags(v.astype(float), format="csr")
        for name, v in values.items()
    }


def _expect(operator, vector: np.ndarray, norm_squared: float) -> complex:
    return complex(np.vdot(vector, operator @ vector) / norm_squared)


def expectation_derivative(
    operator: sparse.spmatrix | np.ndarray,
    hamiltonian: ManyBodyMatrix,
    psi: QuantumState,
) -> complex:
    """``d<A>/dt = -i (<[A, H]> + 2 (<H_a A> - <H_a><A>))``.

    ``H_a = (H - H^+)/2`` is the anti-Hermitian part of the Hamiltonian.
    """
    _check_state(hamiltonian, psi)
    h = hamiltonian.matrix
    h_a = anti_hermitian_operator(hamiltonian)
    v = psi.amplitudes
    norm_squared = psi.norm_squared
    a_v = operator @ v
    h_v = h @ v
    commutator = np.vdot(v, operator @ h_v) - np.vdot(v, h @ a_v)
    deviation = np.vdot(v, h_a @ a_v) / norm_squared
    deviation -= _expect(h_a, v, norm_squared) * _expect(
        operator, v, norm_squared
    )
    return complex(-1j * (commutator / norm_squared + 2 * deviation))


def survival_rate(hamiltonian: ManyBodyMatrix, psi: QuantumState) -> float:
    """``d<psi|psi>/dt = -2i <psi|H_a|psi>``, unnormalized."""
    _check_state(hamiltonian, psi)
    h_a = anti_hermitian_operator(hamiltonian)
    vector = psi.vector()
    return float((-2j * np.vdot(vector, h_a @ vector)).real)


@dataclass(frozen=True)
class SteadyStateProjection:
    member_indices: np.ndarray
    times: np.ndarray
    z_s: np.ndarray
    i_s: np.ndarray


def dual_basis(
    spectrum: SpectrumResult, hamiltonian: ManyBodyMatrix | None = None
) -> np.ndarray:
    """Rows are left eigenvectors normalized so that ``W V = 1``."""
    vectors = spectrum.eigenvectors
    try:
        dual = scipy.linalg.inv(vectors)
    except scipy.linalg.LinAlgError as exc:
        raise BiorthogonalityError(
            f"eigenvectors are singular: {exc}"
        ) from exc

    identity = np.eye(vectors.shape[0])
    pairing = float(np.max(np.abs(dual @ vectors - identity), initial=0.0))
    if pairing > BIORTHOGONALITY_TOL:
        raise BiorthogonalityError(
            f"left/right pairing residual {pairing:.3e}."
        )
    if hamiltonian is not None:
        h = hamiltonian.matrix
        scale = max(float(abs(h).sum(axis=0).max()), np.finfo(float).tiny)
        left = (h.T @ dual.T).T - spectrum.eigenvalues[:, None] * dual
        residual = np.linalg.norm(left, axis=1) / np.linalg.norm(dual, axis=1)
        worst = float(np.max(residual, initial=0.0))
        if worst > BIORTHOGONALITY_TOL * scale:
            raise BiorthogonalityError(
                f"left eigenvector residual {worst:.3e}."
            )
    return dual


def projected_states(
    spectrum: SpectrumResult,
    psi0: QuantumState,
    t_grid: Sequence[float] | np.ndarray,
    *,
    hamiltonian: ManyBodyMatrix | None = None,
    imag_tol: float | None = None,
) -> tuple[np.ndarray, list[QuantumState]]:
    """Component of ``psi(t)`` inside the steady-state subspace."""
    times = _prepare_grid(psi0, t_grid)
    members = spectrum.steady_state_indices(imag_tol)
    coefficients = dual_basis(spectrum, hamiltonian)[members] @ (
        psi0.amplitudes
    )
    energies = spectrum.eigenvalues[members]
    vectors = spectrum.eigenvectors[:, members]
    out = []
    for t in times:
        exponents = -1j * energies * (t - psi0.time)
        shift = float(np.max(exponents.real))
        amplitudes = vectors @ (coefficients * np.exp(exponents - shift))
        out.append(
            QuantumState(amplitudes, float(t), psi0.log_scale + shift)
        )
    return members, out


def steady_state_projection(
    spectrum: SpectrumResult,
    psi0: QuantumState,
    t_grid: Sequence[float] | np.ndarray,
    basis: FockBasis,
    *,
    hamiltonian: ManyBodyMatrix | None = None,
    imag_tol: float | None = None,
) -> SteadyStateProjection:
    members, states = projected_states(
        spectrum, psi0, t_grid, hamiltonian=hamiltonian, imag_tol=imag_tol
    )
    records = observable_series(states, basis)
    logger.debug(f"steady-state subspace of size {members.size}")
    return SteadyStateProjection(
        member_indices=members,
        times=series(records, "time"),
        z_s=series(records, "z"),
        i_s=series(records, "i_spin"),
    )


@dataclass(frozen=True)
class TimeAverage:
    zbar: float
    half_window: float
    converged: bool


def window_average(
    times: np.ndarray, values: np.ndarray, start: float, stop: float
) -> float:
    mask = (times >= start) & (times <= stop)
    if mask.sum() < 2:
        raise ValueError(
            f"fewer than two samples in the window [{start:g}, {stop:g}]."
        )
    t, v = times[mask], values[mask]
    return float(scipy.integrate.trapezoid(v, t) / (t[-1] - t[0]))


def time_average(
    times: np.ndarray, values: np.ndarray, burn_in: float
) -> TimeAverage:
    """Average over ``[burn_in, T]`` and over a shorter window."""
    horizon = float(times[-1])
    if not horizon > burn_in >= times[0]:
        raise ValueError("need t0 <= burn_in < horizon.")
    half_end = 0.5 * horizon
    if half_end <= burn_in:
        half_end = 0.5 * (burn_in + horizon)
    full = window_average(times, values, burn_in, horizon)
    half = window_average(times, values, burn_in, half_end)
    converged = bool(np.isclose(half, full, rtol=0.02, atol=1e-3))
    return TimeAverage(full, half, converged)


def time_averaged_z(
    hamiltonian: ManyBodyMatrix,
    psi0: QuantumState,
    horizon: float = DEFAULT_HORIZON,
    burn_in: float = DEFAULT_BURN_IN,
    *,
    samples: int = 4001,
    method: Method = "spectral",
) -> TimeAverage:
    if not horizon > burn_in >= psi0.time:
        raise ValueError(
            f"need t0 <= burn_in < horizon, got {psi0.time:g}, "
            f"{burn_in:g}, {horizon:g}."
        )
    times = np.linspace(psi0.time, horizon, samples)
    states = evolve_with_fallback(hamiltonian, psi0, times, method)
    z = series(observable_series(states, hamiltonian.basis), "z")
    average = time_average(times, z, burn_in)
    if not average.converged:
        logger.warning(
            f"time average not converged: {average.half_window:.4g} vs "
            f"{average.zbar:.4g}"
        )
    return average
