"""Mean-field dynamics: the non-Hermitian discrete GPE and its two-point form.

The classical Hamiltonian of the extended model is

    H(x) = x^+ (hh + ha) x + (1/n) sum_ij h_ij |x_i|^2 |x_j|^2

and the amplitudes obey ``i dx/dt = dH/dx*`` with ``x`` and ``x*`` taken as
independent variables. The gauged form drops the global-phase term of the
nonlinearity; the dropped phase ``theta`` is integrated alongside so the
ungauged solution is ``x = exp(-i theta) x'``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np
from loguru import logger as _logger

from sojunction.junction._integrate import check_time_grid, solve_on_grid
from sojunction.junction._observables import ObservableRecord
from sojunction.junction._params import ModelParams
from sojunction.junction.model import (
    CoefficientMatrices,
    build_coefficients,
)
from sojunction.utils.error import DimensionMismatch

logger = _logger.bind(name=__name__)

GaugeForm = Literal["ungauged", "gauged"]

MF_RTOL = 1e-10
MF_ATOL = 1e-13
FD_STEP = 1e-5


@dataclass(frozen=True)
class CoherentAmplitudes:
    x: np.ndarray

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=complex).reshape(-1)
        norm = float(np.vdot(x, x).real)
        if not np.isfinite(norm) or norm <= 0:
            raise ValueError("coherent amplitudes must have positive norm.")
        object.__setattr__(self, "x", x)

    @classmethod
    def from_parts(
        cls, real: Sequence[float], imag: Sequence[float] | None = None
    ) -> "CoherentAmplitudes":
        x = np.asarray(real, dtype=float).astype(complex)
        if imag is not None:
            if len(imag) != x.size:
                raise DimensionMismatch(
                    f"{x.size} real parts but {len(imag)} imaginary parts."
                )
            x = x + 1j * np.asarray(imag, dtype=float)
        return cls(x)

    @property
    def n_modes(self) -> int:
        return self.x.size

    @property
    def norm(self) -> float:
        return float(np.vdot(self.x, self.x).real)

    def normalized(self) -> "CoherentAmplitudes":
        return CoherentAmplitudes(self.x / np.sqrt(self.norm))

    def populations(self) -> np.ndarray:
        return np.abs(self.x) ** 2 / self.norm

    def sigma(self) -> "DensityMatrixMF":
        return DensityMatrixMF(np.outer(self.x.conj(), self.x) / self.norm)


@dataclass(frozen=True)
class DensityMatrixMF:
    """``sigma_ij = x_i* x_j / n``, the reduced single-particle matrix."""

    sigma: np.ndarray

    def __post_init__(self) -> None:
        sigma = np.asarray(self.sigma, dtype=complex)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise DimensionMismatch(
                f"sigma must be square, got {sigma.shape}."
            )
        object.__setattr__(self, "sigma", sigma)

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.sigma))

    def hermiticity_residual(self) -> float:
        return float(np.max(np.abs(self.sigma - self.sigma.conj().T)))


@dataclass(frozen=True)
class MeanFieldTrajectory:
    times: np.ndarray
    amplitudes: np.ndarray = field(repr=False)
    form: GaugeForm
    theta: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return self.times.size

    @property
    def norms(self) -> np.ndarray:
        return np.sum(np.abs(self.amplitudes) ** 2, axis=1)

    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2 / self.norms[:, None]

    def ungauged(self) -> np.ndarray:
        """Amplitudes with the gauge phase restored."""
        if self.theta is None:
            return self.amplitudes
        return self.amplitudes * np.exp(-1j * self.theta)[:, None]

    def records(self) -> list[ObservableRecord]:
        return [
            ObservableRecord.from_populations(t, n, p)
            for t, n, p in zip(self.times, self.norms, self.populations())
        ]


def _as_vector(x: CoherentAmplitudes | np.ndarray) -> np.ndarray:
    if isinstance(x, CoherentAmplitudes):
        return x.x
    return np.asarray(x, dtype=complex)


def _phases(params: ModelParams) -> tuple[complex, complex]:
    forward = -params.hopping * np.exp(-1j * np.pi * params.soc)
    backward = -params.hopping * np.exp(1j * np.pi * params.soc)
    return forward, backward


def classical_hamiltonian(
    x: CoherentAmplitudes | np.ndarray, params: ModelParams
) -> complex:
    """Four-mode classical energy including the ``-i beta n_R`` loss."""
    x1, x2, x3, x4 = _as_vector(x)
    forward, backward = _phases(params)
    left = abs(x1) ** 2 + abs(x2) ** 2
    right = abs(x3) ** 2 + abs(x4) ** 2
    n = left + right

    raman = params.raman * 2 * ((x1.conjugate() * x2).real)
    raman += params.raman * 2 * ((x3.conjugate() * x4).real)
    tunnelling = forward * x1.conjugate() * x3
    tunnelling += np.conj(forward) * x3.conjugate() * x1
    tunnelling += backward * x2.conjugate() * x4
    tunnelling += np.conj(backward) * x4.conjugate() * x2
    interaction = 0.5 * params.interaction * (left**2 + right**2) / n
    return complex(
        raman + tunnelling + interaction - 1j * params.loss * right
    )


def general_classical_hamiltonian(
    x: CoherentAmplitudes | np.ndarray, coefficients: CoefficientMatrices
) -> complex:
    x = _as_vector(x)
    density = np.abs(x) ** 2
    n = density.sum()
    linear = np.vdot(x, coefficients.single_particle @ x)
    return complex(linear + density @ coefficients.interaction @ density / n)


def nonlinear_matrix(
    x: CoherentAmplitudes | np.ndarray, coefficients: CoefficientMatrices
) -> np.ndarray:
    """Diagonal nonlinear matrix ``h^n(x)``; real and symmetric."""
    x = _as_vector(x)
    density = np.abs(x) ** 2
    n = density.sum()
    pair_energy = density @ coefficients.interaction @ density / n**2
    return np.diag(2 * coefficients.interaction @ density / n - pair_energy)


def _global_phase_rate(left: float, right: float, g: float) -> float:
    n = left + right
    return 0.5 * g * (left**2 + right**2) / n**2


def nonlinear_energies(
    x: CoherentAmplitudes | np.ndarray,
    params: ModelParams,
    form: GaugeForm = "gauged",
) -> np.ndarray:
    """``xi`` (ungauged) or ``xi'`` (gauged) per mode.

    Modes in the same well share the same value.
    """
    x1, x2, x3, x4 = _as_vector(x)
    left = abs(x1) ** 2 + abs(x2) ** 2
    right = abs(x3) ** 2 + abs(x4) ** 2
    n = left + right
    g = params.interaction
    xi_left, xi_right = g * left / n, g * right / n
    if form == "ungauged":
        shift = _global_phase_rate(left, right, g)
        xi_left, xi_right = xi_left - shift, xi_right - shift
    elif form != "gauged":
        raise ValueError(f"unknown gauge form {form!r}.")
    return np.array([xi_left, xi_left, xi_right, xi_right])


def gpe_rhs(
    x: CoherentAmplitudes | np.ndarray,
    params: ModelParams,
    form: GaugeForm = "gauged",
) -> np.ndarray:
    x1, x2, x3, x4 = _as_vector(x)
    forward, backward = _phases(params)
    omega, loss = params.raman, params.loss
    xi = nonlinear_energies((x1, x2, x3, x4), params, form)
    linear = np.array(
        [
            omega * x2 + forward * x3,
            omega * x1 + backward * x4,
            omega * x4 + np.conj(forward) * x1 - 1j * loss * x3,
            omega * x3 + np.conj(backward) * x2 - 1j * loss * x4,
        ]
    )
    return -1j * (linear + xi * np.array([x1, x2, x3, x4]))


def general_gpe_rhs(
    x: CoherentAmplitudes | np.ndarray,
    coefficients: CoefficientMatrices,
    form: GaugeForm = "gauged",
) -> np.ndarray:
    """GPE right-hand side for arbitrary coefficient matrices."""
    x = _as_vector(x)
    xi = np.diag(nonlinear_matrix(x, coefficients)).copy()
    if form == "gauged":
        density = np.abs(x) ** 2
        xi += density @ coefficients.interaction @ density / density.sum() ** 2
    elif form != "ungauged":
        raise ValueError(f"unknown gauge form {form!r}.")
    return -1j * (coefficients.single_particle @ x + xi * x)


def evolve_meanfield(
    x0: CoherentAmplitudes | np.ndarray,
    params: ModelParams,
    t_grid: Sequence[float] | np.ndarray,
    form: GaugeForm = "gauged",
    *,
    rtol: float = MF_RTOL,
    atol: float = MF_ATOL,
) -> MeanFieldTrajectory:
    """Integrate the four-mode GPE without renormalizing ``n``.

    In the gauged form ``theta`` is co-integrated as a fifth component.
    """
    x0 = _as_vector(x0)
    if x0.size != 4:
        raise DimensionMismatch(f"expected 4 amplitudes, got {x0.size}.")
    times = check_time_grid(t_grid)
    g = params.interaction

    if form == "ungauged":

        def rhs(t: float, y: np.ndarray) -> np.ndarray:
            return gpe_rhs(y, params, "ungauged")

        amplitudes = solve_on_grid(rhs, x0, times, rtol=rtol, atol=atol)
        return MeanFieldTrajectory(times, amplitudes, form)

    if form != "gauged":
        raise ValueError(f"unknown gauge form {form!r}.")

    def gauged_rhs(t: float, y: np.ndarray) -> np.ndarray:
        x = y[:4]
        left = abs(x[0]) ** 2 + abs(x[1]) ** 2
        right = abs(x[2]) ** 2 + abs(x[3]) ** 2
        dtheta = -_global_phase_rate(left, right, g)
        return np.append(gpe_rhs(x, params, "gauged"), dtheta)

    y0 = np.append(x0, 0.0)
    solution = solve_on_grid(gauged_rhs, y0, times, rtol=rtol, atol=atol)
    return MeanFieldTrajectory(
        times, solution[:, :4], form, theta=solution[:, 4].real
    )


def sigma_rhs(
    sigma: DensityMatrixMF | np.ndarray, coefficients: CoefficientMatrices
) -> np.ndarray:
    """Equation of motion of the two-point function for any ``M``."""
    s = sigma.sigma if isinstance(sigma, DensityMatrixMF) else sigma
    if s.shape != (coefficients.n_modes, coefficients.n_modes):
        raise DimensionMismatch(
            f"sigma of shape {s.shape} for {coefficients.n_modes} modes."
        )
    hh = coefficients.hermitian_part
    ha = coefficients.anti_hermitian_part
    loss_rate = np.sum(ha * s)
    d = coefficients.interaction @ np.diag(s)
    return -1j * (
        s @ (hh + ha).T
        - (hh - ha).T @ s
        - 2 * loss_rate * s
        + 2 * (d[None, :] - d[:, None]) * s
    )


def evolve_sigma(
    sigma0: DensityMatrixMF | np.ndarray,
    coefficients: CoefficientMatrices,
    t_grid: Sequence[float] | np.ndarray,
    *,
    rtol: float = MF_RTOL,
    atol: float = MF_ATOL,
) -> np.ndarray:
    """Integrate ``sigma`` directly; returns shape ``(T, M, M)``."""
    s0 = sigma0.sigma if isinstance(sigma0, DensityMatrixMF) else sigma0
    s0 = np.asarray(s0, dtype=complex)
    m = coefficients.n_modes
    times = check_time_grid(t_grid)

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        return sigma_rhs(y.reshape(m, m), coefficients).reshape(-1)

    flat = solve_on_grid(rhs, s0.reshape(-1), times, rtol=rtol, atol=atol)
    return flat.reshape(times.size, m, m)


def wirtinger_gradient(
    f: Callable[[np.ndarray], complex],
    x: np.ndarray,
    step: float = FD_STEP,
) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference ``(df/dx, df/dx*)`` treating ``x, x*`` as free."""
    x = np.asarray(x, dtype=complex)
    d_dx = np.empty(x.size, dtype=complex)
    d_dxc = np.empty(x.size, dtype=complex)
    for k in range(x.size):
        shift = np.zeros(x.size, dtype=complex)
        shift[k] = step
        d_re = (f(x + shift) - f(x - shift)) / (2 * step)
        d_im = (f(x + 1j * shift) - f(x - 1j * shift)) / (2 * step)
        d_dx[k] = 0.5 * (d_re - 1j * d_im)
        d_dxc[k] = 0.5 * (d_re + 1j * d_im)
    return d_dx, d_dxc


def generalized_force(
    x: CoherentAmplitudes | np.ndarray, params: ModelParams
) -> np.ndarray:
    """``Q_i = -2i dH_a/dx_i`` with ``H_a = x^+ ha x``."""
    x = _as_vector(x)
    ha = build_coefficients(params).anti_hermitian_part
    return -2j * (ha.T @ x.conj())


def conjugate_equation_residual(
    x: CoherentAmplitudes | np.ndarray,
    params: ModelParams,
    step: float = FD_STEP,
) -> float:
    """``max |i dx*/dt + dH/dx - i Q|`` with ``dH/dx`` by differences."""
    x = _as_vector(x)
    d_dx, _ = wirtinger_gradient(
        lambda y: classical_hamiltonian(y, params), x, step
    )
    lhs = 1j * np.conj(gpe_rhs(x, params, "ungauged"))
    rhs = -d_dx + 1j * generalized_force(x, params)
    return float(np.max(np.abs(lhs - rhs)))


def norm_decay_rate(
    x: CoherentAmplitudes | np.ndarray, coefficients: CoefficientMatrices
) -> float:
    """``dn/dt = -2i x^+ ha x``; equals ``-2 beta n_R`` for the junction."""
    x = _as_vector(x)
    rate = -2j * np.vdot(x, coefficients.anti_hermitian_part @ x)
    return float(rate.real)
