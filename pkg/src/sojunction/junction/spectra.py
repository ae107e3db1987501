"""Complex spectra, PT-breaking detection and threshold search."""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
from loguru import logger as _logger

from sojunction.junction._fockspace import FockBasis
from sojunction.junction._params import ModelParams
from sojunction.junction.model import (
    ManyBodyMatrix,
    build_coefficients,
    build_many_body,
)
from sojunction.utils.error import (
    DimensionMismatch,
    EigensolverError,
    ThresholdBracketError,
)

logger = _logger.bind(name=__name__)

RESIDUAL_TOL = 1e-8
DEFECTIVE_CONDITION = 1e8
DEGENERACY_REL_TOL = 1e-8
DEGENERACY_FLOOR = 1e-12


@dataclass(frozen=True)
class SpectrumResult:
    """Eigenpairs sorted by descending imaginary part."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)
    sort_order: np.ndarray = field(repr=False)
    degeneracy_groups: tuple[tuple[int, ...], ...] = field(repr=False)
    degeneracy_tol: float
    condition_number: float

    def __len__(self) -> int:
        return self.eigenvalues.size

    @property
    def is_defective(self) -> bool:
        return self.condition_number > DEFECTIVE_CONDITION

    def steady_state_indices(
        self, imag_tol: float | None = None
    ) -> np.ndarray:
        """Indices whose imaginary part is within ``imag_tol`` of the top."""
        tol = self.degeneracy_tol if imag_tol is None else imag_tol
        top = self.eigenvalues.imag[0]
        return np.flatnonzero(self.eigenvalues.imag >= top - tol)


def matrix_fingerprint(dense: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(dense).tobytes()).hexdigest()[
        :16
    ]


def _as_dense(matrix: ManyBodyMatrix | np.ndarray) -> np.ndarray:
    if isinstance(matrix, ManyBodyMatrix):
        return matrix.to_dense()
    dense = np.asarray(matrix, dtype=complex)
    if dense.ndim != 2 or dense.shape[0] != dense.shape[1]:
        raise DimensionMismatch(
            f"expected a square matrix, got {dense.shape}."
        )
    return dense


def _degeneracy_groups(
    imag_parts: np.ndarray, tol: float
) -> tuple[tuple[int, ...], ...]:
    if imag_parts.size == 0:
        return ()
    groups: list[list[int]] = [[0]]
    for k in range(1, imag_parts.size):
        if imag_parts[k - 1] - imag_parts[k] <= tol:
            groups[-1].append(k)
        else:
            groups.append([k])
    return tuple(tuple(group) for group in groups)


def eigendecompose(
    matrix: ManyBodyMatrix | np.ndarray,
    *,
    degeneracy_rel_tol: float = DEGENERACY_REL_TOL,
) -> SpectrumResult:
    dense = _as_dense(matrix)
    started = time.perf_counter()
    try:
        values, vectors = scipy.linalg.eig(dense)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverError(
            f"eigensolver failed on matrix {matrix_fingerprint(dense)}: {exc}"
        ) from exc

    scale = max(np.linalg.norm(dense, 1), np.finfo(float).tiny)
    residuals = np.linalg.norm(dense @ vectors - vectors * values, axis=0)
    residuals /= np.linalg.norm(vectors, axis=0)
    worst = float(np.max(residuals, initial=0.0))
    if worst > RESIDUAL_TOL * scale:
        raise EigensolverError(
            f"eigenpair residual {worst:.3e} exceeds {RESIDUAL_TOL:g}*||H|| "
            f"on matrix {matrix_fingerprint(dense)}."
        )

    condition = float(np.linalg.cond(vectors)) if values.size else 1.0
    if condition > DEFECTIVE_CONDITION:
        logger.warning(
            f"eigenvector condition number {condition:.3e} on matrix "
            f"{matrix_fingerprint(dense)}; possible exceptional point."
        )

    order = np.argsort(-values.imag, kind="stable")
    values = values[order]
    vectors = vectors[:, order]
    top = float(np.max(np.abs(values.imag), initial=0.0))
    tol = max(degeneracy_rel_tol * top, DEGENERACY_FLOOR)
    logger.debug(
        f"eigendecompose D={values.size} in "
        f"{time.perf_counter() - started:.2f}s cond={condition:.3e}"
    )
    return SpectrumResult(
        eigenvalues=values,
        eigenvectors=vectors,
        sort_order=order,
        degeneracy_groups=_degeneracy_groups(values.imag, tol),
        degeneracy_tol=tol,
        condition_number=condition,
    )


def default_imag_tol(params: ModelParams) -> float:
    return 1e-9 * params.n_particles * params.energy_scale


def pt_eigenvalues(params: ModelParams, basis: FockBasis) -> np.ndarray:
    hamiltonian = build_many_body(params, basis, pt_shift=True)
    dense = hamiltonian.to_dense()
    try:
        return scipy.linalg.eigvals(dense)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverError(
            f"eigensolver failed on matrix {matrix_fingerprint(dense)}: {exc}"
        ) from exc


def is_pt_broken(
    params: ModelParams,
    basis: FockBasis,
    imag_tol: float | None = None,
) -> bool:
    tol = default_imag_tol(params) if imag_tol is None else imag_tol
    if tol <= 0:
        raise ValueError("imag_tol must be positive.")
    values = pt_eigenvalues(params, basis)
    return bool(np.max(np.abs(values.imag), initial=0.0) > tol)


@dataclass(frozen=True)
class ThresholdResult:
    beta_c: float
    bracket: tuple[float, float]
    broken_at_min: bool


def breaking_threshold(
    params: ModelParams,
    basis: FockBasis,
    beta_max: float,
    tol: float,
    imag_tol: float | None = None,
) -> ThresholdResult:
    """Bisect the loss at which the shifted spectrum turns complex.

    The loss stored in ``params`` is ignored; the scan starts at
    ``beta = tol`` so that a zero threshold is reported without probing
    ``beta = 0``.
    """
    if beta_max <= 0 or tol <= 0:
        raise ValueError("beta_max and tol must be positive.")

    def broken(beta: float) -> bool:
        return is_pt_broken(params.replace(loss=beta), basis, imag_tol)

    lo, hi = tol, beta_max
    if broken(lo):
        return ThresholdResult(0.0, (0.0, lo), True)
    if not broken(hi):
        raise ThresholdBracketError(
            f"beta_c > beta_max={beta_max:g} for {params!r}."
        )

    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if broken(mid):
            hi = mid
        else:
            lo = mid
    logger.debug(f"beta_c in [{lo:.6g}, {hi:.6g}] for {params!r}")
    return ThresholdResult(0.5 * (lo + hi), (lo, hi), False)


def single_particle_phase_diagram(
    gammas: Sequence[float],
    betas: Sequence[float],
    raman: float = 1.0,
    hopping: float = 1.0,
) -> np.ndarray:
    """Max imaginary part of ``hh + ha + i beta/2`` on a (gamma, beta) grid."""
    gammas = np.asarray(gammas, dtype=float)
    betas = np.asarray(betas, dtype=float)
    if gammas.size == 0 or betas.size == 0:
        raise ValueError("phase diagram grids must be non-empty.")

    diagram = np.empty((gammas.size, betas.size))
    for a, gamma in enumerate(gammas):
        for b, beta in enumerate(betas):
            params = ModelParams(
                hopping=hopping, raman=raman, soc=gamma, loss=beta
            )
            one_body = build_coefficients(params).pt_single_particle(beta)
            diagram[a, b] = np.max(scipy.linalg.eigvals(one_body).imag)
    return diagram
