"""Coefficient matrices and many-body Hamiltonians of the junction.

Mode order is ``(L up, L down, R up, R down)``. The extended model is

    H = sum_ij hh_ij a_i^+ a_j + sum_ij ha_ij a_i^+ a_j
        + (1/N) sum_ij h_ij a_i^+ a_j^+ a_i a_j

with ``hh`` Hermitian, ``ha`` anti-Hermitian and ``h`` real symmetric.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from loguru import logger as _logger
from scipy import sparse

from sojunction.junction._fockspace import FockBasis
from sojunction.junction._params import ModelParams
from sojunction.utils.error import (
    DimensionMismatch,
    PropertyViolation,
    UnsupportedModes,
)

logger = _logger.bind(name=__name__)

PROPERTY_TOL = 1e-12

# a_m -> a_perm[m]
PARITY = (2, 3, 0, 1)
SPIN_FLIP_SWAP = (3, 2, 1, 0)

LEFT_MODES = (0, 1)
RIGHT_MODES = (2, 3)


@dataclass(frozen=True)
class CoefficientMatrices:
    hermitian_part: np.ndarray
    anti_hermitian_part: np.ndarray
    interaction: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.hermitian_part.shape[0]

    @property
    def single_particle(self) -> np.ndarray:
        return self.hermitian_part + self.anti_hermitian_part

    def pt_single_particle(self, loss: float) -> np.ndarray:
        """``hh + ha + i beta/2``, the balanced gain/loss one-body matrix."""
        shift = 0.5j * loss * np.eye(self.n_modes)
        return self.single_particle + shift


def build_general_coefficients(
    hermitian_part: np.ndarray,
    anti_hermitian_part: np.ndarray,
    interaction: np.ndarray,
) -> CoefficientMatrices:
    hh = np.asarray(hermitian_part, dtype=complex)
    ha = np.asarray(anti_hermitian_part, dtype=complex)
    h = np.asarray(interaction)

    shapes = {hh.shape, ha.shape, h.shape}
    if len(shapes) != 1 or hh.ndim != 2 or hh.shape[0] != hh.shape[1]:
        raise DimensionMismatch(
            f"coefficient matrices must be square and equal in size, "
            f"got {sorted(shapes)}."
        )

    checks = [
        ("(h^h)^dagger = h^h", hh.conj().T - hh),
        ("(h^a)^dagger = -h^a", ha.conj().T + ha),
        ("h^* = h", np.conj(h) - h),
        ("h^T = h", h.T - h),
    ]
    for identity, residual in checks:
        if np.max(np.abs(residual), initial=0.0) > PROPERTY_TOL:
            raise PropertyViolation(
                f"coefficient matrices violate {identity}."
            )

    return CoefficientMatrices(hh, ha, np.real(h).astype(float))


def build_coefficients(params: ModelParams) -> CoefficientMatrices:
    if params.n_modes != 4:
        raise UnsupportedModes(
            f"the junction model has 4 modes, got M={params.n_modes}."
        )

    forward = -params.hopping * np.exp(-1j * np.pi * params.soc)
    backward = -params.hopping * np.exp(1j * np.pi * params.soc)
    raman = params.raman

    hh = np.array(
        [
            [0, raman, forward, 0],
            [raman, 0, 0, backward],
            [np.conj(forward), 0, 0, raman],
            [0, np.conj(backward), raman, 0],
        ],
        dtype=complex,
    )
    ha = np.diag([0, 0, -1j * params.loss, -1j * params.loss])
    block = np.ones((2, 2))
    zeros = np.zeros((2, 2))
    h = 0.5 * params.interaction * np.block(
        [[block, zeros], [zeros, block]]
    )
    return build_general_coefficients(hh, ha, h)


@dataclass(frozen=True)
class ManyBodyMatrix:
    matrix: sparse.csr_matrix
    basis: FockBasis = field(repr=False)
    pt_shifted: bool = False

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def dump(self, path: Path | str) -> Path:
        """Write ``row col re im`` lines after a ``D nnz`` header."""
        path = Path(path)
        coo = self.matrix.tocoo()
        with path.open("w", encoding="utf-8") as handle:
            handle.write(f"{self.dimension} {coo.nnz}\n")
            for row, col, value in zip(coo.row, coo.col, coo.data):
                handle.write(
                    f"{row} {col} {value.real:.17g} {value.imag:.17g}\n"
                )
        return path


def _canonical(matrix: sparse.spmatrix) -> sparse.csr_matrix:
    csr = sparse.csr_matrix(matrix, dtype=complex)
    csr.sum_duplicates()
    csr.eliminate_zeros()
    csr.sort_indices()
    return csr


def one_body_operator(
    coefficients: np.ndarray, basis: FockBasis
) -> sparse.csr_matrix:
    """``sum_ij c_ij a_i^+ a_j`` for an arbitrary M x M matrix ``c``."""
    if coefficients.shape != (basis.n_modes, basis.n_modes):
        raise DimensionMismatch(
            f"{coefficients.shape} coefficients for {basis.n_modes} modes."
        )
    d = len(basis)
    total = sparse.csr_matrix((d, d), dtype=complex)
    for i, j in zip(*np.nonzero(coefficients)):
        total = total + coefficients[i, j] * basis.hop_matrix(i, j)
    return _canonical(total)


def interaction_diagonal(
    interaction: np.ndarray, basis: FockBasis
) -> np.ndarray:
    """Diagonal of ``(1/N) sum_ij h_ij a_i^+ a_j^+ a_i a_j``."""
    if basis.n_particles == 0:
        return np.zeros(len(basis))
    n = basis.states.astype(float)
    pairs = np.einsum("ki,ij,kj->k", n, interaction, n)
    pairs -= n @ np.diag(interaction)
    return pairs / basis.n_particles


def assemble_hamiltonian(
    coefficients: CoefficientMatrices, basis: FockBasis
) -> sparse.csr_matrix:
    if coefficients.n_modes != basis.n_modes:
        raise DimensionMismatch(
            f"{coefficients.n_modes}-mode coefficients on a "
            f"{basis.n_modes}-mode basis."
        )
    hopping = one_body_operator(coefficients.single_particle, basis)
    diagonal = sparse.diags(
        interaction_diagonal(coefficients.interaction, basis)
    )
    return _canonical(hopping + diagonal)


def build_many_body(
    params: ModelParams, basis: FockBasis, pt_shift: bool = False
) -> ManyBodyMatrix:
    if (basis.n_particles, basis.n_modes) != (
        params.n_particles,
        params.n_modes,
    ):
        raise DimensionMismatch(
            f"basis (N={basis.n_particles}, M={basis.n_modes}) does not "
            f"match {params!r}."
        )

    matrix = assemble_hamiltonian(build_coefficients(params), basis)
    if pt_shift:
        number = basis.states.sum(axis=1).astype(float)
        shift = sparse.diags(0.5j * params.loss * number)
        matrix = _canonical(matrix + shift)

    logger.debug(
        f"assembled D={len(basis)} nnz={matrix.nnz} pt_shift={pt_shift}"
    )
    return ManyBodyMatrix(matrix, basis, pt_shift)


def anti_hermitian_operator(hamiltonian: ManyBodyMatrix) -> sparse.csr_matrix:
    """``H_a = (H - H^+)/2``; ``-i beta (n_Rup + n_Rdn)`` for the lossy
    model, shifted by ``i beta N/2`` when ``pt_shifted``."""
    h = hamiltonian.matrix
    return _canonical(0.5 * (h - h.conj().T))


def symmetry_residual(
    hamiltonian: ManyBodyMatrix, permutation: tuple[int, ...]
) -> float:
    """``max |S H S^T - H|`` for the many-body image of a mode permutation."""
    s = hamiltonian.basis.permutation_matrix(permutation)
    residual = sparse.csr_matrix(
        s @ hamiltonian.matrix @ s.T - hamiltonian.matrix
    )
    return float(np.max(np.abs(residual.data), initial=0.0))


def pt_symmetry_residual(hamiltonian: ManyBodyMatrix) -> float:
    """``max |P H^* P - H|``; vanishes for the shifted Hamiltonian."""
    p = hamiltonian.basis.permutation_matrix(PARITY)
    residual = sparse.csr_matrix(
        p @ hamiltonian.matrix.conj() @ p.T - hamiltonian.matrix
    )
    return float(np.max(np.abs(residual.data), initial=0.0))
