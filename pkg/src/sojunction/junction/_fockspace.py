"""Occupation-number basis of N bosons in M modes.

States are ordered lexicographically descending, so ``(N, 0, ..., 0)`` has
index 0 and ``(0, ..., 0, N)`` has index ``D - 1``. Positions are obtained
by combinatorial ranking instead of a lookup table.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, sqrt
from typing import Iterator, Sequence

import numpy as np
from loguru import logger as _logger
from scipy import sparse

from sojunction.utils.error import (
    CapacityError,
    DimensionMismatch,
    StateNotFound,
)

logger = _logger.bind(name=__name__)

DEFAULT_MAX_DIMENSION = 200_000

OccupationState = tuple[int, ...]


def basis_dimension(n_particles: int, n_modes: int) -> int:
    return comb(n_particles + n_modes - 1, n_modes - 1)


def _compositions(n_particles: int, n_modes: int) -> Iterator[OccupationState]:
    if n_modes == 1:
        yield (n_particles,)
        return
    for first in range(n_particles, -1, -1):
        for rest in _compositions(n_particles - first, n_modes - 1):
            yield (first, *rest)


@dataclass(frozen=True)
class FockBasis:
    """Canonically ordered Fock basis for a fixed particle number."""

    n_particles: int
    n_modes: int
    states: np.ndarray = field(repr=False)
    _binomials: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def dimension(self) -> int:
        return len(self)

    def state(self, k: int) -> OccupationState:
        return tuple(int(n) for n in self.states[k])

    def rank(self, occupations: np.ndarray) -> np.ndarray:
        """Vectorized position lookup for rows of occupation vectors.

        Rows are assumed valid (length M, non-negative, summing to N).
        """
        occupations = np.atleast_2d(occupations)
        remaining = self.n_particles - np.cumsum(occupations, axis=1)
        remaining = np.hstack(
            [
                np.full((occupations.shape[0], 1), self.n_particles),
                remaining[:, :-1],
            ]
        )
        index = np.zeros(occupations.shape[0], dtype=np.int64)
        for i in range(self.n_modes - 1):
            k = self.n_modes - i - 1
            top = remaining[:, i] - occupations[:, i] - 1 + k
            index += np.where(top >= k, self._binomials[top.clip(0), k], 0)
        return index

    def hop_matrix(self, i: int, j: int) -> sparse.csr_matrix:
        """Matrix of ``a_i^dagger a_j`` in this basis."""
        d = len(self)
        if i == j:
            return sparse.diags(
                self.states[:, i].astype(float), format="csr"
            )
        cols = np.flatnonzero(self.states[:, j] > 0)
        moved = self.states[cols].copy()
        values = np.sqrt((moved[:, i] + 1.0) * moved[:, j])
        moved[:, i] += 1
        moved[:, j] -= 1
        rows = self.rank(moved)
        return sparse.csr_matrix((values, (rows, cols)), shape=(d, d))

    def permutation_matrix(
        self, permutation: Sequence[int]
    ) -> sparse.csr_matrix:
        """Many-body image of the single-particle map ``a_m -> a_perm[m]``."""
        if sorted(permutation) != list(range(self.n_modes)):
            raise DimensionMismatch(
                f"{list(permutation)} is not a permutation of "
                f"{self.n_modes} modes."
            )
        permuted = np.empty_like(self.states)
        permuted[:, list(permutation)] = self.states
        rows = self.rank(permuted)
        cols = np.arange(len(self))
        d = len(self)
        return sparse.csr_matrix(
            (np.ones(d), (rows, cols)), shape=(d, d)
        )


def enumerate_basis(
    n_particles: int,
    n_modes: int,
    *,
    max_dimension: int = DEFAULT_MAX_DIMENSION,
) -> FockBasis:
    if n_particles < 0:
        raise ValueError("n_particles must be non-negative.")
    if n_modes < 1:
        raise ValueError("n_modes must be at least 1.")

    dimension = basis_dimension(n_particles, n_modes)
    if dimension > max_dimension:
        raise CapacityError(
            f"Basis for N={n_particles}, M={n_modes} has {dimension} states, "
            f"above the guard of {max_dimension}."
        )

    states = np.array(
        list(_compositions(n_particles, n_modes)), dtype=np.int64
    ).reshape(dimension, n_modes)
    top = n_particles + n_modes
    binomials = np.array(
        [[comb(n, k) for k in range(n_modes + 1)] for n in range(top + 1)],
        dtype=np.int64,
    )
    logger.debug(
        f"Fock basis N={n_particles} M={n_modes}: {dimension} states"
    )
    return FockBasis(n_particles, n_modes, states, binomials)


def index_of(basis: FockBasis, state: Sequence[int]) -> int:
    occupations = np.asarray(state, dtype=np.int64)
    if occupations.shape != (basis.n_modes,):
        raise StateNotFound(
            f"{tuple(state)} does not have {basis.n_modes} modes."
        )
    if (occupations < 0).any():
        raise StateNotFound(f"{tuple(state)} has negative occupations.")
    if occupations.sum() != basis.n_particles:
        raise StateNotFound(
            f"{tuple(state)} does not hold {basis.n_particles} particles."
        )
    return int(basis.rank(occupations)[0])


def hop_element(
    state: Sequence[int], i: int, j: int
) -> tuple[float, OccupationState | None]:
    """Action of ``a_i^dagger a_j`` on a single occupation vector."""
    occupations = list(state)
    if not (0 <= i < len(occupations) and 0 <= j < len(occupations)):
        raise IndexError(f"mode indices ({i}, {j}) out of range.")
    if i == j:
        return float(occupations[i]), tuple(occupations)
    if occupations[j] == 0:
        return 0.0, None
    coefficient = sqrt((occupations[i] + 1) * occupations[j])
    occupations[i] += 1
    occupations[j] -= 1
    return coefficient, tuple(occupations)
