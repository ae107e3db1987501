from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class ObservableRecord:
    """Per-particle imbalances at one instant.

    ``mode_populations`` are ``(p_Lup, p_Ldn, p_Rup, p_Rdn)`` and sum to
    one. ``survival`` is the quantum norm or the mean-field ``n``.

    Both spin imbalances are left minus right, ``i_up = p_Lup - p_Rup``
    and ``i_down = p_Ldn - p_Rdn``, with ``i_spin = i_up - i_down``. With
    this sign the spin-flip-and-swap symmetry reads ``i_up = -i_down``, and
    all particles in ``R down`` give ``z = -1, i_up = 0, i_down = -1,
    i_spin = 1``.
    """

    time: float
    survival: float
    z: float
    i_spin: float
    i_up: float
    i_down: float
    mode_populations: tuple[float, float, float, float]

    @classmethod
    def from_populations(
        cls, time: float, survival: float, populations: Sequence[float]
    ) -> "ObservableRecord":
        p_lu, p_ld, p_ru, p_rd = (float(p) for p in populations)
        i_up = p_lu - p_ru
        i_down = p_ld - p_rd
        return cls(
            time=float(time),
            survival=float(survival),
            z=(p_lu + p_ld) - (p_ru + p_rd),
            i_spin=i_up - i_down,
            i_up=i_up,
            i_down=i_down,
            mode_populations=(p_lu, p_ld, p_ru, p_rd),
        )


def series(records: Sequence[ObservableRecord], name: str) -> np.ndarray:
    return np.array([getattr(record, name) for record in records])
