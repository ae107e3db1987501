from __future__ import annotations

from typing import Callable

import numpy as np
import scipy.integrate
from loguru import logger as _logger

from sojunction.utils.error import IntegrationError

logger = _logger.bind(name=__name__)

RightHandSide = Callable[[float, np.ndarray], np.ndarray]


def check_time_grid(t_grid: np.ndarray | list[float]) -> np.ndarray:
    times = np.asarray(t_grid, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("t_grid must be a non-empty 1-d sequence.")
    if not np.all(np.isfinite(times)):
        raise ValueError("t_grid must be finite.")
    if np.any(np.diff(times) <= 0):
        raise ValueError("t_grid must be strictly increasing.")
    return times


def solve_on_grid(
    rhs: RightHandSide,
    y0: np.ndarray,
    times: np.ndarray,
    *,
    rtol: float,
    atol: float,
    method: str = "DOP853",
) -> np.ndarray:
    """Integrate ``dy/dt = rhs(t, y)`` and sample at ``times``.

    Returns an array of shape ``(len(times), y0.size)``; the first row is
    ``y0`` itself.
    """
    y0 = np.asarray(y0, dtype=complex)
    if times.size == 1:
        return y0[None, :].copy()

    solution = scipy.integrate.solve_ivp(
        rhs,
        (times[0], times[-1]),
        y0,
        method=method,
        t_eval=times,
        rtol=rtol,
        atol=atol,
    )
    if solution.status == -1:
        stopped = solution.t[-1] if solution.t.size else times[0]
        raise IntegrationError(
            f"{method} stopped at t={stopped:.6g}: {solution.message}"
        )

    logger.debug(
        f"{method} on [{times[0]:g}, {times[-1]:g}] dim={y0.size} "
        f"nfev={solution.nfev}"
    )
    return solution.y.T
