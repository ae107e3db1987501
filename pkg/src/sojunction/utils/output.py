"""CSV and JSON emitters; every file records the resolved configuration."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import pandas as pd
from loguru import logger as _logger
from pydantic import BaseModel

from sojunction.junction._observables import ObservableRecord
from sojunction.junction.meanfield import MeanFieldTrajectory

logger = _logger.bind(name=__name__)

FORMAT_VERSION = "so-junction/1"
FLOAT_FORMAT = "%.17g"


def config_payload(config: BaseModel | Mapping[str, Any]) -> dict[str, Any]:
    if isinstance(config, BaseModel):
        return config.model_dump(mode="json", by_alias=True)
    return dict(config)


def write_csv(
    frame: pd.DataFrame,
    path: Path | str,
    config: BaseModel | Mapping[str, Any],
) -> Path:
    """Write ``frame`` after two comment lines (format version, config)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = json.dumps(config_payload(config), sort_keys=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        handle.write(f"# format-version: {FORMAT_VERSION}\n")
        handle.write(f"# config: {header}\n")
        frame.to_csv(
            handle,
            index=False,
            float_format=FLOAT_FORMAT,
            lineterminator="\n",
        )
    logger.info(f"wrote {path} ({len(frame)} rows)")
    return path


def read_csv(path: Path | str) -> pd.DataFrame:
    return pd.read_csv(path, comment="#", float_precision="round_trip")


def _plain(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, Mapping):
        return {key: _plain(v) for key, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def write_json(
    payload: Mapping[str, Any],
    path: Path | str,
    config: BaseModel | Mapping[str, Any],
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {
        "format_version": FORMAT_VERSION,
        "config": config_payload(config),
        **_plain(dict(payload)),
    }
    path.write_text(
        json.dumps(document, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    logger.info(f"wrote {path}")
    return path


def records_frame(
    records: Sequence[ObservableRecord], n_particles: int = 1
) -> pd.DataFrame:
    """Trajectory table; ``*_total`` columns are not divided by N."""
    populations = np.array([r.mode_populations for r in records])
    frame = pd.DataFrame(
        {
            "t": [r.time for r in records],
            "survival": [r.survival for r in records],
            "z": [r.z for r in records],
            "i_spin": [r.i_spin for r in records],
            "i_up": [r.i_up for r in records],
            "i_down": [r.i_down for r in records],
            "pL_up": populations[:, 0],
            "pL_dn": populations[:, 1],
            "pR_up": populations[:, 2],
            "pR_dn": populations[:, 3],
        }
    )
    frame["z_total"] = n_particles * frame["z"]
    frame["i_spin_total"] = n_particles * frame["i_spin"]
    return frame


def meanfield_frame(trajectory: MeanFieldTrajectory) -> pd.DataFrame:
    records = trajectory.records()
    columns: dict[str, Any] = {
        "t": trajectory.times,
        "n": trajectory.norms,
    }
    for k in range(trajectory.amplitudes.shape[1]):
        columns[f"re_x{k + 1}"] = trajectory.amplitudes[:, k].real
    for k in range(trajectory.amplitudes.shape[1]):
        columns[f"im_x{k + 1}"] = trajectory.amplitudes[:, k].imag
    for name in ("z", "i_spin", "i_up", "i_down"):
        columns[name] = [getattr(r, name) for r in records]
    if trajectory.theta is not None:
        columns["theta"] = trajectory.theta
    return pd.DataFrame(columns)
