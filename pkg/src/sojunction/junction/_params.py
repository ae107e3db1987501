from __future__ import annotations

import json
import math
from typing import Any, Mapping

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    field_validator,
)

from sojunction.utils.error import ParameterError


class ModelParams(BaseModel):
    """Physical parameters of the junction in units where ``J = 1``.

    ``interaction`` is the total strength ``g``; the per-pair factors
    ``g/2N`` and ``g/N`` are applied when the many-body matrix is built.
    """

    hopping: float = Field(default=1.0, alias="J")
    raman: float = Field(default=1.0, alias="Omega")
    soc: float = Field(default=0.0, alias="gamma")
    interaction: float = Field(default=0.0, alias="g")
    loss: float = Field(default=0.0, alias="beta")
    n_particles: int = Field(default=1, alias="N")
    n_modes: int = Field(default=4, alias="M")

    model_config = ConfigDict(
        frozen=True,
        populate_by_name=True,
        extra="forbid",
    )

    @field_validator("hopping", "raman", "soc", "interaction")
    @classmethod
    def _validate_finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ParameterError(f"{value} is not a finite number.")
        return value

    @field_validator("loss")
    @classmethod
    def _validate_loss(cls, value: float) -> float:
        if not math.isfinite(value) or value < 0:
            raise ParameterError(
                f"loss must be a finite non-negative number, got {value}."
            )
        return value

    @field_validator("n_particles", "n_modes")
    @classmethod
    def _validate_counts(cls, value: int) -> int:
        if value < 1:
            raise ParameterError(f"counts must be at least 1, got {value}.")
        return value

    @property
    def energy_scale(self) -> float:
        return max(
            abs(self.hopping), abs(self.raman), abs(self.interaction), 1.0
        )

    def replace(self, **changes: Any) -> "ModelParams":
        """Copy with some fields changed; the result is re-validated."""
        payload = self.model_dump(by_alias=True)
        for name, value in changes.items():
            info = type(self).model_fields.get(name)
            payload[info.alias if info and info.alias else name] = value
        return ModelParams.from_dict(payload)

    def __repr__(self) -> str:
        return (
            f"ModelParams(J={self.hopping!r}, Omega={self.raman!r}, "
            f"gamma={self.soc!r}, g={self.interaction!r}, "
            f"beta={self.loss!r}, N={self.n_particles!r}, "
            f"M={self.n_modes!r})"
        )

    def to_dict(self) -> dict[str, Any]:
        return self.model_dump(by_alias=True)

    def to_json(self, *, indent: int | None = None) -> str:
        return self.model_dump_json(indent=indent, by_alias=True)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ModelParams":
        return cls.model_validate(data)

    @classmethod
    def from_json(cls, raw: str) -> "ModelParams":
        payload = json.loads(raw)
        if not isinstance(payload, Mapping):
            raise TypeError("JSON payload must decode to a mapping.")
        return cls.from_dict(payload)
