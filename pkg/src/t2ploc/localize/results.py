from __future__ import annotations

from dataclasses import dataclass

from ..core import PixelCoord
from ..pna import Assignment

ORACLE = "oracle"
VLM = "vlm"


@dataclass(frozen=True)
class ModelPrediction:
    assignments: tuple
    point_2d: PixelCoord

    def __post_init__(self):
        object.__setattr__(self, "assignments", tuple(self.assignments))
        object.__setattr__(self, "point_2d", PixelCoord(*self.point_2d))


@dataclass(frozen=True)
class LocalizationResult:
    """One prediction per query; failed predictions keep ``predicted_world=None``."""

    query_id: str
    predicted_world: tuple | None
    predicted_pixel: PixelCoord | None
    assignments: tuple = ()
    method: str = ORACLE
    raw_output: str | None = None
    status: str = "ok"
    error: str | None = None
    attempts: int = 1
    error_m: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "assignments", tuple(self.assignments))
        if self.predicted_pixel is not None:
            object.__setattr__(self, "predicted_pixel", PixelCoord(*self.predicted_pixel))
        if self.predicted_world is not None:
            object.__setattr__(self, "predicted_world", tuple(float(c) for c in self.predicted_world))

    @property
    def ok(self) -> bool:
        return self.status == "ok" and self.predicted_world is not None

    @classmethod
    def failed(cls, query_id, method, error, raw_output=None, attempts=1) -> "LocalizationResult":
        return cls(query_id, None, None, (), method, raw_output, "failed", str(error), attempts)

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "predicted_world": None if self.predicted_world is None else list(self.predicted_world),
            "predicted_pixel": None if self.predicted_pixel is None else list(self.predicted_pixel),
            "assignments": [a.to_dict() for a in self.assignments],
            "method": self.method,
            "raw_output": self.raw_output,
            "status": self.status,
            "error": self.error,
            "attempts": self.attempts,
            "error_m": self.error_m,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LocalizationResult":
        return cls(
            d["query_id"],
            None if d.get("predicted_world") is None else tuple(d["predicted_world"]),
            None if d.get("predicted_pixel") is None else PixelCoord(*d["predicted_pixel"]),
            tuple(Assignment.from_dict(a) for a in d.get("assignments", [])),
            d.get("method", ORACLE),
            d.get("raw_output"),
            d.get("status", "ok"),
            d.get("error"),
            d.get("attempts", 1),
            d.get("error_m"),
        )
