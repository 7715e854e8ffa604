"""Ground-truth partial node assignment (PNA) and the full-assignment variant.

A hint is groundable when the centroid of its object inside the map (A) and
the centroid of the same object inside the pose cell (B) are closer than a
per-kind threshold.  Object-kind instances correspond through their
annotated instance id.  Stuff is re-clustered per window, so a stuff hint
corresponds to the same-label map cluster nearest to B.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .ingest import Kind
from .map_builder import LocalMap, ObjectInstance


@dataclass(frozen=True)
class Assignment:
    object_label: str
    grounded: bool
    matched_node: int | None = None

    def __post_init__(self):
        if not isinstance(self.grounded, bool):
            raise TypeError("grounded must be a bool")
        if self.grounded != (self.matched_node is not None):
            raise ValueError("grounded must be true exactly when matched_node is set")
        if self.matched_node is not None and (
            isinstance(self.matched_node, bool) or not isinstance(self.matched_node, int)
        ):
            raise TypeError("matched_node must be an int or None")

    def to_dict(self) -> dict:
        return {"object_label": self.object_label, "grounded": self.grounded, "matched_node": self.matched_node}

    @classmethod
    def from_dict(cls, d: dict) -> "Assignment":
        return cls(d["object_label"], d["grounded"], d["matched_node"])

    @classmethod
    def ungrounded(cls, label: str) -> "Assignment":
        return cls(label, False, None)


@dataclass(frozen=True)
class TauConfig:
    object: float = 5.0
    stuff: float = 15.0

    def __post_init__(self):
        if not (self.object > 0 and self.stuff > 0):
            raise ValueError("thresholds must be positive")

    def for_kind(self, kind) -> float:
        return self.object if Kind(kind) is Kind.OBJECT else self.stuff


@dataclass(frozen=True)
class HintSource:
    """What PNA needs to know about a hint's object as seen from the pose cell."""

    kind: Kind
    semantic: int
    label: str
    source_id: int
    centroid: tuple  # B: ground centroid of the object's points inside the pose cell

    @classmethod
    def from_object(cls, obj: ObjectInstance) -> "HintSource":
        return cls(obj.kind, obj.semantic, obj.label, obj.source_id, obj.centroid)

    def to_dict(self) -> dict:
        return {
            "kind": Kind(self.kind).value,
            "semantic": self.semantic,
            "label": self.label,
            "source_id": self.source_id,
            "centroid": list(self.centroid),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HintSource":
        return cls(Kind(d["kind"]), d["semantic"], d["label"], d["source_id"], tuple(d["centroid"]))


def _dist(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def _nearest(candidates, point):
    # ties resolve to the lowest node id
    best = None
    for o in candidates:
        d = _dist(o.centroid, point)
        if best is None or d < best[0] or (d == best[0] and o.id < best[1].id):
            best = (d, o)
    return best


def correspondence(source: HintSource, local_map: LocalMap) -> ObjectInstance | None:
    """The map object that represents ``source``, or None when it is absent."""
    kind = Kind(source.kind)
    if kind is Kind.OBJECT:
        for o in local_map.objects:
            if o.kind is Kind.OBJECT and o.source_id == source.source_id:
                return o
        return None
    same = [o for o in local_map.objects if o.kind is Kind.STUFF and o.semantic == source.semantic]
    found = _nearest(same, source.centroid)
    return None if found is None else found[1]


def groundability(source, local_map: LocalMap, tau: TauConfig = TauConfig()) -> Assignment:
    if isinstance(source, ObjectInstance):
        source = HintSource.from_object(source)
    match = correspondence(source, local_map)
    if match is not None and _dist(match.centroid, source.centroid) < tau.for_kind(source.kind):
        return Assignment(source.label, True, match.id)
    return Assignment.ungrounded(source.label)


def _source(h):
    return getattr(h, "source", h)


def label_query(hints, local_map: LocalMap, tau: TauConfig = TauConfig()) -> list[Assignment]:
    """One assignment per hint, in hint order."""
    return [groundability(_source(h), local_map, tau) for h in hints]


def full_assignment_variant(hints, local_map: LocalMap) -> list[Assignment]:
    """Match every hint to the nearest same-label node, ignoring thresholds."""
    out = []
    for h in hints:
        src = _source(h)
        if isinstance(src, ObjectInstance):
            src = HintSource.from_object(src)
        same = [o for o in local_map.objects if o.semantic == src.semantic]
        found = _nearest(same, src.centroid)
        out.append(Assignment.ungrounded(src.label) if found is None else Assignment(src.label, True, found[1].id))
    return out


STRATEGIES = {"partial": label_query, "full": lambda hints, m, tau=None: full_assignment_variant(hints, m)}
