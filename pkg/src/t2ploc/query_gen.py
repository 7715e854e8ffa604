"""Query location sampling and templated text hints."""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .core import DEFAULT_DELTA, ColorPalette, Direction, as_xy, direction_of, rng_for
from .errors import ParseError, SkipQuery
from .ingest import InstancePointCloud, Taxonomy
from .map_builder import DEFAULT_SIDE_M, ClusterParams, LocalMap, ObjectInstance, build_local_map
from .pna import Assignment, HintSource, TauConfig, label_query

TEMPLATE = "The pose is {direction} of {color} {semantic}."
_HINT_RE = re.compile(r"^The pose is (north|south|east|west|on-top) of (\S+) (.+)\.$")

# sub-stream namespaces for rng_for
_STREAM_LOCATIONS = 0
_STREAM_SELECTION = 1


@dataclass(frozen=True)
class Hint:
    semantic: str
    color: str
    direction: Direction
    text: str
    source: HintSource | None = None

    def to_dict(self) -> dict:
        d = {
            "text": self.text,
            "semantic": self.semantic,
            "color": self.color,
            "direction": Direction(self.direction).value,
        }
        if self.source is not None:
            d["source"] = self.source.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Hint":
        src = HintSource.from_dict(d["source"]) if d.get("source") else None
        return cls(d["semantic"], d["color"], Direction(d["direction"]), d["text"], src)

    @classmethod
    def from_text(cls, text: str) -> "Hint":
        direction, color, semantic = parse_hint(text)
        return cls(semantic, color, direction, text)


def format_hint(direction, color: str, semantic: str) -> str:
    return TEMPLATE.format(direction=Direction(direction).value, color=color, semantic=semantic.lower())


def parse_hint(text: str) -> tuple[Direction, str, str]:
    m = _HINT_RE.match(text.strip())
    if m is None:
        raise ParseError(f"not a templated hint: {text!r}")
    return Direction(m.group(1)), m.group(2), m.group(3)


@dataclass(frozen=True)
class Query:
    query_id: str
    map_id: str
    xi: tuple
    hints: tuple
    gt_assignments: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "xi", as_xy(self.xi))
        object.__setattr__(self, "hints", tuple(self.hints))
        object.__setattr__(self, "gt_assignments", tuple(self.gt_assignments))

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "map_id": self.map_id,
            "xi": list(self.xi),
            "hints": [h.to_dict() for h in self.hints],
            "gt_assignments": [a.to_dict() for a in self.gt_assignments],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Query":
        return cls(
            d["query_id"],
            d["map_id"],
            tuple(d["xi"]),
            tuple(Hint.from_dict(h) for h in d["hints"]),
            tuple(Assignment.from_dict(a) for a in d.get("gt_assignments", [])),
        )

    @property
    def text(self) -> str:
        return " ".join(h.text for h in self.hints)


@dataclass(frozen=True)
class QueryConfig:
    taxonomy: Taxonomy
    palette: ColorPalette = field(default_factory=ColorPalette.load)
    side_m: float = DEFAULT_SIDE_M
    n_hints: int = 6
    delta: float = DEFAULT_DELTA
    tau: TauConfig = TauConfig()
    cluster: ClusterParams = ClusterParams()
    queries_per_center: int = 4
    radius: float = 15.0


def sample_query_locations(center, count: int = 4, radius: float = 15.0, rng=None) -> list[tuple]:
    """Uniform perturbations of ``center`` within a square of half-width ``radius``."""
    if count < 1:
        raise ValueError("count must be at least 1")
    if radius < 0:
        raise ValueError("radius must be non-negative")
    rng = rng if rng is not None else np.random.default_rng()
    cx, cy = as_xy(center)
    offsets = rng.uniform(-radius, radius, size=(count, 2)) if radius > 0 else np.zeros((count, 2))
    return [(cx + float(dx), cy + float(dy)) for dx, dy in offsets]


def build_pose_cell(cloud: InstancePointCloud, xi, config: QueryConfig) -> LocalMap:
    cell = build_local_map(cloud, xi, config.side_m, config.taxonomy, config.cluster, map_id="pose-cell")
    if cell.is_empty:
        raise SkipQuery(f"pose cell at {as_xy(xi)} contains no objects")
    return cell


def select_hint_objects(cell: LocalMap, n: int = 6, rng=None) -> list[ObjectInstance]:
    if n < 1:
        raise ValueError("n must be at least 1")
    if len(cell.objects) < n:
        raise SkipQuery(f"pose cell has {len(cell.objects)} objects, {n} needed")
    rng = rng if rng is not None else np.random.default_rng()
    idx = rng.choice(len(cell.objects), size=n, replace=False)
    return [cell.objects[i] for i in idx.tolist()]


def render_hint(obj: ObjectInstance, xi, palette: ColorPalette, delta: float = DEFAULT_DELTA) -> Hint:
    direction = direction_of(as_xy(xi), obj, delta)
    color = palette.nearest(obj.mean_color)
    semantic = obj.label.lower()
    return Hint(semantic, color, direction, format_hint(direction, color, semantic), HintSource.from_object(obj))


def generate_query(
    local_map: LocalMap,
    cloud: InstancePointCloud,
    xi,
    config: QueryConfig,
    rng=None,
    query_id: str = "",
) -> Query:
    cell = build_pose_cell(cloud, xi, config)
    chosen = select_hint_objects(cell, config.n_hints, rng)
    hints = [render_hint(o, xi, config.palette, config.delta) for o in chosen]
    return Query(query_id, local_map.map_id, xi, hints, label_query(hints, local_map, config.tau))


def generate_queries_for_map(
    local_map: LocalMap,
    map_index: int,
    cloud: InstancePointCloud,
    config: QueryConfig,
    seed: int,
) -> list[Query]:
    """All queries around one map center; skipped locations are left out.

    Randomness is drawn from streams addressed by ``(seed, map_index, ...)``,
    so the output does not depend on which worker runs which map.
    """
    locs = sample_query_locations(
        local_map.center,
        config.queries_per_center,
        config.radius,
        rng_for(seed, _STREAM_LOCATIONS, map_index),
    )
    out = []
    for q, xi in enumerate(locs):
        try:
            out.append(
                generate_query(
                    local_map,
                    cloud,
                    xi,
                    config,
                    rng_for(seed, _STREAM_SELECTION, map_index, q),
                    query_id=f"{local_map.map_id}_q{q}",
                )
            )
        except SkipQuery:
            continue
    return out
