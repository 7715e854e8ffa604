"""Bird's-eye-view rasters and scene graphs of local maps."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .core import ColorRgb, GeoReference, PixelCoord, world_to_pixel, world_to_pixel_array
from .errors import EmptyGraphError, ParseError
from .ingest import Kind
from .map_builder import LocalMap

BACKGROUND = ColorRgb(0, 0, 0)


@dataclass(frozen=True, eq=False)
class BevImage:
    pixels: np.ndarray  # (H, W, 3) uint8
    georef: GeoReference
    background: ColorRgb = BACKGROUND
    owner: np.ndarray | None = None  # (H, W) object id per pixel, -1 for background

    def __eq__(self, other):
        if not isinstance(other, BevImage):
            return NotImplemented
        return (
            self.georef == other.georef
            and tuple(self.background) == tuple(other.background)
            and np.array_equal(self.pixels, other.pixels)
        )

    __hash__ = None


def _check_georef(local_map: LocalMap, georef: GeoReference):
    if georef.side_m != local_map.side_m or not np.allclose(georef.center, local_map.center, rtol=0, atol=1e-9):
        raise ValueError("georeference does not match the map window")


def render_bev(local_map: LocalMap, georef: GeoReference | None = None, background=BACKGROUND) -> BevImage:
    """Rasterize the map top-down, one pixel per point.

    Each pixel takes the mean color of one object covering it.  Object-kind
    instances beat Stuff-kind ones; among the same kind the highest point
    wins, then the lowest object id.  The winner is a maximum over a fixed
    key, so the result does not depend on traversal order.
    """
    georef = georef or local_map.georef()
    _check_georef(local_map, georef)
    h, w = georef.height_px, georef.width_px
    pixels = np.empty((h, w, 3), dtype=np.uint8)
    pixels[:] = np.asarray(background, dtype=np.uint8)
    owner = np.full((h, w), -1, dtype=np.int64)
    if local_map.objects:
        xyz = np.concatenate([o.xyz for o in local_map.objects])
        ids = np.concatenate([np.full(len(o), o.id) for o in local_map.objects])
        is_obj = np.concatenate([np.full(len(o), o.kind is Kind.OBJECT) for o in local_map.objects])
        u, v, _ = world_to_pixel_array(xyz, georef)
        flat = v * w + u
        order = np.lexsort((-ids, xyz[:, 2], is_obj, flat))
        flat_sorted = flat[order]
        last = np.r_[flat_sorted[1:] != flat_sorted[:-1], True]
        winners = order[last]
        colors = {o.id: o.mean_color for o in local_map.objects}
        win_ids = ids[winners]
        palette = np.array([colors[i] for i in win_ids.tolist()], dtype=np.uint8).reshape(-1, 3)
        pixels.reshape(-1, 3)[flat[winners]] = palette
        owner.reshape(-1)[flat[winners]] = win_ids
    return BevImage(pixels, georef, ColorRgb(*background), owner)


class BevRenderer(TransformerMixin, BaseEstimator):
    """Estimator wrapper turning a sequence of local maps into BEV images."""

    def __init__(self, size_px=224, background=(0, 0, 0)):
        self.size_px = size_px
        self.background = background

    def fit(self, X=None, y=None):
        if self.size_px < 2:
            raise ValueError("size_px must be at least 2")
        return self

    def transform(self, X):
        return [render_bev(m, m.georef(self.size_px), tuple(self.background)) for m in X]


@dataclass(frozen=True)
class SceneGraphNode:
    id: int
    label: str
    pixel_center: PixelCoord

    def to_dict(self) -> dict:
        return {"node_id": self.id, "label": self.label, "pixel_center": list(self.pixel_center)}

    @classmethod
    def from_dict(cls, d: dict) -> "SceneGraphNode":
        return cls(d["node_id"], d["label"], PixelCoord(*d["pixel_center"]))


@dataclass(frozen=True)
class SceneGraph:
    nodes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("scene graph node ids must be unique")

    def __len__(self):
        return len(self.nodes)

    def node_ids(self) -> set:
        return {n.id for n in self.nodes}

    def to_dict(self) -> dict:
        return {"nodes": [n.to_dict() for n in self.nodes]}

    @classmethod
    def from_dict(cls, d: dict) -> "SceneGraph":
        return cls(tuple(SceneGraphNode.from_dict(n) for n in d["nodes"]))


def build_scene_graph(local_map: LocalMap, georef: GeoReference | None = None) -> SceneGraph:
    if local_map.is_empty:
        raise EmptyGraphError(f"map {local_map.map_id!r} has no objects")
    georef = georef or local_map.georef()
    _check_georef(local_map, georef)
    nodes = [
        SceneGraphNode(o.id, o.label, world_to_pixel(o.centroid, georef)[0])
        for o in sorted(local_map.objects, key=lambda o: o.id)
    ]
    return SceneGraph(tuple(nodes))


_NODE_RE = re.compile(
    r'^\{node_id: (-?\d+), label: ("(?:[^"\\]|\\.)*"), pixel_center: \[(-?\d+), (-?\d+)\]\}$'
)


def serialize_scene_graph(graph: SceneGraph) -> str:
    lines = [
        f"{{node_id: {n.id}, label: {json.dumps(n.label)}, pixel_center: [{n.pixel_center[0]}, {n.pixel_center[1]}]}}"
        for n in sorted(graph.nodes, key=lambda n: n.id)
    ]
    return "\n".join(lines)


def parse_scene_graph(text: str) -> SceneGraph:
    nodes = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        m = _NODE_RE.match(line.strip())
        if m is None:
            raise ParseError(f"malformed scene-graph line: {line!r}", line=lineno)
        nodes.append(SceneGraphNode(int(m.group(1)), json.loads(m.group(2)), PixelCoord(int(m.group(3)), int(m.group(4)))))
    return SceneGraph(tuple(nodes))
