"""Local map construction: center sampling, cropping, stuff clustering and
object retention."""
from __future__ import annotations

import base64
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.cluster import DBSCAN
from sklearn.utils.validation import check_array

from .core import ColorRgb, GeoReference, as_xy, mean_color
from .errors import EmptyObjectError, EmptyTrajectoryError
from .ingest import InstancePointCloud, Kind, Taxonomy, Trajectory

DEFAULT_SIDE_M = 50.0
DEFAULT_MIN_SPACING = 10.0


@dataclass(frozen=True, eq=False)
class ObjectInstance:
    """One discrete object of a local map.

    ``source_id`` is the annotated instance id for Object-kind instances and
    the per-window cluster index for Stuff-kind instances.
    """

    id: int
    semantic: int
    label: str
    kind: Kind
    xyz: np.ndarray
    rgb: np.ndarray
    source_id: int
    mean_color: ColorRgb = field(init=False)
    centroid: tuple = field(init=False)

    def __post_init__(self):
        xyz = np.asarray(self.xyz, dtype=float).reshape(-1, 3)
        rgb = np.asarray(self.rgb, dtype=np.uint8).reshape(-1, 3)
        if len(xyz) == 0:
            raise EmptyObjectError(f"object {self.id} has no points")
        if len(rgb) != len(xyz):
            raise ValueError("object colors and points differ in length")
        xyz.setflags(write=False)
        rgb.setflags(write=False)
        object.__setattr__(self, "xyz", xyz)
        object.__setattr__(self, "rgb", rgb)
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "mean_color", mean_color(rgb))
        c = xyz[:, :2].mean(axis=0)
        object.__setattr__(self, "centroid", (float(c[0]), float(c[1])))

    @property
    def xy(self) -> np.ndarray:
        return self.xyz[:, :2]

    def __len__(self):
        return len(self.xyz)

    def __eq__(self, other):
        if not isinstance(other, ObjectInstance):
            return NotImplemented
        return (
            (self.id, self.semantic, self.label, self.kind, self.source_id)
            == (other.id, other.semantic, other.label, other.kind, other.source_id)
            and np.array_equal(self.xyz, other.xyz)
            and np.array_equal(self.rgb, other.rgb)
        )

    __hash__ = None

    def with_id(self, new_id: int) -> "ObjectInstance":
        return ObjectInstance(new_id, self.semantic, self.label, self.kind, self.xyz, self.rgb, self.source_id)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "semantic": self.semantic,
            "label": self.label,
            "kind": self.kind.value,
            "source_id": self.source_id,
            "n_points": len(self),
            "mean_color": list(self.mean_color),
            "centroid": list(self.centroid),
            "xyz_f64_b64": base64.b64encode(np.ascontiguousarray(self.xyz, dtype="<f8").tobytes()).decode(),
            "rgb_u8_b64": base64.b64encode(np.ascontiguousarray(self.rgb).tobytes()).decode(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectInstance":
        xyz = np.frombuffer(base64.b64decode(d["xyz_f64_b64"]), dtype="<f8").reshape(-1, 3)
        rgb = np.frombuffer(base64.b64decode(d["rgb_u8_b64"]), dtype=np.uint8).reshape(-1, 3)
        return cls(d["id"], d["semantic"], d["label"], d["kind"], xyz.copy(), rgb.copy(), d["source_id"])


@dataclass(frozen=True)
class LocalMap:
    map_id: str
    center: tuple
    side_m: float
    objects: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "center", as_xy(self.center))
        object.__setattr__(self, "objects", tuple(self.objects))
        if not self.side_m > 0:
            raise ValueError("side_m must be positive")
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate object ids in map {self.map_id}")

    @property
    def is_empty(self) -> bool:
        return not self.objects

    def __len__(self):
        return len(self.objects)

    def georef(self, size_px: int = 224) -> GeoReference:
        return GeoReference(self.center, self.side_m, size_px, size_px)

    def object(self, object_id: int) -> ObjectInstance:
        for o in self.objects:
            if o.id == object_id:
                return o
        raise KeyError(object_id)

    def to_dict(self) -> dict:
        return {
            "map_id": self.map_id,
            "center": list(self.center),
            "side_m": self.side_m,
            "objects": [o.to_dict() for o in self.objects],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LocalMap":
        return cls(d["map_id"], tuple(d["center"]), d["side_m"], tuple(ObjectInstance.from_dict(o) for o in d["objects"]))


@dataclass(frozen=True)
class ClusterParams:
    eps: float = 1.5
    min_pts: int = 20
    overrides: dict = field(default_factory=dict)  # semantic id -> (eps, min_pts)

    def __post_init__(self):
        clean = {int(k): (float(v[0]), int(v[1])) for k, v in dict(self.overrides).items()}
        object.__setattr__(self, "overrides", clean)
        for eps, min_pts in [(self.eps, self.min_pts), *clean.values()]:
            if not eps > 0:
                raise ValueError("eps must be positive")
            if min_pts < 1:
                raise ValueError("min_pts must be at least 1")

    def for_label(self, semantic: int) -> tuple[float, int]:
        return self.overrides.get(int(semantic), (self.eps, self.min_pts))


class StuffClusterer(ClusterMixin, BaseEstimator):
    """Density-based clustering of ground-projected points.

    A point is a core point when at least ``min_pts`` points (itself
    included) lie within ``eps``.  Clusters are the density-connected
    components of core points plus the border points they reach; a border
    point reachable from several clusters joins the one containing the
    lowest-index core point.  Cluster labels are numbered by the lowest point
    index they contain; noise gets ``-1``.
    """

    def __init__(self, eps=1.5, min_pts=20):
        self.eps = eps
        self.min_pts = min_pts

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=0)
        if X.shape[1] > 2:
            X = X[:, :2]
        if not self.eps > 0 or self.min_pts < 1:
            raise ValueError("eps must be positive and min_pts >= 1")
        if len(X) == 0:
            self.labels_ = np.empty(0, dtype=np.int64)
            self.n_clusters_ = 0
            return self
        raw = DBSCAN(eps=self.eps, min_samples=self.min_pts).fit(X).labels_
        self.labels_ = _renumber_by_first_index(raw)
        self.n_clusters_ = int(self.labels_.max() + 1) if len(self.labels_) else 0
        return self


def _renumber_by_first_index(labels: np.ndarray) -> np.ndarray:
    out = np.full(len(labels), -1, dtype=np.int64)
    mapping = {}
    for i, lab in enumerate(labels.tolist()):
        if lab < 0:
            continue
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out[i] = mapping[lab]
    return out


def crop_window(points, center, side_m: float) -> np.ndarray:
    """Boolean mask of points inside the closed ``side_m`` square around ``center``."""
    if not side_m > 0:
        raise ValueError("side_m must be positive")
    xyz = points.xyz if isinstance(points, InstancePointCloud) else np.asarray(points, dtype=float)
    xyz = xyz.reshape(len(xyz), -1)
    cx, cy = as_xy(center)
    half = side_m / 2
    return (np.abs(xyz[:, 0] - cx) <= half) & (np.abs(xyz[:, 1] - cy) <= half)


def keep_object(inside: int, total: int) -> bool:
    """Retention rule: at least a third of the instance's points are inside."""
    return total > 0 and 3 * inside >= total


def cluster_stuff(xyz, rgb, semantic: int, label: str, params: ClusterParams) -> list[ObjectInstance]:
    """Split the points of one stuff label into instances; noise is dropped.

    Returned instances carry ``id = source_id = cluster index``.
    """
    xyz = np.asarray(xyz, dtype=float).reshape(-1, 3)
    rgb = np.asarray(rgb).reshape(-1, 3)
    eps, min_pts = params.for_label(semantic)
    labels = StuffClusterer(eps=eps, min_pts=min_pts).fit(xyz[:, :2]).labels_
    out = []
    for k in range(int(labels.max()) + 1 if len(labels) else 0):
        sel = labels == k
        out.append(ObjectInstance(k, int(semantic), label, Kind.STUFF, xyz[sel], rgb[sel], k))
    return out


def filter_objects(candidates, total_counts) -> list[ObjectInstance]:
    """Apply the one-third retention rule to window-cropped candidates.

    ``total_counts`` maps an Object-kind ``source_id`` to the instance's point
    count in the whole loaded cloud.  Stuff-kind candidates pass through.
    """
    kept = []
    for obj in candidates:
        if obj.kind is Kind.STUFF or keep_object(len(obj), total_counts[obj.source_id]):
            kept.append(obj)
    return kept


def build_local_map(
    cloud: InstancePointCloud,
    center,
    side_m: float = DEFAULT_SIDE_M,
    taxonomy: Taxonomy | None = None,
    params: ClusterParams | None = None,
    map_id: str = "",
) -> LocalMap:
    """Build the local map centered at ``center``.

    The result may be empty (``LocalMap.is_empty``); callers decide whether
    to skip it.
    """
    taxonomy = taxonomy or cloud.taxonomy
    if taxonomy is None:
        raise ValueError("a taxonomy is required to split objects from stuff")
    params = params or ClusterParams()
    center = as_xy(center)
    window = cloud.subset(crop_window(cloud, center, side_m))

    object_ids = np.array(taxonomy.ids(Kind.OBJECT), dtype=np.int64)
    is_object = np.isin(window.semantic, object_ids)

    candidates = []
    obj_mask = is_object & (window.instance > 0)
    inst = window.instance[obj_mask]
    if len(inst):
        xyz, rgb, sem = window.xyz[obj_mask], window.rgb[obj_mask], window.semantic[obj_mask]
        order = np.argsort(inst, kind="stable")
        ids, starts = np.unique(inst[order], return_index=True)
        bounds = list(starts[1:]) + [len(order)]
        for iid, a, b in zip(ids.tolist(), starts.tolist(), bounds):
            sel = order[a:b]
            s = int(np.bincount(sem[sel]).argmax())
            candidates.append(ObjectInstance(0, s, taxonomy.name(s), Kind.OBJECT, xyz[sel], rgb[sel], iid))

    stuff_mask = ~is_object
    for s in np.unique(window.semantic[stuff_mask]).tolist():
        sel = stuff_mask & (window.semantic == s)
        candidates.extend(cluster_stuff(window.xyz[sel], window.rgb[sel], s, taxonomy.name(s), params))

    kept = filter_objects(candidates, cloud.instance_counts)
    kept.sort(key=lambda o: (o.kind is not Kind.OBJECT, o.semantic, o.source_id))
    return LocalMap(map_id, center, side_m, tuple(o.with_id(i) for i, o in enumerate(kept)))


def sample_map_centers(traj: Trajectory, min_spacing: float = DEFAULT_MIN_SPACING) -> list[tuple]:
    """Greedy spacing filter over the trajectory, in trajectory order."""
    if not min_spacing > 0:
        raise ValueError("min_spacing must be positive")
    poses = traj.poses if isinstance(traj, Trajectory) else np.asarray(traj, dtype=float).reshape(-1, 2)
    if len(poses) == 0:
        raise EmptyTrajectoryError("trajectory has no poses")
    kept = [poses[0]]
    arr = np.empty((len(poses), 2))
    arr[0] = poses[0]
    n = 1
    for p in poses[1:]:
        d = np.hypot(arr[:n, 0] - p[0], arr[:n, 1] - p[1])
        if d.min() >= min_spacing:
            arr[n] = p
            n += 1
            kept.append(p)
    return [(float(p[0]), float(p[1])) for p in kept]


def grid_centers(bounds, pitch: float) -> list[tuple]:
    """Cell centers of an axis-aligned grid covering ``(xmin, ymin, xmax, ymax)``."""
    if not pitch > 0:
        raise ValueError("pitch must be positive")
    xmin, ymin, xmax, ymax = bounds
    nx = max(1, math.ceil((xmax - xmin) / pitch))
    ny = max(1, math.ceil((ymax - ymin) / pitch))
    return [(xmin + (i + 0.5) * pitch, ymin + (j + 0.5) * pitch) for j in range(ny) for i in range(nx)]


def grid_sample_centers(
    cloud: InstancePointCloud,
    pitch: float,
    min_objects: float = 6,
    side_m: float = DEFAULT_SIDE_M,
    taxonomy: Taxonomy | None = None,
    params: ClusterParams | None = None,
) -> list[tuple]:
    """Grid centers whose local map holds strictly more than ``min_objects`` objects."""
    if not pitch > 0:
        raise ValueError("pitch must be positive")
    bounds = cloud.bounds()
    if bounds is None or math.isinf(min_objects):
        return []
    return [
        c
        for c in grid_centers(bounds, pitch)
        if len(build_local_map(cloud, c, side_m, taxonomy, params)) > min_objects
    ]
