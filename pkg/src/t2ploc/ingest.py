"""Readers and writers for raw inputs: point clouds, trajectories, taxonomies.

Point clouds come in two interchangeable encodings:

* binary (``.t2pc``): ``b"T2PC"`` magic, little-endian ``uint64`` point count,
  then one packed 21-byte record per point: ``f32 x, y, z; u8 r, g, b;
  u16 semantic; u32 instance``.
* text: one point per line, eight whitespace-separated columns
  ``x y z r g b semantic instance``; ``#`` starts a comment.

The loader sniffs the magic, so either file can be passed anywhere a cloud
path is expected.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, EmptyTrajectoryError, ParseError, TaxonomyError

MAGIC = b"T2PC"
POINT_DTYPE = np.dtype(
    [
        ("x", "<f4"), ("y", "<f4"), ("z", "<f4"),
        ("r", "u1"), ("g", "u1"), ("b", "u1"),
        ("semantic", "<u2"), ("instance", "<u4"),
    ]
)
N_COLUMNS = 8


class Kind(str, Enum):
    OBJECT = "object"
    STUFF = "stuff"


@dataclass(frozen=True)
class Taxonomy:
    labels: dict  # id -> (name, Kind)

    def __post_init__(self):
        clean = {}
        for k, (name, kind) in self.labels.items():
            clean[int(k)] = (str(name), Kind(kind))
        object.__setattr__(self, "labels", clean)

    def __contains__(self, label_id):
        return int(label_id) in self.labels

    def name(self, label_id) -> str:
        return self._get(label_id)[0]

    def kind(self, label_id) -> Kind:
        return self._get(label_id)[1]

    def _get(self, label_id):
        try:
            return self.labels[int(label_id)]
        except KeyError:
            raise TaxonomyError(f"semantic id {label_id} is not in the taxonomy") from None

    def ids(self, kind: Kind | None = None) -> list[int]:
        return sorted(i for i, (_, k) in self.labels.items() if kind is None or k == kind)

    def to_dict(self) -> dict:
        return {
            "labels": [
                {"id": i, "name": n, "kind": k.value} for i, (n, k) in sorted(self.labels.items())
            ]
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Taxonomy":
        entries = d["labels"] if isinstance(d, dict) and "labels" in d else d
        labels = {}
        for e in entries:
            i = int(e["id"])
            if i in labels:
                raise ConfigError(f"duplicate taxonomy id {i}", field="taxonomy")
            try:
                labels[i] = (e["name"], Kind(str(e["kind"]).lower()))
            except ValueError:
                raise ConfigError(
                    f"taxonomy id {i}: kind must be 'object' or 'stuff', got {e['kind']!r}",
                    field="taxonomy",
                ) from None
        return cls(labels)

    @classmethod
    def load(cls, path=None) -> "Taxonomy":
        if path is None:
            text = resources.files("t2ploc.data").joinpath("taxonomy.json").read_text()
        else:
            try:
                text = Path(path).read_text()
            except FileNotFoundError as exc:
                raise ConfigError(f"taxonomy file not found: {path}", field="taxonomy") from exc
        return cls.from_dict(json.loads(text))


@dataclass(eq=False)
class InstancePointCloud:
    """Columnar instance-annotated point cloud.

    ``instance == 0`` marks points with no annotated instance (typically stuff
    that is clustered later).
    """

    xyz: np.ndarray
    rgb: np.ndarray
    semantic: np.ndarray
    instance: np.ndarray
    taxonomy: Taxonomy | None = field(default=None, repr=False)

    def __post_init__(self):
        self.xyz = np.ascontiguousarray(self.xyz, dtype=np.float64).reshape(-1, 3)
        self.rgb = np.ascontiguousarray(self.rgb, dtype=np.uint8).reshape(-1, 3)
        self.semantic = np.ascontiguousarray(self.semantic, dtype=np.int64).reshape(-1)
        self.instance = np.ascontiguousarray(self.instance, dtype=np.int64).reshape(-1)
        n = len(self.xyz)
        if not (len(self.rgb) == len(self.semantic) == len(self.instance) == n):
            raise ValueError("point cloud columns have different lengths")
        if not np.isfinite(self.xyz).all():
            raise ValueError("point cloud contains non-finite coordinates")
        if (self.instance < 0).any():
            raise ValueError("instance ids must be >= 0")
        if self.taxonomy is not None:
            check_labels(self.semantic, self.taxonomy)

    def __len__(self):
        return len(self.xyz)

    @cached_property
    def instance_counts(self) -> dict:
        """Total point count per annotated instance id (0 excluded)."""
        ids, counts = np.unique(self.instance[self.instance > 0], return_counts=True)
        return dict(zip(ids.tolist(), counts.tolist()))

    def bounds(self):
        """``(xmin, ymin, xmax, ymax)`` of the ground projection, or None if empty."""
        if len(self) == 0:
            return None
        lo = self.xyz[:, :2].min(axis=0)
        hi = self.xyz[:, :2].max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    def subset(self, mask) -> "InstancePointCloud":
        return InstancePointCloud(
            self.xyz[mask], self.rgb[mask], self.semantic[mask], self.instance[mask], self.taxonomy
        )

    @classmethod
    def concatenate(cls, parts, taxonomy=None) -> "InstancePointCloud":
        parts = list(parts)
        if not parts:
            return cls(np.empty((0, 3)), np.empty((0, 3)), np.empty(0), np.empty(0), taxonomy)
        return cls(
            np.concatenate([p.xyz for p in parts]),
            np.concatenate([p.rgb for p in parts]),
            np.concatenate([p.semantic for p in parts]),
            np.concatenate([p.instance for p in parts]),
            taxonomy,
        )


def check_labels(semantic: np.ndarray, taxonomy: Taxonomy) -> None:
    unknown = sorted(set(np.unique(semantic).tolist()) - set(taxonomy.labels))
    if unknown:
        raise TaxonomyError(f"semantic id {unknown[0]} is not in the taxonomy")


def load_point_cloud(path, taxonomy: Taxonomy | None = None) -> InstancePointCloud:
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(len(MAGIC))
    if head == MAGIC:
        cloud = _read_binary(path)
    else:
        cloud = _read_text(path)
    if taxonomy is not None:
        check_labels(cloud.semantic, taxonomy)
        cloud.taxonomy = taxonomy
    return cloud


def _read_binary(path: Path) -> InstancePointCloud:
    raw = path.read_bytes()
    header = len(MAGIC) + 8
    if len(raw) < header:
        raise ParseError("truncated header", path=path)
    count = int(np.frombuffer(raw, dtype="<u8", count=1, offset=len(MAGIC))[0])
    expected = header + count * POINT_DTYPE.itemsize
    if len(raw) != expected:
        raise ParseError(
            f"header announces {count} points ({expected} bytes) but file has {len(raw)} bytes",
            path=path,
        )
    rec = np.frombuffer(raw, dtype=POINT_DTYPE, count=count, offset=header)
    return InstancePointCloud(
        np.stack([rec["x"], rec["y"], rec["z"]], axis=1),
        np.stack([rec["r"], rec["g"], rec["b"]], axis=1),
        rec["semantic"],
        rec["instance"],
    )


def _read_text(path: Path) -> InstancePointCloud:
    xyz, rgb, sem, inst = [], [], [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            tokens = body.split()
            if len(tokens) != N_COLUMNS:
                raise ParseError(
                    f"expected {N_COLUMNS} columns, found {len(tokens)}", line=lineno, path=path
                )
            try:
                p = [float(t) for t in tokens[:3]]
                c = [int(t) for t in tokens[3:6]]
                s, i = int(tokens[6]), int(tokens[7])
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno, path=path) from None
            if not all(math.isfinite(v) for v in p):
                raise ParseError("non-finite coordinate", line=lineno, path=path)
            if any(v < 0 or v > 255 for v in c):
                raise ParseError("color channel outside [0, 255]", line=lineno, path=path)
            if s < 0 or i < 0:
                raise ParseError("negative label or instance id", line=lineno, path=path)
            xyz.append(p)
            rgb.append(c)
            sem.append(s)
            inst.append(i)
    return InstancePointCloud(
        np.array(xyz, dtype=float).reshape(-1, 3),
        np.array(rgb, dtype=np.uint8).reshape(-1, 3),
        np.array(sem, dtype=np.int64),
        np.array(inst, dtype=np.int64),
    )


def write_point_cloud(cloud: InstancePointCloud, path, binary: bool | None = None) -> None:
    """Write ``cloud``; binary unless the suffix is ``.txt`` (or ``binary=False``)."""
    path = Path(path)
    if binary is None:
        binary = path.suffix != ".txt"
    if binary:
        rec = np.empty(len(cloud), dtype=POINT_DTYPE)
        for i, k in enumerate("xyz"):
            rec[k] = cloud.xyz[:, i]
        for i, k in enumerate("rgb"):
            rec[k] = cloud.rgb[:, i]
        rec["semantic"] = cloud.semantic
        rec["instance"] = cloud.instance
        path.write_bytes(MAGIC + np.array([len(cloud)], dtype="<u8").tobytes() + rec.tobytes())
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# x y z r g b semantic instance\n")
        for p, c, s, i in zip(cloud.xyz, cloud.rgb, cloud.semantic, cloud.instance):
            fh.write(f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r} {c[0]} {c[1]} {c[2]} {s} {i}\n")


@dataclass(frozen=True)
class Trajectory:
    poses: np.ndarray  # (N, 2)

    def __post_init__(self):
        arr = np.asarray(self.poses, dtype=float).reshape(-1, 2)
        if len(arr) == 0:
            raise EmptyTrajectoryError("trajectory has no poses")
        if not np.isfinite(arr).all():
            raise ValueError("trajectory contains non-finite poses")
        object.__setattr__(self, "poses", arr)

    def __len__(self):
        return len(self.poses)


def load_trajectory(path) -> Trajectory:
    poses = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            tokens = body.split()
            if len(tokens) < 2:
                raise ParseError("expected 'x y'", line=lineno, path=path)
            try:
                poses.append((float(tokens[0]), float(tokens[1])))
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno, path=path) from None
    if not poses:
        raise EmptyTrajectoryError(f"{path}: trajectory has no poses")
    return Trajectory(np.array(poses))


def write_trajectory(traj: Trajectory, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for x, y in traj.poses:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
