"""On-disk dataset layout.

::

    root/
      manifest.json            seed, resolved config and its hash, file counts
      maps/<map_id>/map.json   local map with georeference
      maps/<map_id>/bev.png    8-bit RGB raster
      maps/<map_id>/scene_graph.json
      queries.jsonl            one query per line
      labels.jsonl             node assignments per query and strategy
      predictions.jsonl        one localization result per line

JSON is written with sorted keys and JSONL lines are ordered by map id, then
query index, so equal inputs give byte-identical files.
"""
from __future__ import annotations

import hashlib
import io
import json
import re
import shutil
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .bev_scene import BevImage, SceneGraph
from .core import ColorRgb, GeoReference
from .errors import IntegrityError
from .localize.results import LocalizationResult
from .map_builder import LocalMap
from .pna import Assignment
from .query_gen import Query

MANIFEST = "manifest.json"
MAPS_DIR = "maps"
QUERIES = "queries.jsonl"
LABELS = "labels.jsonl"
PREDICTIONS = "predictions.jsonl"


@dataclass(frozen=True)
class LabelRecord:
    query_id: str
    map_id: str
    strategy: str
    assignments: tuple

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "map_id": self.map_id,
            "strategy": self.strategy,
            "assignments": [a.to_dict() for a in self.assignments],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LabelRecord":
        return cls(d["query_id"], d["map_id"], d["strategy"], tuple(Assignment.from_dict(a) for a in d["assignments"]))


@dataclass
class Dataset:
    maps: dict = field(default_factory=dict)  # map_id -> LocalMap
    bevs: dict = field(default_factory=dict)  # map_id -> BevImage
    graphs: dict = field(default_factory=dict)  # map_id -> SceneGraph
    queries: list = field(default_factory=list)
    labels: list = field(default_factory=list)
    predictions: list = field(default_factory=list)
    seed: int = 0
    config: dict = field(default_factory=dict)

    def counts(self) -> dict:
        return {
            "maps": len(self.maps),
            "bev": len(self.bevs),
            "scene_graphs": len(self.graphs),
            "queries": len(self.queries),
            "labels": len(self.labels),
            "predictions": len(self.predictions),
        }


def _natural(s: str):
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", s)]


def query_sort_key(q) -> tuple:
    return (_natural(q.map_id), _natural(q.query_id))


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False)


def png_bytes(pixels: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(pixels, dtype=np.uint8), "RGB").save(buf, format="PNG")
    return buf.getvalue()


def read_png(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.array(im.convert("RGB"), dtype=np.uint8)


def _write_or_remove(path: Path, data: bytes | None) -> None:
    if data is not None:
        path.write_bytes(data)
    elif path.exists():
        path.unlink()


def _write_jsonl(path: Path, records) -> None:
    records = list(records)
    if not records:
        if path.exists():
            path.unlink()
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(dumps(r.to_dict()) + "\n")


def _read_jsonl(path: Path, cls) -> list:
    if not path.exists():
        return []
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(cls.from_dict(json.loads(line)))
    return out


def write_dataset(root, ds: Dataset) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    maps_dir = root / MAPS_DIR
    if maps_dir.is_dir():
        for stale in maps_dir.iterdir():
            if stale.is_dir() and stale.name not in ds.maps:
                shutil.rmtree(stale)
    for map_id in sorted(ds.maps, key=_natural):
        m = ds.maps[map_id]
        d = maps_dir / map_id
        d.mkdir(parents=True, exist_ok=True)
        body = m.to_dict()
        bev = ds.bevs.get(map_id)
        body["georef"] = (bev.georef if bev is not None else m.georef()).to_dict()
        if bev is not None:
            body["background"] = list(bev.background)
        (d / "map.json").write_text(dumps(body) + "\n", encoding="utf-8")
        _write_or_remove(d / "bev.png", None if bev is None else png_bytes(bev.pixels))
        graph = ds.graphs.get(map_id)
        _write_or_remove(d / "scene_graph.json", None if graph is None else (dumps(graph.to_dict()) + "\n").encode())
    _write_jsonl(root / QUERIES, sorted(ds.queries, key=query_sort_key))
    _write_jsonl(root / LABELS, sorted(ds.labels, key=lambda r: (query_sort_key(r), r.strategy)))
    _write_jsonl(root / PREDICTIONS, sorted(ds.predictions, key=lambda r: _natural(r.query_id)))
    manifest = {
        "seed": ds.seed,
        "config": ds.config,
        "config_hash": config_hash(ds.config),
        "counts": ds.counts(),
        "map_ids": sorted(ds.maps, key=_natural),
    }
    (root / MANIFEST).write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return root


def read_dataset(root) -> Dataset:
    root = Path(root)
    mpath = root / MANIFEST
    if not mpath.exists():
        raise IntegrityError(f"{root}: no {MANIFEST}")
    manifest = json.loads(mpath.read_text(encoding="utf-8"))
    counts = manifest["counts"]
    ds = Dataset(seed=manifest["seed"], config=manifest.get("config", {}))
    for map_id in manifest["map_ids"]:
        d = root / MAPS_DIR / map_id
        if not (d / "map.json").exists():
            raise IntegrityError(f"map {map_id}: map.json missing")
        body = json.loads((d / "map.json").read_text(encoding="utf-8"))
        ds.maps[map_id] = LocalMap.from_dict(body)
        if (d / "bev.png").exists():
            ds.bevs[map_id] = BevImage(
                read_png(d / "bev.png"),
                GeoReference.from_dict(body["georef"]),
                ColorRgb(*body.get("background", (0, 0, 0))),
            )
        if (d / "scene_graph.json").exists():
            ds.graphs[map_id] = SceneGraph.from_dict(json.loads((d / "scene_graph.json").read_text(encoding="utf-8")))
    ds.queries = _read_jsonl(root / QUERIES, Query)
    ds.labels = _read_jsonl(root / LABELS, LabelRecord)
    ds.predictions = _read_jsonl(root / PREDICTIONS, LocalizationResult)

    actual = ds.counts()
    for key, want in counts.items():
        if actual.get(key) != want:
            raise IntegrityError(f"manifest lists {want} {key} but {actual.get(key)} were found")
    for q in ds.queries:
        if q.map_id not in ds.maps:
            raise IntegrityError(f"query {q.query_id} references unknown map {q.map_id}")
    return ds
