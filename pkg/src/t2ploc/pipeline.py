"""Pipeline stages over the on-disk dataset layout.

Each stage reads what it needs from ``config.output``, computes its artifacts
and rewrites the dataset.  ``jobs`` bounds worker threads; results are
collected in input order and randomness is addressed by seed paths, so the
output never depends on ``jobs``.
"""
from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .bev_scene import build_scene_graph, render_bev
from .config import PipelineConfig
from .core import ColorPalette
from .dataset import Dataset, LabelRecord, png_bytes, read_dataset, write_dataset
from .errors import ConfigError
from .evaluation import evaluate
from .ingest import Taxonomy, load_point_cloud, load_trajectory
from .localize import EndpointConfig, OracleLocalizer, VlmClient, localize_batch
from .localize.protocol import load_system_prompt
from .map_builder import ClusterParams, build_local_map, grid_sample_centers, sample_map_centers
from .pna import STRATEGIES, TauConfig
from .query_gen import QueryConfig, generate_queries_for_map

log = logging.getLogger(__name__)


def _pmap(fn, items, jobs: int):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _require(cfg: PipelineConfig, name: str) -> Path:
    value = getattr(cfg, name)
    if not value:
        raise ConfigError(f"'{name}' is required for this command", field=name)
    p = Path(value)
    if name != "output" and not p.exists():
        raise ConfigError(f"{name} path does not exist: {p}", field=name)
    return p


def _taxonomy(cfg) -> Taxonomy:
    return Taxonomy.load(cfg.taxonomy)


def _palette(cfg) -> ColorPalette:
    return ColorPalette.load(cfg.palette)


def _cluster(cfg) -> ClusterParams:
    return ClusterParams(cfg.cluster_eps, cfg.cluster_min_pts, cfg.cluster_overrides)


def _query_config(cfg, taxonomy) -> QueryConfig:
    return QueryConfig(
        taxonomy=taxonomy,
        palette=_palette(cfg),
        side_m=cfg.side_m,
        n_hints=cfg.n_hints,
        delta=cfg.delta,
        tau=TauConfig(cfg.tau_object, cfg.tau_stuff),
        cluster=_cluster(cfg),
        queries_per_center=cfg.queries_per_center,
        radius=cfg.query_radius,
    )


def _map_index(map_id: str) -> int:
    return int(re.sub(r"\D", "", map_id))


def _load_cloud(cfg):
    taxonomy = _taxonomy(cfg)
    return load_point_cloud(_require(cfg, "cloud"), taxonomy), taxonomy


def _open(cfg) -> Dataset:
    return read_dataset(_require(cfg, "output"))


def build_maps(cfg: PipelineConfig, jobs: int = 1) -> Dataset:
    out = _require(cfg, "output")
    _require(cfg, "cloud")
    if cfg.map_mode == "trajectory":
        traj_path = _require(cfg, "trajectory")
    cloud, taxonomy = _load_cloud(cfg)
    params = _cluster(cfg)
    if cfg.map_mode == "trajectory":
        centers = sample_map_centers(load_trajectory(traj_path), cfg.min_spacing)
    else:
        centers = grid_sample_centers(cloud, cfg.map_grid_pitch, cfg.min_objects, cfg.side_m, taxonomy, params)
    built = _pmap(
        lambda ic: build_local_map(cloud, ic[1], cfg.side_m, taxonomy, params, map_id=f"m{ic[0]:04d}"),
        enumerate(centers),
        jobs,
    )
    ds = Dataset(maps={m.map_id: m for m in built if not m.is_empty}, seed=cfg.seed, config=cfg.generation_dict())
    log.info("built %d maps from %d centers", len(ds.maps), len(centers))
    write_dataset(out, ds)
    return ds


def gen_queries(cfg: PipelineConfig, jobs: int = 1) -> Dataset:
    ds = _open(cfg)
    cloud, taxonomy = _load_cloud(cfg)
    qcfg = _query_config(cfg, taxonomy)
    maps = [ds.maps[k] for k in sorted(ds.maps, key=_map_index)]
    per_map = _pmap(lambda m: generate_queries_for_map(m, _map_index(m.map_id), cloud, qcfg, cfg.seed), maps, jobs)
    ds.queries = [q for qs in per_map for q in qs]
    ds.labels, ds.predictions = [], []
    ds.seed, ds.config = cfg.seed, cfg.generation_dict()
    write_dataset(cfg.output, ds)
    return ds


def render(cfg: PipelineConfig, jobs: int = 1) -> Dataset:
    ds = _open(cfg)

    def one(m):
        g = m.georef(cfg.image_size)
        return m.map_id, render_bev(m, g), build_scene_graph(m, g)

    for map_id, bev, graph in _pmap(one, list(ds.maps.values()), jobs):
        ds.bevs[map_id] = bev
        ds.graphs[map_id] = graph
    write_dataset(cfg.output, ds)
    return ds


def label(cfg: PipelineConfig, jobs: int = 1, strategy: str | None = None) -> Dataset:
    ds = _open(cfg)
    strategy = strategy or cfg.label_strategy
    fn = STRATEGIES[strategy]
    tau = TauConfig(cfg.tau_object, cfg.tau_stuff)
    fresh = _pmap(
        lambda q: LabelRecord(q.query_id, q.map_id, strategy, tuple(fn(q.hints, ds.maps[q.map_id], tau))),
        ds.queries,
        jobs,
    )
    ds.labels = [r for r in ds.labels if r.strategy != strategy] + fresh
    write_dataset(cfg.output, ds)
    return ds


def localize(cfg: PipelineConfig, jobs: int = 1, method: str | None = None, trace: bool = False) -> Dataset:
    ds = _open(cfg)
    method = method or cfg.localize_method
    if method == "oracle":
        palette = _palette(cfg)
        by_map = {}
        for q in ds.queries:
            by_map.setdefault(q.map_id, []).append(q)

        def run(map_id):
            est = OracleLocalizer(cfg.grid_pitch, cfg.delta, palette, cfg.image_size).fit(ds.maps[map_id])
            return est.predict(by_map[map_id])

        results = [r for rs in _pmap(run, sorted(by_map), jobs) for r in rs]
    else:
        endpoint = EndpointConfig(
            cfg.endpoint_url, cfg.endpoint_model, cfg.endpoint_token_env, cfg.endpoint_timeout,
            cfg.endpoint_max_retries, cfg.max_in_flight, trace,
        )
        if any(q.map_id not in ds.bevs or q.map_id not in ds.graphs for q in ds.queries):
            ds = render(cfg, jobs)
        with VlmClient(endpoint, load_system_prompt(cfg.system_prompt)) as client:
            results = localize_batch(
                client,
                (
                    (q.query_id, png_bytes(ds.bevs[q.map_id].pixels), ds.graphs[q.map_id], q.hints, ds.bevs[q.map_id].georef)
                    for q in ds.queries
                ),
            )
    ds.predictions = results
    write_dataset(cfg.output, ds)
    return ds


def run_evaluation(cfg: PipelineConfig, jobs: int = 1):
    ds = _open(cfg)
    report = evaluate(ds.queries, ds.predictions, cfg.recall_ks)
    report.write(cfg.output)
    return report


def run_pipeline(cfg: PipelineConfig, jobs: int = 1, trace: bool = False):
    build_maps(cfg, jobs)
    gen_queries(cfg, jobs)
    render(cfg, jobs)
    label(cfg, jobs)
    localize(cfg, jobs, trace=trace)
    return run_evaluation(cfg, jobs)
