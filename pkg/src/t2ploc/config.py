"""Pipeline configuration: one flat JSON file, overridable from the command line."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

from .errors import ConfigError

PATH_FIELDS = ("cloud", "trajectory", "taxonomy", "palette", "system_prompt", "output")


def _f(default, help, **kw):
    return field(default=default, metadata={"help": help, **kw})


@dataclass
class PipelineConfig:
    cloud: str | None = _f(None, "instance-annotated point cloud (binary .t2pc or 8-column text)")
    trajectory: str | None = _f(None, "trajectory file, one 'x y' pose per line (trajectory map mode)")
    taxonomy: str | None = _f(None, "taxonomy JSON (default: bundled KITTI-360-style labels)")
    palette: str | None = _f(None, "color palette JSON name -> [r, g, b] (default: bundled palette)")
    system_prompt: str | None = _f(None, "system prompt text for the VLM localizer (default: bundled)")
    output: str | None = _f(None, "dataset output directory")
    seed: int = _f(0, "master random seed")
    side_m: float = _f(50.0, "map and pose-cell side length S in meters")
    image_size: int = _f(224, "BEV raster size H = W in pixels")
    n_hints: int = _f(6, "hints per query N_t")
    delta: float = _f(2.5, "on-top distance threshold in meters")
    tau_object: float = _f(5.0, "PNA centroid threshold for object classes, meters")
    tau_stuff: float = _f(15.0, "PNA centroid threshold for stuff classes, meters")
    map_mode: str = _f("trajectory", "map center sampling: 'trajectory' or 'grid'", choices=("trajectory", "grid"))
    min_spacing: float = _f(10.0, "minimum distance between trajectory map centers, meters")
    map_grid_pitch: float = _f(50.0, "grid pitch for grid map mode, meters")
    min_objects: int = _f(6, "grid mode keeps maps with strictly more objects than this")
    query_radius: float = _f(15.0, "query perturbation half-width along East and North, meters")
    queries_per_center: int = _f(4, "query locations sampled per map center")
    cluster_eps: float = _f(1.5, "DBSCAN neighborhood radius for stuff, meters")
    cluster_min_pts: int = _f(20, "DBSCAN core-point threshold for stuff")
    cluster_overrides: dict = _f(None, "per-semantic-id DBSCAN overrides {id: [eps, min_pts]}")
    label_strategy: str = _f("partial", "node assignment labels: 'partial' or 'full'", choices=("partial", "full"))
    localize_method: str = _f("oracle", "localizer: 'oracle' or 'vlm'", choices=("oracle", "vlm"))
    grid_pitch: float = _f(0.5, "oracle localizer candidate spacing, meters")
    recall_ks: list = _f(None, "Recall@K thresholds in meters (default 5, 10, 15)")
    endpoint_url: str = _f("http://localhost:8000/v1", "OpenAI-compatible endpoint base URL")
    endpoint_model: str = _f("", "model name sent to the endpoint")
    endpoint_token_env: str = _f("OPENAI_API_KEY", "environment variable holding the endpoint token")
    endpoint_timeout: float = _f(120.0, "request timeout, seconds")
    endpoint_max_retries: int = _f(2, "retries on malformed model output")
    max_in_flight: int = _f(4, "concurrent endpoint requests")

    def __post_init__(self):
        if self.cluster_overrides is None:
            self.cluster_overrides = {}
        if self.recall_ks is None:
            self.recall_ks = [5.0, 10.0, 15.0]
        self.validate()

    def validate(self):
        positive = ("side_m", "delta", "tau_object", "tau_stuff", "min_spacing", "map_grid_pitch",
                    "cluster_eps", "grid_pitch", "endpoint_timeout")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive", field=name)
        for name in ("image_size", "n_hints", "queries_per_center", "cluster_min_pts", "max_in_flight"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be at least 1", field=name)
        if self.image_size < 2:
            raise ConfigError("image_size must be at least 2", field="image_size")
        if self.query_radius < 0:
            raise ConfigError("query_radius must be non-negative", field="query_radius")
        if self.endpoint_max_retries < 0:
            raise ConfigError("endpoint_max_retries must be >= 0", field="endpoint_max_retries")
        if self.grid_pitch > self.side_m:
            raise ConfigError("grid_pitch must not exceed side_m", field="grid_pitch")
        for f in fields(self):
            choices = f.metadata.get("choices")
            if choices and getattr(self, f.name) not in choices:
                raise ConfigError(f"{f.name} must be one of {choices}", field=f.name)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def generation_dict(self) -> dict:
        """Fields that influence generated artifacts (paths and transport excluded)."""
        skip = set(PATH_FIELDS) | {"endpoint_token_env", "endpoint_timeout", "max_in_flight"}
        return {k: v for k, v in self.to_dict().items() if k not in skip}

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)


def toy_config_path() -> Path:
    return Path(str(resources.files("t2ploc.data").joinpath("toy", "config.json")))


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    """Read a JSON config; relative paths resolve against the file's directory."""
    data = {}
    if path is not None:
        if str(path) == "toy":
            path = toy_config_path()
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}", field="config") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}", field="config") from None
        known = {f.name for f in fields(PipelineConfig)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config field {unknown[0]!r}", field=unknown[0])
        for key in PATH_FIELDS:
            if data.get(key) and not Path(data[key]).is_absolute():
                data[key] = str((path.parent / data[key]).resolve())
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return PipelineConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc), field="config") from None
