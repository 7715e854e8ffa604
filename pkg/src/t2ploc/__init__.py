"""Text-to-point-cloud localization toolkit: benchmark generation, BEV and
scene-graph map inputs, node-assignment labels, localizers and metrics."""

from .bev_scene import BevImage, BevRenderer, SceneGraph, build_scene_graph, render_bev
from .core import ColorPalette, Direction, GeoReference, direction_of, pixel_to_world, world_to_pixel
from .evaluation import evaluate, recall_at
from .ingest import InstancePointCloud, Taxonomy, load_point_cloud, load_trajectory
from .localize import OracleLocalizer, oracle_localize, parse_model_output
from .map_builder import ClusterParams, LocalMap, ObjectInstance, StuffClusterer, build_local_map
from .pna import Assignment, TauConfig, full_assignment_variant, label_query
from .query_gen import Hint, Query, QueryConfig, generate_query

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "BevImage",
    "BevRenderer",
    "ClusterParams",
    "ColorPalette",
    "Direction",
    "GeoReference",
    "Hint",
    "InstancePointCloud",
    "LocalMap",
    "ObjectInstance",
    "OracleLocalizer",
    "Query",
    "QueryConfig",
    "SceneGraph",
    "StuffClusterer",
    "Taxonomy",
    "TauConfig",
    "build_local_map",
    "build_scene_graph",
    "direction_of",
    "evaluate",
    "full_assignment_variant",
    "generate_query",
    "label_query",
    "load_point_cloud",
    "load_trajectory",
    "oracle_localize",
    "parse_model_output",
    "pixel_to_world",
    "recall_at",
    "render_bev",
    "world_to_pixel",
]
