"""Prompt assembly and model-output parsing for chat-completion localizers."""
from __future__ import annotations

import base64
import json
import re
from importlib import resources
from pathlib import Path

from ..bev_scene import SceneGraph, serialize_scene_graph
from ..errors import (
    ConfigError,
    EmptyGraphError,
    NoJsonFoundError,
    OutOfRasterError,
    SchemaViolationError,
)
from ..pna import Assignment
from .results import ModelPrediction

SYSTEM_PROMPT_RESOURCE = "system_prompt.txt"

_FENCE_RE = re.compile(r"```(?:json|JSON)?\s*(.*?)```", re.S)
# bare Python None where JSON expects null
_BARE_NONE_RE = re.compile(r'(?<=[:\[,])(\s*)None(?=\s*[,}\]])')


def load_system_prompt(path=None) -> str:
    try:
        if path is None:
            return resources.files("t2ploc.data").joinpath(SYSTEM_PROMPT_RESOURCE).read_text(encoding="utf-8")
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise ConfigError(f"system prompt file not found: {path}", field="system_prompt") from exc


def user_text(graph: SceneGraph, hints) -> str:
    texts = [h if isinstance(h, str) else h.text for h in hints]
    return "Scene graph:\n" + serialize_scene_graph(graph) + "\n\nDescription: " + " ".join(texts)


def assemble_prompt(
    graph: SceneGraph,
    hints,
    system_text: str,
    bev_png: bytes | None = None,
    model: str = "",
    max_tokens: int = 512,
) -> dict:
    """Chat-completions request body with greedy decoding."""
    if not graph.nodes:
        raise EmptyGraphError("refusing to prompt with an empty scene graph")
    if not system_text:
        raise ConfigError("system prompt is empty", field="system_prompt")
    content = [{"type": "text", "text": user_text(graph, hints)}]
    if bev_png is not None:
        url = "data:image/png;base64," + base64.b64encode(bev_png).decode("ascii")
        content.append({"type": "image_url", "image_url": {"url": url}})
    return {
        "model": model,
        "temperature": 0,
        "max_tokens": max_tokens,
        "messages": [
            {"role": "system", "content": system_text},
            {"role": "user", "content": content},
        ],
    }


def encode_payload(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True, ensure_ascii=False).encode("utf-8")


def _candidate_objects(text: str):
    decoder = json.JSONDecoder()
    sources = [m.group(1) for m in _FENCE_RE.finditer(text)] + [text]
    for src in sources:
        for variant in (src, _BARE_NONE_RE.sub(r"\1null", src)):
            for i, ch in enumerate(variant):
                if ch != "{":
                    continue
                try:
                    obj, _ = decoder.raw_decode(variant, i)
                except ValueError:
                    continue
                if isinstance(obj, dict):
                    yield obj


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _assignment(item, i) -> Assignment:
    if not isinstance(item, dict):
        raise SchemaViolationError(f"assignment {i} is not an object")
    missing = {"object_label", "grounded", "matched_node"} - item.keys()
    if missing:
        raise SchemaViolationError(f"assignment {i} lacks {sorted(missing)}")
    label, grounded, node = item["object_label"], item["grounded"], item["matched_node"]
    if not isinstance(label, str):
        raise SchemaViolationError(f"assignment {i}: object_label must be a string")
    if not isinstance(grounded, bool):
        raise SchemaViolationError(f"assignment {i}: grounded must be a boolean")
    if node == "None":
        node = None
    if node is not None and not _is_int(node):
        raise SchemaViolationError(f"assignment {i}: matched_node must be an int or null")
    if grounded != (node is not None):
        raise SchemaViolationError(f"assignment {i}: grounded={grounded} with matched_node={node}")
    return Assignment(label, grounded, node)


def parse_model_output(text: str, width: int = 224, height: int = 224, n_expected: int | None = None) -> ModelPrediction:
    """Extract and validate the prediction object from raw model text.

    Surrounding prose and markdown fences are tolerated.  ``null`` and the
    string ``"None"`` both mean no match.
    """
    found = None
    for obj in _candidate_objects(text or ""):
        if "assignments" in obj or "point_2d" in obj:
            found = obj
            break
        if found is None:
            found = obj
    if found is None:
        raise NoJsonFoundError("no JSON object in model output")
    if "assignments" not in found or "point_2d" not in found:
        raise SchemaViolationError("output must contain 'assignments' and 'point_2d'")
    items, point = found["assignments"], found["point_2d"]
    if not isinstance(items, list):
        raise SchemaViolationError("'assignments' must be an array")
    assignments = [_assignment(item, i) for i, item in enumerate(items)]
    if not (isinstance(point, list) and len(point) == 2 and all(_is_int(c) for c in point)):
        raise SchemaViolationError("'point_2d' must be [int, int]")
    u, v = point
    if not (0 <= u < width and 0 <= v < height):
        raise OutOfRasterError(f"point_2d {point} outside {width}x{height} raster")
    if n_expected is not None and len(assignments) != n_expected:
        raise SchemaViolationError(f"{len(assignments)} assignments for {n_expected} hints")
    return ModelPrediction(tuple(assignments), (u, v))


def format_model_output(pred: ModelPrediction) -> str:
    return json.dumps(
        {"assignments": [a.to_dict() for a in pred.assignments], "point_2d": list(pred.point_2d)}
    )
