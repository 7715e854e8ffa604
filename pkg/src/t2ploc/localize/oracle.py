"""Deterministic constraint-grid localizer.

Every hint constrains the query position: some map object with the hint's
semantic label and color name must stand in the hint's direction.  The
localizer scores each grid candidate by the number of satisfiable hints and
returns the centroid of the best-scoring candidates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..core import DEFAULT_DELTA, ColorPalette, direction_code, direction_codes, direction_of, world_to_pixel
from ..errors import EmptyGraphError
from ..map_builder import LocalMap
from ..pna import Assignment
from ..query_gen import parse_hint
from .results import ORACLE, LocalizationResult


@dataclass(frozen=True)
class GridConfig:
    pitch_m: float = 0.5


def _parsed(hints):
    return [parse_hint(h if isinstance(h, str) else h.text) for h in hints]


def oracle_score(candidate, hints, local_map: LocalMap, palette: ColorPalette, delta: float = DEFAULT_DELTA) -> int:
    """Number of hints satisfied by some map object when standing at ``candidate``."""
    score = 0
    colors = {o.id: palette.nearest(o.mean_color) for o in local_map.objects}
    for direction, color, semantic in _parsed(hints):
        for o in local_map.objects:
            if o.label.lower() == semantic and colors[o.id] == color and direction_of(candidate, o, delta) == direction:
                score += 1
                break
    return score


def candidate_grid(center, side_m: float, pitch: float) -> np.ndarray:
    """Square grid of candidate positions centered in the window."""
    if not (0 < pitch <= side_m):
        raise ValueError("pitch must be in (0, side_m]")
    n = int(np.floor(side_m / pitch + 1e-9))
    offs = (np.arange(n) - (n - 1) / 2) * pitch
    gx, gy = np.meshgrid(center[0] + offs, center[1] - offs)
    return np.column_stack([gx.ravel(), gy.ravel()])


class OracleLocalizer(BaseEstimator):
    """Grid-search localizer; ``fit`` takes a local map, ``predict`` a list of queries."""

    def __init__(self, pitch_m=0.5, delta=DEFAULT_DELTA, palette=None, size_px=224):
        self.pitch_m = pitch_m
        self.delta = delta
        self.palette = palette
        self.size_px = size_px

    def fit(self, local_map: LocalMap, y=None):
        if local_map.is_empty:
            raise EmptyGraphError("cannot localize in an empty map")
        palette = self.palette if self.palette is not None else ColorPalette.load()
        self.map_ = local_map
        self.georef_ = local_map.georef(self.size_px)
        self.candidates_ = candidate_grid(local_map.center, local_map.side_m, self.pitch_m)
        self.keys_ = [(o.label.lower(), palette.nearest(o.mean_color)) for o in local_map.objects]
        self._codes = {}
        return self

    def _object_codes(self, idx: int) -> np.ndarray:
        if idx not in self._codes:
            o = self.map_.objects[idx]
            tree = cKDTree(o.xy)
            nearest, _ = tree.query(self.candidates_)
            dx = o.centroid[0] - self.candidates_[:, 0]
            dy = o.centroid[1] - self.candidates_[:, 1]
            self._codes[idx] = direction_codes(dx, dy, nearest, self.delta)
        return self._codes[idx]

    def satisfaction(self, hints) -> np.ndarray:
        """``(n_hints, n_candidates)`` boolean matrix."""
        check_is_fitted(self, "candidates_")
        parsed = _parsed(hints)
        sat = np.zeros((len(parsed), len(self.candidates_)), dtype=bool)
        for h, (direction, color, semantic) in enumerate(parsed):
            code = direction_code(direction)
            for idx, key in enumerate(self.keys_):
                if key == (semantic, color):
                    sat[h] |= self._object_codes(idx) == code
        return sat

    def scores(self, hints) -> np.ndarray:
        return self.satisfaction(hints).sum(axis=0)

    def predict_one(self, hints, query_id: str = "") -> LocalizationResult:
        sat = self.satisfaction(hints)
        scores = sat.sum(axis=0)
        best = scores == scores.max()
        world = tuple(float(c) for c in self.candidates_[best].mean(axis=0))
        pixel, _ = world_to_pixel(world, self.georef_)
        return LocalizationResult(query_id, world, pixel, self._assign(hints, world), ORACLE)

    def _assign(self, hints, world):
        # each hint goes to the lowest-id matching object satisfied at the estimate
        out = []
        for direction, color, semantic in _parsed(hints):
            match = None
            for idx, key in enumerate(self.keys_):
                o = self.map_.objects[idx]
                if key == (semantic, color) and direction_of(world, o, self.delta) == direction:
                    if match is None or o.id < match:
                        match = o.id
            out.append(Assignment(semantic, match is not None, match))
        return out

    def predict(self, queries) -> list[LocalizationResult]:
        return [self.predict_one(q.hints, q.query_id) for q in queries]


def oracle_localize(local_map: LocalMap, hints, grid: GridConfig = GridConfig(), palette=None,
                    delta: float = DEFAULT_DELTA, query_id: str = "") -> LocalizationResult:
    return OracleLocalizer(grid.pitch_m, delta, palette).fit(local_map).predict_one(hints, query_id)
