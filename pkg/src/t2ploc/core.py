"""Geometry, raster frames, color math and seeded randomness.

The world frame is a local planar East-North-Up frame in meters.  Rasters use
image conventions: ``u`` grows to the East, ``v`` grows to the South, and the
pixel ``(u, v)`` covers the square whose center is returned by
:func:`pixel_to_world`.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, EmptyObjectError

DEFAULT_DELTA = 2.5


class WorldPoint(NamedTuple):
    x: float
    y: float
    z: float = 0.0


class ColorRgb(NamedTuple):
    r: int
    g: int
    b: int

    @classmethod
    def checked(cls, r, g, b) -> "ColorRgb":
        vals = tuple(int(c) for c in (r, g, b))
        if any(c < 0 or c > 255 for c in vals):
            raise ValueError(f"color channel out of range: {vals}")
        return cls(*vals)


class PixelCoord(NamedTuple):
    u: int
    v: int


@dataclass(frozen=True)
class GeoReference:
    """Placement of an ``side_m`` x ``side_m`` window on a square raster."""

    center: tuple[float, float]
    side_m: float = 50.0
    width_px: int = 224
    height_px: int = 224

    def __post_init__(self):
        cx, cy = (float(c) for c in self.center)
        object.__setattr__(self, "center", (cx, cy))
        if not (math.isfinite(cx) and math.isfinite(cy)):
            raise ValueError("georeference center must be finite")
        if not self.side_m > 0:
            raise ValueError(f"side_m must be positive, got {self.side_m}")
        if self.width_px != self.height_px or self.width_px < 2:
            raise ValueError("raster must be square with at least 2 pixels per side")

    @property
    def resolution(self) -> float:
        return self.side_m / self.width_px

    @property
    def origin(self) -> tuple[float, float]:
        """World coordinates of the raster's top-left (north-west) corner."""
        return self.center[0] - self.side_m / 2, self.center[1] + self.side_m / 2

    def to_dict(self) -> dict:
        return {
            "center": list(self.center),
            "side_m": self.side_m,
            "width_px": self.width_px,
            "height_px": self.height_px,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GeoReference":
        return cls(tuple(d["center"]), d["side_m"], d["width_px"], d["height_px"])


def _half_down(t):
    # ties go to the lower pixel, so a point on a pixel edge lands west/north
    return np.ceil(np.asarray(t, dtype=float) - 0.5).astype(np.int64)


def world_to_pixel(p, g: GeoReference) -> tuple[PixelCoord, bool]:
    """Project a world ``(x, y)`` onto the raster.

    Returns the clamped pixel and whether ``p`` lies inside the window.
    """
    x, y = float(p[0]), float(p[1])
    u, v, inside = world_to_pixel_array(np.array([[x, y]]), g)
    return PixelCoord(int(u[0]), int(v[0])), bool(inside[0])


def world_to_pixel_array(xy: np.ndarray, g: GeoReference):
    """Vectorized :func:`world_to_pixel` for an ``(N, 2+)`` array."""
    xy = np.asarray(xy, dtype=float)
    x0, y0 = g.origin
    tu = (xy[:, 0] - x0) * g.width_px / g.side_m - 0.5
    tv = (y0 - xy[:, 1]) * g.height_px / g.side_m - 0.5
    u = np.clip(_half_down(tu), 0, g.width_px - 1)
    v = np.clip(_half_down(tv), 0, g.height_px - 1)
    half = g.side_m / 2
    inside = (np.abs(xy[:, 0] - g.center[0]) <= half) & (np.abs(xy[:, 1] - g.center[1]) <= half)
    return u, v, inside


def pixel_to_world(px, g: GeoReference) -> tuple[float, float]:
    u, v = int(px[0]), int(px[1])
    if not (0 <= u < g.width_px and 0 <= v < g.height_px):
        raise IndexError(f"pixel {(u, v)} outside {g.width_px}x{g.height_px} raster")
    x0, y0 = g.origin
    return (
        x0 + (u + 0.5) * g.side_m / g.width_px,
        y0 - (v + 0.5) * g.side_m / g.height_px,
    )


def pixel_to_world_array(u, v, g: GeoReference) -> np.ndarray:
    """Vectorized :func:`pixel_to_world`; returns an ``(N, 2)`` array."""
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    if ((u < 0) | (u >= g.width_px) | (v < 0) | (v >= g.height_px)).any():
        raise IndexError(f"pixel outside {g.width_px}x{g.height_px} raster")
    x0, y0 = g.origin
    return np.column_stack([x0 + (u + 0.5) * g.side_m / g.width_px, y0 - (v + 0.5) * g.side_m / g.height_px])


def mean_color(colors) -> ColorRgb:
    """Per-channel mean of RGB values, rounded half-up.

    Accepts an ``(N, 3)`` array of colors or an iterable of ``(point, color)``
    pairs.
    """
    arr = _color_array(colors)
    if arr.shape[0] == 0:
        raise EmptyObjectError("cannot average the color of an empty object")
    n = arr.shape[0]
    sums = arr.astype(np.int64).sum(axis=0)
    # exact integer half-up: floor(sum / n + 1/2)
    rounded = (2 * sums + n) // (2 * n)
    return ColorRgb(*(int(c) for c in rounded))


def _color_array(colors) -> np.ndarray:
    if isinstance(colors, np.ndarray):
        return colors.reshape(-1, 3)
    items = list(colors)
    if items and len(items[0]) == 2 and not np.isscalar(items[0][0]):
        items = [c for _, c in items]
    return np.asarray(items, dtype=np.int64).reshape(-1, 3)


class Direction(str, Enum):
    NORTH = "north"
    SOUTH = "south"
    EAST = "east"
    WEST = "west"
    ON_TOP = "on-top"

    def __str__(self):
        return self.value


# integer codes used by vectorized classifiers; index into DIRECTIONS
DIRECTIONS = (Direction.NORTH, Direction.SOUTH, Direction.EAST, Direction.WEST, Direction.ON_TOP)
_CODE = {d: i for i, d in enumerate(DIRECTIONS)}


def direction_code(d: Direction) -> int:
    return _CODE[Direction(d)]


def direction_from_offset(dx: float, dy: float) -> Direction:
    """Cardinal direction of an offset ``centroid - query``; ties go East/West."""
    if abs(dx) >= abs(dy):
        return Direction.EAST if dx >= 0 else Direction.WEST
    return Direction.NORTH if dy >= 0 else Direction.SOUTH


def _ground(obj) -> tuple[np.ndarray, np.ndarray]:
    xy = getattr(obj, "xy", None)
    if xy is None:
        arr = np.asarray(obj, dtype=float)
        if arr.size == 0:
            raise EmptyObjectError("direction of an empty object is undefined")
        xy = arr.reshape(1, -1)[:, :2] if arr.ndim == 1 else arr.reshape(len(arr), -1)[:, :2]
    if len(xy) == 0:
        raise EmptyObjectError("direction of an empty object is undefined")
    centroid = getattr(obj, "centroid", None)
    if centroid is None:
        centroid = xy.mean(axis=0)
    return xy, np.asarray(centroid, dtype=float)


def direction_of(xi, obj, delta: float = DEFAULT_DELTA) -> Direction:
    """Direction of the query position ``xi`` relative to an object.

    ``obj`` is an :class:`~t2ploc.map_builder.ObjectInstance` or an array of
    points whose first two columns are ground coordinates.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    xy, centroid = _ground(obj)
    diff = xy - np.asarray(xi[:2], dtype=float)
    if np.min(np.hypot(diff[:, 0], diff[:, 1])) < delta:
        return Direction.ON_TOP
    return direction_from_offset(centroid[0] - xi[0], centroid[1] - xi[1])


def direction_codes(dx: np.ndarray, dy: np.ndarray, nearest: np.ndarray, delta: float) -> np.ndarray:
    """Vectorized classifier returning indices into :data:`DIRECTIONS`."""
    adx, ady = np.abs(dx), np.abs(dy)
    horiz = adx >= ady
    codes = np.where(
        horiz,
        np.where(dx >= 0, _CODE[Direction.EAST], _CODE[Direction.WEST]),
        np.where(dy >= 0, _CODE[Direction.NORTH], _CODE[Direction.SOUTH]),
    )
    return np.where(nearest < delta, _CODE[Direction.ON_TOP], codes)


@dataclass(frozen=True)
class ColorPalette:
    """Named RGB centers used to describe object colors in words."""

    entries: tuple[tuple[str, ColorRgb], ...]

    def __post_init__(self):
        if not self.entries:
            raise ValueError("palette must not be empty")
        names = [n for n, _ in self.entries]
        if len(set(names)) != len(names):
            raise ValueError("palette names must be unique")
        object.__setattr__(
            self, "entries", tuple((str(n), ColorRgb.checked(*c)) for n, c in self.entries)
        )
        object.__setattr__(self, "_centers", np.array([c for _, c in self.entries], dtype=float))

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.entries]

    def __len__(self):
        return len(self.entries)

    def center(self, name: str) -> ColorRgb:
        return dict(self.entries)[name]

    def nearest(self, c) -> str:
        d2 = ((self._centers - np.asarray(c, dtype=float)) ** 2).sum(axis=1)
        # argmin returns the first minimum, i.e. the lowest palette index
        return self.entries[int(np.argmin(d2))][0]

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ColorPalette":
        return cls(tuple((k, tuple(v)) for k, v in mapping.items()))

    @classmethod
    def load(cls, path=None) -> "ColorPalette":
        if path is None:
            text = resources.files("t2ploc.data").joinpath("palette.json").read_text()
        else:
            try:
                text = Path(path).read_text()
            except FileNotFoundError as exc:
                raise ConfigError(f"palette file not found: {path}", field="palette") from exc
        try:
            return cls.from_mapping(json.loads(text))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"invalid palette: {exc}", field="palette") from exc

    def to_mapping(self) -> dict:
        return {n: list(c) for n, c in self.entries}


def nearest_palette_color(c, palette: ColorPalette) -> str:
    return palette.nearest(c)


def rng_for(seed: int, *path: int) -> np.random.Generator:
    """Independent random stream addressed by ``(seed, path)``.

    Streams for different paths do not depend on the order in which they are
    created, so work can be distributed across threads freely.
    """
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path)))


def as_xy(p: Sequence[float] | Iterable[float]) -> tuple[float, float]:
    x, y = list(p)[:2]
    x, y = float(x), float(y)
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError(f"non-finite coordinate {(x, y)}")
    return x, y
