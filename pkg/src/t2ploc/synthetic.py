"""Scripted synthetic scenes for tests, benchmarks and the bundled toy data."""
from __future__ import annotations

import math

import numpy as np

from .core import ColorPalette
from .ingest import InstancePointCloud, Kind, Taxonomy, Trajectory


def blob(rng, center, radius, n, z=(0.0, 2.0), color=(128, 128, 128), jitter=12):
    """``n`` points uniformly inside a disc, with noisy colors."""
    r = radius * np.sqrt(rng.uniform(0, 1, n))
    t = rng.uniform(0, 2 * np.pi, n)
    xyz = np.column_stack([center[0] + r * np.cos(t), center[1] + r * np.sin(t), rng.uniform(z[0], z[1], n)])
    rgb = np.clip(np.asarray(color) + rng.integers(-jitter, jitter + 1, (n, 3)), 0, 255)
    return xyz, rgb.astype(np.uint8)


class SceneBuilder:
    """Accumulates labeled point groups into an :class:`InstancePointCloud`."""

    def __init__(self, taxonomy: Taxonomy):
        self.taxonomy = taxonomy
        self._parts = []
        self._next_instance = 1

    def add(self, semantic, xyz, rgb, instance=None) -> int:
        if instance is None:
            if self.taxonomy.kind(semantic) is Kind.OBJECT:
                instance = self._next_instance
                self._next_instance += 1
            else:
                instance = 0
        n = len(xyz)
        self._parts.append(InstancePointCloud(xyz, rgb, np.full(n, semantic), np.full(n, instance)))
        return instance

    def build(self) -> InstancePointCloud:
        return InstancePointCloud.concatenate(self._parts, self.taxonomy)


def _palette_colors(palette: ColorPalette | None):
    palette = palette or ColorPalette.load()
    return [c for _, c in palette.entries]


def random_city(rng, taxonomy: Taxonomy, n_objects=12, n_stuff=3, extent=80.0, palette=None) -> InstancePointCloud:
    """Random objects and stuff patches scattered over a square area."""
    colors = _palette_colors(palette)
    objs = taxonomy.ids(Kind.OBJECT)
    stuff = taxonomy.ids(Kind.STUFF)
    sb = SceneBuilder(taxonomy)
    half = extent / 2
    for _ in range(n_stuff):
        c = rng.uniform(-half, half, 2)
        xyz, rgb = blob(rng, c, rng.uniform(3, 9), int(rng.integers(80, 250)), z=(-0.2, 0.2),
                        color=colors[rng.integers(len(colors))])
        sb.add(int(rng.choice(stuff)), xyz, rgb)
    for _ in range(n_objects):
        c = rng.uniform(-half, half, 2)
        xyz, rgb = blob(rng, c, rng.uniform(0.3, 4.0), int(rng.integers(8, 60)), z=(0.0, rng.uniform(0.5, 12)),
                        color=colors[rng.integers(len(colors))])
        sb.add(int(rng.choice(objs)), xyz, rgb)
    return sb.build()


def _away_from_diagonals(rng, margin_deg=15.0):
    # direction boundaries are the diagonals |dx| = |dy|
    while True:
        theta = rng.uniform(0, 2 * math.pi)
        if abs(math.degrees(theta) % 90.0 - 45.0) >= margin_deg:
            return theta


def consistent_scene(rng, taxonomy: Taxonomy, n_near: int = 0, n_total: int = 6, near_dist=(0.0, 1.0),
                     near_radius=0.4, far_dist=(4.5, 15.0), xi_range=8.0, palette=None):
    """Compact objects with unique semantics around a query position.

    Direction margins keep every hint unambiguous at grid resolution: near
    objects sit well inside the on-top radius, far objects well outside it
    and at least 15 degrees away from direction boundaries.

    Returns ``(cloud, xi)``; the map centered at the origin and the pose
    cell centered at ``xi`` both contain every object completely.
    """
    colors = _palette_colors(palette)
    labels = rng.permutation(taxonomy.ids(Kind.OBJECT))[:n_total]
    if len(labels) < n_total:
        raise ValueError("taxonomy has too few object labels")
    xi = tuple(float(v) for v in rng.uniform(-xi_range, xi_range, 2))
    sb = SceneBuilder(taxonomy)
    base = rng.uniform(0, 2 * math.pi)
    for k, sem in enumerate(labels.tolist()):
        if k < n_near:
            # spread near objects around xi so their discs pin the position down
            theta = base + 2 * math.pi * k / n_near + rng.uniform(-0.2, 0.2)
            d = rng.uniform(*near_dist)
            radius = near_radius
        else:
            theta = _away_from_diagonals(rng)
            d = rng.uniform(*far_dist)
            radius = 0.5
        c = (xi[0] + d * math.cos(theta), xi[1] + d * math.sin(theta))
        xyz, rgb = blob(rng, c, radius, int(rng.integers(12, 40)), color=colors[rng.integers(len(colors))])
        sb.add(sem, xyz, rgb)
    return sb.build(), xi


def toy_scene(seed: int = 7):
    """The bundled 200-point toy cloud and its trajectory."""
    rng = np.random.default_rng(seed)
    taxonomy = Taxonomy.load()
    colors = _palette_colors(None)
    sb = SceneBuilder(taxonomy)
    xyz, rgb = blob(rng, (0.0, 0.0), 4.0, 80, z=(-0.1, 0.1), color=colors[1])
    sb.add(1, xyz, rgb)  # road
    layout = [
        (11, (6.0, 5.0)), (12, (-5.0, 6.0)), (13, (7.0, -6.0)), (14, (-6.5, -5.5)),
        (18, (0.5, 7.5)), (19, (-7.5, 0.5)), (21, (7.5, 0.0)), (22, (0.0, -7.5)),
    ]
    for i, (sem, c) in enumerate(layout):
        xyz, rgb = blob(rng, c, 0.8, 15, z=(0.0, 3.0), color=colors[i % len(colors)])
        sb.add(sem, xyz, rgb)
    traj = Trajectory(np.column_stack([np.linspace(-20, 20, 9), np.zeros(9)]))
    return sb.build(), traj
