import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from t2ploc.core import (
    ColorPalette,
    ColorRgb,
    Direction,
    GeoReference,
    direction_codes,
    direction_from_offset,
    direction_of,
    DIRECTIONS,
    mean_color,
    nearest_palette_color,
    pixel_to_world,
    rng_for,
    world_to_pixel,
)
from t2ploc.errors import ConfigError, EmptyObjectError

from oracles import literal_direction


class TestWorldToPixel:
    def test_center_of_raster(self, georef):
        assert world_to_pixel((0, 0), georef) == ((111, 111), True)

    def test_north_east_corner(self, georef):
        assert world_to_pixel((24.9, 24.9), georef) == ((223, 0), True)

    def test_beyond_east_edge_is_clamped_and_flagged(self, georef):
        assert world_to_pixel((40, 0), georef) == ((223, 111), False)

    def test_window_edges_stay_in_raster(self, georef):
        px, inside = world_to_pixel((-25, 25), georef)
        assert inside and px == (0, 0)
        px, inside = world_to_pixel((25, -25), georef)
        assert inside and px == (223, 223)

    def test_offset_center(self):
        g = GeoReference((100.0, -40.0), 50.0, 224, 224)
        assert world_to_pixel((100.0, -40.0), g)[0] == (111, 111)


class TestPixelToWorld:
    def test_center_pixel(self, georef):
        x, y = pixel_to_world((111, 111), georef)
        assert x == pytest.approx(-0.1116, abs=1e-4)
        assert y == pytest.approx(0.1116, abs=1e-4)
        assert x == pytest.approx(-25 + 111.5 * 50 / 224, abs=1e-12)

    def test_top_left(self, georef):
        x, y = pixel_to_world((0, 0), georef)
        assert (x, y) == (pytest.approx(-24.888, abs=1e-3), pytest.approx(24.888, abs=1e-3))

    def test_round_trip_on_pixel_grid(self, georef):
        for u in range(0, 224, 7):
            for v in range(0, 224, 5):
                assert world_to_pixel(pixel_to_world((u, v), georef), georef) == ((u, v), True)

    @pytest.mark.parametrize("px", [(-1, 0), (0, 224), (224, 3)])
    def test_out_of_raster(self, georef, px):
        with pytest.raises(IndexError):
            pixel_to_world(px, georef)


@given(
    x=st.floats(-25, 25, allow_nan=False),
    y=st.floats(-25, 25, allow_nan=False),
    cx=st.floats(-1e4, 1e4, allow_nan=False),
    cy=st.floats(-1e4, 1e4, allow_nan=False),
)
@settings(max_examples=300)
def test_round_trip_within_half_pixel(x, y, cx, cy):
    g = GeoReference((cx, cy), 50.0, 224, 224)
    p = (cx + x, cy + y)
    px, _ = world_to_pixel(p, g)
    back = pixel_to_world(px, g)
    assert max(abs(back[0] - p[0]), abs(back[1] - p[1])) <= 25 / 224 + 1e-6


def test_georeference_validation():
    with pytest.raises(ValueError):
        GeoReference((0, 0), 0.0)
    with pytest.raises(ValueError):
        GeoReference((0, 0), 50.0, 224, 200)
    assert GeoReference((0, 0), 50.0, 224, 224).resolution == pytest.approx(50 / 224)


class TestMeanColor:
    def test_two_points(self):
        assert mean_color([((0, 0, 0), (100, 0, 0)), ((1, 0, 0), (200, 0, 0))]) == (150, 0, 0)

    def test_single(self):
        assert mean_color(np.array([[12, 34, 56]])) == (12, 34, 56)

    def test_exact_thirds(self):
        assert mean_color(np.array([[0, 0, 0], [0, 0, 0], [255, 255, 255]])) == (85, 85, 85)

    def test_half_up(self):
        assert mean_color(np.array([[0, 1, 2], [1, 2, 3]])) == (1, 2, 3)

    def test_empty(self):
        with pytest.raises(EmptyObjectError):
            mean_color(np.empty((0, 3)))

    @given(st.lists(st.tuples(*[st.integers(0, 255)] * 3), min_size=1, max_size=50))
    def test_within_channel_bounds(self, colors):
        m = mean_color(np.array(colors))
        arr = np.array(colors)
        assert (arr.min(axis=0) <= np.array(m)).all() and (np.array(m) <= arr.max(axis=0)).all()


def _obj(points):
    return np.asarray(points, dtype=float)


class TestDirection:
    def test_east(self):
        # centroid (10, 3), closest point 8 m away
        obj = _obj([[8, 0], [12, 6], [10, 3]])
        assert direction_of((0, 0), obj) == Direction.EAST

    def test_south(self):
        obj = _obj([[0, -6], [0, -10]])
        assert direction_of((0, 0), obj) == Direction.SOUTH

    def test_on_top_overrides_centroid(self):
        obj = _obj([[1.0, 0.0], [30, 30], [31, 31]])
        assert direction_of((0, 0), obj) == Direction.ON_TOP

    def test_diagonal_tie_goes_east(self):
        obj = _obj([[5, 5]])
        assert direction_of((0, 0), obj) == Direction.EAST
        assert direction_of((0, 0), _obj([[-5, -5]])) == Direction.WEST
        assert direction_of((0, 0), _obj([[-5, 5]])) == Direction.WEST

    def test_threshold_is_strict(self):
        assert direction_of((0, 0), _obj([[2.5, 0]])) == Direction.EAST
        assert direction_of((0, 0), _obj([[2.4999, 0]])) == Direction.ON_TOP

    def test_empty_object(self):
        with pytest.raises(EmptyObjectError):
            direction_of((0, 0), np.empty((0, 2)))

    def test_mirror_flips_east_west(self):
        obj = _obj([[10, 1], [11, 2]])
        assert direction_of((0, 0), obj) == Direction.EAST
        assert direction_of((21, 3), obj) == Direction.WEST

    def test_vectorized_matches_literal(self):
        rng = np.random.default_rng(0)
        dx = rng.uniform(-30, 30, 2000)
        dy = rng.uniform(-30, 30, 2000)
        near = rng.uniform(0, 5, 2000)
        codes = direction_codes(dx, dy, near, 2.5)
        for i in range(2000):
            want = literal_direction((0, 0), (near[i], 0), (dx[i], dy[i]))
            assert DIRECTIONS[codes[i]].value == want

    def test_direction_values(self):
        assert [d.value for d in DIRECTIONS] == ["north", "south", "east", "west", "on-top"]
        assert direction_from_offset(0, 0) == Direction.EAST


class TestPalette:
    def test_default_names(self, palette):
        assert palette.names == ["dark-green", "gray", "gray-green", "bright-gray", "black", "green", "beige"]

    def test_nearest(self):
        p = ColorPalette.from_mapping({"black": (0, 0, 0), "green": (0, 128, 0)})
        assert nearest_palette_color((10, 10, 10), p) == "black"

    def test_centers_map_to_themselves(self, palette):
        for name, c in palette.entries:
            assert nearest_palette_color(c, palette) == name

    def test_tie_goes_to_lowest_index(self):
        p = ColorPalette.from_mapping({"a": (0, 0, 255), "b": (100, 0, 0), "c": (200, 200, 200), "d": (0, 100, 0)})
        # (50, 50, 0) is equidistant from b (index 1) and d (index 3)
        assert nearest_palette_color((50, 50, 0), p) == "b"

    def test_load_custom_and_errors(self, tmp_path):
        path = tmp_path / "p.json"
        path.write_text(json.dumps({"red": [255, 0, 0]}))
        assert ColorPalette.load(path).names == ["red"]
        with pytest.raises(ConfigError):
            ColorPalette.load(tmp_path / "missing.json")
        with pytest.raises(ValueError):
            ColorPalette(())
        with pytest.raises(ValueError):
            ColorRgb.checked(0, 300, 0)


def test_rng_streams_reproducible():
    a = rng_for(42, 3, 1).random(5)
    b = rng_for(42, 3, 1).random(5)
    c = rng_for(42, 3, 2).random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
