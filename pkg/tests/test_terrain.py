import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glacier_mapper.terrain import aspect, derivatives, smooth_dem, terrain_params

G = 15.0


def surface(fn, shape=(21, 23), cellsize=G):
    """Sample fn(x, y) with x east, y north, row 0 at the top."""
    h, w = shape
    x = np.arange(w) * cellsize
    y = (h - 1 - np.arange(h)) * cellsize
    xx, yy = np.meshgrid(x, y)
    return fn(xx, yy)


def interior(a):
    return a[1:-1, 1:-1]


def fd_slope_deg(fn, x, y, h=G):
    """Slope from central differences with grid spacing, evaluated analytically."""
    dzdx = (fn(x + h, y) - fn(x - h, y)) / (2 * h)
    dzdy = (fn(x, y + h) - fn(x, y - h)) / (2 * h)
    return np.degrees(np.arctan(np.hypot(dzdx, dzdy)))


class TestSmoothing:
    def test_radius_zero_is_identity(self, rng):
        z = rng.random((5, 6))
        np.testing.assert_array_equal(smooth_dem(z, 0), z)

    def test_window_mean(self):
        z = np.arange(25.0).reshape(5, 5)
        assert smooth_dem(z, 1)[2, 2] == 12.0
        # corner averages the 2x2 cells that exist
        assert smooth_dem(z, 1)[0, 0] == (0 + 1 + 5 + 6) / 4

    def test_nodata_ignored_and_kept(self):
        z = np.array([[1.0, np.nan, 3.0]])
        out = smooth_dem(z, 1)
        assert np.isnan(out[0, 1])
        assert out[0, 0] == 1.0 and out[0, 2] == 3.0

    def test_constant_fixpoint(self):
        z = np.full((9, 9), 4321.5)
        np.testing.assert_allclose(smooth_dem(z, 3), z, rtol=0, atol=1e-9)

    def test_negative_radius(self):
        with pytest.raises(ValueError):
            smooth_dem(np.zeros((3, 3)), -1)


class TestDerivatives:
    def test_quadratic_recovered_exactly(self):
        a, b, c, d, e = 0.003, -0.002, 0.0015, 0.4, -0.25
        fn = lambda x, y: a * x * x + b * y * y + c * x * y + d * x + e * y  # noqa: E731
        z = surface(fn)
        p, q, r, s, t = derivatives(z, G)
        xx = surface(lambda x, y: x)
        yy = surface(lambda x, y: y)
        np.testing.assert_allclose(interior(p), interior(2 * a * xx + c * yy + d), atol=1e-9)
        np.testing.assert_allclose(interior(q), interior(2 * b * yy + c * xx + e), atol=1e-9)
        np.testing.assert_allclose(interior(r), 2 * a, atol=1e-12)
        np.testing.assert_allclose(interior(s), c, atol=1e-12)
        np.testing.assert_allclose(interior(t), 2 * b, atol=1e-12)

    def test_border_is_nan(self):
        p, *_ = derivatives(np.zeros((4, 5)), G)
        assert np.isnan(p[0]).all() and np.isnan(p[:, -1]).all()
        assert not np.isnan(interior(p)).any()

    def test_tiny_grid(self):
        assert all(np.isnan(a).all() for a in derivatives(np.zeros((2, 8)), G))

    def test_aspect_directions(self):
        # downslope azimuth: east-rising plane faces west
        assert aspect(np.array(1.0), np.array(0.0)) == 270.0
        assert aspect(np.array(0.0), np.array(1.0)) == 180.0
        assert aspect(np.array(0.0), np.array(-1.0)) == 0.0
        assert aspect(np.array(0.0), np.array(0.0)) == 0.0


class TestTerrainParams:
    def test_inclined_plane(self):
        z = surface(lambda x, y: 0.5 * x)
        layers = terrain_params(z, G)
        np.testing.assert_allclose(interior(layers.slope), math.degrees(math.atan(0.5)), rtol=0, atol=1e-6)
        assert abs(interior(layers.slope)[0, 0] - 26.565051177) < 1e-6
        for k in (layers.profile_curvature, layers.tangential_curvature, layers.unsphericity):
            np.testing.assert_allclose(interior(k), 0.0, atol=1e-6)

    def test_flat_dem(self):
        layers = terrain_params(np.full((8, 8), 100.0), G)
        for a in layers.as_dict().values():
            np.testing.assert_array_equal(interior(a), 0.0)

    def test_hemisphere_is_umbilic(self):
        radius = 3000.0
        z = surface(lambda x, y: np.sqrt(radius**2 - (x - 165) ** 2 - (y - 150) ** 2), shape=(21, 23))
        layers = terrain_params(z, G)
        # a sphere bends by 1/R in every direction; departure is fit error only
        assert np.nanmax(layers.unsphericity) < 1e-3 / radius

    def test_border_and_nodata_neighbours(self):
        z = surface(lambda x, y: 0.1 * x + 0.2 * y, shape=(7, 7))
        z[3, 3] = np.nan
        layers = terrain_params(z, G)
        for a in layers.as_dict().values():
            assert np.isnan(a[0]).all()
            assert np.isnan(a[2:5, 2:5]).all()
            assert not np.isnan(a[1, 1])

    def test_ranges(self, rng):
        z = smooth_dem(rng.random((40, 40)) * 500, 2)
        layers = terrain_params(z, G)
        ok = ~np.isnan(layers.slope)
        assert (layers.slope[ok] >= 0).all() and (layers.slope[ok] <= 90).all()
        assert (layers.unsphericity[ok] >= 0).all()
        assert (layers.sad_index[ok] >= 0).all() and (layers.sad_index[ok] <= 1).all()

    def test_profile_curvature_sign(self):
        # convex-up ridge crest along x: downslope flow decelerates on a concave profile
        fn = lambda x, y: 0.2 * x + 0.001 * x * x  # noqa: E731
        kv = interior(terrain_params(surface(fn), G).profile_curvature)
        assert (kv < 0).all()

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_rotation(self, rng, k):
        z = smooth_dem(rng.random((30, 30)) * 300, 2)
        a = terrain_params(z, G)
        b = terrain_params(np.rot90(z, k), G)
        for name in ("slope", "profile_curvature", "tangential_curvature", "unsphericity", "sad_index"):
            np.testing.assert_allclose(
                getattr(b, name), np.rot90(getattr(a, name), k), rtol=0, atol=1e-5, err_msg=name
            )

    @pytest.mark.parametrize(
        "fn",
        [
            lambda x, y: 0.002 * x * x - 0.001 * y * y + 0.0005 * x * y + 0.3 * x,
            lambda x, y: 1e-6 * x**3 + 0.4 * y,
            lambda x, y: 1e-6 * y**3 - 2e-6 * x**3 + 0.1 * x - 0.2 * y,
        ],
    )
    def test_slope_matches_finite_difference(self, fn):
        z = surface(fn)
        slope = terrain_params(z, G).slope
        xx, yy = surface(lambda x, y: x), surface(lambda x, y: y)
        np.testing.assert_allclose(interior(slope), interior(fd_slope_deg(fn, xx, yy)), rtol=0, atol=1e-6)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.1, 10.0), st.integers(0, 2**16))
    def test_elevation_scaling(self, scale, seed):
        rng = np.random.default_rng(seed)
        z = smooth_dem(rng.random((16, 16)) * 200, 2)
        a, b = terrain_params(z, G), terrain_params(scale * z, G)
        expected = np.degrees(np.arctan(scale * np.tan(np.radians(a.slope))))
        np.testing.assert_allclose(b.slope, expected, rtol=1e-9, atol=1e-9)
        # cancellation in the stencils leaves rounding noise relative to z, not to the derivative
        noise = 1e-13 * scale * np.abs(z).max()
        for x, y in zip(derivatives(z, G), derivatives(scale * z, G)):
            np.testing.assert_allclose(y, scale * x, rtol=1e-9, atol=noise)

    def test_unsphericity_scales_at_stationary_point(self):
        fn = lambda x, y: 0.003 * (x - 150) ** 2 - 0.001 * (y - 150) ** 2  # noqa: E731
        z = surface(fn, shape=(21, 21))
        u1 = terrain_params(z, G).unsphericity[10, 10]
        u3 = terrain_params(3 * z, G).unsphericity[10, 10]
        assert u1 > 0
        assert u3 == pytest.approx(3 * u1, rel=1e-12)


class TestSad:
    def test_plane_has_no_divergence(self):
        z = surface(lambda x, y: 0.3 * x - 0.1 * y, shape=(25, 25))
        sad = terrain_params(z, G, sad_radius=5).sad_index
        np.testing.assert_allclose(sad[6:-6, 6:-6], 0.0, atol=1e-9)

    def test_opposed_local_slope(self):
        # a small west-rising bump on a long east-rising ramp
        z = surface(lambda x, y: 0.5 * x, shape=(25, 25))
        z[:, 12] -= 20.0
        z[:, 13] -= 40.0
        sad = terrain_params(z, G, sad_radius=5).sad_index
        assert sad[12, 12] == pytest.approx(1.0)
