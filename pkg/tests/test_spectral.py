import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from glacier_mapper.errors import ConfigError
from glacier_mapper.grid import Grid, MultiBandStack
from glacier_mapper.spectral import baseline_segment, ndvi, normalized_difference, segment_arrays, snow_index


def stack(**bands):
    return MultiBandStack({k: Grid(np.asarray(v, dtype=np.float32), 15.0) for k, v in bands.items()})


class TestIndices:
    def test_ndvi_value(self):
        out = ndvi(stack(B5=[[0.5]], B4=[[0.25]]))
        assert out[0, 0] == pytest.approx(1 / 3)

    def test_snow_index_value(self):
        out = snow_index(stack(B6=[[0.1]], B3=[[0.9]]))
        assert out[0, 0] == pytest.approx(-0.8, abs=1e-7)

    def test_equal_bands_zero(self):
        assert ndvi(stack(B5=[[0.4]], B4=[[0.4]]))[0, 0] == 0.0
        assert snow_index(stack(B6=[[0.7]], B3=[[0.7]]))[0, 0] == 0.0

    def test_zero_denominator_band_is_one(self):
        assert ndvi(stack(B5=[[0.3]], B4=[[0.0]]))[0, 0] == 1.0
        assert snow_index(stack(B6=[[0.3]], B3=[[0.0]]))[0, 0] == 1.0

    def test_nodata_and_zero_sum(self):
        out = ndvi(stack(B5=[[0.0, -9999.0]], B4=[[0.0, 0.2]]))
        assert np.isnan(out).all()

    def test_missing_band_is_config_error(self):
        with pytest.raises(ConfigError, match="B4"):
            ndvi(stack(B5=[[0.5]]))

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_antisymmetric_and_bounded(self, a, b):
        x = normalized_difference(np.array(a), np.array(b))
        y = normalized_difference(np.array(b), np.array(a))
        if a + b == 0:
            assert np.isnan(x) and np.isnan(y)
        else:
            assert x == -y
            assert -1 <= x <= 1

    @given(st.floats(0.01, 1), st.floats(0, 1), st.floats(0, 1))
    def test_monotone_in_numerator(self, b, a1, a2):
        lo, hi = sorted((a1, a2))
        assert normalized_difference(np.array(lo), np.array(b)) <= normalized_difference(np.array(hi), np.array(b))


class TestBaseline:
    def test_thresholds(self):
        index = np.array([-0.8, -0.8, 0.2, -0.39, -0.41])
        slope = np.array([5.0, 30.0, 5.0, 5.0, 23.9])
        assert segment_arrays(index, slope, -0.4, 24.0).tolist() == [True, False, False, False, True]

    def test_nodata_is_negative(self):
        assert not segment_arrays(np.array([np.nan, -0.9]), np.array([5.0, np.nan]), -0.4, 24.0).any()

    def test_from_stack(self):
        s = stack(B6=[[0.1, 0.9]], B3=[[0.9, 0.1]], SLOPE=[[5.0, 5.0]])
        assert baseline_segment(s).tolist() == [[True, False]]

    def test_all_failing_is_empty(self):
        s = stack(B6=[[0.9, 0.9]], B3=[[0.1, 0.1]], SLOPE=[[50.0, 50.0]])
        assert not baseline_segment(s).any()
