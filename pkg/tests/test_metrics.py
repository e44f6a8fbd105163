import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aquaspec import mape, r2, rmse


class TestRmse:
    def test_identical_vectors(self):
        assert rmse([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0

    def test_constant_offset(self):
        assert rmse([0.0, 0.0], [3.0, 3.0]) == 3.0

    def test_hand_value(self):
        expected = math.sqrt(4.0 / 3.0)
        assert rmse([1.0, 2.0, 3.0], [1.0, 2.0, 5.0]) == pytest.approx(
            expected, rel=1e-12
        )

    def test_length_mismatch_and_empty(self):
        with pytest.raises(ValueError, match="mismatch"):
            rmse([1.0], [1.0, 2.0])
        with pytest.raises(ValueError):
            rmse([], [])


class TestR2:
    def test_exact_predictions(self):
        assert r2([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 1.0

    def test_mean_predictor_scores_zero(self):
        y = np.array([1.0, 2.0, 3.0, 4.0])
        assert r2(y, np.full_like(y, y.mean())) == 0.0

    def test_hand_value(self):
        assert r2([1.0, 2.0, 3.0], [1.0, 2.0, 5.0]) == pytest.approx(-1.0, rel=1e-12)

    def test_constant_truth_rejected(self):
        with pytest.raises(ValueError, match="constant"):
            r2([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])

    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            r2([1.0], [1.0])


class TestMape:
    def test_exact_predictions(self):
        assert mape([100.0, 200.0], [100.0, 200.0]) == 0.0

    def test_hand_value_ten_percent(self):
        assert mape([100.0, 200.0], [110.0, 180.0]) == pytest.approx(0.10, rel=1e-12)

    def test_zero_truth_guard_names_indices(self):
        with pytest.raises(ValueError, match=r"\[1\]"):
            mape([1.0, 0.0, 2.0], [1.0, 1.0, 2.0])

    def test_exclusion_flag_skips_zeros(self):
        value = mape([1.0, 0.0, 2.0], [1.1, 9.9, 2.2], exclude_zero_truth=True)
        assert value == pytest.approx(0.1, rel=1e-12)

    def test_all_zero_truth_with_flag(self):
        with pytest.raises(ValueError, match="left"):
            mape([0.0, 0.0], [1.0, 1.0], exclude_zero_truth=True)


class TestScaleBehavior:
    """Formula-level checks of the scale sensitivities of MAPE and RMSE."""

    def test_halving_truth_doubles_mape_keeps_rmse(self, rng):
        y = rng.uniform(10.0, 50.0, 40)
        errors = rng.normal(0, 2.0, 40)
        base_mape = mape(y, y + errors)
        base_rmse = rmse(y, y + errors)
        half_mape = mape(y / 2, y / 2 + errors)
        half_rmse = rmse(y / 2, y / 2 + errors)
        assert half_mape == pytest.approx(2.0 * base_mape, rel=1e-12)
        assert half_rmse == pytest.approx(base_rmse, rel=1e-12)

    def test_scaling_by_ten_scales_rmse_keeps_mape(self, rng):
        y = rng.uniform(10.0, 50.0, 40)
        pred = y + rng.normal(0, 2.0, 40)
        assert rmse(10 * y, 10 * pred) == pytest.approx(10 * rmse(y, pred), rel=1e-12)
        assert mape(10 * y, 10 * pred) == pytest.approx(mape(y, pred), rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(2, 30))
def test_metric_sanity_on_random_inputs(seed, n):
    rng = np.random.default_rng(seed)
    y = rng.uniform(1.0, 100.0, n)  # positive, non-constant with prob 1
    pred = y + rng.normal(0, 10.0, n)
    assert rmse(y, pred) >= 0.0
    assert r2(y, pred) <= 1.0
    assert mape(y, pred) >= 0.0
