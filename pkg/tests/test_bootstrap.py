import numpy as np
import pytest
from hypothesis import given, strategies as st

from adswap.stats import bootstrap_stat


def test_deterministic_under_seed():
    data = list(np.random.default_rng(1).normal(size=40))
    a = bootstrap_stat(data, "median", n_resamples=300, seed=9)
    b = bootstrap_stat(data, "median", n_resamples=300, seed=9)
    assert (a.point, a.ci_low, a.ci_high) == (b.point, b.ci_low, b.ci_high)
    assert a.resample_mean == b.resample_mean


def test_seed_changes_resamples():
    data = list(np.random.default_rng(1).normal(size=40))
    a = bootstrap_stat(data, "median", n_resamples=300, seed=9)
    b = bootstrap_stat(data, "median", n_resamples=300, seed=10)
    assert (a.ci_low, a.ci_high) != (b.ci_low, b.ci_high)
    assert a.point == b.point  # point estimate ignores the resampling


def test_point_is_plain_statistic():
    data = [3.0, 1.0, 4.0, 1.0, 5.0]
    res = bootstrap_stat(data, "median", n_resamples=10, seed=0)
    assert res.point == 3.0
    assert bootstrap_stat(data, "mean", n_resamples=10, seed=0).point == pytest.approx(2.8)


def test_constant_sample_collapses_ci():
    res = bootstrap_stat([7.0] * 25, "median", n_resamples=200, seed=4)
    assert res.ci == (7.0, 7.0)
    assert res.resample_sd == 0.0


def test_ci_brackets_point_for_symmetric_sample():
    rng = np.random.default_rng(2)
    data = list(rng.normal(0.8, 0.1, size=120))
    res = bootstrap_stat(data, "median", n_resamples=500, seed=3)
    assert res.ci_low <= res.point <= res.ci_high
    assert 0.7 < res.ci_low < res.ci_high < 0.9


def test_mean_ci_width_tracks_standard_error():
    rng = np.random.default_rng(7)
    data = list(rng.normal(0.0, 1.0, size=400))
    res = bootstrap_stat(data, "mean", n_resamples=600, seed=5)
    se = np.std(data, ddof=1) / 20.0
    width = res.ci_high - res.ci_low
    assert 2.8 * se < width < 5.0 * se  # roughly 2 * 1.96 * se


def test_custom_callable_statistic():
    def spread(a):
        return float(a.max() - a.min())

    res = bootstrap_stat([1.0, 2.0, 9.0], spread, n_resamples=50, seed=1)
    assert res.statistic == "spread"
    assert res.point == 8.0


def test_validation_errors():
    with pytest.raises(ValueError):
        bootstrap_stat([], "median")
    with pytest.raises(ValueError):
        bootstrap_stat([1.0], "unknown-stat")
    with pytest.raises(ValueError):
        bootstrap_stat([1.0, 2.0], "median", n_resamples=0)


@given(
    st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=30),
    st.integers(0, 2**31 - 1),
)
def test_ci_is_ordered_and_within_data_range(data, seed):
    res = bootstrap_stat(data, "median", n_resamples=50, seed=seed)
    assert res.ci_low <= res.ci_high
    assert min(data) <= res.ci_low and res.ci_high <= max(data)
