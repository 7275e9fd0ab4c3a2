import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tickms import stats
from tickms.presets import MSFT_HIGH
from tickms.ms_model import acf_squared_curve
from tickms.simulate import SimConfig, simulate_path

int_paths = st.lists(st.sampled_from([-2, -1, 0, 1, 2]), min_size=10, max_size=200)


def naive_acf(x, k):
    x = np.asarray(x, float) - np.mean(x)
    return (x[:-k] @ x[k:]) / (x @ x) if k else 1.0


def test_constant_series_rejected():
    with pytest.raises(ValueError):
        stats.sample_acf(np.ones(100), 5)


def test_too_short_rejected():
    with pytest.raises(ValueError):
        stats.sample_acf(np.arange(5.0), 4)


@settings(max_examples=50)
@given(st.lists(st.floats(-10, 10), min_size=20, max_size=200), st.integers(0, 10))
def test_acf_lag0_and_bounds(x, lag):
    x = np.asarray(x)
    if np.ptp(x) < 1e-6:
        return
    acf = stats.sample_acf(x, lag)
    assert acf.values[0] == 1.0
    assert np.all(np.abs(acf.values) <= 1.0 + 1e-12)
    np.testing.assert_allclose(acf.values, [naive_acf(x, k) for k in range(lag + 1)], atol=1e-12)


def test_fft_path_matches_direct():
    x = np.random.default_rng(0).standard_normal(5000)
    long = stats.sample_acf(x, 200).values
    np.testing.assert_allclose(long, [naive_acf(x, k) for k in range(201)], atol=1e-12)


def test_white_noise_inside_band():
    x = np.random.default_rng(1).random(100_000)
    acf = stats.sample_acf(x, 100)
    inside = np.abs(acf.values[1:]) < 4 / np.sqrt(x.size)
    assert inside.mean() >= 0.99
    assert acf.noise_band == pytest.approx(2 / np.sqrt(x.size))


def test_aggregate_examples():
    np.testing.assert_array_equal(stats.aggregate_returns([1, 1, -2], 2), [2, -1])
    r = np.array([1, -1, 2, 0, 1])
    np.testing.assert_array_equal(stats.aggregate_returns(r, 1), r)
    np.testing.assert_array_equal(stats.aggregate_returns(r, 2, overlapping=False), [0, 2])
    with pytest.raises(ValueError):
        stats.aggregate_returns(r, 0)
    with pytest.raises(ValueError):
        stats.aggregate_returns(r, 5)


@given(int_paths, st.integers(1, 9))
def test_aggregate_equals_price_difference(r, dt):
    if len(r) < dt + 1:
        return
    price = np.concatenate(([0], np.cumsum(r)))
    agg = stats.aggregate_returns(r, dt)
    np.testing.assert_array_equal(agg, price[dt:] - price[:-dt])


@given(int_paths, st.integers(1, 5))
def test_histogram_counts(r, dt):
    if len(r) < dt + 4:
        return
    if np.ptp(stats.aggregate_returns(r, dt)) == 0:
        with pytest.raises(ValueError):
            stats.aggregate_stats(r, dt)
        return
    a = stats.aggregate_stats(r, dt)
    assert sum(a.histogram.values()) == a.n
    assert a.sigma >= 0
    assert a.sigma_n == pytest.approx(a.sigma / np.sqrt(dt))


def test_aggregate_stats_needs_four_points():
    with pytest.raises(ValueError):
        stats.aggregate_stats([1, -1, 1, 0], 2)


def test_gaussian_kurtosis_near_zero():
    x = np.random.default_rng(5).standard_normal(200_000)
    # SE of the excess kurtosis of a Gaussian sample is sqrt(24/n)
    assert abs(stats.excess_kurtosis(x)) < 3 * np.sqrt(24 / x.size)


def test_parity_violations_on_handmade_path():
    s = np.array([1, 1, 2, 2, 1])
    r = np.array([0, 1, 2, -1])
    assert stats.parity_violations(s, r, 1) == 0
    assert stats.parity_violations(s, r, 2) == 0
    assert stats.parity_violations(s, np.array([0, 2, 2, -1]), 1) == 1


def test_odd_bin_violations():
    good = {-2: 500, -1: 200, 0: 900, 1: 150, 2: 400, 3: 10}
    assert stats.odd_bin_violations(good) == []
    bad = {0: 300, 1: 400, 2: 350}
    assert stats.odd_bin_violations(bad) == [1]


def test_csv_writers():
    acf = stats.sample_acf(np.random.default_rng(2).random(100), 2)
    buf = io.StringIO()
    stats.write_acf_csv(acf, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "lag,value,band" and len(lines) == 4
    buf = io.StringIO()
    stats.write_histogram_csv({-1: 3, 1: 4}, buf)
    assert buf.getvalue() == "bin,count\n-1,3\n1,4\n"


@pytest.mark.slow
def test_ms_squared_acf_matches_analytic():
    path = simulate_path(SimConfig("ms", MSFT_HIGH, length=1_000_000, seed=99))
    r2 = path.returns.astype(float) ** 2
    est = stats.sample_acf(r2, 20).values[1:]
    se = stats.acf_batch_se(r2, 20)
    np.testing.assert_array_less(np.abs(est - acf_squared_curve(MSFT_HIGH, 20)), 3 * se)


@pytest.mark.slow
def test_parity_on_ms_path():
    path = simulate_path(SimConfig("ms", MSFT_HIGH, length=20_000, seed=3))
    for dt in (1, 7, 64):
        assert stats.parity_violations(path.spreads, path.returns, dt) == 0


@pytest.mark.parametrize("overlapping", [True, False])
def test_sigma_n_curve_matches_aggregate_stats(overlapping):
    r = np.random.default_rng(4).choice([-2, -1, 0, 1, 2], size=3000)
    dts = [1, 2, 7, 64]
    curve = stats.sigma_n_curve(r, dts, overlapping)
    ref = [stats.aggregate_stats(r, d, overlapping, with_histogram=False).sigma_n for d in dts]
    np.testing.assert_allclose(curve, ref, rtol=1e-12)
