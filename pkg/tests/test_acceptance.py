"""Acceptance criteria 1-14.

Each test carries ``@pytest.mark.criterion(n)``; the terminal summary prints
one PASS/FAIL line per criterion. Monte Carlo seeds follow the fixed rule
``1000 + n`` (criterion number) and are not tuned.
"""

import subprocess
import sys
import time

import numpy as np
import pytest

from tickms import stats
from tickms.calibrate import estimate_counts, fit_dcmm, fit_power_law
from tickms.dcmm import (
    DcmmParams,
    acf_squared_dcmm_curve,
    e3_closed_form,
    e3_numeric,
    eta,
)
from tickms.markov import (
    SpreadChainParams,
    spread_stationary,
    stationary_distribution,
    transition_matrix,
    transition_stationary,
)
from tickms.ms_model import MsParams, acf_squared_curve, unconditional_moments
from tickms.presets import (
    MSFT_HIGH,
    MSFT_HIGH_CHAIN,
    MSFT_HIGH_EXCESS_KURTOSIS,
    MSFT_HIGH_SIGMA,
    MSFT_LOW_CHAIN,
    msft_high_dcmm,
    msft_high_msb,
)
from tickms.simulate import SimConfig, run_ensemble, run_seed, simulate_path

criterion = pytest.mark.criterion


def seed_for(n, i=None):
    return 1000 + n if i is None else run_seed(1000 + n, i)


def random_chains(rng, n):
    return [SpreadChainParams(*rng.uniform(0.01, 0.99, 2)) for _ in range(n)]


# 1 ------------------------------------------------------------------------


@criterion(1)
def test_stationary_closed_forms():
    chains = random_chains(np.random.default_rng(seed_for(1)), 1000)
    start = time.perf_counter()
    numeric = [
        (stationary_distribution(c.matrix()), stationary_distribution(transition_matrix(c)))
        for c in chains
    ]
    elapsed = time.perf_counter() - start
    for c, (pi_num, lam_num) in zip(chains, numeric):
        pi1 = c.p21 / (1 - c.p11 + c.p21)
        pi = np.array([pi1, 1 - pi1])
        lam = np.array([pi1 * c.p11, pi1 * (1 - c.p11), (1 - pi1) * c.p21, (1 - pi1) * (1 - c.p21)])
        np.testing.assert_allclose(pi_num, pi, atol=1e-10)
        np.testing.assert_allclose(lam_num, lam, atol=1e-10)
        np.testing.assert_allclose(spread_stationary(c), pi, atol=1e-10)
        np.testing.assert_allclose(transition_stationary(c), lam, atol=1e-10)
    assert elapsed < 1.0, f"numeric stationary laws took {elapsed:.2f} s"


# 2 ------------------------------------------------------------------------


@criterion(2)
def test_table2_spread_frequencies():
    high = spread_stationary(MSFT_HIGH_CHAIN)[0]
    low = spread_stationary(MSFT_LOW_CHAIN)[0]
    assert high == pytest.approx(0.9174, abs=1e-4)
    assert abs(high - 0.917) <= 5e-4
    assert low == pytest.approx(0.9516, abs=1e-4)
    assert abs(low - 0.952) <= 5e-4


# 3 ------------------------------------------------------------------------


@criterion(3)
def test_model_implied_table1_moments():
    mom = unconditional_moments(MSFT_HIGH)
    assert mom.sigma == pytest.approx(0.650, abs=5e-4)
    assert abs(mom.excess_kurtosis - 5.0) < 0.05
    assert abs(mom.sigma / MSFT_HIGH_SIGMA - 1) < 0.02
    assert abs(mom.excess_kurtosis / MSFT_HIGH_EXCESS_KURTOSIS - 1) < 0.05


# 4 ------------------------------------------------------------------------


@criterion(4)
def test_ms_acf_geometry():
    for chain in random_chains(np.random.default_rng(seed_for(4)), 20) + [MSFT_HIGH_CHAIN]:
        par = MsParams(chain, 0.05, 0.01)
        rho = acf_squared_curve(par, 51)
        if abs(chain.p11 - chain.p21) < 0.05:
            continue
        np.testing.assert_allclose(rho[1:] / rho[:-1], chain.p11 - chain.p21, atol=1e-10)
    rho_b = acf_squared_curve(msft_high_msb(), 50)
    np.testing.assert_allclose(rho_b[1:], rho_b[1], atol=1e-12)


# 5 ------------------------------------------------------------------------


@criterion(5)
def test_e3_closed_form_and_table_value():
    rng = np.random.default_rng(seed_for(5))
    for chain in random_chains(rng, 100):
        par = DcmmParams(1, chain, rng.uniform(-4, 0), (rng.uniform(-1, 1),), rng.uniform(0, 0.4))
        assert e3_closed_form(par) == pytest.approx(e3_numeric(par), abs=1e-10)
    table = msft_high_dcmm(1)
    assert round(e3_closed_form(table), 4) == -0.0202
    assert acf_squared_dcmm_curve(table, 1, method="coupled")[0] < 0
    assert acf_squared_dcmm_curve(table, 1, method="averaged")[0] < 0


# 6 ------------------------------------------------------------------------


def rho_p1_oracle(par: DcmmParams, max_lag: int) -> np.ndarray:
    """Three-state mixture chain for p = 1 written out by hand.

    State = current r^2 in (4, 1, 0); row = previous r^2.
    """
    lam = transition_stationary(par.chain)
    S = np.zeros((3, 3))
    for i, prev in enumerate((4.0, 1.0, 0.0)):
        e1 = eta(1, [prev], par)
        e4 = eta(4, [prev], par)
        S[i] = [lam[0] * e1 + lam[3] * e4, lam[1] + lam[2], lam[0] * (1 - e1) + lam[3] * (1 - e4)]
    w, v = np.linalg.eig(S.T)
    psi = np.real(v[:, np.argmin(np.abs(w - 1))])
    psi /= psi.sum()
    d = np.array([4.0, 1.0, 0.0])
    e2, e4_ = psi @ d, psi @ d**2
    return np.array(
        [((psi * d) @ np.linalg.matrix_power(S, t) @ d - e2**2) / (e4_ - e2**2)
         for t in range(1, max_lag + 1)]
    )


@criterion(6)
def test_vector_state_embedding():
    start = time.perf_counter()
    par1 = msft_high_dcmm(1)
    np.testing.assert_allclose(
        acf_squared_dcmm_curve(par1, 20, method="averaged"), rho_p1_oracle(par1, 20), atol=1e-12
    )
    for p in (1, 2, 3):
        par = msft_high_dcmm(p)
        for method in ("coupled", "averaged"):
            direct = acf_squared_dcmm_curve(par, 20, method=method, path="direct")
            marginal = acf_squared_dcmm_curve(par, 20, method=method, path="marginal")
            np.testing.assert_allclose(direct, marginal, atol=1e-12)
        analytic = acf_squared_dcmm_curve(par, 10)
        path = simulate_path(SimConfig("dcmm", par, length=1_000_000, seed=seed_for(6, p)))
        r2 = path.returns.astype(float) ** 2
        mc = stats.sample_acf(r2, 10).values[1:]
        se = stats.acf_batch_se(r2, 10)
        z = (mc - analytic) / se
        assert np.all(np.abs(z) <= 3), f"p={p}: z={np.round(z, 2)}"
    assert time.perf_counter() - start < 120


# 7 ------------------------------------------------------------------------


@criterion(7)
def test_dcmm_nests_ms():
    rng = np.random.default_rng(seed_for(7))
    for chain in random_chains(rng, 5) + [MSFT_HIGH_CHAIN]:
        th1, th4 = rng.uniform(0.005, 0.3, 2)
        ms = acf_squared_curve(MsParams(chain, th1, th4), 50)
        alpha = np.log(2 * th1 / (1 - 2 * th1))
        for p in (1, 2, 3):
            d = DcmmParams(p, chain, alpha, (0.0,) * p, th4)
            np.testing.assert_allclose(acf_squared_dcmm_curve(d, 50), ms, atol=1e-10)


# 8 ------------------------------------------------------------------------


@criterion(8)
def test_simulate_recover():
    start = time.perf_counter()
    path = simulate_path(SimConfig("ms", MSFT_HIGH, length=1_000_000, seed=seed_for(8)))
    est = estimate_counts(path.to_tick_series())
    truth = {
        "pi1": float(spread_stationary(MSFT_HIGH_CHAIN)[0]),
        "p11": MSFT_HIGH_CHAIN.p11,
        "p21": MSFT_HIGH_CHAIN.p21,
        "theta1": MSFT_HIGH.theta1,
        "theta4": MSFT_HIGH.theta4,
    }
    for key, value in truth.items():
        got = getattr(est, f"{key}_hat")
        assert abs(got - value) <= 3 * est.std_errors[key], (key, got, value)

    for p in range(1, 11):
        par = msft_high_dcmm(p)
        sim = simulate_path(SimConfig("dcmm", par, length=1_000_000, seed=seed_for(8, p)))
        _, fit = fit_dcmm(sim.to_tick_series(), p)
        assert fit.converged
        z = (fit.coefficients - np.r_[par.alpha1, par.beta1]) / fit.std_errors
        assert np.all(np.abs(z) <= 3), f"p={p}: z={np.round(z, 2)}"
    assert time.perf_counter() - start < 300


# 9 ------------------------------------------------------------------------

KAPPA_SCALES = [2**k for k in range(10)]


def kappa_curve(path):
    return np.array(
        [stats.aggregate_stats(path.returns, d, with_histogram=False).kappa for d in KAPPA_SCALES]
    )


@criterion(9)
def test_kurtosis_scaling():
    window = (8, 512)
    ms = run_ensemble(SimConfig("ms", MSFT_HIGH, seed=seed_for(9)), kappa_curve)
    fit_ms = fit_power_law(ms.mean, KAPPA_SCALES, window)
    assert 0.85 <= fit_ms.exponent <= 1.15, fit_ms
    dc = run_ensemble(SimConfig("dcmm", msft_high_dcmm(50), seed=seed_for(9)), kappa_curve)
    fit_dc = fit_power_law(dc.mean, KAPPA_SCALES, window)
    assert fit_dc.exponent < 0.85, fit_dc


# 10 -----------------------------------------------------------------------


@criterion(10)
def test_acf_power_law():
    start = time.perf_counter()
    conf = SimConfig("dcmm", msft_high_dcmm(50), seed=seed_for(10))
    res = run_ensemble(
        conf, lambda path: stats.sample_acf(path.returns.astype(float) ** 2, 50).values[1:]
    )
    fit = fit_power_law(res.mean, window=(6, 50))
    assert abs(fit.exponent - 0.30) <= 0.10, fit
    assert time.perf_counter() - start < 600


# 11 -----------------------------------------------------------------------


@criterion(11)
@pytest.mark.parametrize(
    "model,params",
    [("msb", msft_high_msb()), ("ms", MSFT_HIGH), ("dcmm", msft_high_dcmm(10))],
)
def test_parity_invariant(model, params):
    for i in range(20):
        path = simulate_path(SimConfig(model, params, length=100_000, seed=seed_for(11, i)))
        s = path.spreads.astype(np.int64)
        price = np.r_[0, np.cumsum(path.returns, dtype=np.int64)]
        for dt in range(1, 257):
            odd = (price[dt:] - price[:-dt]) % 2 == 1
            assert np.array_equal(odd, s[dt:] != s[:-dt]), (i, dt)
        assert stats.parity_violations(path.spreads, path.returns, 256) == 0


# 12 -----------------------------------------------------------------------

DIFFUSION_SCALES = np.arange(1, 513)


def sigma_ratio(path):
    s = stats.sigma_n_curve(path.returns, DIFFUSION_SCALES)
    return s[1:] / s[0]


@criterion(12)
@pytest.mark.parametrize("model,params", [("ms", MSFT_HIGH), ("dcmm", msft_high_dcmm(50))])
def test_diffusivity(model, params):
    res = run_ensemble(SimConfig(model, params, seed=seed_for(12)), sigma_ratio)
    z = (res.mean - 1.0) / res.se
    bad = DIFFUSION_SCALES[1:][np.abs(z) > 3]
    assert bad.size == 0, f"{bad.size} scales outside 3 SE, worst z={z[np.argmax(np.abs(z))]:.2f}"


# 13 -----------------------------------------------------------------------


@criterion(13)
def test_odd_even_histogram():
    path = simulate_path(SimConfig("ms", MSFT_HIGH, length=1_000_000, seed=seed_for(13)))
    agg = stats.aggregate_stats(path.returns, 128)
    tested = [b for b, c in agg.histogram.items() if b % 2 and c >= 100]
    assert len(tested) >= 10
    assert stats.odd_bin_violations(agg.histogram, min_count=100) == []


# 14 -----------------------------------------------------------------------


@criterion(14)
@pytest.mark.parametrize("model", ["msb", "ms", "dcmm"])
def test_byte_identical_paths(model, tmp_path):
    digests = []
    for run in ("a", "b"):
        out = tmp_path / run
        cmd = [sys.executable, "-m", "tickms", "simulate", "--model", model, "--p", "5",
               "--length", "50000", "--runs", "1", "--seed", str(seed_for(14)), "--output", str(out)]
        subprocess.run(cmd, check=True, capture_output=True)
        digests.append((out / "path_000.csv").read_bytes())
    assert digests[0] == digests[1]
    assert len(digests[0]) > 50000
