"""Empirical statistics of return paths: ACFs, aggregated returns, sigma_N and kurtosis."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np

FFT_MIN_LAG = 64


@dataclass(frozen=True)
class AcfEstimate:
    lags: np.ndarray
    values: np.ndarray
    n: int
    noise_band: float
    # estimator conventions, echoed into reports
    normalization: str = "biased"


@dataclass(frozen=True)
class AggregateStats:
    dt: int
    sigma: float
    sigma_n: float
    kappa: float
    n: int
    overlapping: bool
    histogram: dict[int, int] = field(repr=False)


def _centered(series) -> np.ndarray:
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise ValueError("series must be one-dimensional")
    if x.size == 0 or np.ptp(x) == 0.0:
        raise ValueError("series has zero variance; autocorrelation undefined")
    return x - x.mean()


def _autocov_sums(x: np.ndarray, max_lag: int) -> np.ndarray:
    """sum_t x_t x_{t+k} for k = 0..max_lag on an already centred series."""
    n = x.size
    if max_lag <= FFT_MIN_LAG:
        out = np.empty(max_lag + 1)
        out[0] = x @ x
        for k in range(1, max_lag + 1):
            out[k] = x[:-k] @ x[k:]
        return out
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(x, nfft)
    return np.fft.irfft(f * np.conj(f), nfft)[: max_lag + 1]


def sample_acf(series, max_lag: int, z: float = 2.0) -> AcfEstimate:
    """Biased sample autocorrelation for lags 0..max_lag.

    rho(k) = sum_t (x_t - m)(x_{t+k} - m) / sum_t (x_t - m)^2, and the i.i.d.
    noise band is +-z / sqrt(n).
    """
    x = np.asarray(series, dtype=float)
    if max_lag < 0 or x.size <= max_lag + 1:
        raise ValueError(f"series of length {x.size} too short for max_lag={max_lag}")
    xc = _centered(x)
    sums = _autocov_sums(xc, max_lag)
    values = sums / sums[0]
    values[0] = 1.0
    return AcfEstimate(np.arange(max_lag + 1), values, x.size, z / np.sqrt(x.size))


def acf_batch_se(series, max_lag: int, n_batches: int = 50) -> np.ndarray:
    """Standard error of the sample ACF at lags 1..max_lag by batch means.

    The series is cut into ``n_batches`` contiguous blocks; the spread of the
    per-block estimates, divided by sqrt(n_batches), estimates the error of
    the full-sample estimate without assuming a linear process.
    """
    x = np.asarray(series, dtype=float)
    blocks = np.array_split(x, n_batches)
    est = np.array([sample_acf(b, max_lag).values[1:] for b in blocks])
    return est.std(axis=0, ddof=1) / np.sqrt(n_batches)


def aggregate_returns(returns, dt: int, overlapping: bool = True) -> np.ndarray:
    """Mid-price change over ``dt`` transactions, r(t, dt) = sum_{u=t}^{t+dt-1} r(u).

    Overlapping windows start at every t; non-overlapping windows at t = 0,
    dt, 2 dt, ...
    """
    r = np.asarray(returns, dtype=np.int64)
    if dt < 1:
        raise ValueError("aggregation scale must be >= 1")
    if r.size < dt + 1:
        raise ValueError(f"need at least {dt + 1} returns for dt={dt}")
    c = np.concatenate(([0], np.cumsum(r)))
    agg = c[dt:] - c[:-dt]
    return agg if overlapping else agg[::dt]


def histogram(values) -> dict[int, int]:
    v, counts = np.unique(np.asarray(values, dtype=np.int64), return_counts=True)
    return {int(a): int(b) for a, b in zip(v, counts)}


def excess_kurtosis(values) -> float:
    x = np.asarray(values, dtype=float)
    x = x - x.mean()
    m2 = np.mean(x**2)
    if m2 == 0.0:
        raise ValueError("zero variance; kurtosis undefined")
    return float(np.mean(x**4) / m2**2 - 3.0)


def aggregate_stats(
    returns, dt: int, overlapping: bool = True, with_histogram: bool = True
) -> AggregateStats:
    agg = aggregate_returns(returns, dt, overlapping)
    if agg.size < 4:
        raise ValueError("need at least 4 aggregated observations")
    x = agg.astype(float)
    sigma = float(x.std())
    return AggregateStats(
        dt=dt,
        sigma=sigma,
        sigma_n=sigma / np.sqrt(dt),
        kappa=excess_kurtosis(x),
        n=int(agg.size),
        overlapping=overlapping,
        histogram=histogram(agg) if with_histogram else {},
    )


def sigma_n_curve(returns, dts, overlapping: bool = True) -> np.ndarray:
    """Normalized volatility sigma(dt) / sqrt(dt) for several scales at once.

    Same values as :func:`aggregate_stats` but without the kurtosis and
    histogram work; the price path is accumulated only once.
    """
    r = np.asarray(returns, dtype=np.int64)
    c = np.concatenate(([0], np.cumsum(r))).astype(float)
    out = np.empty(len(dts))
    for j, dt in enumerate(dts):
        dt = int(dt)
        if dt < 1:
            raise ValueError("aggregation scale must be >= 1")
        if r.size < dt + 1:
            raise ValueError(f"need at least {dt + 1} returns for dt={dt}")
        agg = c[dt:] - c[:-dt]
        if not overlapping:
            agg = agg[::dt]
        out[j] = agg.std() / np.sqrt(dt)
    return out


def parity_violations(spreads, returns, dt: int) -> int:
    """Count windows where the parity of r(t, dt) disagrees with s(t+dt) != s(t)."""
    s = np.asarray(spreads, dtype=np.int64)
    r = np.asarray(returns, dtype=np.int64)
    if s.size != r.size + 1:
        raise ValueError("spread path must be one longer than the return path")
    agg = aggregate_returns(r, dt)
    changed = s[dt:] != s[:-dt]
    return int(np.count_nonzero((agg % 2 == 1) != changed))


def odd_bin_violations(hist: dict[int, int], min_count: int = 100) -> list[int]:
    """Odd bins not strictly below the larger of their even neighbours.

    Only bins whose own count and the larger neighbour count reach
    ``min_count`` are tested.
    """
    bad = []
    for k, c in sorted(hist.items()):
        if k % 2 == 0:
            continue
        neighbour = max(hist.get(k - 1, 0), hist.get(k + 1, 0))
        if c < min_count or neighbour < min_count:
            continue
        if not c < neighbour:
            bad.append(k)
    return bad


# --- CSV emitters ---------------------------------------------------------


def write_acf_csv(acf: AcfEstimate, fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["lag", "value", "band"])
    for lag, value in zip(acf.lags, acf.values):
        w.writerow([int(lag), repr(float(value)), repr(float(acf.noise_band))])


def write_histogram_csv(hist: dict[int, int], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["bin", "count"])
    for k in sorted(hist):
        w.writerow([k, hist[k]])


def write_aggregate_csv(rows: Iterable[AggregateStats], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["dt", "sigma", "sigma_n", "kappa", "n", "overlapping"])
    for a in rows:
        w.writerow([a.dt, repr(a.sigma), repr(a.sigma_n), repr(a.kappa), a.n, int(a.overlapping)])
