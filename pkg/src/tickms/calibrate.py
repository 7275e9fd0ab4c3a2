"""Parameter estimation from tick series.

* :func:`estimate_counts` gives the frequency estimators of the spread chain
  and of the jump rates theta_1, theta_4.
* :func:`fit_logit_irls` fits the regime-1 logit of the DCMM by Newton
  iterations (IRLS) with step halving.
* :func:`fit_power_law` is a log-log least squares fit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats as sps
from scipy.special import expit

from .core import support_mask
from .dcmm import DcmmParams
from .markov import SpreadChainParams
from .ms_model import MsParams

SYMMETRY_Z = 3.0
CHUNK_ROWS = 200_000


class EstimationError(ValueError):
    """Estimation cannot proceed on the given data."""


def _ratio(num: int, den: int) -> Optional[float]:
    return None if den == 0 else num / den


def _binom_se(p: Optional[float], n: int) -> Optional[float]:
    return None if p is None else float(np.sqrt(p * (1.0 - p) / n))


@dataclass(frozen=True)
class CountEstimates:
    """Frequency estimates; ``None`` marks an estimate with no data behind it."""

    pi1_hat: Optional[float]
    p11_hat: Optional[float]
    p21_hat: Optional[float]
    theta1_hat: Optional[float]
    theta4_hat: Optional[float]
    counts: dict[str, int]
    std_errors: dict[str, Optional[float]]
    # regime -> (P(+2) - P(-2), z score, flagged)
    symmetry: dict[int, tuple[Optional[float], Optional[float], bool]] = field(
        default_factory=dict
    )

    def chain(self) -> SpreadChainParams:
        if self.p11_hat is None or self.p21_hat is None:
            raise EstimationError("spread chain estimate undefined (a spread state never visited)")
        return SpreadChainParams(self.p11_hat, self.p21_hat)

    def ms_params(self) -> MsParams:
        if self.theta1_hat is None or self.theta4_hat is None:
            raise EstimationError("jump rate undefined (regime never visited)")
        return MsParams(self.chain(), self.theta1_hat, self.theta4_hat)


def estimate_counts(series) -> CountEstimates:
    """Count estimators over all segments of a tick series.

    pi1 = n_1 / N_s, p_ij = n_ij / sum_j n_ij and
    theta_k = (1 - n_0k / N_k) / 2 for k in {1, 4}, where n_0k counts zero
    returns in regime k. Standard errors are binomial.
    """
    s = np.asarray(series.spreads)
    r = np.asarray(series.returns)
    x = np.asarray(series.transitions)
    if s.size == 0:
        raise EstimationError("empty series")
    if not np.isin(s, (1, 2)).all():
        raise EstimationError("spreads must be 1 or 2 ticks")
    if r.size and not support_mask(r, x).all():
        raise EstimationError("returns violate the spread-change parity constraint")

    n1, n_s = int(np.count_nonzero(s == 1)), int(s.size)
    nx = {k: int(np.count_nonzero(x == k)) for k in (1, 2, 3, 4)}
    n0 = {k: int(np.count_nonzero((x == k) & (r == 0))) for k in (1, 4)}
    counts = {
        "n1": n1,
        "N_s": n_s,
        "n11": nx[1],
        "n12": nx[2],
        "n21": nx[3],
        "n22": nx[4],
        "n01": n0[1],
        "N1": nx[1],
        "n04": n0[4],
        "N4": nx[4],
    }
    pi1 = n1 / n_s
    p11 = _ratio(nx[1], nx[1] + nx[2])
    p21 = _ratio(nx[3], nx[3] + nx[4])
    q = {k: _ratio(n0[k], nx[k]) for k in (1, 4)}
    theta = {k: None if q[k] is None else (1.0 - q[k]) / 2.0 for k in (1, 4)}
    ses = {
        "pi1": _binom_se(pi1, n_s),
        "p11": _binom_se(p11, nx[1] + nx[2]),
        "p21": _binom_se(p21, nx[3] + nx[4]),
        "theta1": None if q[1] is None else _binom_se(q[1], nx[1]) / 2.0,
        "theta4": None if q[4] is None else _binom_se(q[4], nx[4]) / 2.0,
    }
    symmetry = {}
    for k in (1, 4):
        up = int(np.count_nonzero((x == k) & (r == 2)))
        down = int(np.count_nonzero((x == k) & (r == -2)))
        if nx[k] == 0:
            symmetry[k] = (None, None, False)
            continue
        z = (up - down) / np.sqrt(up + down) if up + down else 0.0
        symmetry[k] = ((up - down) / nx[k], float(z), bool(abs(z) > SYMMETRY_Z))
    return CountEstimates(pi1, p11, p21, theta[1], theta[4], counts, ses, symmetry)


# --- logit fit ------------------------------------------------------------


@dataclass(frozen=True)
class LogitFit:
    alpha1: float
    beta1: np.ndarray
    std_errors: np.ndarray
    z_values: np.ndarray
    p_values: np.ndarray
    converged: bool
    iterations: int
    loglik: float
    loglik_trace: tuple[float, ...]
    n_obs: int
    ridge: bool = False
    diagnostic: str = ""

    @property
    def coefficients(self) -> np.ndarray:
        return np.concatenate(([self.alpha1], self.beta1))

    @property
    def stars(self) -> list[str]:
        return [significance_stars(p) for p in self.p_values]

    def dcmm_params(self, chain: SpreadChainParams, theta4: float) -> DcmmParams:
        return DcmmParams(self.beta1.size, chain, self.alpha1, tuple(self.beta1), theta4)


def significance_stars(p_value: float) -> str:
    if p_value < 0.001:
        return "***"
    if p_value < 0.01:
        return "**"
    if p_value < 0.05:
        return "*"
    return ""


def regime1_design(series, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Binary jump indicator and lagged squared returns for regime-1 steps.

    Row j of the window matrix holds r^2(t-1), ..., r^2(t-p) for the j-th
    regime-1 step t having a full window inside its segment. Windows are
    stored as int8 to keep long samples compact.
    """
    if p < 0:
        raise ValueError("order must be >= 0")
    bins, wins = [], []
    for seg in series.segments:
        r = seg.returns.astype(np.int8)
        if r.size <= p:
            continue
        x = seg.transitions
        t = np.flatnonzero(x[p:] == 1) + p
        bins.append((r[t] != 0).astype(np.int8))
        if p:
            r2 = r * r
            sw = np.lib.stride_tricks.sliding_window_view(r2, p)
            wins.append(sw[t - p][:, ::-1])
        else:
            wins.append(np.empty((t.size, 0), dtype=np.int8))
    if not bins:
        return np.empty(0, dtype=np.int8), np.empty((0, p), dtype=np.int8)
    return np.concatenate(bins), np.ascontiguousarray(np.concatenate(wins))


def _loglik(y, X, b) -> float:
    total = 0.0
    for lo in range(0, y.size, CHUNK_ROWS):
        eta = b[0] + X[lo : lo + CHUNK_ROWS] @ b[1:]
        total += float(y[lo : lo + CHUNK_ROWS] @ eta - np.logaddexp(0.0, eta).sum())
    return total


def _score_info(y, X, b) -> tuple[np.ndarray, np.ndarray, float]:
    """Score, observed information and the smallest mu(1 - mu) on the sample."""
    k = b.size
    score = np.zeros(k)
    info = np.zeros((k, k))
    wmin = np.inf
    for lo in range(0, y.size, CHUNK_ROWS):
        Xc = np.empty((min(CHUNK_ROWS, y.size - lo), k))
        Xc[:, 0] = 1.0
        Xc[:, 1:] = X[lo : lo + CHUNK_ROWS]
        mu = expit(Xc @ b)
        w = mu * (1.0 - mu)
        score += Xc.T @ (y[lo : lo + CHUNK_ROWS] - mu)
        info += (Xc * w[:, None]).T @ Xc
        wmin = min(wmin, float(w.min()))
    return score, info, wmin


def fit_logit_irls(
    binary,
    windows,
    p: Optional[int] = None,
    max_iter: int = 100,
    score_tol: float = 1e-8,
    rel_tol: float = 1e-12,
) -> LogitFit:
    """Maximum-likelihood logit of ``binary`` on ``windows`` plus an intercept.

    Newton steps start from the zero vector. A step that lowers the
    log-likelihood is halved until it does not, so the trace is monotone.
    The information matrix gets a 1e-8 ridge when it is ill-conditioned.
    Standard errors come from the inverse observed information at the optimum.

    Raises
    ------
    EstimationError
        If the sample has no more than 10 (p + 1) observations.
    """
    y = np.asarray(binary, dtype=float)
    X = np.asarray(windows)
    if X.ndim == 1:
        X = X[:, None]
    p = X.shape[1] if p is None else p
    if X.shape != (y.size, p):
        raise ValueError(f"windows must have shape ({y.size}, {p}), got {X.shape}")
    if y.size <= 10 * (p + 1):
        raise EstimationError(f"need more than {10 * (p + 1)} observations, got {y.size}")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("binary response must be 0/1")

    k = p + 1
    b = np.zeros(k)
    ll = _loglik(y, X, b)
    trace = [ll]
    converged = False
    ridge = False
    diagnostic = ""
    it = 0
    for it in range(1, max_iter + 1):
        score, info, wmin = _score_info(y, X, b)
        if np.abs(score).max() < score_tol:
            converged = True
            it -= 1
            break
        if np.linalg.cond(info) > 1e12:
            info = info + 1e-8 * np.eye(k)
            ridge = True
        step = np.linalg.solve(info, score)
        t = 1.0
        for _ in range(60):
            b_new = b + t * step
            ll_new = _loglik(y, X, b_new)
            if ll_new >= ll:
                break
            t *= 0.5
        else:
            diagnostic = "step halving failed to increase the log-likelihood"
            break
        change = abs(ll_new - ll) / max(abs(ll), 1e-300)
        b, ll = b_new, ll_new
        trace.append(ll)
        if change < rel_tol:
            converged = True
            break
    score, info, wmin = _score_info(y, X, b)
    if wmin < 1e-8 or np.abs(b).max() > 30:
        converged = False
        diagnostic = diagnostic or "quasi-separation: fitted probabilities pinned at 0 or 1"
    elif not converged and not diagnostic:
        diagnostic = f"no convergence in {max_iter} iterations"
    try:
        if np.linalg.cond(info) > 1e12:
            info = info + 1e-8 * np.eye(k)
            ridge = True
        cov = np.linalg.inv(info)
        se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        se = np.full(k, np.nan)
        converged = False
        diagnostic = diagnostic or "singular information matrix"
    with np.errstate(divide="ignore", invalid="ignore"):
        z = b / se
    pvals = 2.0 * sps.norm.sf(np.abs(z))
    return LogitFit(
        alpha1=float(b[0]),
        beta1=b[1:].copy(),
        std_errors=se,
        z_values=z,
        p_values=pvals,
        converged=converged,
        iterations=it,
        loglik=ll,
        loglik_trace=tuple(trace),
        n_obs=int(y.size),
        ridge=ridge,
        diagnostic=diagnostic,
    )


def fit_dcmm(series, p: int) -> tuple[CountEstimates, LogitFit]:
    """Counts for the chain and theta_4, logit for the regime-1 jump rate."""
    counts = estimate_counts(series)
    y, X = regime1_design(series, p)
    return counts, fit_logit_irls(y, X, p)


# --- power laws -----------------------------------------------------------


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    exponent_se: float
    prefactor: float
    window: tuple[int, int]
    n_points: int
    n_excluded: int


def fit_power_law(
    values: Sequence[float],
    indices: Optional[Sequence[float]] = None,
    window: tuple[int, int] = (6, 50),
) -> PowerLawFit:
    """Fit ``value ~ c * index**(-exponent)`` by OLS of log value on log index.

    Only points with ``lo <= index <= hi`` enter; non-positive values inside
    the window are excluded and counted. ``indices`` defaults to 1, 2, ...
    """
    v = np.asarray(values, dtype=float)
    i = np.arange(1, v.size + 1) if indices is None else np.asarray(indices, dtype=float)
    lo, hi = window
    if not lo < hi:
        raise ValueError(f"window must satisfy lo < hi, got {window}")
    if lo <= 0:
        raise ValueError("window must lie on positive indices")
    inside = (i >= lo) & (i <= hi)
    usable = inside & (v > 0) & np.isfinite(v)
    n_excl = int(np.count_nonzero(inside & ~usable))
    if np.count_nonzero(usable) < 3:
        raise EstimationError(f"fewer than 3 positive values in window {window}")
    res = sps.linregress(np.log(i[usable]), np.log(v[usable]))
    return PowerLawFit(
        exponent=float(-res.slope),
        exponent_se=float(res.stderr),
        prefactor=float(np.exp(res.intercept)),
        window=(int(lo), int(hi)),
        n_points=int(np.count_nonzero(usable)),
        n_excluded=n_excl,
    )
