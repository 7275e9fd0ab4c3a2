"""Memoryless Markov-switching return model (MS and its Bernoulli limit MS_B).

Returns are drawn independently given the spread transition x(t): under a
constant spread they move by +-2 half ticks with probability theta_k each,
under a spread change they move by +-1 with probability 1/2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import RETURN_VALUES, _check_transition
from .markov import SpreadChainParams, build_transition_chain, matrix_power


@dataclass(frozen=True)
class MsParams:
    chain: SpreadChainParams
    theta1: float
    theta4: float

    def __post_init__(self):
        for name in ("theta1", "theta4"):
            v = getattr(self, name)
            if not 0.0 <= v < 0.5:
                raise ValueError(f"{name} must lie in [0, 1/2), got {v}")

    @property
    def is_bernoulli(self) -> bool:
        return self.chain.is_bernoulli


@dataclass(frozen=True)
class MomentSet:
    """Conditional moment vectors (indexed by x = 1..4) and unconditional moments."""

    m1: np.ndarray
    m2: np.ndarray
    m4: np.ndarray
    e_r: float
    e_r2: float
    e_r4: float
    var_r: float
    var_r2: float

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.var_r))

    @property
    def excess_kurtosis(self) -> float:
        return self.e_r4 / self.e_r2**2 - 3.0


def conditional_return_pmf(x: int, params: MsParams) -> dict[int, float]:
    """P(r | x) over {-2, ..., 2}; zero entries are kept so the dict is total."""
    _check_transition(x)
    pmf = dict.fromkeys(RETURN_VALUES, 0.0)
    if x in (2, 3):
        pmf[1] = pmf[-1] = 0.5
    else:
        th = params.theta1 if x == 1 else params.theta4
        pmf[2] = pmf[-2] = th
        pmf[0] = 1.0 - 2.0 * th
    return pmf


def conditional_moments(params: MsParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    th1, th4 = params.theta1, params.theta4
    m1 = np.zeros(4)
    m2 = np.array([8 * th1, 1.0, 1.0, 8 * th4])
    m4 = np.array([32 * th1, 1.0, 1.0, 32 * th4])
    return m1, m2, m4


def unconditional_moments(params: MsParams) -> MomentSet:
    _, lam = build_transition_chain(params.chain)
    m1, m2, m4 = conditional_moments(params)
    e_r, e_r2, e_r4 = m1 @ lam, m2 @ lam, m4 @ lam
    return MomentSet(
        m1=m1,
        m2=m2,
        m4=m4,
        e_r=float(e_r),
        e_r2=float(e_r2),
        e_r4=float(e_r4),
        var_r=float(e_r2 - e_r**2),
        var_r2=float(e_r4 - e_r2**2),
    )


def _deflated(M, lam) -> np.ndarray:
    """M - 1 lambda'. Its powers equal M^tau - 1 lambda' for tau >= 1, so the
    centred cross moment is formed without subtracting two nearly equal terms."""
    M = np.asarray(M, dtype=float)
    return M - np.outer(np.ones(M.shape[0]), lam)


def zeta_from_moments(lam, M, m1, m2, tau: int) -> float:
    """Linear return autocorrelation for arbitrary conditional moments m1, m2.

    ``lam`` must be the stationary vector of ``M``.
    """
    if tau < 1:
        raise ValueError("lag must be >= 1")
    lam, m1, m2 = (np.asarray(v, dtype=float) for v in (lam, m1, m2))
    mean = m1 @ lam
    num = (lam * m1) @ matrix_power(_deflated(M, lam), tau) @ m1
    return float(num / (m2 @ lam - mean**2))


def rho_from_moments(lam, M, m2, m4, tau: int) -> float:
    """Squared-return autocorrelation for arbitrary conditional moments m2, m4."""
    if tau < 1:
        raise ValueError("lag must be >= 1")
    lam, m2, m4 = (np.asarray(v, dtype=float) for v in (lam, m2, m4))
    e2 = m2 @ lam
    num = (lam * m2) @ matrix_power(_deflated(M, lam), tau) @ m2
    return float(num / (m4 @ lam - e2**2))


def acf_returns(params: MsParams, tau: int) -> float:
    """Autocorrelation of r(t); identically zero since m1 = 0."""
    M, lam = build_transition_chain(params.chain)
    m1, m2, _ = conditional_moments(params)
    return zeta_from_moments(lam, M, m1, m2, tau)


def acf_squared(params: MsParams, tau: int) -> float:
    """Autocorrelation of r(t)^2 at lag ``tau``."""
    M, lam = build_transition_chain(params.chain)
    _, m2, m4 = conditional_moments(params)
    return rho_from_moments(lam, M, m2, m4, tau)


def acf_squared_curve(params: MsParams, max_lag: int) -> np.ndarray:
    """rho(1..max_lag) by iterated propagation instead of one power per lag."""
    M, lam = build_transition_chain(params.chain)
    _, m2, m4 = conditional_moments(params)
    e2 = m2 @ lam
    den = m4 @ lam - e2**2
    D = _deflated(M, lam)
    out = np.empty(max_lag)
    row = lam * m2
    for k in range(max_lag):
        row = row @ D
        out[k] = (row @ m2) / den
    return out
