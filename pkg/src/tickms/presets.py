"""Parameter sets calibrated on MSFT (NASDAQ, July-August 2009).

High and low activity refer to the intraday subsamples built by
:func:`tickms.ingest.split_regimes`.
"""

from __future__ import annotations

import numpy as np

from .dcmm import DcmmParams
from .markov import SpreadChainParams
from .ms_model import MsParams

MSFT_HIGH_CHAIN = SpreadChainParams(0.953, 0.522)
MSFT_LOW_CHAIN = SpreadChainParams(0.972, 0.550)

MSFT_HIGH = MsParams(MSFT_HIGH_CHAIN, theta1=4.81e-2, theta4=1.51e-3)
MSFT_LOW = MsParams(MSFT_LOW_CHAIN, theta1=2.85e-2, theta4=2.65e-4)

# empirical tick-by-tick summary statistics of the two subsamples
MSFT_HIGH_SIGMA = 0.652
MSFT_HIGH_EXCESS_KURTOSIS = 5.13
MSFT_HIGH_PI1 = 0.917
MSFT_LOW_PI1 = 0.952

MSFT_HIGH_ALPHA1 = -2.921
# logit coefficients on r^2(t-1), ..., r^2(t-25), high activity
MSFT_HIGH_BETA1 = (
    -1.56e-1, -4.03e-2, 2.18e-2, 4.58e-2, 7.13e-2,
    7.59e-2, 5.94e-2, 6.06e-2, 5.94e-2, 5.58e-2,
    5.69e-2, 4.14e-2, 5.79e-2, 5.17e-2, 4.18e-2,
    3.76e-2, 4.86e-2, 5.11e-2, 3.52e-2, 2.96e-2,
    3.92e-2, 2.51e-2, 2.70e-2, 3.50e-2, 2.32e-2,
)
MSFT_HIGH_BETA1_SE = (
    9e-3, 7.4e-3, 7.0e-3, 6.9e-3, 6.8e-3,
    6.8e-3, 6.9e-3, 6.9e-3, 6.9e-3, 7.0e-3,
    6.9e-3, 7.1e-3, 6.9e-3, 7.0e-3, 7.1e-3,
    7.1e-3, 7.0e-3, 7.0e-3, 7.1e-3, 7.2e-3,
    7.1e-3, 7.2e-3, 7.2e-3, 7.1e-3, 7.2e-3,
)
BETA_DECAY_EXPONENT = 0.626
# lags used to anchor the power-law tail (coefficients are positive from lag 3)
_TAIL_ANCHOR = (3, 25)


def beta_tail_prefactor(exponent: float = BETA_DECAY_EXPONENT) -> float:
    """Prefactor c of beta_i = c * i**-exponent, least squares in log space."""
    lo, hi = _TAIL_ANCHOR
    i = np.arange(lo, hi + 1)
    b = np.asarray(MSFT_HIGH_BETA1[lo - 1 : hi])
    return float(np.exp(np.mean(np.log(b) + exponent * np.log(i))))


def msft_high_beta(p: int) -> tuple[float, ...]:
    """First ``p`` coefficients, extended beyond lag 25 by the power-law decay."""
    if p < 1:
        raise ValueError("order must be >= 1")
    known = list(MSFT_HIGH_BETA1[:p])
    if p > len(MSFT_HIGH_BETA1):
        c = beta_tail_prefactor()
        lags = np.arange(len(MSFT_HIGH_BETA1) + 1, p + 1)
        known.extend((c * lags**-BETA_DECAY_EXPONENT).tolist())
    return tuple(known)


def msft_high_dcmm(p: int) -> DcmmParams:
    return DcmmParams(
        p=p,
        chain=MSFT_HIGH_CHAIN,
        alpha1=MSFT_HIGH_ALPHA1,
        beta1=msft_high_beta(p),
        theta4=MSFT_HIGH.theta4,
    )


def msft_high_msb() -> MsParams:
    """Bernoulli-spread limit matched to the high-activity one-tick frequency."""
    return MsParams(
        SpreadChainParams.bernoulli(MSFT_HIGH_PI1),
        theta1=MSFT_HIGH.theta1,
        theta4=MSFT_HIGH.theta4,
    )


PRESETS = {
    "msft-high": MSFT_HIGH,
    "msft-low": MSFT_LOW,
    "msft-high-msb": msft_high_msb(),
}
