"""Markov-switching models of spread and mid-price dynamics for large-tick assets."""

__version__ = "0.1.0"

from .core import (
    SupportViolation,
    allowed_returns,
    binarize_return,
    decode_transition,
    encode_transition,
)
from .markov import (
    ReducibleChainError,
    SpreadChainParams,
    spread_stationary,
    stationary_distribution,
    transition_stationary,
)
from .ms_model import MsParams, acf_squared, unconditional_moments
from .dcmm import DcmmParams, acf_squared_dcmm, e3_closed_form
from .simulate import SimConfig, SimPath, run_ensemble, simulate_path, simulate_spread
from .calibrate import estimate_counts, fit_logit_irls, fit_power_law
from .stats import aggregate_returns, aggregate_stats, sample_acf

__all__ = [
    "SupportViolation",
    "allowed_returns",
    "binarize_return",
    "decode_transition",
    "encode_transition",
    "ReducibleChainError",
    "SpreadChainParams",
    "spread_stationary",
    "stationary_distribution",
    "transition_stationary",
    "MsParams",
    "acf_squared",
    "unconditional_moments",
    "DcmmParams",
    "acf_squared_dcmm",
    "e3_closed_form",
    "SimConfig",
    "SimPath",
    "run_ensemble",
    "simulate_path",
    "simulate_spread",
    "estimate_counts",
    "fit_logit_irls",
    "fit_power_law",
    "aggregate_returns",
    "aggregate_stats",
    "sample_acf",
]
