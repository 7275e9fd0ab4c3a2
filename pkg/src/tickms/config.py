"""Parameter files: flat ``key = value`` entries in INI sections.

Example::

    [run]
    preset = msft-high      ; optional starting point
    model = dcmm
    p = 3
    length = 1000000
    runs = 25
    seed = 42

    [chain]
    p11 = 0.953
    p21 = 0.522             ; or: bernoulli_p = 0.917

    [ms]
    theta1 = 0.0481
    theta4 = 0.00151

    [dcmm]
    alpha1 = -2.921
    beta1 = -0.156, -0.0403, 0.0218
    theta4 = 0.00151

Keys given in a file override the preset; command-line flags override both.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from typing import Optional

from .dcmm import DcmmParams
from .markov import SpreadChainParams, spread_stationary
from .ms_model import MsParams
from . import presets

RUN_KEYS = {
    "model": str,
    "p": int,
    "length": int,
    "runs": int,
    "seed": int,
    "burn_in": int,
    "max_lag": int,
    "window": str,
    "overlap": str,
    "preset": str,
}
DEFAULT_PRESET = "msft-high"


class ConfigError(ValueError):
    """Parameter file is malformed or incomplete."""


@dataclass
class ParamFile:
    run: dict = field(default_factory=dict)
    chain: dict = field(default_factory=dict)
    ms: dict = field(default_factory=dict)
    dcmm: dict = field(default_factory=dict)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def load_param_file(path) -> ParamFile:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    out = ParamFile()
    unknown = set(cp.sections()) - {"run", "chain", "ms", "dcmm"}
    if unknown:
        raise ConfigError(f"unknown sections: {', '.join(sorted(unknown))}")
    try:
        for key, val in cp.items("run") if cp.has_section("run") else []:
            if key not in RUN_KEYS:
                raise ConfigError(f"unknown key [run] {key}")
            out.run[key] = RUN_KEYS[key](val)
        for sec, keys in (
            ("chain", {"p11", "p21", "bernoulli_p"}),
            ("ms", {"theta1", "theta4"}),
            ("dcmm", {"alpha1", "beta1", "theta4"}),
        ):
            if not cp.has_section(sec):
                continue
            for key, val in cp.items(sec):
                if key not in keys:
                    raise ConfigError(f"unknown key [{sec}] {key}")
                getattr(out, sec)[key] = _floats(val) if key == "beta1" else float(val)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from exc
    return out


def _preset_name(pf: Optional[ParamFile]) -> Optional[str]:
    if pf is None:
        return DEFAULT_PRESET
    name = pf.run.get("preset")
    if name is None and not (pf.chain or pf.ms or pf.dcmm):
        return DEFAULT_PRESET
    if name is not None and name not in presets.PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(presets.PRESETS)}")
    return name


def build_params(model: str, p: Optional[int], pf: Optional[ParamFile]):
    """Model parameters from a preset, a parameter file, or both.

    Without a file the high-activity MSFT preset is used. For ``msb`` a
    non-Bernoulli chain is replaced by i.i.d. spreads with the same
    one-tick probability.
    """
    name = _preset_name(pf)
    base = presets.PRESETS[name] if name else None
    pf = pf or ParamFile()

    chain = base.chain if base else None
    if pf.chain:
        if "bernoulli_p" in pf.chain:
            chain = SpreadChainParams.bernoulli(pf.chain["bernoulli_p"])
        else:
            try:
                chain = SpreadChainParams(pf.chain["p11"], pf.chain["p21"])
            except KeyError as exc:
                raise ConfigError(f"[chain] needs p11 and p21 (missing {exc})") from None
    if chain is None:
        raise ConfigError("no spread chain: give [chain] or a preset")

    if model in ("ms", "msb"):
        th1 = pf.ms.get("theta1", base.theta1 if base else None)
        th4 = pf.ms.get("theta4", base.theta4 if base else None)
        if th1 is None or th4 is None:
            raise ConfigError("[ms] needs theta1 and theta4")
        if model == "msb" and not chain.is_bernoulli:
            chain = SpreadChainParams.bernoulli(float(spread_stationary(chain)[0]))
        return MsParams(chain, th1, th4)

    if model != "dcmm":
        raise ConfigError(f"unknown model {model!r}")
    if p is None:
        raise ConfigError("dcmm needs an order p")
    if "beta1" in pf.dcmm:
        beta = pf.dcmm["beta1"]
        if len(beta) < p:
            raise ConfigError(f"[dcmm] beta1 has {len(beta)} values, order {p} requested")
        beta = beta[:p]
    elif name == DEFAULT_PRESET:
        beta = presets.msft_high_beta(p)
    else:
        raise ConfigError("[dcmm] needs beta1")
    alpha = pf.dcmm.get("alpha1", presets.MSFT_HIGH_ALPHA1 if name == DEFAULT_PRESET else None)
    th4 = pf.dcmm.get("theta4", pf.ms.get("theta4", base.theta4 if base else None))
    if alpha is None or th4 is None:
        raise ConfigError("[dcmm] needs alpha1 and theta4")
    return DcmmParams(p, chain, alpha, beta, th4)
