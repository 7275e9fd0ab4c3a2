"""Monte Carlo paths of spreads, transitions and returns for MS_B, MS and DCMM(p).

Random numbers come from numpy's Philox4x64 counter-based generator seeded
through ``SeedSequence``. A path with master seed ``s`` draws, in this order,
``length + burn_in + 1`` uniforms for the spread chain and then
``length + burn_in`` uniforms for the returns. Run ``i`` of an ensemble uses
the 64-bit seed :func:`run_seed` ``(s, i)``.

Given its uniform ``u``, a return in a constant-spread regime with jump
probability ``eta`` is +2 if ``u < eta/2``, -2 if ``u < eta`` and 0
otherwise; after a spread change it is +1 if ``u < 1/2`` and -1 otherwise.
"""

from __future__ import annotations

import csv
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, TextIO, Union

import numpy as np
from numba import njit

from .core import decode_transition, encode_transitions
from .dcmm import DcmmParams
from .markov import SpreadChainParams, spread_stationary
from .ms_model import MsParams
from . import stats

PATH_HEADER = ("t", "s", "x", "r")
DEFAULT_LENGTH = 1_000_000
DEFAULT_RUNS = 25


class Model(str, Enum):
    MSB = "msb"
    MS = "ms"
    DCMM = "dcmm"


def default_burn_in(model: Model, p: int = 0) -> int:
    """MS paths start from the stationary spread law and need none."""
    if Model(model) is Model.DCMM:
        return max(10 * p, 1000)
    return 0


@dataclass(frozen=True)
class SimConfig:
    model: Model
    params: Union[MsParams, DcmmParams]
    length: int = DEFAULT_LENGTH
    seed: int = 0
    burn_in: Optional[int] = None
    n_runs: int = DEFAULT_RUNS

    def __post_init__(self):
        model = Model(self.model)
        object.__setattr__(self, "model", model)
        if model is Model.DCMM:
            if not isinstance(self.params, DcmmParams):
                raise ValueError("DCMM simulation needs DcmmParams")
        else:
            if not isinstance(self.params, MsParams):
                raise ValueError(f"{model.value} simulation needs MsParams")
            if model is Model.MSB and not self.params.is_bernoulli:
                raise ValueError("MS_B simulation needs a Bernoulli spread chain")
        if self.length < 1:
            raise ValueError("length must be >= 1")
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", default_burn_in(model, self.order))
        elif self.burn_in < self.order:
            raise ValueError(f"burn_in must be >= p = {self.order}")

    @property
    def order(self) -> int:
        return self.params.p if isinstance(self.params, DcmmParams) else 0


@dataclass
class SimPath:
    """Simulated path; ``spreads`` has one more entry than the other arrays."""

    spreads: np.ndarray
    transitions: np.ndarray
    returns: np.ndarray
    seed_used: int
    burn_in: int = 0

    def __len__(self) -> int:
        return int(self.returns.size)

    def to_tick_series(self):
        from .ingest import Segment, TickSeries

        return TickSeries([Segment(self.spreads, self.returns, np.arange(self.spreads.size))])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def run_seed(master: int, index: int) -> int:
    """Seed of run ``index``: first 64-bit word of SeedSequence(master, spawn_key=(index,))."""
    ss = np.random.SeedSequence(int(master), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


@njit(cache=True, nogil=True)
def _spread_kernel(u, p11, p21, pi1):
    n = u.size
    s = np.empty(n, np.int8)
    s[0] = 1 if u[0] < pi1 else 2
    for t in range(1, n):
        stay = p11 if s[t - 1] == 1 else p21
        s[t] = 1 if u[t] < stay else 2
    return s


@njit(cache=True, nogil=True)
def _return_kernel(x, u, eta1_fixed, alpha, beta, eta4):
    n = x.size
    p = beta.size
    r = np.empty(n, np.int8)
    # r2[p + t] holds r(t)^2; the first p slots are the zero-seeded window
    r2 = np.zeros(n + p)
    for t in range(n):
        k = x[t]
        v = u[t]
        if k == 2 or k == 3:
            r[t] = 1 if v < 0.5 else -1
        else:
            if k == 4:
                e = eta4
            elif p == 0:
                e = eta1_fixed
            else:
                z = alpha
                for l in range(p):
                    z += beta[l] * r2[p + t - 1 - l]
                if z >= 0:
                    e = 1.0 / (1.0 + np.exp(-z))
                else:
                    ez = np.exp(z)
                    e = ez / (1.0 + ez)
            if v < 0.5 * e:
                r[t] = 2
            elif v < e:
                r[t] = -2
            else:
                r[t] = 0
        r2[p + t] = r[t] * r[t]
    return r


def _spread_from_uniforms(chain: SpreadChainParams, u: np.ndarray) -> np.ndarray:
    pi1 = float(spread_stationary(chain)[0])
    return _spread_kernel(u, float(chain.p11), float(chain.p21), pi1)


def simulate_spread(chain: SpreadChainParams, length: int, seed: int) -> np.ndarray:
    """Spread path of ``length`` states, the first drawn from the stationary law."""
    if length < 1:
        raise ValueError("length must be >= 1")
    return _spread_from_uniforms(chain, make_rng(seed).random(length))


def simulate_path(config: SimConfig, seed: Optional[int] = None) -> SimPath:
    """Generate one path; ``seed`` overrides ``config.seed``."""
    seed = config.seed if seed is None else int(seed)
    burn = int(config.burn_in)
    total = config.length + burn
    rng = make_rng(seed)
    params = config.params
    spreads = _spread_from_uniforms(params.chain, rng.random(total + 1))
    x = encode_transitions(spreads)
    u = rng.random(total)
    if isinstance(params, DcmmParams):
        r = _return_kernel(
            x, u, 0.0, float(params.alpha1), np.asarray(params.beta1, dtype=float),
            2.0 * params.theta4,
        )
    else:
        r = _return_kernel(x, u, 2.0 * params.theta1, 0.0, np.empty(0), 2.0 * params.theta4)
    return SimPath(
        spreads=spreads[burn:].copy(),
        transitions=x[burn:].copy(),
        returns=r[burn:].copy(),
        seed_used=seed,
        burn_in=burn,
    )


# --- path CSV -------------------------------------------------------------


def write_path_csv(path: SimPath, fh: TextIO) -> None:
    """Columns t,s,x,r; the final spread is implied by the last transition."""
    n = len(path)
    table = np.column_stack(
        (np.arange(n), path.spreads[:n], path.transitions, path.returns)
    ).astype(np.int64)
    fh.write(",".join(PATH_HEADER) + "\n")
    np.savetxt(fh, table, fmt="%d", delimiter=",", newline="\n")


def save_path_csv(path: SimPath, filename: Union[str, os.PathLike]) -> None:
    with open(filename, "w", newline="", encoding="utf-8") as fh:
        write_path_csv(path, fh)


def read_path_csv(source) -> SimPath:
    """Inverse of :func:`write_path_csv` (seed is not stored, set to -1)."""
    from .ingest import InputError, _open_text

    fh, owned = _open_text(source)
    try:
        header = fh.readline().strip()
        if tuple(header.split(",")) != PATH_HEADER:
            raise InputError(f"bad path header {header!r}")
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UserWarning)
                table = np.loadtxt(fh, delimiter=",", dtype=np.int64, ndmin=2)
        except ValueError as exc:
            raise InputError(f"malformed path CSV: {exc}") from exc
    finally:
        if owned:
            fh.close()
    if table.size == 0:
        raise InputError("path CSV has no rows")
    s, x, r = table[:, 1], table[:, 2], table[:, 3]
    last = decode_transition(int(x[-1]))[1]
    spreads = np.append(s, last).astype(np.int8)
    if not np.array_equal(encode_transitions(spreads), x):
        raise InputError("transition column inconsistent with spreads")
    return SimPath(spreads, x.astype(np.int8), r.astype(np.int8), seed_used=-1)


# --- ensembles ------------------------------------------------------------

Statistic = Callable[[SimPath], Union[float, np.ndarray]]


def _stat_acf_r2(lag: int) -> Statistic:
    return lambda path: float(
        stats.sample_acf(path.returns.astype(float) ** 2, lag).values[lag]
    )


def named_statistic(name: str) -> Statistic:
    """Statistic from a name: mean_r, sigma, pi1, kappa:<dt>, sigma_n:<dt>, acf_r2:<lag>."""
    base, _, arg = name.partition(":")
    if base == "mean_r" and not arg:
        return lambda path: float(path.returns.mean())
    if base == "sigma" and not arg:
        return lambda path: float(path.returns.std())
    if base == "pi1" and not arg:
        return lambda path: float(np.mean(path.spreads == 1))
    if base in ("kappa", "sigma_n", "acf_r2") and arg.isdigit() and int(arg) >= 1:
        k = int(arg)
        if base == "kappa":
            return lambda path: stats.aggregate_stats(path.returns, k, with_histogram=False).kappa
        if base == "sigma_n":
            return lambda path: stats.aggregate_stats(path.returns, k, with_histogram=False).sigma_n
        return _stat_acf_r2(k)
    raise ValueError(f"unknown statistic {name!r}")


@dataclass(frozen=True)
class EnsembleResult:
    values: np.ndarray
    seeds: tuple[int, ...]
    mean: np.ndarray
    # None when only one run is available
    sd: Optional[np.ndarray]

    @property
    def n_runs(self) -> int:
        return len(self.seeds)

    @property
    def se(self) -> Optional[np.ndarray]:
        return None if self.sd is None else self.sd / np.sqrt(self.n_runs)


def run_ensemble(
    config: SimConfig,
    statistic: Union[str, Statistic],
    workers: Optional[int] = None,
) -> EnsembleResult:
    """Evaluate ``statistic`` on ``config.n_runs`` independent paths.

    Runs may execute on a thread pool; results are stored by run index so the
    output does not depend on scheduling.
    """
    fn = named_statistic(statistic) if isinstance(statistic, str) else statistic
    seeds = tuple(run_seed(config.seed, i) for i in range(config.n_runs))
    workers = workers or min(config.n_runs, os.cpu_count() or 1)

    def one(seed):
        return np.asarray(fn(simulate_path(config, seed)), dtype=float)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, seeds))
    else:
        results = [one(s) for s in seeds]
    values = np.stack(results)
    sd = values.std(axis=0, ddof=1) if len(seeds) > 1 else None
    return EnsembleResult(values, seeds, values.mean(axis=0), sd)


def write_ensemble_csv(result: EnsembleResult, fh: TextIO, labels=None) -> None:
    """One row per run plus mean and (when available) sd rows."""
    vals = result.values.reshape(result.n_runs, -1)
    labels = labels or [f"v{j}" for j in range(vals.shape[1])]
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["run", "seed", *labels])
    for i, (seed, row) in enumerate(zip(result.seeds, vals)):
        w.writerow([i, seed, *(repr(float(v)) for v in row)])
    w.writerow(["mean", "", *(repr(float(v)) for v in np.ravel(result.mean))])
    if result.sd is not None:
        w.writerow(["sd", "", *(repr(float(v)) for v in np.ravel(result.sd))])
