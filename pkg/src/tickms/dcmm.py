"""Double chain Markov model DCMM(p) with a logit link on past squared returns.

Under a constant one-tick spread (x = 1) the probability of a +-2 move is

    eta_1 = logistic(alpha_1 + sum_l beta_{1,l} r^2(t - l)),

split evenly between the two signs. Spread changes (x = 2, 3) give +-1 with
probability 1/2 each, and x = 4 uses the window-independent rate 2*theta_4.

For analytics the last ``p`` squared returns form a vector state ``Y(t)`` on
``{0, 1, 4}^p``. States are numbered 1..3^p by the base-3 rule in
:func:`index_map`; 0-based, a state is the base-3 number whose digits are
``d = 3 - i`` in {0, 1, 2} (r^2 = 0, 1, 4) with the most recent observation
as the least significant digit.

Two Markov chains are built on top of the regime matrices ``U_k``:

* :func:`build_squared_chain` mixes them with the stationary weights,
  ``S = sum_k lambda_k U_k``. This treats x(t) as i.i.d. and gives the
  closed-form third eigenvalue of :func:`e3_closed_form`.
* :func:`build_coupled_chain` keeps the memory of x(t) by running the joint
  chain on (x(t), Y(t)). It is exact for the simulated process and nests
  the MS model when all betas vanish.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .markov import (
    SpreadChainParams,
    build_transition_chain,
    matrix_power,
    spectrum,
    stationary_distribution,
)
from .core import RETURN_VALUES, _check_transition

MAX_ANALYTIC_ORDER = 12
# r^2 value carried by each base-3 digit
DIGIT_R2 = np.array([0.0, 1.0, 4.0])
DIGIT_R4 = DIGIT_R2**2


class ChainTooLarge(ValueError):
    """Analytic vector-state chain requested beyond the supported order."""


@dataclass(frozen=True)
class DcmmParams:
    p: int
    chain: SpreadChainParams
    alpha1: float
    beta1: tuple[float, ...]
    theta4: float
    gamma: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "beta1", tuple(float(b) for b in self.beta1))
        if self.p < 1:
            raise ValueError("DCMM order p must be >= 1")
        if len(self.beta1) != self.p:
            raise ValueError(f"expected {self.p} beta coefficients, got {len(self.beta1)}")
        if not 0.0 <= self.theta4 < 0.5:
            raise ValueError(f"theta4 must lie in [0, 1/2), got {self.theta4}")
        if self.gamma:
            raise ValueError("return-sign regressors (gamma) are not supported")

    def truncated(self, p: int) -> "DcmmParams":
        """Same model keeping only the first ``p`` lag coefficients."""
        if p > self.p:
            raise ValueError(f"cannot extend order {self.p} to {p}")
        return DcmmParams(p, self.chain, self.alpha1, self.beta1[:p], self.theta4)


def _check_window(window: Sequence[float], p: int) -> np.ndarray:
    w = np.asarray(window, dtype=float)
    if w.shape != (p,):
        raise ValueError(f"window must hold {p} squared returns, got shape {w.shape}")
    if not np.isin(w, (0.0, 1.0, 4.0)).all():
        raise ValueError("window entries must be squared returns in {0, 1, 4}")
    return w


def eta(k: int, window: Sequence[float], params: DcmmParams) -> float:
    """Probability of a +-2 move in regime k in {1, 4} given the window.

    ``window`` lists the last p squared returns oldest first, so
    ``window[-1]`` is r^2(t-1) and is weighted by ``beta1[0]``.
    """
    w = _check_window(window, params.p)
    if k == 1:
        z = params.alpha1 + np.dot(params.beta1, w[::-1])
        return float(expit(z))
    if k == 4:
        return 2.0 * params.theta4
    raise ValueError(f"eta is defined for regimes 1 and 4, got {k}")


def regime_return_pmf(k: int, window: Sequence[float], params: DcmmParams) -> dict[int, float]:
    _check_transition(k)
    pmf = dict.fromkeys(RETURN_VALUES, 0.0)
    if k in (2, 3):
        _check_window(window, params.p)
        pmf[1] = pmf[-1] = 0.5
        return pmf
    e = eta(k, window, params)
    pmf[2] = pmf[-2] = e / 2.0
    pmf[0] = 1.0 - e
    return pmf


# --- vector-state indexing ------------------------------------------------


def index_map(indices: Sequence[int]) -> int:
    """1-based state number of an index tuple (i_1, ..., i_p), each in {1, 2, 3}.

    i_1 is the oldest observation and r^2 = (3 - i)^2.
    """
    p = len(indices)
    if p < 1 or any(i not in (1, 2, 3) for i in indices):
        raise ValueError(f"indices must be a non-empty tuple over {{1,2,3}}, got {indices}")
    m = sum(3 ** (p - l) * (3 - indices[l - 1]) for l in range(1, p))
    return m + 4 - indices[-1]


def index_tuple(m: int, p: int) -> tuple[int, ...]:
    """Inverse of :func:`index_map`."""
    if not 1 <= m <= 3**p:
        raise ValueError(f"state number must lie in 1..{3**p}, got {m}")
    rest = m - 1
    digits = []
    for _ in range(p):
        digits.append(rest % 3)
        rest //= 3
    return tuple(3 - d for d in reversed(digits))


def _check_order(p: int) -> None:
    if p > MAX_ANALYTIC_ORDER:
        raise ChainTooLarge(
            f"analytic chain limited to p <= {MAX_ANALYTIC_ORDER} (3^p states), got p={p}"
        )


def state_linear_predictor(params: DcmmParams) -> np.ndarray:
    """alpha_1 + sum_l beta_l r^2(t-l) for every 0-based vector state."""
    p = params.p
    states = np.arange(3**p)
    z = np.full(states.shape, params.alpha1, dtype=float)
    for l, beta in enumerate(params.beta1):
        digit = (states // 3**l) % 3
        z += beta * DIGIT_R2[digit]
    return z


def build_regime_matrices(params: DcmmParams) -> tuple[sp.csr_matrix, ...]:
    """Transition matrices U_1..U_4 of Y(t) -> Y(t+1), one per regime."""
    _check_order(params.p)
    n = 3**params.p
    states = np.arange(n)
    shifted = (states % 3 ** (params.p - 1)) * 3

    def two_point(p_move: np.ndarray) -> sp.csr_matrix:
        rows = np.concatenate([states, states])
        cols = np.concatenate([shifted + 2, shifted])
        vals = np.concatenate([p_move, 1.0 - p_move])
        keep = vals != 0.0
        return sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n))

    u1 = two_point(expit(state_linear_predictor(params)))
    u2 = sp.csr_matrix((np.ones(n), (states, shifted + 1)), shape=(n, n))
    u4 = two_point(np.full(n, 2.0 * params.theta4))
    return u1, u2, u2.copy(), u4


@dataclass(frozen=True)
class SquaredReturnChain:
    """Vector-state chain with stationary law and squared-return marginal.

    ``psi`` is ordered as (P(r^2=4), P(r^2=1), P(r^2=0)).
    """

    p: int
    S: sp.csr_matrix
    Psi: np.ndarray
    psi: np.ndarray
    # digit (0, 1, 2 for r^2 = 0, 1, 4) of the current observation in each state
    current_digit: np.ndarray = field(repr=False)

    @property
    def e_r2(self) -> float:
        return float(4 * self.psi[0] + self.psi[1])

    @property
    def e_r4(self) -> float:
        return float(16 * self.psi[0] + self.psi[1])


def _marginal(stationary: np.ndarray, current_digit: np.ndarray) -> np.ndarray:
    by_digit = np.bincount(current_digit, weights=stationary, minlength=3)
    return by_digit[::-1].copy()


def build_squared_chain(params: DcmmParams) -> SquaredReturnChain:
    """Mixture chain S = sum_k lambda_k U_k (x(t) drawn i.i.d. from lambda)."""
    _, lam = build_transition_chain(params.chain)
    mats = build_regime_matrices(params)
    S = sum(l * U for l, U in zip(lam, mats)).tocsr()
    Psi = stationary_distribution(S if S.shape[0] > 729 else S.toarray())
    digit = np.arange(S.shape[0]) % 3
    return SquaredReturnChain(params.p, S, Psi, _marginal(Psi, digit), digit)


def build_coupled_chain(params: DcmmParams) -> SquaredReturnChain:
    """Joint chain on (x(t), Y(t)) with 4 * 3^p states, x-major ordering.

    Entry ((k, m), (k', n)) equals M[k, k'] * U_{k'}[m, n]: the next spread
    transition is drawn first, then the squared return under that regime.
    """
    M, _ = build_transition_chain(params.chain)
    mats = build_regime_matrices(params)
    T = sp.bmat([[M[k, kk] * mats[kk] for kk in range(4)] for k in range(4)], format="csr")
    T.eliminate_zeros()
    Phi = stationary_distribution(T if T.shape[0] > 729 else T.toarray())
    digit = np.arange(T.shape[0]) % 3
    return SquaredReturnChain(params.p, T, Phi, _marginal(Phi, digit), digit)


def build_return_chain_p1(params: DcmmParams) -> np.ndarray:
    """5x5 return-level matrix N = sum_k lambda_k A_k for DCMM(1).

    Rows index r(t-1) = 3 - i and columns r(t) = 3 - j, i, j in 1..5.
    """
    if params.p != 1:
        raise ValueError("the return-level chain is only defined for p = 1")
    _, lam = build_transition_chain(params.chain)
    r_prev = 3 - np.arange(1, 6)
    eta1 = expit(params.alpha1 + params.beta1[0] * r_prev**2)
    A1 = np.zeros((5, 5))
    A1[:, 0] = A1[:, 4] = eta1 / 2
    A1[:, 2] = 1 - eta1
    A2 = np.zeros((5, 5))
    A2[:, 1] = A2[:, 3] = 0.5
    A4 = np.zeros((5, 5))
    A4[:, 0] = A4[:, 4] = params.theta4
    A4[:, 2] = 1 - 2 * params.theta4
    return lam[0] * A1 + (lam[1] + lam[2]) * A2 + lam[3] * A4


def e3_closed_form(params: DcmmParams) -> float:
    """Third eigenvalue of the mixture chain S for p = 1."""
    if params.p != 1:
        raise ValueError("closed-form e3 is only available for p = 1")
    p11, p21 = params.chain.p11, params.chain.p21
    eta1_0 = eta(1, [0.0], params)
    eta1_4 = eta(1, [4.0], params)
    eta4_0 = eta(4, [0.0], params)
    eta4_4 = eta(4, [4.0], params)
    num = (eta4_0 - eta4_4) * (1 - p11 - p21 + p11 * p21) + (eta1_0 - eta1_4) * p11 * p21
    return -num / (p21 - p11 + 1)


def e3_numeric(params: DcmmParams) -> float:
    """Non-trivial eigenvalue of S for p = 1 from the numeric spectrum.

    The spectrum is {1, 0, e3}; the unit root is removed and the larger of
    the other two in modulus is returned.
    """
    if params.p != 1:
        raise ValueError("e3 is only defined for p = 1")
    ev = np.asarray(spectrum(build_squared_chain(params).S), dtype=complex)
    rest = np.delete(ev, np.argmin(np.abs(ev - 1.0)))
    return float(rest[np.argmax(np.abs(rest))].real)


# --- squared-return autocorrelation ---------------------------------------


def _moments(chain: SquaredReturnChain) -> tuple[float, float]:
    return chain.e_r2, chain.e_r4


def rho_direct(chain: SquaredReturnChain, lags: Sequence[int]) -> np.ndarray:
    """rho(tau) = (xi' P^tau delta - E[r^2]^2) / Var[r^2], with P^tau by squaring."""
    if chain.S.shape[0] > 2000:
        raise ChainTooLarge("direct matrix-power path is meant for small chains")
    P = chain.S.toarray()
    delta = DIGIT_R2[chain.current_digit]
    xi = delta * chain.Psi
    e2, e4 = _moments(chain)
    out = np.empty(len(lags))
    for j, tau in enumerate(lags):
        if tau < 1:
            raise ValueError("lag must be >= 1")
        out[j] = (xi @ matrix_power(P, tau) @ delta - e2**2) / (e4 - e2**2)
    return out


def joint_squared_probabilities(chain: SquaredReturnChain, max_lag: int) -> np.ndarray:
    """P(r^2(t) = a, r^2(t+tau) = b) for tau = 1..max_lag.

    Returns an array of shape (max_lag, 3, 3) indexed by digits (0, 1, 2 for
    r^2 = 0, 1, 4). Each entry sums the stationary mass of every state with
    current digit a, propagated tau steps, over every target with digit b.
    """
    P_t = chain.S.T.tocsr()
    out = np.empty((max_lag, 3, 3))
    onehot = np.stack([chain.current_digit == d for d in range(3)]).astype(float)
    for a in range(3):
        u = chain.Psi * onehot[a]
        for k in range(max_lag):
            u = P_t @ u
            out[k, a] = onehot @ u
    return out


def rho_marginal(chain: SquaredReturnChain, lags: Sequence[int]) -> np.ndarray:
    """rho(tau) from joint probabilities of the current squared returns."""
    lags = np.asarray(lags, dtype=int)
    if lags.size == 0:
        return np.empty(0)
    if lags.min() < 1:
        raise ValueError("lag must be >= 1")
    joint = joint_squared_probabilities(chain, int(lags.max()))
    e2, e4 = _moments(chain)
    cross = np.einsum("a,b,kab->k", DIGIT_R2, DIGIT_R2, joint)
    return (cross[lags - 1] - e2**2) / (e4 - e2**2)


def _build(params: DcmmParams, method: str) -> SquaredReturnChain:
    _check_order(params.p)
    if method == "coupled":
        return build_coupled_chain(params)
    if method == "averaged":
        return build_squared_chain(params)
    raise ValueError(f"unknown method {method!r}; use 'coupled' or 'averaged'")


def acf_squared_dcmm_curve(
    params: DcmmParams, max_lag: int, method: str = "coupled", path: str | None = None
) -> np.ndarray:
    """rho(1..max_lag) for DCMM(p).

    ``method='coupled'`` (default) uses the exact joint (x, Y) chain;
    ``method='averaged'`` the mixture chain S. ``path`` selects the direct
    matrix-power formula (default for p = 1) or the joint-probability
    marginalisation (default otherwise).
    """
    chain = _build(params, method)
    if path is None:
        path = "direct" if params.p == 1 else "marginal"
    lags = np.arange(1, max_lag + 1)
    if path == "direct":
        return rho_direct(chain, lags)
    if path == "marginal":
        return rho_marginal(chain, lags)
    raise ValueError(f"unknown path {path!r}; use 'direct' or 'marginal'")


def acf_squared_dcmm(
    params: DcmmParams, tau: int, method: str = "coupled", path: str | None = None
) -> float:
    if tau < 1:
        raise ValueError("lag must be >= 1")
    chain = _build(params, method)
    if path is None:
        path = "direct" if params.p == 1 else "marginal"
    fn = {"direct": rho_direct, "marginal": rho_marginal}.get(path)
    if fn is None:
        raise ValueError(f"unknown path {path!r}")
    return float(fn(chain, [tau])[0])
