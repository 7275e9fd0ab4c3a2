"""Finite-state Markov chain utilities and the spread/transition chains.

Matrices are plain ``numpy`` arrays (row-stochastic, row i = from-state i) or
``scipy.sparse`` matrices for the large vector-state chains of the DCMM.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import lgmres, spsolve

STOCHASTIC_TOL = 1e-12
RESIDUAL_TOL = 1e-10


class ReducibleChainError(ValueError):
    """The chain has no unique stationary distribution."""


def _as_array(P):
    if sp.issparse(P):
        return P
    return np.asarray(P, dtype=float)


def check_stochastic(P, tol: float = STOCHASTIC_TOL) -> None:
    """Raise ``ValueError`` unless ``P`` is square and row-stochastic."""
    P = _as_array(P)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError(f"transition matrix must be square, got shape {P.shape}")
    if sp.issparse(P):
        data = P.data
        rows = np.asarray(P.sum(axis=1)).ravel()
    else:
        data = P
        rows = P.sum(axis=1)
    if data.size and (data.min() < -tol or data.max() > 1 + tol):
        raise ValueError("transition probabilities must lie in [0, 1]")
    err = np.abs(rows - 1.0).max() if rows.size else 0.0
    if err > tol:
        raise ValueError(f"rows must sum to 1 (max deviation {err:.3e})")


@dataclass(frozen=True)
class SpreadChainParams:
    """Two-state Markov chain of the spread, s in {1, 2} ticks.

    ``p11 = P(s'=1 | s=1)`` and ``p21 = P(s'=1 | s=2)``. The Bernoulli limit,
    i.i.d. spreads with ``P(s=1) = p``, has ``p11 = p21 = p``.
    """

    p11: float
    p21: float
    bernoulli_p: Optional[float] = None

    def __post_init__(self):
        for name in ("p11", "p21"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be a probability, got {v}")
        if 1.0 - self.p11 + self.p21 <= 0.0:
            raise ValueError("p11 = 1 with p21 = 0 has no unique stationary law")
        if self.bernoulli_p is not None and not (
            self.p11 == self.p21 == self.bernoulli_p
        ):
            raise ValueError("Bernoulli chain requires p11 = p21 = bernoulli_p")

    @classmethod
    def bernoulli(cls, p: float) -> "SpreadChainParams":
        return cls(p, p, bernoulli_p=p)

    @property
    def is_bernoulli(self) -> bool:
        return self.bernoulli_p is not None

    def matrix(self) -> np.ndarray:
        """Spread transition matrix B."""
        return np.array([[self.p11, 1 - self.p11], [self.p21, 1 - self.p21]])


DENSE_GRAPH_MAX = 200


def _closed_classes_dense(P: np.ndarray) -> list[np.ndarray]:
    # transitive closure by repeated boolean squaring
    n = P.shape[0]
    R = (P > 0) | np.eye(n, dtype=bool)
    for _ in range(max(1, int(np.ceil(np.log2(n))))):
        R = (R.astype(np.int64) @ R.astype(np.int64)) > 0
    # i is recurrent iff everything it reaches can reach it back
    recurrent = ~np.any(R & ~R.T, axis=1)
    classes, seen = [], np.zeros(n, dtype=bool)
    for i in np.flatnonzero(recurrent):
        if not seen[i]:
            members = np.flatnonzero(R[i])
            seen[members] = True
            classes.append(members)
    return classes


def closed_classes(P) -> list[np.ndarray]:
    """Closed communicating classes (sink components of the transition graph)."""
    if not sp.issparse(P) and np.shape(P)[0] <= DENSE_GRAPH_MAX:
        return _closed_classes_dense(np.asarray(P, dtype=float))
    G = sp.csr_matrix(P)
    G.eliminate_zeros()
    _, labels = connected_components(G, directed=True, connection="strong")
    coo = G.tocoo()
    leaving = labels[coo.row] != labels[coo.col]
    open_labels = np.unique(labels[coo.row[leaving]])
    sinks = np.setdiff1d(np.unique(labels), open_labels)
    return [np.flatnonzero(labels == c) for c in sinks]


def stationary_distribution(P) -> np.ndarray:
    """Stationary probability vector of a row-stochastic matrix.

    Dense input: solves ``(P' - I) v = 0`` with the last equation replaced by
    the normalisation ``sum(v) = 1``. Sparse input: pins one recurrent state
    to 1 and solves the remaining nonsingular system with LGMRES (sparse LU
    as fallback), which avoids a dense normalisation row. Both are checked
    against the fixed-point residual. Transient states get zero mass.

    Raises
    ------
    ReducibleChainError
        If the chain has more than one closed class, or the solution fails the
        fixed-point residual check.
    """
    P = _as_array(P)
    check_stochastic(P, tol=1e-10)
    n = P.shape[0]
    classes = closed_classes(P)
    if len(classes) != 1:
        raise ReducibleChainError(
            f"chain has {len(classes)} closed classes; stationary law is not unique"
        )
    if sp.issparse(P):
        pin = int(classes[0][0])
        A = (sp.identity(n, format="csr") - P.T).tocsr()
        keep = np.ones(n, dtype=bool)
        keep[pin] = False
        rhs = np.asarray(A[keep][:, [pin]].todense()).ravel() * -1.0
        B = A[keep][:, keep].tocsc()
        sub, info = lgmres(B, rhs, rtol=1e-13, atol=0.0, maxiter=2000)
        if info != 0:
            with np.errstate(all="ignore"):
                sub = spsolve(B, rhs)
        v = np.empty(n)
        v[pin] = 1.0
        v[keep] = sub
        if not np.all(np.isfinite(v)):
            raise ReducibleChainError("singular system while solving for stationary law")
        v /= v.sum()
    else:
        A = P.T - np.eye(n)
        A[-1, :] = 1.0
        rhs = np.zeros(n)
        rhs[-1] = 1.0
        try:
            v = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError as exc:
            raise ReducibleChainError(f"singular system: chain is reducible ({exc})")
    residual = float(np.abs(P.T @ v - v).max())
    if residual > RESIDUAL_TOL or v.min() < -1e-9:
        raise ReducibleChainError(
            f"no valid stationary vector (residual {residual:.3e}, min {v.min():.3e})"
        )
    v = np.where(v < 0, 0.0, v)
    return v / v.sum()


def matrix_power(P, tau: int) -> np.ndarray:
    """``P**tau`` by repeated squaring (also valid for non-diagonalisable P)."""
    if tau < 0 or int(tau) != tau:
        raise ValueError(f"power must be a non-negative integer, got {tau}")
    P = np.asarray(P.toarray() if sp.issparse(P) else P, dtype=float)
    result = np.eye(P.shape[0])
    base = P.copy()
    k = int(tau)
    while k:
        if k & 1:
            result = result @ base
        k >>= 1
        if k:
            base = base @ base
    return result


def spectrum(P) -> np.ndarray:
    """Eigenvalues sorted by modulus, largest first (ties: larger real part first)."""
    P = np.asarray(P.toarray() if sp.issparse(P) else P, dtype=float)
    try:
        ev = np.linalg.eigvals(P)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(f"eigenvalue computation failed: {exc}") from exc
    order = np.lexsort((-ev.real, -np.round(np.abs(ev), 12)))
    ev = ev[order]
    if np.all(np.abs(ev.imag) < 1e-12):
        ev = ev.real
    return ev


# --- spread and transition chains ----------------------------------------


def spread_stationary(chain: SpreadChainParams) -> np.ndarray:
    """Closed-form stationary law ``pi`` of the spread chain."""
    p11, p22 = chain.p11, 1.0 - chain.p21
    den = 2.0 - p11 - p22
    return np.array([(1.0 - p22) / den, (1.0 - p11) / den])


def transition_matrix(chain: SpreadChainParams) -> np.ndarray:
    """4x4 matrix M of the transition process x(t)."""
    p11, p21 = chain.p11, chain.p21
    a = [p11, 1 - p11, 0.0, 0.0]
    b = [0.0, 0.0, p21, 1 - p21]
    return np.array([a, b, a, b])


def transition_stationary(chain: SpreadChainParams) -> np.ndarray:
    """Closed-form stationary law ``lambda`` of x(t)."""
    p11, p21 = chain.p11, chain.p21
    den = 1.0 - p11 + p21
    mid = p21 * (1.0 - p11) / den
    return np.array([p21 * p11 / den, mid, mid, (1.0 - p21) * (1.0 - p11) / den])


def build_transition_chain(chain: SpreadChainParams) -> tuple[np.ndarray, np.ndarray]:
    """Matrix M and its stationary vector for the transition process."""
    return transition_matrix(chain), transition_stationary(chain)
