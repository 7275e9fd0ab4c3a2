"""Alphabets and deterministic encodings shared by every model.

Units are fixed here once: spreads are integer ticks in {1, 2}, returns are
mid-price changes in half ticks in {-2, ..., 2}, and the transition state
``x(t)`` in {1, 2, 3, 4} encodes the spread pair ``(s(t), s(t+1))``.
"""

from __future__ import annotations

import numpy as np

SPREAD_STATES = (1, 2)
TRANSITION_STATES = (1, 2, 3, 4)
RETURN_VALUES = (-2, -1, 0, 1, 2)
SQUARED_RETURN_VALUES = (0, 1, 4)

# transition states in which the spread does not change
CONSTANT_SPREAD = frozenset({1, 4})
CHANGED_SPREAD = frozenset({2, 3})

_EVEN_SUPPORT = frozenset({-2, 0, 2})
_ODD_SUPPORT = frozenset({-1, 1})


class SupportViolation(ValueError):
    """A return is not compatible with the spread transition it occurred in."""


def _check_spread(s: int) -> None:
    if s not in SPREAD_STATES:
        raise ValueError(f"spread must be 1 or 2 ticks, got {s!r}")


def _check_transition(x: int) -> None:
    if x not in TRANSITION_STATES:
        raise ValueError(f"transition state must be in 1..4, got {x!r}")


def encode_transition(prev: int, next: int) -> int:
    """Map a pair of consecutive spreads to the transition state.

    (1,1) -> 1, (1,2) -> 2, (2,1) -> 3, (2,2) -> 4.
    """
    _check_spread(prev)
    _check_spread(next)
    return 2 * (prev - 1) + next


def decode_transition(x: int) -> tuple[int, int]:
    """Inverse of :func:`encode_transition`."""
    _check_transition(x)
    return (x - 1) // 2 + 1, (x - 1) % 2 + 1


def allowed_returns(x: int) -> frozenset[int]:
    """Returns reachable on the price grid under transition ``x``."""
    _check_transition(x)
    return _EVEN_SUPPORT if x in CONSTANT_SPREAD else _ODD_SUPPORT


def binarize_return(r: int, x: int) -> int:
    """Binary move indicator used by the logit link.

    Constant spread: a +-2 move maps to 1, no move to 0. Changed spread:
    +1 maps to 1 and -1 to 0.
    """
    if r not in allowed_returns(x):
        raise SupportViolation(f"return {r} not allowed under transition state {x}")
    if x in CONSTANT_SPREAD:
        return int(r != 0)
    return int(r == 1)


def unbinarize(b: int, x: int, sign: int = 1) -> int:
    """Reconstruct a return from its binary move, given the sign of a +-2 move."""
    if b not in (0, 1):
        raise ValueError(f"binary move must be 0 or 1, got {b!r}")
    _check_transition(x)
    if x in CONSTANT_SPREAD:
        if sign not in (-1, 1):
            raise ValueError("sign must be +1 or -1")
        return 2 * sign * b
    return 1 if b else -1


def encode_transitions(spreads: np.ndarray) -> np.ndarray:
    """Vectorised :func:`encode_transition` over a spread path of length n+1."""
    s = np.asarray(spreads, dtype=np.int64)
    if s.size and not np.isin(s, SPREAD_STATES).all():
        raise ValueError("spread path contains values outside {1, 2}")
    return (2 * (s[:-1] - 1) + s[1:]).astype(np.int8)


def support_mask(returns: np.ndarray, transitions: np.ndarray) -> np.ndarray:
    """Boolean mask of (return, transition) pairs obeying the grid constraint."""
    r = np.asarray(returns, dtype=np.int64)
    x = np.asarray(transitions, dtype=np.int64)
    constant = (x == 1) | (x == 4)
    even_ok = constant & np.isin(r, (-2, 0, 2))
    odd_ok = ~constant & np.isin(r, (-1, 1))
    return even_ok | odd_ok
