import numpy as np
import pytest
from hypothesis import given, strategies as st

from tickms.core import (
    SupportViolation,
    allowed_returns,
    binarize_return,
    decode_transition,
    encode_transition,
    encode_transitions,
    support_mask,
    unbinarize,
)

spreads = st.sampled_from([1, 2])
transitions = st.sampled_from([1, 2, 3, 4])


@pytest.mark.parametrize(
    "prev,nxt,x", [(1, 1, 1), (1, 2, 2), (2, 1, 3), (2, 2, 4)]
)
def test_encode_table(prev, nxt, x):
    assert encode_transition(prev, nxt) == x
    assert decode_transition(x) == (prev, nxt)


def test_encode_is_bijection():
    images = {encode_transition(a, b) for a in (1, 2) for b in (1, 2)}
    assert images == {1, 2, 3, 4}


@pytest.mark.parametrize("bad", [0, 3, -1])
def test_encode_rejects_bad_spread(bad):
    with pytest.raises(ValueError):
        encode_transition(bad, 1)
    with pytest.raises(ValueError):
        encode_transition(1, bad)


@pytest.mark.parametrize("x,support", [(1, {-2, 0, 2}), (2, {-1, 1}), (3, {-1, 1}), (4, {-2, 0, 2})])
def test_allowed_returns(x, support):
    assert allowed_returns(x) == support


@given(transitions)
def test_support_parity_partition(x):
    odd = {r % 2 for r in allowed_returns(x)} == {1}
    assert odd == (x in (2, 3))


@pytest.mark.parametrize("r,x,b", [(2, 1, 1), (-2, 1, 1), (0, 4, 0), (1, 2, 1), (-1, 3, 0)])
def test_binarize_examples(r, x, b):
    assert binarize_return(r, x) == b


@pytest.mark.parametrize("r,x", [(1, 1), (0, 2), (2, 3), (-1, 4), (3, 1)])
def test_binarize_rejects_support_violation(r, x):
    with pytest.raises(SupportViolation):
        binarize_return(r, x)


@given(transitions, st.data())
def test_binarize_roundtrip(x, data):
    r = data.draw(st.sampled_from(sorted(allowed_returns(x))))
    sign = 1 if r >= 0 else -1
    assert unbinarize(binarize_return(r, x), x, sign) == r


@given(st.lists(spreads, min_size=2, max_size=50))
def test_vectorised_encoding_matches_scalar(path):
    x = encode_transitions(np.array(path))
    assert list(x) == [encode_transition(a, b) for a, b in zip(path, path[1:])]


def test_encode_transitions_rejects_bad_values():
    with pytest.raises(ValueError):
        encode_transitions(np.array([1, 3, 1]))


def test_support_mask():
    r = np.array([2, 1, 0, -1, 0])
    x = np.array([1, 1, 4, 3, 2])
    assert support_mask(r, x).tolist() == [True, False, True, True, False]
