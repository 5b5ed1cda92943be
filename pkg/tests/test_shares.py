import itertools

import pytest
from hypothesis import given, strategies as st

from barrierlogic import shares as sh

from oracles import dsa_law_violations

F, E = sh.FULL, sh.EMPTY
L, R = sh.from_path("L"), sh.from_path("R")
N = sh.node

TREES3 = sh.trees_up_to(3)
TREES2 = sh.trees_up_to(2)


def test_canonical_collapses_equal_children():
    assert sh.canonical((True, True)) is True
    assert sh.canonical((False, False)) is False
    t = ((False, True), False)
    assert sh.canonical(t) == t
    assert sh.canonical(((True, True), (False, (False, False)))) == L


def test_pointwise_ops():
    assert sh.t_or(L, R) == F
    assert sh.t_and(L, R) == E
    assert sh.t_andnot(N(True, N(False, True)), R) == L
    assert sh.t_not(L) == R


def test_join_examples():
    assert sh.join(L, R) == F
    a = N(N(False, True), False)
    b = N(N(True, False), N(False, True))
    assert sh.join(a, b) == N(True, N(False, True))
    assert sh.join(F, F) is None
    for t in TREES2:
        assert sh.join(E, t) == t


def test_leq_examples():
    assert sh.leq(L, F)
    assert not sh.leq(F, L)
    assert sh.leq(N(N(False, True), False), L)


def test_minus_examples():
    assert sh.minus(F, L) == R
    assert sh.minus(L, L) == E
    # R is not contained in L + RR, so subtraction is undefined
    assert sh.minus(N(True, N(False, True)), R) is None


def test_tree_counts():
    assert len(sh.trees_up_to(0)) == 2
    assert len(TREES2) == 16
    assert len(TREES3) == 256
    assert all(sh.is_canonical(t) for t in TREES3)
    assert len(set(TREES3)) == 256
    assert len(sh.positive_trees_up_to(3)) == 255


def test_masks_round_trip():
    for t in TREES3:
        assert sh.from_mask(sh.to_mask(t, 3), 3) == t


def test_share_syntax():
    assert sh.parse_share("[L,RR]") == N(True, N(False, True))
    assert sh.parse_share("[.]") == F
    assert sh.parse_share("[]") == E
    assert sh.format_share(N(N(False, True), False)) == "[LR]"
    with pytest.raises(sh.ShareSyntaxError):
        sh.parse_share("[L,LL]")
    for t in TREES3:
        assert sh.parse_share(sh.format_share(t)) == t


def test_join_matches_mask_model():
    # join on trees is disjoint union on depth-3 leaf masks
    masks = {t: sh.to_mask(t, 3) for t in TREES3}
    for a, b in itertools.product(TREES3, repeat=2):
        j = sh.join(a, b)
        ma, mb = masks[a], masks[b]
        if ma & mb:
            assert j is None
        else:
            assert j is not None and masks[j] == ma | mb and sh.is_canonical(j)


def test_dsa_laws_exhaustive_depth3():
    assert dsa_law_violations(3) == dict.fromkeys(
        ("function", "commutative", "associative", "cancellative", "units",
         "disjointness", "mask-model"), 0)


@given(st.sampled_from(TREES3), st.sampled_from(TREES3))
def test_minus_inverts_join(a, b):
    j = sh.join(a, b)
    if j is not None:
        assert sh.minus(j, a) == b
        assert sh.leq(a, j) and sh.leq(b, j)


@given(st.sampled_from(TREES3), st.sampled_from(TREES3))
def test_leq_iff_exists_complement(a, b):
    assert sh.leq(a, b) == any(sh.join(a, c) == b for c in TREES3)
