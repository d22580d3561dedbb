from __future__ import annotations

from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import (
    common_denominator,
    cmul,
    dense,
    operators,
    reach,
    restrict_window,
    same,
    window_ints,
)
from shiftlab import opcore as oc
from shiftlab.errors import ShapeMismatch
from shiftlab.exactnum import FinMatrix
from shiftlab.models import example64
from shiftlab.opcore import TAIL, FinSupportVector, SpaceShape, StructuredOperator

H1 = SpaceShape(1, 0)


def e(shape, *coord, value=F(1)):
    return FinSupportVector.basis(shape, coord, value)


# -- primitives ----------------------------------------------------------------


def test_shift_primitive():
    s = oc.make_primitive("Shift", H1)
    assert s.symbol == {(1, 0, 0): 1} and s.kernel == {}


def test_tail_block_primitive():
    t = oc.make_primitive("TailBlock", SpaceShape(0, 2), FinMatrix.diag([F(3, 4), F(1, 4)]))
    assert t.symbol == {}
    assert t.kernel == {((TAIL, 0), (TAIL, 0)): F(3, 4), ((TAIL, 1), (TAIL, 1)): F(1, 4)}


def test_cross_block_is_example_a():
    sh = SpaceShape(2, 2)
    m = FinMatrix.from_rows([[0, 0], [1, 0]])
    a = oc.cross_block(m, sh, "tail_to_shift")
    assert a.kernel == {((0, 1), (TAIL, 0)): 1}


def test_rank_one_primitive_and_adjoint():
    sh = SpaceShape(1, 0)
    r = oc.rank_one(sh, (0, 0), (1, 0))
    assert oc.equals(r.H, oc.rank_one(sh, (1, 0), (0, 0)))


def test_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        oc.add(oc.shift(1), oc.shift(2))
    with pytest.raises(ShapeMismatch):
        oc.multiply(oc.shift(1), oc.shift(2))
    with pytest.raises(ShapeMismatch):
        oc.rank_one(H1, (0, 1), (0, 0))


# -- block composition -----------------------------------------------------------


def test_block_compose_diagonal_shifts():
    s = oc.shift(1)
    assert oc.equals(oc.block_compose([[s, None], [None, s]]), oc.shift(2))


def test_block_compose_single():
    t = example64().op
    assert oc.equals(oc.block_compose([[t]]), t)


def test_block_compose_example64_parts():
    mz = oc.shift(1)
    a = StructuredOperator(SpaceShape(0, 2), SpaceShape(1, 0), {}, {((0, 0), (TAIL, 0)): F(1)})
    b = oc.tail_block(FinMatrix.from_rows([[0, F(1, 2)], [0, 0]]), SpaceShape(0, 2))
    t = oc.block_compose([[mz, None, None], [None, mz, a], [None, None, b]])
    assert oc.equals(t, example64().op)


# -- algebra -----------------------------------------------------------------------


def test_adjoint_examples():
    assert oc.equals(oc.adjoint(oc.shift(1)), oc.adjoint_shift(1))
    t = example64().op
    z = oc.add(t, oc.scale(-1, t))
    assert z.symbol == {} and z.kernel == {}


def test_shift_products():
    s = oc.shift(1)
    assert oc.equals(s.H @ s, oc.identity(1))
    p0 = oc.rank_one(H1, (0, 0), (0, 0))
    assert oc.equals(s @ s.H, oc.identity(1) - p0)
    assert not oc.equals(s @ s.H, oc.identity(1))


@pytest.mark.parametrize("p", [1, 2, 3])
def test_shift_relations_any_multiplicity(p):
    sh = SpaceShape(p, 1)
    s = oc.shift(sh)
    p0 = sum((oc.rank_one(sh, (0, i), (0, i)) for i in range(1, p)), oc.rank_one(sh, (0, 0), (0, 0)))
    assert oc.equals(s.H @ s, oc.identity(sh) - oc.rank_one(sh, (TAIL, 0), (TAIL, 0)))
    assert oc.equals(s @ s.H, oc.identity(sh) - p0 - oc.rank_one(sh, (TAIL, 0), (TAIL, 0)))


def test_shift_power_monomials():
    # S^2 S*^3 = T_(z^-1) minus the two terms that would land below level 0
    s = oc.shift(1)
    lhs = (s @ s) @ (s.H @ s.H @ s.H)
    rhs = StructuredOperator(H1, H1, {(-1, 0, 0): F(1)}, {((j - 1, 0), (j, 0)): F(-1) for j in (1, 2)})
    assert oc.equals(lhs, rhs)
    d = lhs.window_block(6)
    for i in range(6):
        for j in range(6):
            assert d[i, j] == (1 if j == i + 1 and j >= 3 else 0)


def test_example64_commutator():
    t = example64().op
    c = t.H @ t - t @ t.H
    assert c.symbol == {}
    assert c.kernel == {
        ((0, 0), (0, 0)): 1,
        ((TAIL, 0), (TAIL, 0)): F(3, 4),
        ((TAIL, 1), (TAIL, 1)): F(1, 4),
    }


# -- apply -------------------------------------------------------------------------


def test_apply_examples():
    assert oc.apply(oc.shift(1), e(H1, 0, 0)) == e(H1, 1, 0)
    assert oc.apply(oc.adjoint_shift(1), e(H1, 0, 0)).is_zero()
    t = example64().op
    sh = t.shape_in
    assert oc.apply(t, e(sh, TAIL, 0)) == e(sh, 0, 1)
    assert oc.apply(t, e(sh, TAIL, 1)) == e(sh, TAIL, 0, value=F(1, 2))


@settings(max_examples=60, deadline=None)
@given(operators(), st.data())
def test_apply_matches_window_block(a, data):
    sh = a.shape_in
    coords = sh.window_coords(3)
    x = FinSupportVector(sh, {c: F(data.draw(st.integers(-2, 2))) for c in data.draw(st.lists(st.sampled_from(coords), max_size=3))})
    y = oc.apply(a, x)
    n = 3 + a.band + 1
    assert y.to_window(n) == a.window_block(n).apply(x.to_window(n))


# -- truncation --------------------------------------------------------------------


def test_dense_truncation_examples():
    d = oc.dense_truncation(oc.shift(1), 3)
    assert d.equals(FinMatrix.from_rows([[0, 0, 0], [1, 0, 0], [0, 1, 0]]))
    s = oc.shift(1)
    d = oc.dense_truncation(oc.identity(1) - s @ s.H, 4)
    assert d.equals(FinMatrix.diag([1, 0, 0, 0]))
    t = example64().op
    assert oc.dense_truncation(t, 4).shape == (10, 10)


def test_example64_commutator_dense_oracle():
    t = example64().op
    n = 4
    big = n + 2
    d = common_denominator(t)
    td = dense(t, big, d)
    tsd = dense(t.H, big, d)
    comm = cmul(tsd, td)
    comm = (comm[0] - cmul(td, tsd)[0], comm[1] - cmul(td, tsd)[1])
    want = window_ints(t.H @ t - t @ t.H, n, d * d)
    assert same(restrict_window(comm, big, n, 2, 2), want)


# -- invariants ------------------------------------------------------------------


@settings(max_examples=80, deadline=None)
@given(operators())
def test_adjoint_involution(a):
    assert oc.equals(a.H.H, a)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_adjoint_anti_homomorphism(data):
    sh = data.draw(st.sampled_from([SpaceShape(1, 0), SpaceShape(2, 1), SpaceShape(1, 2)]))
    a = data.draw(operators(sh))
    b = data.draw(operators(sh))
    assert oc.equals((a @ b).H, b.H @ a.H)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_associativity(data):
    sh = data.draw(st.sampled_from([SpaceShape(1, 0), SpaceShape(2, 1)]))
    a, b, c = (data.draw(operators(sh)) for _ in range(3))
    assert oc.equals((a @ b) @ c, a @ (b @ c))


@settings(max_examples=60, deadline=None)
@given(operators())
def test_canonical_form_is_idempotent(a):
    again = StructuredOperator(a.shape_in, a.shape_out, a.symbol, a.kernel)
    assert again.symbol == a.symbol and again.kernel == a.kernel
    assert all(v != 0 for v in a.symbol.values()) and all(v != 0 for v in a.kernel.values())


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_product_agrees_with_dense_oracle(data):
    sh = data.draw(st.sampled_from([SpaceShape(1, 0), SpaceShape(2, 1), SpaceShape(1, 2)]))
    a = data.draw(operators(sh))
    b = data.draw(operators(sh))
    n = 16
    big = n + reach(a) + reach(b)
    d = common_denominator(a, b)
    prod = cmul(dense(a, big, d), dense(b, big, d))
    want = restrict_window(prod, big, n, sh.p, sh.q)
    assert same(window_ints(a @ b, n, d * d), want)
