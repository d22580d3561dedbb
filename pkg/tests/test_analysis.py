from __future__ import annotations

from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings

from conftest import cmul, common_denominator, dense, operators, restrict_window
from shiftlab import analysis as an
from shiftlab import opcore as oc
from shiftlab.errors import DefectNotFinite, NotCertifiedHyponormalContraction, PreconditionFailed
from shiftlab.exactnum import FinMatrix, rank_of
from shiftlab.models import ModelSpec, build_X1, build_X2, example61, example63, example64, fixture, FIXTURE_IDS
from shiftlab.opcore import TAIL, FinSupportVector, SpaceShape, StructuredOperator

S1 = oc.shift(1)


def shift_plus_normal(lam=F(1, 2)) -> StructuredOperator:
    return oc.block_compose([[S1, None], [None, oc.tail_block(FinMatrix.diag([lam]), SpaceShape(0, 1))]])


def x2(n=1, m=1, alphas=(F(3, 4),), normal=None):
    return build_X2(ModelSpec.x2(n, m, list(alphas), normal))


def quad(m, x):
    return oc.apply(m, x).inner(x)


# -- defect operators --------------------------------------------------------


def test_defect_squared_shift():
    assert oc.equals(an.defect_squared(S1), oc.zero(S1.shape_in))
    assert oc.equals(an.defect_squared_adjoint(S1), oc.rank_one(S1.shape_in, (0, 0), (0, 0)))


def test_defect_squared_example64():
    d = an.defect_squared(example64().op)
    assert d.symbol == {}
    assert d.kernel == {((TAIL, 1), (TAIL, 1)): F(3, 4)}


def test_defect_squared_x2_has_rank_one_window():
    # I - T*T is alpha = 3/4 on the g-strand and zero elsewhere
    d = an.defect_squared(x2())
    assert d.symbol == {(0, 1, 1): F(3, 4)} and d.kernel == {}
    assert rank_of(d.window_block(1)) == 1


def test_defect_space_examples():
    assert an.defect_space(S1).dim == 0
    ds = an.defect_space_adjoint(S1)
    assert ds.dim == 1 and ds.basis[0] == FinSupportVector.basis(S1.shape_in, (0, 0))
    # only the second tail vector is moved by less than its norm
    d = an.defect_space(example64().op)
    assert d.dim == 1
    assert d.basis[0].entries.keys() == {(TAIL, 1)}


def test_defect_space_of_scaled_shift_is_infinite():
    d = an.defect_space(oc.scale(F(1, 2), S1))
    assert not d.finite_rank
    assert an.defect_squared(oc.scale(F(1, 2), S1)).symbol == {(0, 0, 0): F(3, 4)}


# -- self-commutator -----------------------------------------------------------------


def test_self_commutator_shift():
    sc = an.self_commutator(S1)
    assert sc.finite_rank
    assert [(a, e) for a, e in sc.pairs] == [(1, FinSupportVector.basis(S1.shape_in, (0, 0)))]


def test_self_commutator_example64():
    sc = an.self_commutator(example64().op)
    assert sorted(sc.alphas) == [F(1, 4), F(3, 4), 1]
    assert list(sc.alphas) == sorted(sc.alphas)
    for i, (_, e) in enumerate(sc.pairs):
        for j, (_, f) in enumerate(sc.pairs):
            assert e.inner(f) == (1 if i == j else 0)


def test_self_commutator_symbol_obstruction():
    sh = SpaceShape(2, 0)
    t = StructuredOperator(sh, sh, {(1, 0, 1): F(1)})
    sc = an.self_commutator(t)
    assert not sc.finite_rank
    assert sc.residual
    d = oc.dense_truncation(sc.operator, 16)
    # the commutator diagonal does not vanish deep inside the window
    assert d[2 * 10, 2 * 10] != 0 or d[2 * 10 + 1, 2 * 10 + 1] != 0


def test_self_commutator_reassembles():
    for t in (example64().op, x2(2, 1), build_X1(ModelSpec.x1(2, FinMatrix.diag([F(1, 3)])))):
        sc = an.self_commutator(t)
        acc = oc.zero(t.shape_in)
        for a, e in sc.pairs:
            for c1, v1 in e.entries.items():
                for c2, v2 in e.entries.items():
                    acc = acc + oc.rank_one(t.shape_in, c1, c2, a * v1 * v2.conjugate())
        assert oc.equals(acc, sc.operator)


@settings(max_examples=60, deadline=None)
@given(operators())
def test_commutator_is_difference_of_defects(t):
    lhs = an.commutator_operator(t)
    rhs = an.defect_squared_adjoint(t) - an.defect_squared(t)
    assert oc.equals(lhs, rhs)


# -- predicates ------------------------------------------------------------------------


def test_shift_is_hyponormal_contraction():
    assert an.is_contraction(S1).certified
    assert an.is_hyponormal(S1).certified


def test_scaled_shift_is_not_a_contraction():
    c = an.is_contraction(oc.scale(2, S1))
    assert c.refuted
    assert c.witness == FinSupportVector.basis(S1.shape_in, (0, 0))
    assert quad(an.defect_squared(oc.scale(2, S1)), c.witness) == -3


def test_adjoint_shift_is_not_hyponormal():
    c = an.is_hyponormal(S1.H)
    assert c.refuted
    assert c.witness == FinSupportVector.basis(S1.shape_in, (0, 0))
    assert quad(an.commutator_operator(S1.H), c.witness) == -1


@settings(max_examples=80, deadline=None)
@given(operators())
def test_refutations_carry_exact_witnesses(t):
    for pred, m in ((an.is_contraction, an.defect_squared(t)), (an.is_hyponormal, an.commutator_operator(t))):
        c = pred(t)
        if c.refuted:
            assert an.x_is_exact(c.witness)
            assert complex(quad(m, c.witness)).real < 0


# -- classification ------------------------------------------------------------------


def test_classify_x1():
    c = an.classify(build_X1(ModelSpec.x1(2, FinMatrix.diag([F(1, 3)]))))
    assert c.n_finite == an.NFinite(2, (1, 1))
    assert c.finite_isometry


def test_classify_example64_computed_n_finite_status():
    c = an.classify(example64().op)
    assert c.finite_isometry
    # the commutator's tail eigenvector for 1/4 is not orthogonal to the defect space
    assert c.n_finite is None


def test_classify_shift():
    c = an.classify(S1)
    assert c.n_finite == an.NFinite(1, (1,))
    assert c.defect.dim == 0


def test_n_finite_vectors_satisfy_membership():
    for t in (S1, x2(), x2(3, 2, (F(3, 4), F(3, 4))), build_X1(ModelSpec.x1(2))):
        c = an.classify(t)
        assert c.n_finite is not None
        for _, e in c.selfcomm.pairs:
            assert c.defect.orthogonal_to(e)
            assert c.defect_adjoint.contains(e)


def test_prop51_dimension_count():
    for t in (S1, x2(), x2(2, 2, (F(3, 4), F(3, 4)), FinMatrix.diag([F(1, 3)]))):
        c = an.classify(t)
        assert an.orthocomplement_dim(c.defect, c.defect_adjoint) == c.n_finite.n


# -- purity ---------------------------------------------------------------------------


def test_purity_normal_summand_is_refuted():
    t = shift_plus_normal()
    p = an.purity_evidence(t)
    assert p.refuted
    assert p.witness.entries.keys() == {(TAIL, 0)}
    # the witness spans a reducing subspace: T x and T* x stay on it
    x = p.witness
    assert oc.apply(t, x) == x.scale(F(1, 2)) and oc.apply(t.H, x) == x.scale(F(1, 2))


def test_purity_example64_is_unknown_with_empty_refinement():
    p = an.purity_evidence(example64().op)
    assert p.unknown
    assert p.evidence["dimension"] == 0
    assert p.evidence["level"] == "window-32 refinement empty"


def test_purity_models_are_certified():
    assert an.purity_evidence(x2()).certified
    assert an.purity_evidence(S1).certified


def test_purity_needs_finite_rank_commutator():
    sh = SpaceShape(2, 0)
    with pytest.raises(PreconditionFailed):
        an.purity_evidence(StructuredOperator(sh, sh, {(1, 0, 1): F(1)}))


# -- block decomposition ---------------------------------------------------------------


def _check_blocks(t, dec):
    s, a, b = dec.S, dec.A, dec.B
    assert oc.equals(s.H @ a, oc.zero(a.shape_in, a.shape_out))
    assert oc.equals(s.H @ s, oc.identity(s.shape_in))
    assert an.is_contraction(b).certified
    u = dec.basis_change
    assert oc.equals(u @ dec.conjugated @ u.H, t)


def test_decompose_already_split():
    t = shift_plus_normal()
    dec = an.decompose_prop21(t)
    _check_blocks(t, dec)
    assert oc.equals(dec.basis_change, oc.identity(t.shape_in))
    assert oc.equals(dec.S, S1)
    assert dec.B.kernel == {((TAIL, 0), (TAIL, 0)): F(1, 2)}


def test_decompose_example64():
    t = example64().op
    dec = an.decompose_prop21(t)
    _check_blocks(t, dec)
    assert dec.S.shape_in == SpaceShape(2, 1)
    assert dec.B.shape_in == SpaceShape(0, 1)
    assert dec.B.kernel == {}


@pytest.mark.parametrize("n,m", [(1, 1), (2, 1), (2, 2), (3, 2)])
def test_decompose_x2(n, m):
    t = x2(n, m, (F(3, 4),) * m)
    _check_blocks(t, an.decompose_prop21(t))


def test_decompose_errors():
    with pytest.raises(NotCertifiedHyponormalContraction):
        an.decompose_prop21(S1.H)
    # M S with M = M* = M^2 coupling the strands: the defect symbol I - M is not diagonal
    sh = SpaceShape(2, 0)
    h = F(1, 2)
    t = StructuredOperator(sh, sh, {(1, a, b): h for a in range(2) for b in range(2)})
    with pytest.raises(DefectNotFinite):
        an.decompose_prop21(t)


def test_decompose_scaled_shift_is_all_defect():
    t = oc.scale(F(1, 2), S1)
    dec = an.decompose_prop21(t)
    _check_blocks(t, dec)
    assert dec.S.shape_in == SpaceShape(0, 0)


# -- shift plus partial isometry ------------------------------------------------------


def test_prop22_examples():
    sh = SpaceShape(1, 0)
    e00 = oc.rank_one(sh, (0, 0), (0, 0))
    assert an.check_prop22(1, e00) == {
        "is_hypo_contraction": True,
        "is_partial_isometry_into_ker": True,
        "is_isometry": True,
    }
    r = an.check_prop22(1, oc.zero(sh))
    assert (r["is_hypo_contraction"], r["is_partial_isometry_into_ker"]) == (False, False)
    r = an.check_prop22(1, oc.scale(F(1, 2), e00))
    assert (r["is_hypo_contraction"], r["is_partial_isometry_into_ker"]) == (False, False)


# -- certificates -----------------------------------------------------------------------


def test_thm31_adapted_examples():
    for fx in (example61(), example63()):
        cert = an.cert_thm31(fx.blocks["S_mult"], fx.blocks["A"], fx.blocks["B"])
        assert cert.issued and cert.conclusion == an.ANALYTIC_SHIFT


def test_thm31_example63_sum_is_twice_identity():
    fx = example63()
    a, b = fx.blocks["A"], fx.blocks["B"]
    assert oc.equals(a.H @ a + b.H @ b, oc.scale(2, oc.identity(b.shape_in)))


def test_thm31_non_nilpotent_b_fails():
    tail = SpaceShape(0, 1)
    a = oc.zero(tail, SpaceShape(1, 0))
    b = oc.tail_block(FinMatrix.diag([F(1, 2)]), tail)
    res = an.cert_thm31(1, a, b)
    assert not res.issued and "B analytic" in res.failed
    assert an.analytic_evidence(b).refuted


def test_thm41_examples():
    cert = an.cert_thm41(example64().op)
    assert cert.issued and cert.details["purity_evidence"] == "window-32 refinement empty"
    assert cert.conclusion == an.ANALYTIC_SHIFT
    res = an.cert_thm41(shift_plus_normal())
    assert not res.issued and res.failed == ("purity",)
    res = an.cert_thm41(oc.scale(2, S1))
    assert not res.issued and "contraction" in res.failed


def test_projection_remark():
    assert an.cert_projection_remark(S1).issued
    assert an.cert_projection_remark(build_X1(ModelSpec.x1(2, FinMatrix.diag([F(1, 3)])))).issued
    with pytest.raises(PreconditionFailed):
        an.cert_projection_remark(x2())


# -- agreement with the dense oracle on fixtures ------------------------------------


def _dense_min_eig(m, n=16):
    d = common_denominator(m)
    big = n + m.band + m.window + 1
    re, im = restrict_window(dense(m, big, d), big, n, m.shape_in.p, m.shape_in.q)
    return float(np.linalg.eigvalsh((re + 1j * im) / d)[0])


@pytest.mark.parametrize("fid", FIXTURE_IDS)
def test_predicates_agree_with_dense_truncation(fid):
    t = fixture(fid).op
    for pred, m in ((an.is_contraction, an.defect_squared(t)), (an.is_hyponormal, an.commutator_operator(t))):
        verdict = pred(t)
        lowest = _dense_min_eig(m)
        if verdict.certified:
            assert lowest >= -1e-12
        elif verdict.refuted:
            assert lowest < 0


@pytest.mark.parametrize("fid", FIXTURE_IDS)
def test_commutator_rank_agrees_with_dense_truncation(fid):
    t = fixture(fid).op
    sc = an.self_commutator(t)
    assert sc.finite_rank
    n = 16
    d = common_denominator(t)
    big = n + t.band + t.window + 2
    td, tsd = dense(t, big, d), dense(t.H, big, d)
    a, b = cmul(tsd, td), cmul(td, tsd)
    re, im = restrict_window((a[0] - b[0], a[1] - b[1]), big, n, t.shape_in.p, t.shape_in.q)
    want = rank_of(sc.operator.window_block(n))
    assert np.linalg.matrix_rank(re + 1j * im) == want
    if sc.psd:
        assert sc.rank == want
