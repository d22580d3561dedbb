from __future__ import annotations

import itertools
from fractions import Fraction as F

import pytest

from shiftlab import analysis as an
from shiftlab import opcore as oc
from shiftlab.errors import NotPerfectSquare, OutOfRange, SpecInvalid
from shiftlab.exactnum import FinMatrix, cq
from shiftlab.models import (
    FIXTURE_IDS,
    ModelSpec,
    build_D,
    build_Dtilde,
    build_model,
    build_prop22,
    build_X1,
    build_X2,
    example62,
    example62_preimages,
    fixture,
)
from shiftlab.opcore import TAIL, FinSupportVector, SpaceShape

NORMALS = {
    "empty": None,
    "diag": FinMatrix.diag([F(1, 3)]),
    "rotation": FinMatrix.from_rows([[0, F(-1, 2)], [F(1, 2), 0]]),
}
GRID = [(1, 1), (2, 1), (2, 2), (3, 2)]


def test_build_D_examples():
    assert build_D([F(3, 4)]).equals(FinMatrix.diag([F(1, 2)]))
    assert build_D([1, 1]).equals(FinMatrix.zeros(2, 2))
    assert build_Dtilde([F(3, 4)], 2).equals(FinMatrix.from_rows([[F(1, 2)], [0]]))


def test_build_D_errors():
    with pytest.raises(NotPerfectSquare):
        build_D([F(1, 2)])
    with pytest.raises(OutOfRange):
        build_D([F(3, 2)])
    with pytest.raises(OutOfRange):
        build_Dtilde([F(3, 4), F(3, 4)], 1)


def test_build_D_float():
    d = build_D([0.5])
    assert abs(d[0, 0] - 0.5**0.5) < 1e-15


def test_spec_validation():
    with pytest.raises(SpecInvalid):
        ModelSpec.x2(1, 1, [1])
    with pytest.raises(SpecInvalid):
        ModelSpec("X2", 2, 1, (F(3, 4), F(1, 2)))
    with pytest.raises(SpecInvalid):
        ModelSpec("X1", 1, 0, (F(3, 4),))
    with pytest.raises(SpecInvalid):
        ModelSpec.x1(0)


def test_non_normal_block_rejected():
    n = FinMatrix.from_rows([[0, 1], [0, 0]])
    assert not (n.H @ n - n @ n.H).is_zero()
    with pytest.raises(SpecInvalid):
        ModelSpec.x1(1, n)


def test_x1_single_is_shift():
    assert oc.equals(build_X1(ModelSpec.x1(1)), oc.shift(1))


def test_x2_commutator():
    t = build_X2(ModelSpec.x2(1, 1, [F(3, 4)]))
    sc = an.self_commutator(t)
    assert [(a, e) for a, e in sc.pairs] == [(F(3, 4), FinSupportVector.basis(t.shape_in, (0, 0)))]


def test_x2_layout():
    t = build_X2(ModelSpec.x2(2, 1, [F(3, 4)], FinMatrix.diag([F(1, 3)])))
    assert t.shape_in == SpaceShape(3, 1)
    assert t.symbol == {(1, 0, 0): 1, (1, 1, 1): 1, (-1, 2, 2): F(1, 2)}
    assert t.kernel == {((0, 0), (0, 2)): F(1, 2), ((TAIL, 0), (TAIL, 0)): F(1, 3)}


def test_x1_with_imaginary_normal_block():
    c = an.classify(build_X1(ModelSpec.x1(2, FinMatrix.diag([cq(0, F(1, 2))]))))
    assert c.n_finite == an.NFinite(2, (1, 1))


@pytest.mark.parametrize("nm,nkey", list(itertools.product(GRID, NORMALS)))
def test_x2_grid_round_trip(nm, nkey):
    n, m = nm
    spec = ModelSpec.x2(n, m, [F(3, 4)] * m, NORMALS[nkey])
    t = build_model(spec)
    c = an.classify(t)
    assert c.contraction.certified
    assert c.n_finite is not None
    assert c.n_finite.n == n
    assert sorted(c.n_finite.alphas) == sorted(spec.alphas)


@pytest.mark.parametrize("n,nkey", list(itertools.product([1, 2, 3], NORMALS)))
def test_x1_grid_round_trip(n, nkey):
    spec = ModelSpec.x1(n, NORMALS[nkey])
    c = an.classify(build_model(spec))
    assert c.contraction.certified
    assert c.n_finite == an.NFinite(n, (1,) * n)


def test_model_tags():
    assert "pure" in build_X2(ModelSpec.x2(1, 1, [F(3, 4)])).tags
    t = build_X2(ModelSpec.x2(1, 1, [F(3, 4)], FinMatrix.diag([F(1, 3)])))
    assert "pure" not in t.tags
    assert t.meta["spec"].n == 1


def test_prop22_builder_examples():
    sh = SpaceShape(1, 0)
    t = build_prop22(1, oc.rank_one(sh, (0, 0), (0, 0)))
    assert oc.equals(an.defect_squared(t), oc.zero(t.shape_in))
    t0 = build_prop22(1, oc.zero(sh))
    assert an.is_hyponormal(t0).refuted
    sh2 = SpaceShape(2, 0)
    r = an.check_prop22(2, oc.rank_one(sh2, (0, 0), (0, 1)))
    assert not r["is_hypo_contraction"] and not r["is_partial_isometry_into_ker"]


def test_example64_commutator_display():
    t = fixture("example-6.4").op
    c = an.commutator_operator(t)
    assert c.symbol == {}
    assert c.kernel == {((0, 0), (0, 0)): 1, ((TAIL, 0), (TAIL, 0)): F(3, 4), ((TAIL, 1), (TAIL, 1)): F(1, 4)}


def test_example62_preimages():
    t = example62().op
    target, pre = example62_preimages(8)
    assert not target.is_zero()
    for k, g in enumerate(pre, start=1):
        y = g
        for _ in range(k):
            y = oc.apply(t, y)
        assert y == target


def test_example61_certificate():
    fx = fixture("example-6.1", n=2, lam=F(1, 2))
    assert fx.adapted
    assert an.cert_thm31(fx.blocks["S_mult"], fx.blocks["A"], fx.blocks["B"]).issued


def test_example61_defect_display():
    fx = fixture("example-6.1")
    a, b = fx.blocks["A"], fx.blocks["B"]
    want = {((TAIL, 2), (TAIL, 2)): 1, ((TAIL, 1), (TAIL, 1)): 1, ((TAIL, 0), (TAIL, 0)): F(1, 4)}
    assert (a.H @ a + b.H @ b).kernel == want


def test_adapted_fixtures_carry_notes():
    for fid in FIXTURE_IDS:
        fx = fixture(fid)
        assert fx.adapted == (fid in ("example-6.1", "example-6.3"))
    with pytest.raises(KeyError):
        fixture("example-9.9")
