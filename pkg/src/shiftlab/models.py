"""Canonical model operators X1, X2 and the shipped example fixtures."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from . import opcore as oc
from .errors import NotPerfectSquare, OutOfRange, SpecInvalid
from .exactnum import FinMatrix, cq, is_exact, sqrt_exact
from .opcore import TAIL, FinSupportVector, SpaceShape, StructuredOperator

FIXTURE_IDS = ("example-6.1", "example-6.2", "example-6.3", "example-6.4", "prop-2.2")


def _check_alpha(a) -> None:
    val = a if is_exact(a) else complex(a).real
    if not (0 < val <= 1):
        raise OutOfRange(f"alpha {a} is not in (0, 1]")


def _root(x):
    if is_exact(x):
        r = sqrt_exact(x)
        if r is None:
            raise NotPerfectSquare(f"{x} is not the square of a rational")
        return r
    return math.sqrt(float(complex(x).real))


def build_D(alphas: Sequence) -> FinMatrix:
    """diag(sqrt(1 - alpha_i))."""
    for a in alphas:
        _check_alpha(a)
    return FinMatrix.diag([_root(1 - a) for a in alphas])


def build_Dtilde(alphas: Sequence, n: int) -> FinMatrix:
    """D stacked over an (n - m) x m zero block."""
    m = len(alphas)
    if n < m:
        raise OutOfRange(f"n = {n} is smaller than m = {m}")
    d = build_D(alphas)
    z = Fraction(0)
    return FinMatrix.from_rows([list(r) for r in d.entries] + [[z] * m for _ in range(n - m)])


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    n: int
    m: int
    alphas: tuple
    normal_block: FinMatrix = field(default_factory=lambda: FinMatrix.zeros(0, 0))

    def __post_init__(self):
        alphas = tuple(Fraction(a) if isinstance(a, int) else a for a in self.alphas)
        object.__setattr__(self, "alphas", alphas)
        if self.kind not in ("X1", "X2"):
            raise SpecInvalid(f"unknown model kind {self.kind!r}")
        if self.n < 1 or len(alphas) != self.n:
            raise SpecInvalid("need n >= 1 and exactly n alphas")
        for a in alphas:
            try:
                _check_alpha(a)
            except OutOfRange as exc:
                raise SpecInvalid(str(exc)) from exc
        if any(_real(x) > _real(y) for x, y in zip(alphas, alphas[1:])):
            raise SpecInvalid("alphas must be ascending")
        below = sum(1 for a in alphas if _real(a) < 1)
        if self.kind == "X1":
            if self.m != 0 or below:
                raise SpecInvalid("X1 needs every alpha equal to 1 and m = 0")
        elif not (1 <= self.m <= self.n and below == self.m):
            raise SpecInvalid("X2 needs exactly the first m alphas below 1")
        nb = self.normal_block
        if nb.rows != nb.cols:
            raise SpecInvalid("normal block must be square")
        if not nb.is_normal(0.0 if nb.is_exact() else 1e-12):
            raise SpecInvalid("normal block does not commute with its adjoint")

    @property
    def q(self) -> int:
        return self.normal_block.rows

    @property
    def shape(self) -> SpaceShape:
        return SpaceShape(self.n + self.m, self.q)

    @classmethod
    def x1(cls, n: int, normal: FinMatrix | None = None) -> "ModelSpec":
        return cls("X1", n, 0, (Fraction(1),) * n, normal if normal is not None else FinMatrix.zeros(0, 0))

    @classmethod
    def x2(cls, n: int, m: int, alphas: Sequence, normal: FinMatrix | None = None) -> "ModelSpec":
        alphas = list(alphas)
        if len(alphas) == m:
            alphas = alphas + [Fraction(1)] * (n - m)
        return cls("X2", n, m, tuple(alphas), normal if normal is not None else FinMatrix.zeros(0, 0))


def _real(a) -> float:
    return float(a) if is_exact(a) else complex(a).real


def _tail_ops(spec: ModelSpec, shape: SpaceShape) -> dict:
    nb = spec.normal_block
    return {((TAIL, i), (TAIL, j)): nb[i, j] for i in range(nb.rows) for j in range(nb.cols)}


def build_X1(spec: ModelSpec) -> StructuredOperator:
    if spec.kind != "X1":
        raise SpecInvalid("build_X1 needs an X1 spec")
    shape = spec.shape
    sym = {(1, a, a): Fraction(1) for a in range(spec.n)}
    tags = {"model"} | ({"pure"} if spec.q == 0 else set())
    return StructuredOperator(shape, shape, sym, _tail_ops(spec, shape), frozenset(tags), {"spec": spec})


def build_X2(spec: ModelSpec) -> StructuredOperator:
    if spec.kind != "X2":
        raise SpecInvalid("build_X2 needs an X2 spec")
    shape = spec.shape
    n, m = spec.n, spec.m
    d = build_D(spec.alphas[:m])
    sym = {(1, a, a): Fraction(1) for a in range(n)}
    ker = _tail_ops(spec, shape)
    for j in range(m):
        sym[(-1, n + j, n + j)] = d[j, j]
        ker[((0, j), (0, n + j))] = d[j, j]
    tags = {"model"} | ({"pure"} if spec.q == 0 else set())
    return StructuredOperator(shape, shape, sym, ker, frozenset(tags), {"spec": spec})


def build_model(spec: ModelSpec) -> StructuredOperator:
    return build_X1(spec) if spec.kind == "X1" else build_X2(spec)


def build_prop22(s_mult: int, x: StructuredOperator) -> StructuredOperator:
    shape = SpaceShape(s_mult, 0)
    s = oc.shift(shape)
    return oc.block_compose([[s, x], [None, s.H]])


@dataclass(frozen=True)
class Fixture:
    id: str
    op: StructuredOperator
    note: str = ""
    blocks: dict = field(default_factory=dict)

    @property
    def adapted(self) -> bool:
        return bool(self.note)


def example64() -> Fixture:
    shape = SpaceShape(2, 2)
    a = oc.rank_one(shape, (0, 1), (TAIL, 0))
    b = oc.rank_one(shape, (TAIL, 0), (TAIL, 1), Fraction(1, 2))
    return Fixture("example-6.4", oc.shift(shape) + a + b)


def example62() -> Fixture:
    x = oc.rank_one(SpaceShape(1, 0), (0, 0), (0, 0))
    t = build_prop22(1, x)
    note = (
        "X = e0 (x) e0, so ker X is the orthocomplement of ker S*; "
        "preimages g_n = S^(n-1) g with g = e0 + e1 give T^n [0; g_n] = [Xg; S*g]"
    )
    return Fixture("example-6.2", t, "", {"S_mult": 1, "X": x, "construction": note})


def example62_preimages(depth: int = 8):
    """Target v = [Xg; S*g] and the preimages [0; g_n] with T^n [0; g_n] = v."""
    fx = example62()
    t = fx.op
    shape = t.shape_in
    g = {0: Fraction(1), 1: Fraction(1)}
    x = fx.blocks["X"]
    gvec = FinSupportVector(SpaceShape(1, 0), {(k, 0): v for k, v in g.items()})
    xg = oc.apply(x, gvec)
    sg = oc.apply(oc.adjoint_shift(1), gvec)
    target = FinSupportVector(
        shape,
        {**{(lv, 0): v for (lv, _), v in xg.entries.items()}, **{(lv, 1): v for (lv, _), v in sg.entries.items()}},
    )
    pre = []
    for n in range(1, depth + 1):
        pre.append(FinSupportVector(shape, {(k + n - 1, 1): v for k, v in g.items()}))
    return target, pre


def example61(n: int = 2, lam=Fraction(1, 2)) -> Fixture:
    """Finite-multiplicity analogue: S of multiplicity n + 1, tail x_1..x_n, y."""
    p = n + 1
    tail = SpaceShape(0, n + 1)
    s_shape = SpaceShape(p, 0)
    # tail index i-1 is x_i, index n is y
    b = oc.StructuredOperator(tail, tail, {}, {((TAIL, i + 1), (TAIL, i)): lam for i in range(n - 1)})
    a = oc.StructuredOperator(tail, s_shape, {}, {((0, 0), (TAIL, n)): Fraction(1), ((0, 1), (TAIL, n - 1)): Fraction(1)})
    s = oc.shift(s_shape)
    t = oc.block_compose([[s, a], [None, b]])
    note = (
        "adapted: the shift has finite multiplicity n + 1 instead of infinite multiplicity, "
        "and the complement of M is the single vector y; S_1 sends x_i to x_(i+1) so that "
        "A*A + B*B = P_(y, x_n) + |lambda|^2 P_(x_1..x_(n-1)) as displayed"
    )
    return Fixture("example-6.1", t, note, {"S_mult": p, "A": a, "B": b, "n": n, "lambda": lam})


def example63(k: int = 2) -> Fixture:
    """Finite stand-in: k-dim tail, nilpotent B, A*A + B*B = 2I."""
    tail = SpaceShape(0, k)
    s_shape = SpaceShape(k, 0)
    b = oc.StructuredOperator(tail, tail, {}, {((TAIL, i + 1), (TAIL, i)): Fraction(1) for i in range(k - 1)})
    ker = {((0, i), (TAIL, i)): Fraction(1) for i in range(k - 1)}
    ker[((0, k - 1), (TAIL, k - 1))] = cq(1, 1)
    a = oc.StructuredOperator(tail, s_shape, {}, ker)
    s = oc.shift(s_shape)
    t = oc.block_compose([[s, a], [None, b]])
    note = (
        "adapted: an inner symbol with infinite-dimensional model space is outside the "
        "Laurent class, and with a finite-dimensional model space no shift S with "
        "ker S* equal to theta H^2 exists; the fixture keeps the mechanism "
        "(S*A = 0, A*A + B*B = 2I, B analytic) with a k-dimensional nilpotent B"
    )
    return Fixture("example-6.3", t, note, {"S_mult": k, "A": a, "B": b, "k": k})


def prop22_fixture() -> Fixture:
    shape = SpaceShape(2, 0)
    x = oc.rank_one(shape, (0, 0), (0, 1)) + oc.rank_one(shape, (0, 1), (0, 0))
    return Fixture("prop-2.2", build_prop22(2, x), "", {"S_mult": 2, "X": x})


def fixture(fid: str, **kw) -> Fixture:
    table = {
        "example-6.1": example61,
        "example-6.2": example62,
        "example-6.3": example63,
        "example-6.4": example64,
        "prop-2.2": prop22_fixture,
    }
    if fid not in table:
        raise KeyError(f"unknown fixture {fid!r}; known: {', '.join(FIXTURE_IDS)}")
    return table[fid](**kw)
