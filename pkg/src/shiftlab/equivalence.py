"""Explicit unitaries between an operator and its model, checked label by label."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import opcore as oc
from .analysis import Decomposition, classify, decompose_prop21, inverse_operator, x_is_exact
from .errors import (
    KernelNotFinitelySupported,
    NonOrthonormalImages,
    NotLeftInvertible,
    Singular,
    SpecMismatch,
)
from .exactnum import DEFAULT_TOL, FinMatrix, TolerancePolicy, is_exact, orth_basis_of_range, sqrt_exact
from .models import ModelSpec, build_model
from .opcore import TAIL, FinSupportVector, SpaceShape, StructuredOperator

STANDARD_POINTS = (
    Fraction(0),
    Fraction(1, 2),
    Fraction(-1, 2),
    "1/2i",
    "-1/2i",
    Fraction(9, 10),
    Fraction(-7, 10),
    "3/10+2/5i",
)


class BasisRuleUnitary:
    """A unitary given by its values on the coordinate basis of ``domain``."""

    def __init__(
        self,
        domain: SpaceShape,
        codomain: SpaceShape,
        rule: Callable[[tuple], FinSupportVector],
        verified_depth: int = 0,
    ):
        self.domain = domain
        self.codomain = codomain
        self._rule = rule
        self._cache: dict = {}
        self.verified_depth = verified_depth

    @classmethod
    def identity(cls, shape: SpaceShape) -> "BasisRuleUnitary":
        return cls(shape, shape, lambda c: FinSupportVector.basis(shape, c))

    def image(self, coord) -> FinSupportVector:
        if coord not in self._cache:
            self.domain.check(coord)
            self._cache[coord] = self._rule(coord)
        return self._cache[coord]

    def apply(self, x: FinSupportVector) -> FinSupportVector:
        out = FinSupportVector.zero(self.codomain)
        for c, v in x.sorted_items():
            out = out + self.image(c).scale(v)
        return out

    def labels(self, depth: int) -> list:
        return self.domain.window_coords(depth)

    def verify_orthonormal(self, depth: int, tol: float = 0.0) -> None:
        """Raise NonOrthonormalImages unless images up to ``depth`` are orthonormal."""
        labels = self.labels(depth)
        imgs = {c: self.image(c) for c in labels}
        by_coord = defaultdict(set)
        for c, v in imgs.items():
            for k in v.entries:
                by_coord[k].add(c)
        for c, v in imgs.items():
            n2 = v.norm2()
            if abs(n2 - 1) > tol:
                raise NonOrthonormalImages(f"image of {c} has squared norm {n2}", (c, c))
            partners = set()
            for k in v.entries:
                partners |= by_coord[k]
            for d in partners:
                if d != c and abs(v.inner(imgs[d])) > tol:
                    raise NonOrthonormalImages(f"images of {c} and {d} are not orthogonal", (c, d))
        self.verified_depth = max(self.verified_depth, depth)


@dataclass
class ResidualReport:
    max_residual: float
    violations: list
    checked: int
    depth: int

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_intertwine(
    u: BasisRuleUnitary,
    a_op: StructuredOperator,
    b_op: StructuredOperator,
    depth: int,
    tol: float = 0.0,
) -> ResidualReport:
    """Check a_op U = U b_op on every basis label below ``depth``."""
    worst = 0.0
    bad = []
    labels = u.labels(depth)
    for c in labels:
        lhs = oc.apply(a_op, u.image(c))
        rhs = u.apply(oc.apply(b_op, FinSupportVector.basis(u.domain, c)))
        diff = lhs - rhs
        r = max((abs(v) for v in diff.entries.values()), default=0.0)
        worst = max(worst, float(r))
        if r > tol:
            bad.append(c)
    return ResidualReport(worst, bad, len(labels), depth)


def _to_new(dec: Decomposition, x: FinSupportVector) -> FinSupportVector:
    return oc.apply(dec.basis_change.H, x)


def model_unitary_thm52(
    t: StructuredOperator,
    spec: ModelSpec,
    decomposition: Decomposition | None = None,
    tol: TolerancePolicy = DEFAULT_TOL,
    verify_depth: int = 0,
) -> BasisRuleUnitary:
    """The unitary from the model space of ``spec`` onto the space of ``t``.

    Strand f_i at level s goes to S^s e_i, strand g_j at level r goes to
    (1 - alpha_j)^(-(r+1)/2) B*^r h_j, and tail vectors go to the tail of t.
    All vectors are built in the decomposed coordinates and mapped back.
    """
    c = classify(t, tol)
    if c.n_finite is None:
        raise SpecMismatch("operator is not n-finite")
    if c.n_finite.n != spec.n or sorted(c.n_finite.alphas) != sorted(spec.alphas):
        raise SpecMismatch(
            f"operator has n = {c.n_finite.n}, alphas {list(c.n_finite.alphas)}; "
            f"spec has n = {spec.n}, alphas {list(spec.alphas)}"
        )
    if t.shape_in.q != spec.q:
        raise SpecMismatch("tail dimensions differ")
    dec = decomposition or decompose_prop21(t, c.purity, tol)
    s, a, b = dec.S, dec.A, dec.B
    es = [_to_new(dec, e) for _, e in c.selfcomm.pairs]
    ps, pb = s.shape_in, b.shape_in
    new_shape = dec.basis_change.shape_in

    def embed_s(x: FinSupportVector) -> FinSupportVector:
        return FinSupportVector(new_shape, dict(x.entries))

    def embed_b(x: FinSupportVector) -> FinSupportVector:
        return FinSupportVector(
            new_shape,
            {((lv, i + ps.q) if lv == TAIL else (lv, i + ps.p)): v for (lv, i), v in x.entries.items()},
        )

    def part_s(x: FinSupportVector) -> FinSupportVector:
        return FinSupportVector(
            ps, {(lv, i): v for (lv, i), v in x.entries.items() if (i < ps.q if lv == TAIL else i < ps.p)}
        )

    e_s = [part_s(e) for e in es]
    for e, full in zip(e_s, es):
        if not (embed_s(e) - full).is_zero(0.0 if x_is_exact(full) else tol.rank_tol):
            raise SpecMismatch("commutator eigenvector is not inside H (-) D_T")
    hs = [oc.apply(a.H, e) for e in e_s]
    roots = []
    for j in range(spec.m):
        d2 = 1 - spec.alphas[j]
        r = sqrt_exact(d2) if is_exact(d2) else None
        roots.append(r if r is not None else float(np.sqrt(complex(d2).real)))
    s_chain: dict = {}
    b_chain: dict = {}
    bh = b.H

    def s_img(i: int, lv: int) -> FinSupportVector:
        if (i, lv) not in s_chain:
            s_chain[(i, lv)] = e_s[i] if lv == 0 else oc.apply(s, s_img(i, lv - 1))
        return s_chain[(i, lv)]

    def b_img(j: int, lv: int) -> FinSupportVector:
        if (j, lv) not in b_chain:
            prev = hs[j] if lv == 0 else oc.apply(bh, b_img(j, lv - 1))
            b_chain[(j, lv)] = prev.scale(1 / roots[j])
        return b_chain[(j, lv)]

    u0 = dec.basis_change
    n = spec.n

    def rule(coord) -> FinSupportVector:
        lv, idx = coord
        if lv == TAIL:
            return FinSupportVector.basis(t.shape_in, (TAIL, idx))
        if idx < n:
            return oc.apply(u0, embed_s(s_img(idx, lv)))
        return oc.apply(u0, embed_b(b_img(idx - n, lv)))

    u = BasisRuleUnitary(spec.shape, t.shape_in, rule)
    if verify_depth:
        u.verify_orthonormal(verify_depth, 0.0 if t.is_exact() else 1e-9)
    return u


# Shimorin model ---------------------------------------------------------


@dataclass
class ShimorinModelData:
    left_inverse: StructuredOperator
    kernel_projection: StructuredOperator
    kernel_basis: tuple
    kernel_gram: tuple
    coefficients: dict
    sample_points: tuple
    gram: FinMatrix
    gram_psd: bool
    gram_min_eigenvalue: float
    depth: int
    normalization: str = "L = (T*T)^-1 T*"
    generators: tuple = field(default_factory=tuple)


def left_inverse(t: StructuredOperator) -> StructuredOperator:
    m = t.H @ t
    if any(k != 0 for k in m.symbol_powers()):
        raise NotLeftInvertible("T*T does not have a constant symbol")
    try:
        minv = inverse_operator(m)
    except Singular as exc:
        w = exc.witness
        wit = None
        if w is not None and len(w) == len(t.shape_in.window_coords(m.window)):
            wit = FinSupportVector.from_window(t.shape_in, m.window, w)
        elif w is not None and len(w) == t.shape_in.p:
            wit = FinSupportVector(t.shape_in, {(m.window, s): v for s, v in enumerate(w)})
        raise NotLeftInvertible("T*T is singular", wit) from exc
    return minv @ t.H


def coefficients(l_op: StructuredOperator, proj: StructuredOperator, x: FinSupportVector, depth: int) -> list:
    """c_n(x) = P_(ker T*) L^n x for n < depth."""
    out = []
    y = x
    for _ in range(depth):
        out.append(oc.apply(proj, y))
        y = oc.apply(l_op, y)
    return out


def _point(z):
    from .exactnum import parse_scalar

    return parse_scalar(z) if isinstance(z, str) else z


def shimorin_model(
    t: StructuredOperator,
    depth: int = 32,
    points: Sequence = STANDARD_POINTS,
    generators: Sequence[FinSupportVector] | None = None,
) -> ShimorinModelData:
    l_op = left_inverse(t)
    proj = oc.identity(t.shape_in) - t @ l_op
    if proj.symbol:
        raise KernelNotFinitelySupported("ker T* is not spanned by finitely supported vectors")
    lv = proj.window
    rb = orth_basis_of_range(proj.window_block(lv))
    kb = tuple(FinSupportVector.from_window(t.shape_in, lv, v) for v in rb.vectors)
    pts = tuple(_point(z) for z in points)
    gens = tuple(generators) if generators is not None else tuple(
        FinSupportVector.basis(t.shape_in, c) for c in t.shape_in.window_coords(max(lv, 1))
    )
    coeffs = {i: coefficients(l_op, proj, g, depth) for i, g in enumerate(gens)}
    # evaluation vectors k_z eta = sum_n conj(z)^n L*^n eta, truncated
    ls = l_op.H
    powers = []
    for eta in kb:
        chain = [eta]
        for _ in range(depth - 1):
            chain.append(oc.apply(ls, chain[-1]))
        powers.append(chain)
    evals = []
    for z in pts:
        zc = z.conjugate()
        for chain in powers:
            acc = FinSupportVector.zero(t.shape_in)
            w = Fraction(1)
            for vec in chain:
                acc = acc + vec.scale(w)
                w = w * zc
            evals.append(acc)
    n = len(evals)
    gram = FinMatrix.from_rows([[evals[j].inner(evals[i]) for j in range(n)] for i in range(n)])
    if n:
        mins = float(np.linalg.eigvalsh(gram.to_numpy())[0])
    else:
        mins = 0.0
    return ShimorinModelData(
        l_op, proj, kb, tuple(rb.gram), coeffs, pts, gram, mins >= -1e-8, mins, depth, generators=gens
    )
