"""Classification of structured operators as hyponormal contractions.

Positivity of an infinite operator M = T_f + K is decided exactly when the
symbol f is constant: outside the kernel window M is just f(0) on every
level, so M >= 0 iff f(0) >= 0 and the window block is >= 0.  For other
symbols we only look for counterexamples and otherwise answer ``unknown``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import opcore as oc
from .errors import (
    DefectNotFinite,
    InternalInconsistency,
    NotCertifiedHyponormalContraction,
    PreconditionFailed,
    ShapeMismatch,
)
from .exactnum import (
    DEFAULT_TOL,
    FinMatrix,
    TolerancePolicy,
    cq,
    gram_schmidt,
    in_span,
    inner,
    invert,
    is_exact,
    nullspace,
    orth_basis_of_range,
    psd_witness,
    rank_of,
    spectral_rank_one_decomp,
    sqrt_exact,
)
from .errors import Singular
from .opcore import TAIL, FinSupportVector, SpaceShape, StructuredOperator

CERTIFIED = "certified"
REFUTED = "refuted"
UNKNOWN = "unknown"

ANALYTIC_SHIFT = "unitarily equivalent to an analytic shift"


@dataclass(frozen=True)
class Certainty:
    verdict: str
    witness: FinSupportVector | None = None
    evidence: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.verdict == CERTIFIED

    @property
    def refuted(self) -> bool:
        return self.verdict == REFUTED

    @property
    def unknown(self) -> bool:
        return self.verdict == UNKNOWN


@dataclass(frozen=True)
class SelfCommutator:
    operator: StructuredOperator
    finite_rank: bool
    pairs: tuple = ()
    psd: bool = True
    float_derived: bool = False

    @property
    def rank(self) -> int:
        return len(self.pairs)

    @property
    def alphas(self) -> tuple:
        return tuple(a for a, _ in self.pairs)

    @property
    def residual(self) -> dict:
        return dict(self.operator.symbol)


@dataclass(frozen=True)
class DefectData:
    """Range closure of a defect square M = T_C + K with constant C.

    The space is span(basis) (+) (ran C placed on every level >= levels);
    basis vectors live on the window levels < ``levels`` and the tail.
    ``resolved`` is False when the symbol is not constant; then nothing but
    ``operator`` is meaningful.
    """

    operator: StructuredOperator
    finite_rank: bool
    resolved: bool
    levels: int = 0
    basis: tuple = ()
    gram: tuple = ()
    strand_range: tuple = ()

    @property
    def dim(self) -> int | None:
        return len(self.basis) if self.finite_rank else None

    def finite_dim_at(self, levels: int) -> int:
        return len(self.basis) + (levels - self.levels) * len(self.strand_range)

    def _split(self, x: FinSupportVector, levels: int):
        shape = x.shape
        window = [x.entries.get(c, Fraction(0)) for c in shape.window_coords(levels)]
        by_level: dict = {}
        for (lv, s), v in x.entries.items():
            if lv != TAIL and lv >= levels:
                by_level.setdefault(lv, [Fraction(0)] * shape.p)[s] = v
        return window, by_level

    def contains(self, x: FinSupportVector, tol: TolerancePolicy = DEFAULT_TOL) -> bool:
        window, rest = self._split(x, self.levels)
        vecs = [v.to_window(self.levels) for v in self.basis]
        if not in_span(vecs, window, tol):
            return False
        return all(in_span(list(self.strand_range), piece, tol) for piece in rest.values())

    def orthogonal_to(self, x: FinSupportVector, tol: TolerancePolicy = DEFAULT_TOL) -> bool:
        lim = 0.0 if x_is_exact(x) else tol.rank_tol
        for v in self.basis:
            if abs(x.inner(v)) > lim:
                return False
        _, rest = self._split(x, self.levels)
        return all(abs(inner(piece, r)) <= lim for piece in rest.values() for r in self.strand_range)

    def vectors_at(self, levels: int) -> list[FinSupportVector]:
        """Generators of the finite part when the window is widened to ``levels``."""
        out = list(self.basis)
        shape = self.operator.shape_in
        for lv in range(self.levels, levels):
            for r in self.strand_range:
                out.append(FinSupportVector(shape, {(lv, s): v for s, v in enumerate(r)}))
        return out


def x_is_exact(x: FinSupportVector) -> bool:
    return all(is_exact(v) for v in x.entries.values())


@dataclass(frozen=True)
class NFinite:
    n: int
    alphas: tuple


@dataclass(frozen=True)
class Certificate:
    kind: str
    checked_hypotheses: tuple
    conclusion: str
    details: dict = field(default_factory=dict)
    issued: bool = True


@dataclass(frozen=True)
class Failure:
    kind: str
    checked_hypotheses: tuple
    failed: tuple
    issued: bool = False


@dataclass(frozen=True)
class Classification:
    contraction: Certainty
    hyponormal: Certainty
    selfcomm: SelfCommutator
    defect: DefectData
    defect_adjoint: DefectData
    n_finite: NFinite | None
    finite_isometry: bool
    purity: Certainty
    certificates: tuple
    failures: tuple = ()

    def certificate(self, kind: str) -> Certificate | None:
        return next((c for c in self.certificates if c.kind == kind), None)


# positivity ---------------------------------------------------------------


def _quad(m: StructuredOperator, x: FinSupportVector):
    return oc.apply(m, x).inner(x)


def _refute(m: StructuredOperator, x: FinSupportVector, tol: TolerancePolicy, **evidence) -> Certainty:
    val = _quad(m, x)
    exact = x_is_exact(x) and m.is_exact()
    bad = val.real < 0 if exact else val.real < -tol.psd_tol
    if not bad:
        raise InternalInconsistency("negative direction failed exact verification")
    evidence["quadratic_form"] = val.real
    return Certainty(REFUTED, x, evidence)


def _symbol_at(m: StructuredOperator, zeta: complex) -> np.ndarray:
    p = m.shape_in.p
    f = np.zeros((m.shape_out.p, p), dtype=complex)
    for (k, a, b), v in m.symbol.items():
        f[a, b] += complex(v) * zeta**k
    return f


def _rational(x: float, den: int = 1000) -> Fraction:
    return Fraction(x).limit_denominator(den)


def positivity(m: StructuredOperator, tol: TolerancePolicy = DEFAULT_TOL) -> Certainty:
    """Three-valued test of m >= 0 for a hermitian structured operator."""
    shape = m.shape_in
    w = m.window
    powers = m.symbol_powers()
    if all(k == 0 for k in powers):
        if powers:
            neg = psd_witness(m.symbol_coeff(0), tol)
            if neg is not None:
                x = FinSupportVector(shape, {(w, s): v for s, v in enumerate(neg)})
                return _refute(m, x, tol, source="symbol")
        neg = psd_witness(m.window_block(w), tol)
        if neg is None:
            return Certainty(CERTIFIED, evidence={"window": w})
        return _refute(m, FinSupportVector.from_window(shape, w, neg), tol, source="window")
    # non-constant symbol: search for a counterexample only
    band = m.band
    n = w + 2 * band + 2
    neg = psd_witness(m.window_block(n), tol)
    if neg is not None:
        return _refute(m, FinSupportVector.from_window(shape, n, neg), tol, source="finite section")
    samples = []
    best = (math.inf, None, None)
    for j in range(tol.circle_samples):
        zeta = cmath.exp(2j * math.pi * j / tol.circle_samples)
        vals, vecs = np.linalg.eigh(_symbol_at(m, zeta))
        samples.append(float(vals[0]))
        if vals[0] < best[0]:
            best = (float(vals[0]), zeta, vecs[:, 0])
    lam, zeta, vec = best
    if lam < -1e-12:
        t = _rational(math.tan(cmath.phase(zeta) / 2), 64) if abs(cmath.phase(zeta)) < 3.1 else None
        z = cq((1 - t * t) / (1 + t * t), 2 * t / (1 + t * t)) if t is not None else Fraction(-1)
        v = [cq(_rational(c.real), _rational(c.imag)) for c in vec]
        if not m.is_exact():
            z, v = complex(z), [complex(c) for c in v]
        zc = z.conjugate()
        for length in (8, 32, 128):
            entries = {}
            pw = Fraction(1)
            for k in range(length):
                for s, c in enumerate(v):
                    entries[(w + band + k, s)] = pw * c
                pw = pw * zc
            x = FinSupportVector(shape, entries)
            val = _quad(m, x)
            if val.real < (0 if m.is_exact() else -tol.psd_tol):
                return _refute(m, x, tol, source="circle", min_symbol_eigenvalue=lam)
    return Certainty(
        UNKNOWN,
        evidence={"min_symbol_eigenvalue": min(samples), "circle_samples": tol.circle_samples},
    )


# defects and commutators --------------------------------------------------


def _square(t: StructuredOperator) -> None:
    if not t.is_square:
        raise ShapeMismatch("operator must act on a single space")


def defect_squared(t: StructuredOperator) -> StructuredOperator:
    _square(t)
    return oc.identity(t.shape_in) - t.H @ t


def defect_squared_adjoint(t: StructuredOperator) -> StructuredOperator:
    _square(t)
    return oc.identity(t.shape_in) - t @ t.H


def commutator_operator(t: StructuredOperator) -> StructuredOperator:
    _square(t)
    return t.H @ t - t @ t.H


def _lift(shape: SpaceShape, levels: int, vecs) -> tuple:
    return tuple(FinSupportVector.from_window(shape, levels, v) for v in vecs)


def range_space(m: StructuredOperator, tol: TolerancePolicy = DEFAULT_TOL) -> DefectData:
    """Range closure of a hermitian structured operator (see DefectData)."""
    shape = m.shape_in
    powers = m.symbol_powers()
    if any(k != 0 for k in powers):
        return DefectData(m, False, False)
    levels = m.window
    rb = orth_basis_of_range(m.window_block(levels), tol)
    srange = orth_basis_of_range(m.symbol_coeff(0), tol).vectors if powers else ()
    return DefectData(m, not powers, True, levels, _lift(shape, levels, rb.vectors), rb.gram, tuple(srange))


def defect_space(t: StructuredOperator, tol: TolerancePolicy = DEFAULT_TOL) -> DefectData:
    return range_space(defect_squared(t), tol)


def defect_space_adjoint(t: StructuredOperator, tol: TolerancePolicy = DEFAULT_TOL) -> DefectData:
    return range_space(defect_squared_adjoint(t), tol)


def self_commutator(t: StructuredOperator, tol: TolerancePolicy = DEFAULT_TOL) -> SelfCommutator:
    c = commutator_operator(t)
    if c.symbol:
        return SelfCommutator(c, False)
    levels = c.window
    blk = c.window_block(levels)
    if psd_witness(blk, tol) is not None:
        return SelfCommutator(c, True, (), psd=False)
    dec = spectral_rank_one_decomp(blk, tol)
    pairs = tuple((a, FinSupportVector.from_window(t.shape_in, levels, e)) for a, e in dec.pairs)
    return SelfCommutator(c, True, pairs, True, dec.float_derived)


def is_contraction(t: StructuredOperator, tol: TolerancePolicy = DEFAULT_TOL) -> Certainty:
    return positivity(defect_squared(t), tol)


def is_hyponormal(t: StructuredOperator, tol: TolerancePolicy = DEFAULT_TOL) -> Certainty:
    return positivity(commutator_operator(t), tol)


def commutator_range(sc: SelfCommutator, tol: TolerancePolicy = DEFAULT_TOL) -> DefectData:
    return range_space(sc.operator, tol)


def _spaces_equal(a: Sequence, b: Sequence, tol) -> bool:
    return len(a) == len(b) and all(in_span(list(b), v, tol) for v in a)


def orthocomplement_dim(d_small: DefectData, d_big: DefectData, tol: TolerancePolicy = DEFAULT_TOL) -> int | None:
    """dim(d_big (-) d_small) after checking d_small is inside d_big.

    Returns None when the difference is infinite-dimensional and raises
    InternalInconsistency when the containment fails.
    """
    if not (d_small.resolved and d_big.resolved):
        return None
    if not all(in_span(list(d_big.strand_range), r, tol) for r in d_small.strand_range):
        raise InternalInconsistency("defect space is not contained in the adjoint defect space")
    levels = max(d_small.levels, d_big.levels)
    for v in d_small.vectors_at(levels):
        if not d_big.contains(v, tol):
            raise InternalInconsistency("defect space is not contained in the adjoint defect space")
    if not _spaces_equal(d_small.strand_range, d_big.strand_range, tol):
        return None
    return d_big.finite_dim_at(levels) - d_small.finite_dim_at(levels)


def _n_finite(contraction, hyponormal, sc, d_t, d_ts, tol) -> NFinite | None:
    if not (contraction.certified and hyponormal.certified and sc.finite_rank and sc.psd):
        return None
    if sc.rank < 1:
        return None
    crange = commutator_range(sc, tol)
    for v in crange.basis:
        if not d_t.resolved or not d_ts.resolved:
            return None
        if not d_t.orthogonal_to(v, tol) or not d_ts.contains(v, tol):
            return None
    nf = NFinite(sc.rank, sc.alphas)
    diff = orthocomplement_dim(d_t, d_ts, tol)
    if diff != nf.n:
        raise InternalInconsistency(
            f"dim of adjoint defect minus defect is {diff}, commutator rank is {nf.n}"
        )
    return nf


# purity -----------------------------------------------------------------


class _SparseEchelon:
    """Incrementally maintained reduced row echelon basis of functionals."""

    def __init__(self, tol: float):
        self.rows: dict[int, dict] = {}
        self.tol = tol

    def _small(self, v) -> bool:
        return v == 0 if is_exact(v) else abs(v) <= self.tol

    def reduce(self, f: dict) -> dict:
        f = {k: v for k, v in f.items() if not self._small(v)}
        for pc in [k for k in f if k in self.rows]:
            c = f.get(pc)
            if c is None or self._small(c):
                f.pop(pc, None)
                continue
            for k, v in self.rows[pc].items():
                nv = f.get(k, 0) - c * v
                if self._small(nv):
                    f.pop(k, None)
                else:
                    f[k] = nv
        return f

    def insert(self, f: dict) -> dict | None:
        g = self.reduce(f)
        if not g:
            return None
        if not all(is_exact(v) for v in g.values()):
            pc = max(g, key=lambda k: (abs(g[k]), -k))
        else:
            pc = min(g)
        piv = g[pc]
        g = {k: v / piv for k, v in g.items()}
        g[pc] = Fraction(1) if is_exact(piv) else 1.0
        for row in self.rows.values():
            c = row.get(pc)
            if c is not None:
                for k, v in g.items():
                    nv = row.get(k, 0) - c * v
                    if self._small(nv):
                        row.pop(k, None)
                    else:
                        row[k] = nv
                row.pop(pc, None)
        self.rows[pc] = g
        return g

    @property
    def rank(self) -> int:
        return len(self.rows)


def _column_images(op: StructuredOperator, coords: list) -> dict:
    """rows[r] = [(column index, value)] of op restricted to the given columns."""
    rows: dict = {}
    for j, c in enumerate(coords):
        img = oc.apply(op, FinSupportVector(op.shape_in, {c: Fraction(1)}))
        for r, v in img.entries.items():
            rows.setdefault(r, []).append((j, v))
    return rows


def invariant_normal_part(t: StructuredOperator, window: int, tol: TolerancePolicy = DEFAULT_TOL):
    """Largest subspace of window-supported vectors invariant under T and T*
    and annihilated by [T*, T]; returns (dimension, basis)."""
    shape = t.shape_in
    coords = shape.window_coords(window)
    index = {c: j for j, c in enumerate(coords)}
    comm = commutator_operator(t)
    t_rows = _column_images(t, coords)
    ts_rows = _column_images(t.H, coords)
    c_rows = _column_images(comm, coords)
    ech = _SparseEchelon(tol.rank_tol)
    queue: list[dict] = []
    for r, items in c_rows.items():
        queue.append(dict(items))
    for rows in (t_rows, ts_rows):
        for r, items in rows.items():
            if r not in index:
                queue.append(dict(items))
    inside_t = {index[r]: items for r, items in t_rows.items() if r in index}
    inside_ts = {index[r]: items for r, items in ts_rows.items() if r in index}

    def compose(f: dict, rows: dict) -> dict:
        out: dict = {}
        for r, fv in f.items():
            for j, v in rows.get(r, ()):
                out[j] = out.get(j, 0) + fv * v
        return out

    while queue:
        g = ech.insert(queue.pop())
        if g is None:
            continue
        queue.append(compose(g, inside_t))
        queue.append(compose(g, inside_ts))
    free = [j for j in range(len(coords)) if j not in ech.rows]
    basis = []
    for f in free:
        vec = {coords[f]: Fraction(1) if t.is_exact() else 1.0}
        for pc, row in ech.rows.items():
            if f in row:
                vec[coords[pc]] = -row[f]
        basis.append(FinSupportVector(shape, vec))
    return len(free), basis


def _is_plain_shift(t: StructuredOperator) -> bool:
    return t.shape_in.q == 0 and t.is_square and oc.equals(t, oc.shift(t.shape_in))


def purity_evidence(
    t: StructuredOperator,
    window: int = 32,
    tol: TolerancePolicy = DEFAULT_TOL,
    selfcomm: SelfCommutator | None = None,
) -> Certainty:
    """Search for a normal reducing subspace among window-supported vectors.

    The refinement M <- M cap T^-1 M cap T*^-1 M is run to its fixpoint, so
    the result does not depend on a round count.
    """
    sc = selfcomm or self_commutator(t, tol)
    if not sc.finite_rank:
        raise PreconditionFailed("self-commutator has a nonzero symbol")
    if "pure" in t.tags or _is_plain_shift(t):
        return Certainty(CERTIFIED, evidence={"level": "construction-certified"})
    if not sc.operator.symbol and not sc.operator.kernel:
        coord = t.shape_in.window_coords(1)[0]
        x = FinSupportVector.basis(t.shape_in, coord)
        return Certainty(REFUTED, x, {"reason": "operator is normal", "window": window})
    dim, basis = invariant_normal_part(t, window, tol)
    if dim:
        x = basis[0]
        if not oc.apply(sc.operator, x).is_zero(tol.rank_tol if not x_is_exact(x) else 0.0):
            raise InternalInconsistency("normal-part witness is not in the commutator kernel")
        return Certainty(REFUTED, x, {"dimension": dim, "window": window})
    return Certainty(
        UNKNOWN,
        evidence={"dimension": 0, "window": window, "level": f"window-{window} refinement empty"},
    )


# classification ------------------------------------------------------------


def classify(
    t: StructuredOperator,
    tol: TolerancePolicy = DEFAULT_TOL,
    window: int = 32,
) -> Classification:
    _square(t)
    contraction = is_contraction(t, tol)
    hyponormal = is_hyponormal(t, tol)
    sc = self_commutator(t, tol)
    d_t = defect_space(t, tol)
    d_ts = defect_space_adjoint(t, tol)
    finite_iso = contraction.certified and hyponormal.certified and d_t.finite_rank
    nf = _n_finite(contraction, hyponormal, sc, d_t, d_ts, tol)
    if sc.finite_rank:
        purity = purity_evidence(t, window, tol, sc)
    else:
        purity = Certainty(UNKNOWN, evidence={"reason": "self-commutator has a nonzero symbol"})
    certs = []
    fails = []
    partial = Classification(contraction, hyponormal, sc, d_t, d_ts, nf, finite_iso, purity, ())
    for res in (
        _thm41_from(partial),
        _projection_from(t, partial, tol) if _projection_applicable(partial) else None,
        _thm52_from(partial),
    ):
        if res is None:
            continue
        (certs if res.issued else fails).append(res)
    return Classification(
        contraction, hyponormal, sc, d_t, d_ts, nf, finite_iso, purity, tuple(certs), tuple(fails)
    )


# certificates ------------------------------------------------------------


def _thm41_from(c: Classification):
    hyps = (
        ("finite_isometry", c.finite_isometry),
        ("contraction", c.contraction.verdict),
        ("hyponormal", c.hyponormal.verdict),
        ("purity", c.purity.verdict),
    )
    purity_ok = c.purity.certified or (c.purity.unknown and c.purity.evidence.get("dimension") == 0)
    failed = tuple(
        name
        for name, ok in (
            ("finite_isometry", c.finite_isometry),
            ("contraction", c.contraction.certified),
            ("hyponormal", c.hyponormal.certified),
            ("purity", purity_ok),
        )
        if not ok
    )
    if failed:
        return Failure("Thm41", hyps, failed)
    return Certificate(
        "Thm41",
        hyps,
        ANALYTIC_SHIFT,
        {
            "purity_evidence": c.purity.evidence.get("level"),
            "informational": "point spectrum is empty (implied, not checked)",
        },
    )


def cert_thm41(t: StructuredOperator, tol: TolerancePolicy = DEFAULT_TOL, window: int = 32):
    c = classify(t, tol, window)
    return c.certificate("Thm41") or next(f for f in c.failures if f.kind == "Thm41")


def _projection_applicable(c: Classification) -> bool:
    return (
        c.contraction.certified
        and c.selfcomm.finite_rank
        and c.selfcomm.psd
        and c.selfcomm.rank > 0
        and all(a == 1 for a in c.selfcomm.alphas)
    )


def _projection_from(t: StructuredOperator, c: Classification, tol: TolerancePolicy):
    ts = t.H
    vecs = commutator_range(c.selfcomm, tol).basis if not c.selfcomm.float_derived else [
        e for _, e in c.selfcomm.pairs
    ]
    lim = 0.0 if t.is_exact() else tol.rank_tol
    bad = tuple(f"e{j}" for j, e in enumerate(vecs) if not oc.apply(ts, e).is_zero(lim))
    hyps = (("contraction", CERTIFIED), ("projection_commutator", True), ("adjoint_kills_range", not bad))
    if bad:
        return Failure("ProjectionRemark", hyps, bad)
    return Certificate(
        "ProjectionRemark",
        hyps,
        "unitarily equivalent to a unilateral shift plus a normal operator (model X1)",
        {"checked_vectors": len(vecs)},
    )


def cert_projection_remark(t: StructuredOperator, tol: TolerancePolicy = DEFAULT_TOL):
    contraction = is_contraction(t, tol)
    sc = self_commutator(t, tol)
    if not (contraction.certified and sc.finite_rank and sc.psd and sc.rank > 0):
        raise PreconditionFailed("needs a certified contraction with finite-rank self-commutator")
    if any(a != 1 for a in sc.alphas):
        raise PreconditionFailed("self-commutator is not a projection (some alpha differs from 1)")
    part = Classification(contraction, Certainty(CERTIFIED), sc, None, None, None, False, Certainty(UNKNOWN), ())
    return _projection_from(t, part, tol)


def _thm52_from(c: Classification):
    if c.n_finite is None:
        return None
    alphas = c.n_finite.alphas
    m = sum(1 for a in alphas if a != 1 and not (not is_exact(a) and abs(a - 1) < 1e-9))
    kind = "X1" if m == 0 else "X2"
    hyps = (("n_finite", True), ("contraction", CERTIFIED), ("hyponormal", CERTIFIED))
    return Certificate(
        "Thm52Model",
        hyps,
        f"unitarily equivalent to the model {kind}",
        {"model": {"kind": kind, "n": c.n_finite.n, "m": m, "alphas": list(alphas)}},
    )


def check_prop22(s_mult: int, x: StructuredOperator, tol: TolerancePolicy = DEFAULT_TOL) -> dict:
    shape = SpaceShape(s_mult, 0)
    if x.shape_in != shape or x.shape_out != shape:
        raise ShapeMismatch("X must act on the shift space of the given multiplicity")
    s = oc.shift(shape)
    t = oc.block_compose([[s, x], [None, s.H]])
    left = is_contraction(t, tol).certified and is_hyponormal(t, tol).certified
    xs = x.H
    p0 = oc.identity(shape) - s @ s.H
    partial = oc.equals(x @ xs @ x, x)
    into = oc.equals(s.H @ x, oc.zero(shape))
    onto = oc.equals(xs @ x, p0)
    right = partial and into and onto
    iso = oc.equals(defect_squared(t), oc.zero(t.shape_in)) if left else None
    return {
        "is_hypo_contraction": left,
        "is_partial_isometry_into_ker": right,
        "is_isometry": iso,
    }


def _is_nilpotent(m: FinMatrix) -> bool:
    p = m
    for _ in range(max(m.rows, 1)):
        if p.is_zero():
            return True
        p = p @ m
    return p.is_zero()


def analytic_evidence(b: StructuredOperator) -> Certainty:
    """Analyticity (intersection of ran B^n is zero) for the decidable cases."""
    if "analytic" in b.tags:
        return Certainty(CERTIFIED, evidence={"reason": "construction tag"})
    if b.shape_in.p == 0:
        blk = b.window_block(0)
        if _is_nilpotent(blk):
            return Certainty(CERTIFIED, evidence={"reason": "nilpotent on a finite space"})
        img = blk
        for _ in range(blk.rows):
            img = img @ blk
        rb = orth_basis_of_range(img)
        x = FinSupportVector.from_window(b.shape_in, 0, rb.vectors[0])
        return Certainty(REFUTED, x, {"reason": "range of B^dim is nonzero", "dimension": len(rb)})
    if all(k >= 1 for k, _, _ in b.symbol):
        ok = True
        tails = []
        for (r, c), v in b.kernel.items():
            if r[0] == TAIL and c[0] == TAIL:
                tails.append((r[1], c[1], v))
            elif r[0] == TAIL:
                ok = False
            elif c[0] != TAIL and r[0] <= c[0]:
                ok = False
        if ok:
            q = b.shape_in.q
            z = Fraction(0)
            grid = [[z] * q for _ in range(q)]
            for i, j, v in tails:
                grid[i][j] = v
            if q == 0 or _is_nilpotent(FinMatrix.from_rows(grid)):
                return Certainty(CERTIFIED, evidence={"reason": "raises levels, nilpotent tail"})
    return Certainty(UNKNOWN, evidence={"reason": "analyticity is only decided for finite or level-raising B"})


def invertibility(m: StructuredOperator) -> Certainty:
    """Invertibility of a structured operator with constant symbol."""
    powers = m.symbol_powers()
    if any(k != 0 for k in powers):
        return Certainty(UNKNOWN, evidence={"reason": "non-constant symbol"})
    if m.shape_in.p:
        c0 = m.symbol_coeff(0)
        try:
            invert(c0)
        except Singular as exc:
            w = exc.witness or nullspace(c0)[0]
            lv = m.window
            x = FinSupportVector(m.shape_in, {(lv, s): v for s, v in enumerate(w)})
            return Certainty(REFUTED, x, {"reason": "symbol is singular"})
    blk = m.window_block(m.window)
    try:
        invert(blk)
    except Singular as exc:
        w = exc.witness or nullspace(blk)[0]
        return Certainty(REFUTED, FinSupportVector.from_window(m.shape_in, m.window, w), {"reason": "window block singular"})
    return Certainty(CERTIFIED, evidence={"window": m.window})


def inverse_operator(m: StructuredOperator) -> StructuredOperator:
    """Exact inverse of T_C + K for constant invertible C (raises Singular)."""
    if any(k != 0 for k in m.symbol_powers()):
        raise Singular("inverse only available for constant symbols")
    shape = m.shape_in
    lv = m.window
    sym = {}
    if shape.p:
        cinv = invert(m.symbol_coeff(0))
        sym = {(0, a, b): cinv[a, b] for a in range(shape.p) for b in range(shape.p)}
    binv = invert(m.window_block(lv))
    base = StructuredOperator(shape, shape, sym)
    coords = shape.window_coords(lv)
    ker = {}
    for i, r in enumerate(coords):
        for j, c in enumerate(coords):
            v = binv[i, j] - base.entry(r, c)
            if v != 0:
                ker[(r, c)] = v
    return StructuredOperator(shape, shape, sym, ker)


def cert_thm31(s_mult: int, a: StructuredOperator, b: StructuredOperator, tol: TolerancePolicy = DEFAULT_TOL):
    s_shape = SpaceShape(s_mult, 0)
    if a.shape_out != s_shape or a.shape_in != b.shape_out or not b.is_square:
        raise ShapeMismatch("blocks do not fit [[S, A], [0, B]]")
    s = oc.shift(s_shape)
    h1 = oc.equals(s.H @ a, oc.zero(a.shape_in, a.shape_out))
    h2 = invertibility(a.H @ a + b.H @ b)
    h3 = analytic_evidence(b)
    hyps = (
        ("S*A = 0", h1),
        ("A*A + B*B invertible", h2.verdict),
        ("B analytic", h3.verdict),
    )
    failed = tuple(n for n, ok in zip(("S*A = 0", "A*A + B*B invertible", "B analytic"), (h1, h2.certified, h3.certified)) if not ok)
    if failed:
        return Failure("Thm31", hyps, failed)
    return Certificate(
        "Thm31",
        hyps,
        ANALYTIC_SHIFT,
        {"scope": "analyticity of B decided only for finite-dimensional or construction-tagged B"},
    )


# shift plus defect block decomposition ------------------------------------


@dataclass(frozen=True)
class Decomposition:
    S: StructuredOperator
    A: StructuredOperator
    B: StructuredOperator
    basis_change: StructuredOperator
    levels: int
    defect_strands: tuple
    kernel_s_adjoint: tuple
    unitary_part: Certainty
    float_derived: bool = False
    purity: Certainty | None = None

    @property
    def conjugated(self) -> StructuredOperator:
        return oc.block_compose([[self.S, self.A], [None, self.B]])


def _normalize(vecs: list, grams: list):
    out = []
    exact = True
    for v, g in zip(vecs, grams):
        r = sqrt_exact(g) if is_exact(g) else None
        if r is None:
            exact = False
            r = math.sqrt(float(g))
        out.append(tuple(x / r for x in v))
    return out, exact


def _window_unitary(f_vecs: list, dim: int, tol: TolerancePolicy):
    """Orthonormal basis [complement of span f | f] of C^dim."""
    if f_vecs:
        rows = FinMatrix.from_rows([[x.conjugate() for x in v] for v in f_vecs])
        comp = nullspace(rows, tol)
    else:
        comp = [tuple(Fraction(int(i == j)) for i in range(dim)) for j in range(dim)]
    cvecs, cgram = gram_schmidt(comp, tol.rank_tol if comp and not is_exact(comp[0][0]) else 0.0)
    fv, fg = gram_schmidt(f_vecs)
    cn, e1 = _normalize(cvecs, cgram)
    fn, e2 = _normalize(fv, fg)
    return cn, fn, e1 and e2


def decompose_prop21(
    t: StructuredOperator,
    purity: Certainty | None = None,
    tol: TolerancePolicy = DEFAULT_TOL,
    window: int = 32,
) -> Decomposition:
    """Split T as [[S, A], [0, B]] on (H (-) D_T) (+) D_T.

    The change of basis keeps the defect strands (where I - T*T has a
    nonzero constant symbol) as strands, shifts every strand down by the
    defect window ``L`` and turns the window coordinates into tail
    coordinates, ordered as [complement of D_T | finite part of D_T].
    """
    if not is_contraction(t, tol).certified or not is_hyponormal(t, tol).certified:
        raise NotCertifiedHyponormalContraction("decomposition needs a certified hyponormal contraction")
    d = defect_space(t, tol)
    if not d.resolved:
        raise DefectNotFinite("defect symbol is not constant")
    dsq = d.operator
    shape = t.shape_in
    p = shape.p
    c0 = dsq.symbol_coeff(0) if p else FinMatrix.zeros(0, 0)
    sigma = [s for s in range(p) if any(c0[s, j] != 0 or c0[j, s] != 0 for j in range(p))]
    for a in sigma:
        for b in range(p):
            if a != b and c0[a, b] != 0:
                raise DefectNotFinite("defect symbol couples strands; only diagonal symbols are handled")
    rest = [s for s in range(p) if s not in sigma]
    levels = d.levels
    wdim = levels * p + shape.q
    f_vecs = [v.to_window(levels) for v in d.basis]
    comp, fin, exact = _window_unitary(f_vecs, wdim, tol)
    float_mode = not (exact and t.is_exact())
    if float_mode:
        t = oc.to_float_op(t)
        comp = [tuple(complex(x) for x in v) for v in comp]
        fin = [tuple(complex(x) for x in v) for v in fin]
    order = rest + sigma
    new_shape = SpaceShape(p, len(comp) + len(fin))
    coords = shape.window_coords(levels)
    sym = {(levels, order[s], s): Fraction(1) for s in range(p)}
    ker = {}
    for j, v in enumerate(comp + fin):
        for c, x in zip(coords, v):
            if x != 0:
                ker[(c, (TAIL, j))] = x
    u = StructuredOperator(new_shape, shape, sym, ker)
    lim = tol.psd_tol if float_mode else 0.0
    if not oc.equals(u.H @ u, oc.identity(new_shape), lim) or not oc.equals(u @ u.H, oc.identity(shape), lim):
        raise InternalInconsistency("basis change is not unitary")
    tn = u.H @ t @ u
    s_sel = (list(range(len(rest))), list(range(len(comp))))
    b_sel = (list(range(len(rest), p)), list(range(len(comp), len(comp) + len(fin))))
    s_blk = oc.restrict(tn, s_sel, s_sel)
    a_blk = oc.restrict(tn, s_sel, b_sel)
    b_blk = oc.restrict(tn, b_sel, b_sel)
    low = oc.restrict(tn, b_sel, s_sel)
    if not oc.equals(low, oc.zero(low.shape_in, low.shape_out), lim):
        raise InternalInconsistency("defect space is not invariant under T*")
    if not oc.equals(s_blk.H @ a_blk, oc.zero(a_blk.shape_in, a_blk.shape_out), lim):
        raise InternalInconsistency("S*A is not zero")
    if not oc.equals(s_blk.H @ s_blk, oc.identity(s_blk.shape_in), lim):
        raise InternalInconsistency("S is not an isometry")
    if not is_contraction(b_blk, tol).certified:
        raise InternalInconsistency("B is not a certified contraction")
    whole = oc.block_compose([[s_blk, a_blk], [None, b_blk]])
    if not oc.equals(u @ whole @ u.H, t, lim):
        raise InternalInconsistency("reassembly does not reproduce T")
    ker_s = _kernel_of_adjoint(s_blk, tol)
    if s_blk.shape_in.p + s_blk.shape_in.q:
        unitary = purity_evidence(s_blk, window, tol) if self_commutator(s_blk, tol).finite_rank else Certainty(UNKNOWN)
    else:
        unitary = Certainty(CERTIFIED, evidence={"reason": "empty"})
    return Decomposition(s_blk, a_blk, b_blk, u, levels, tuple(sigma), ker_s, unitary, float_mode, purity)


def _kernel_of_adjoint(s: StructuredOperator, tol: TolerancePolicy) -> tuple:
    shape = s.shape_in
    if not (shape.p + shape.q):
        return ()
    lv = s.window + s.band + 1
    cols = shape.window_coords(lv)
    rows = shape.window_coords(lv + s.band)
    sh = s.H
    mat = FinMatrix.from_rows([[sh.entry(r, c) for c in cols] for r in rows])
    return tuple(FinSupportVector.from_window(shape, lv, v) for v in nullspace(mat, tol))
