"""Structured operators on l2(Z+) (x) C^p (+) C^q.

An operator is stored as a block Laurent symbol (the entry pattern far from
the origin) plus a finitely supported correction kernel.  Coordinates are
pairs: ``(level, strand)`` for shift coordinates and ``(-1, t)`` for the
finite tail.  With zero-free dictionaries the representation is canonical,
so equality of operators is plain componentwise comparison.

The one nontrivial rule is the product of two Toeplitz parts:
T_{z^a} T_{z^b} differs from T_{z^(a+b)} only when a > 0 > b, and then by
the finite-rank term -sum e_{l+a} (x) e_{l-b} over max(b, -a) <= l < 0.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

from .errors import ShapeMismatch
from .exactnum import FinMatrix, abs2, is_exact, render

__all__ = [
    "SpaceShape",
    "FinSupportVector",
    "StructuredOperator",
    "FLOAT_CLEAN",
    "shift",
    "adjoint_shift",
    "identity",
    "zero",
    "rank_one",
    "tail_block",
    "cross_block",
    "strand_matrix",
    "make_primitive",
    "block_compose",
    "restrict",
    "add",
    "scale",
    "adjoint",
    "multiply",
    "apply",
    "equals",
    "dense_truncation",
    "to_float_op",
]

# Float-mode entries at or below this magnitude are dropped by canonicalization.
FLOAT_CLEAN = 1e-13

TAIL = -1


def _is_negligible(v) -> bool:
    if is_exact(v):
        return v == 0
    return abs(v) <= FLOAT_CLEAN


def _clean(d: Mapping) -> dict:
    return {k: (Fraction(v) if isinstance(v, int) else v) for k, v in d.items() if not _is_negligible(v)}


@dataclass(frozen=True)
class SpaceShape:
    p: int
    q: int = 0

    def __post_init__(self):
        if self.p < 0 or self.q < 0:
            raise ShapeMismatch(f"negative dimensions in {self}")

    def check(self, coord) -> None:
        level, idx = coord
        if level == TAIL:
            if not 0 <= idx < self.q:
                raise ShapeMismatch(f"tail index {idx} outside C^{self.q}")
        elif level < 0 or not 0 <= idx < self.p:
            raise ShapeMismatch(f"coordinate {coord} outside shape {self}")

    def tails(self) -> list[tuple[int, int]]:
        return [(TAIL, t) for t in range(self.q)]

    def window_coords(self, levels: int) -> list[tuple[int, int]]:
        """Shift coordinates below ``levels`` (level-major), then the tail."""
        return [(k, s) for k in range(levels) for s in range(self.p)] + self.tails()

    def __str__(self) -> str:
        return f"l2({self.p}) (+) C({self.q})"


def coord_sort_key(c):
    """Level-major order with the tail last."""
    level, idx = c
    return (1, 0, idx) if level == TAIL else (0, level, idx)


@dataclass(frozen=True, eq=False)
class FinSupportVector:
    shape: SpaceShape
    entries: Mapping

    def __post_init__(self):
        cleaned = _clean(self.entries)
        for c in cleaned:
            self.shape.check(c)
        object.__setattr__(self, "entries", cleaned)

    @classmethod
    def basis(cls, shape: SpaceShape, coord, value=Fraction(1)) -> "FinSupportVector":
        return cls(shape, {coord: value})

    @classmethod
    def zero(cls, shape: SpaceShape) -> "FinSupportVector":
        return cls(shape, {})

    @classmethod
    def from_window(cls, shape: SpaceShape, levels: int, values: Sequence) -> "FinSupportVector":
        coords = shape.window_coords(levels)
        if len(coords) != len(values):
            raise ShapeMismatch("window vector has the wrong length")
        return cls(shape, dict(zip(coords, values)))

    def to_window(self, levels: int) -> tuple:
        return tuple(self.entries.get(c, Fraction(0)) for c in self.shape.window_coords(levels))

    def __eq__(self, other):
        if not isinstance(other, FinSupportVector):
            return NotImplemented
        return self.shape == other.shape and self.entries == other.entries

    __hash__ = None

    def __add__(self, other: "FinSupportVector") -> "FinSupportVector":
        if self.shape != other.shape:
            raise ShapeMismatch("adding vectors of different shapes")
        out = dict(self.entries)
        for c, v in other.entries.items():
            out[c] = out.get(c, 0) + v
        return FinSupportVector(self.shape, out)

    def __sub__(self, other: "FinSupportVector") -> "FinSupportVector":
        return self + other.scale(-1)

    def __neg__(self) -> "FinSupportVector":
        return self.scale(-1)

    def scale(self, c) -> "FinSupportVector":
        return FinSupportVector(self.shape, {k: c * v for k, v in self.entries.items()})

    __rmul__ = scale

    def inner(self, other: "FinSupportVector"):
        """<self, other>, conjugate-linear in ``other``."""
        s = Fraction(0)
        small, big = (self.entries, other.entries)
        for c, v in small.items():
            w = big.get(c)
            if w is not None:
                s = s + v * w.conjugate()
        return s

    def norm2(self):
        s = Fraction(0)
        for v in self.entries.values():
            s = s + abs2(v)
        return s

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(abs(v) <= tol for v in self.entries.values()) if tol else not self.entries

    @property
    def max_level(self) -> int:
        return max((c[0] for c in self.entries if c[0] != TAIL), default=-1)

    def sorted_items(self) -> list:
        return sorted(self.entries.items(), key=lambda kv: coord_sort_key(kv[0]))

    def __repr__(self) -> str:
        body = ", ".join(f"{_coord_text(c)}: {render(v)}" for c, v in self.sorted_items())
        return f"FinSupportVector({{{body}}})"


def _coord_text(c) -> str:
    level, idx = c
    return f"t{idx}" if level == TAIL else f"{level},{idx}"


@dataclass(frozen=True)
class StructuredOperator:
    """T_symbol + kernel.

    ``symbol`` maps ``(k, a, b)`` to the coefficient of z^k in row-strand a,
    column-strand b.  ``kernel`` maps ``(row_coord, col_coord)`` to a scalar.
    """

    shape_in: SpaceShape
    shape_out: SpaceShape
    symbol: Mapping = field(default_factory=dict)
    kernel: Mapping = field(default_factory=dict)
    tags: frozenset = field(default=frozenset(), compare=False)
    meta: Mapping = field(default_factory=dict, compare=False)

    def __post_init__(self):
        sym = _clean(self.symbol)
        ker = _clean(self.kernel)
        for k, a, b in sym:
            if not (0 <= a < self.shape_out.p and 0 <= b < self.shape_in.p):
                raise ShapeMismatch(f"symbol entry {(k, a, b)} outside strands")
        for r, c in ker:
            self.shape_out.check(r)
            self.shape_in.check(c)
        object.__setattr__(self, "symbol", sym)
        object.__setattr__(self, "kernel", ker)
        object.__setattr__(self, "tags", frozenset(self.tags))

    __hash__ = None

    # derived structure ------------------------------------------------
    @cached_property
    def sym_by_in(self) -> dict:
        d = defaultdict(list)
        for (k, a, b), v in self.symbol.items():
            d[b].append((k, a, v))
        return d

    @cached_property
    def sym_by_out(self) -> dict:
        d = defaultdict(list)
        for (k, a, b), v in self.symbol.items():
            d[a].append((k, b, v))
        return d

    @cached_property
    def ker_by_col(self) -> dict:
        d = defaultdict(list)
        for (r, c), v in self.kernel.items():
            d[c].append((r, v))
        return d

    @cached_property
    def ker_by_row(self) -> dict:
        d = defaultdict(list)
        for (r, c), v in self.kernel.items():
            d[r].append((c, v))
        return d

    @property
    def band(self) -> int:
        return max((abs(k) for k, _, _ in self.symbol), default=0)

    @property
    def window(self) -> int:
        """Number of shift levels touched by the kernel."""
        lv = [c[0] for rc in self.kernel for c in rc if c[0] != TAIL]
        return max(lv) + 1 if lv else 0

    @property
    def is_square(self) -> bool:
        return self.shape_in == self.shape_out

    def is_exact(self) -> bool:
        return all(is_exact(v) for v in self.symbol.values()) and all(is_exact(v) for v in self.kernel.values())

    def symbol_coeff(self, k: int) -> FinMatrix:
        z = Fraction(0)
        return FinMatrix.from_rows(
            [[self.symbol.get((k, a, b), z) for b in range(self.shape_in.p)] for a in range(self.shape_out.p)]
        )

    def symbol_powers(self) -> list[int]:
        return sorted({k for k, _, _ in self.symbol})

    def entry(self, row, col):
        v = self.kernel.get((row, col), Fraction(0))
        if row[0] != TAIL and col[0] != TAIL:
            s = self.symbol.get((row[0] - col[0], row[1], col[1]))
            if s is not None:
                v = v + s
        return v

    def window_block(self, levels: int) -> FinMatrix:
        """Matrix of the operator on the first ``levels`` levels plus the tail."""
        rows = self.shape_out.window_coords(levels)
        cols = self.shape_in.window_coords(levels)
        return FinMatrix.from_rows([[self.entry(r, c) for c in cols] for r in rows])

    def with_tags(self, *tags, **meta) -> "StructuredOperator":
        m = dict(self.meta)
        m.update(meta)
        return StructuredOperator(self.shape_in, self.shape_out, self.symbol, self.kernel, self.tags | set(tags), m)

    # operator sugar ---------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, scale(-1, other))

    def __neg__(self):
        return scale(-1, self)

    def __matmul__(self, other):
        if isinstance(other, FinSupportVector):
            return apply(self, other)
        return multiply(self, other)

    def __rmul__(self, c):
        return scale(c, self)

    @property
    def H(self) -> "StructuredOperator":
        return adjoint(self)

    def __repr__(self) -> str:
        return (
            f"StructuredOperator({self.shape_in} -> {self.shape_out}, "
            f"{len(self.symbol)} symbol terms, {len(self.kernel)} kernel entries)"
        )


# primitives -------------------------------------------------------------


def zero(shape_in: SpaceShape, shape_out: SpaceShape | None = None) -> StructuredOperator:
    return StructuredOperator(shape_in, shape_out or shape_in)


def shift(shape: SpaceShape | int) -> StructuredOperator:
    if isinstance(shape, int):
        shape = SpaceShape(shape, 0)
    return StructuredOperator(shape, shape, {(1, a, a): Fraction(1) for a in range(shape.p)})


def adjoint_shift(shape: SpaceShape | int) -> StructuredOperator:
    return adjoint(shift(shape))


def identity(shape: SpaceShape | int) -> StructuredOperator:
    if isinstance(shape, int):
        shape = SpaceShape(shape, 0)
    return StructuredOperator(
        shape,
        shape,
        {(0, a, a): Fraction(1) for a in range(shape.p)},
        {(c, c): Fraction(1) for c in shape.tails()},
    )


def rank_one(shape: SpaceShape, row, col, value=Fraction(1), shape_in: SpaceShape | None = None) -> StructuredOperator:
    """value * e_row (x) e_col, i.e. x -> value <x, e_col> e_row."""
    return StructuredOperator(shape_in or shape, shape, {}, {(tuple(row), tuple(col)): value})


def tail_block(m: FinMatrix, shape: SpaceShape) -> StructuredOperator:
    if m.shape != (shape.q, shape.q):
        raise ShapeMismatch(f"tail block {m.shape} on C^{shape.q}")
    return StructuredOperator(
        shape, shape, {}, {((TAIL, i), (TAIL, j)): m[i, j] for i in range(m.rows) for j in range(m.cols)}
    )


def cross_block(m: FinMatrix, shape: SpaceShape, direction: str = "tail_to_shift") -> StructuredOperator:
    """Couple the tail with level 0 of the strands.

    ``tail_to_shift``: m is p x q and sends tail vectors to constants;
    ``shift_to_tail``: m is q x p and reads the level-0 values into the tail.
    """
    if direction == "tail_to_shift":
        if m.shape != (shape.p, shape.q):
            raise ShapeMismatch(f"cross block {m.shape} for {shape}")
        ker = {((0, a), (TAIL, t)): m[a, t] for a in range(shape.p) for t in range(shape.q)}
    elif direction == "shift_to_tail":
        if m.shape != (shape.q, shape.p):
            raise ShapeMismatch(f"cross block {m.shape} for {shape}")
        ker = {((TAIL, t), (0, a)): m[t, a] for a in range(shape.p) for t in range(shape.q)}
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return StructuredOperator(shape, shape, {}, ker)


def strand_matrix(m: FinMatrix, shape: SpaceShape, power: int = 0) -> StructuredOperator:
    """The Toeplitz operator with symbol z^power * m (m is p x p)."""
    if m.shape != (shape.p, shape.p):
        raise ShapeMismatch(f"strand matrix {m.shape} for {shape}")
    return StructuredOperator(
        shape, shape, {(power, a, b): m[a, b] for a in range(shape.p) for b in range(shape.p)}
    )


_PRIMITIVE_ALIASES = {
    "Shift": "shift",
    "AdjointShift": "adjoint_shift",
    "Identity": "identity",
    "BasisRankOne": "rank_one",
    "TailBlock": "tail_block",
    "CrossBlock": "cross_block",
}


def make_primitive(kind: str, shape: SpaceShape, *args) -> StructuredOperator:
    kinds = {
        "shift": lambda: shift(shape),
        "adjoint_shift": lambda: adjoint_shift(shape),
        "identity": lambda: identity(shape),
        "rank_one": lambda: rank_one(shape, *args),
        "tail_block": lambda: tail_block(args[0], shape),
        "cross_block": lambda: cross_block(args[0], shape, *args[1:]),
        "strand_matrix": lambda: strand_matrix(args[0], shape, *args[1:]),
    }
    kind = _PRIMITIVE_ALIASES.get(kind, kind)
    if kind not in kinds:
        raise ValueError(f"unknown primitive {kind!r}")
    return kinds[kind]()


# algebra ----------------------------------------------------------------


def _check_same(a: StructuredOperator, b: StructuredOperator, what: str) -> None:
    if a.shape_in != b.shape_in or a.shape_out != b.shape_out:
        raise ShapeMismatch(f"{what}: {a.shape_in}->{a.shape_out} vs {b.shape_in}->{b.shape_out}")


def _accumulate(dst: dict, key, v) -> None:
    dst[key] = dst[key] + v if key in dst else v


def add(a: StructuredOperator, b: StructuredOperator) -> StructuredOperator:
    _check_same(a, b, "add")
    sym = dict(a.symbol)
    for k, v in b.symbol.items():
        _accumulate(sym, k, v)
    ker = dict(a.kernel)
    for k, v in b.kernel.items():
        _accumulate(ker, k, v)
    return StructuredOperator(a.shape_in, a.shape_out, sym, ker)


def scale(c, a: StructuredOperator) -> StructuredOperator:
    if isinstance(c, int):
        c = Fraction(c)
    return StructuredOperator(
        a.shape_in,
        a.shape_out,
        {k: c * v for k, v in a.symbol.items()},
        {k: c * v for k, v in a.kernel.items()},
    )


def adjoint(a: StructuredOperator) -> StructuredOperator:
    return StructuredOperator(
        a.shape_out,
        a.shape_in,
        {(-k, b, c): v.conjugate() for (k, c, b), v in a.symbol.items()},
        {(c, r): v.conjugate() for (r, c), v in a.kernel.items()},
    )


def multiply(a: StructuredOperator, b: StructuredOperator) -> StructuredOperator:
    if a.shape_in != b.shape_out:
        raise ShapeMismatch(f"multiply: {a.shape_in} vs {b.shape_out}")
    sym: dict = {}
    ker: dict = {}
    # symbol x symbol, with the Toeplitz defect pushed into the kernel
    for (k1, r, c), f in a.symbol.items():
        for k2, s, g in b.sym_by_out.get(c, ()):
            v = f * g
            _accumulate(sym, (k1 + k2, r, s), v)
            if k1 > 0 > k2:
                for l in range(max(k2, -k1), 0):
                    _accumulate(ker, ((l + k1, r), (l - k2, s)), -v)
    # symbol x kernel
    for (row, col), v in b.kernel.items():
        level, strand = row
        if level == TAIL:
            continue
        for k, r, f in a.sym_by_in.get(strand, ()):
            if level + k >= 0:
                _accumulate(ker, ((level + k, r), col), f * v)
    # kernel x symbol
    for (row, col), v in a.kernel.items():
        level, strand = col
        if level == TAIL:
            continue
        for k, s, g in b.sym_by_out.get(strand, ()):
            j = level - k
            if j >= 0:
                _accumulate(ker, (row, (j, s)), v * g)
    # kernel x kernel
    for (row, mid), v in a.kernel.items():
        for col, w in b.ker_by_row.get(mid, ()):
            _accumulate(ker, (row, col), v * w)
    return StructuredOperator(b.shape_in, a.shape_out, sym, ker)


def apply(a: StructuredOperator, x: FinSupportVector) -> FinSupportVector:
    if x.shape != a.shape_in:
        raise ShapeMismatch(f"apply: vector shape {x.shape} vs {a.shape_in}")
    out: dict = {}
    for (level, strand), v in x.entries.items():
        if level != TAIL:
            for k, r, f in a.sym_by_in.get(strand, ()):
                if level + k >= 0:
                    _accumulate(out, (level + k, r), f * v)
        for row, w in a.ker_by_col.get((level, strand), ()):
            _accumulate(out, row, w * v)
    return FinSupportVector(a.shape_out, out)


def equals(a: StructuredOperator, b: StructuredOperator, tol: float = 0.0) -> bool:
    _check_same(a, b, "equals")
    if a.is_exact() and b.is_exact() and not tol:
        return a.symbol == b.symbol and a.kernel == b.kernel
    d = add(a, scale(-1, b))
    lim = max(tol, FLOAT_CLEAN)
    return all(abs(v) <= lim for v in d.symbol.values()) and all(abs(v) <= lim for v in d.kernel.values())


def dense_truncation(a: StructuredOperator, n: int) -> FinMatrix:
    """Level-major matrix of ``a`` on levels < n, tail coordinates appended."""
    if n < 1:
        raise ValueError("truncation size must be positive")
    return a.window_block(n)


def to_float_op(a: StructuredOperator) -> StructuredOperator:
    return StructuredOperator(
        a.shape_in,
        a.shape_out,
        {k: complex(v) for k, v in a.symbol.items()},
        {k: complex(v) for k, v in a.kernel.items()},
        a.tags,
        a.meta,
    )


# block structure --------------------------------------------------------


def _offsets(shapes: Sequence[SpaceShape]) -> tuple[list[int], list[int], SpaceShape]:
    po, qo = [], []
    p = q = 0
    for s in shapes:
        po.append(p)
        qo.append(q)
        p += s.p
        q += s.q
    return po, qo, SpaceShape(p, q)


def _rebase(c, po: int, qo: int):
    level, idx = c
    return (level, idx + qo) if level == TAIL else (level, idx + po)


def block_compose(blocks: Sequence[Sequence[StructuredOperator | None]]) -> StructuredOperator:
    """Assemble a block operator; ``None`` entries are zero blocks.

    Strands of the pieces are concatenated in block order, and so are the
    tails, so the combined space is (all strands) (+) (all tails).
    """
    nr = len(blocks)
    nc = len(blocks[0]) if nr else 0
    if any(len(r) != nc for r in blocks):
        raise ShapeMismatch("ragged block grid")
    row_shapes: list = [None] * nr
    col_shapes: list = [None] * nc
    for i, r in enumerate(blocks):
        for j, op in enumerate(r):
            if op is None:
                continue
            for store, idx, sh in ((row_shapes, i, op.shape_out), (col_shapes, j, op.shape_in)):
                if store[idx] is None:
                    store[idx] = sh
                elif store[idx] != sh:
                    raise ShapeMismatch(f"block ({i},{j}) shape disagrees with its row/column")
    if any(s is None for s in row_shapes + col_shapes):
        raise ShapeMismatch("a block row or column has no nonzero block to fix its shape")
    rpo, rqo, out_shape = _offsets(row_shapes)
    cpo, cqo, in_shape = _offsets(col_shapes)
    sym: dict = {}
    ker: dict = {}
    for i, r in enumerate(blocks):
        for j, op in enumerate(r):
            if op is None:
                continue
            for (k, a, b), v in op.symbol.items():
                _accumulate(sym, (k, a + rpo[i], b + cpo[j]), v)
            for (rc, cc), v in op.kernel.items():
                _accumulate(ker, (_rebase(rc, rpo[i], rqo[i]), _rebase(cc, cpo[j], cqo[j])), v)
    if nr == 1 and nc == 1 and blocks[0][0] is not None:
        return blocks[0][0]
    return StructuredOperator(in_shape, out_shape, sym, ker)


def restrict(
    a: StructuredOperator,
    out_sel: tuple[Sequence[int], Sequence[int]],
    in_sel: tuple[Sequence[int], Sequence[int]],
) -> StructuredOperator:
    """Compression P_out a P_in to chosen strands and tail indices.

    Each selector is ``(strands, tails)``; selected coordinates are renumbered
    in the order given.
    """
    (os_, ot), (is_, it) = out_sel, in_sel
    omap_s = {s: i for i, s in enumerate(os_)}
    omap_t = {t: i for i, t in enumerate(ot)}
    imap_s = {s: i for i, s in enumerate(is_)}
    imap_t = {t: i for i, t in enumerate(it)}

    def remap(c, smap, tmap):
        level, idx = c
        m = tmap if level == TAIL else smap
        return (level, m[idx]) if idx in m else None

    sym = {
        (k, omap_s[a_], imap_s[b_]): v
        for (k, a_, b_), v in a.symbol.items()
        if a_ in omap_s and b_ in imap_s
    }
    ker = {}
    for (r, c), v in a.kernel.items():
        r2 = remap(r, omap_s, omap_t)
        c2 = remap(c, imap_s, imap_t)
        if r2 is not None and c2 is not None:
            ker[(r2, c2)] = v
    return StructuredOperator(SpaceShape(len(is_), len(it)), SpaceShape(len(os_), len(ot)), sym, ker)


def vector_from(shape: SpaceShape, items: Iterable) -> FinSupportVector:
    return FinSupportVector(shape, dict(items))
