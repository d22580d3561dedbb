"""Scalars and finite-dimensional linear algebra.

Exact scalars are ``Fraction`` (real) or ``GaussQ`` (non-real Gaussian
rational); a ``GaussQ`` whose imaginary part cancels collapses back to a
``Fraction``.  Float-mode scalars are plain Python ``complex``/``float``.
Every routine below works generically on either kind, so the arithmetic
mode of a computation is simply the kind of scalars it was fed.  Mixing the
two kinds promotes to float, which is what Python's numeric tower does for
``Fraction`` already.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import NotHermitian, NotPSD, ShapeMismatch, Singular

__all__ = [
    "GaussQ",
    "cq",
    "is_exact",
    "conj",
    "abs2",
    "sqrt_exact",
    "to_exact",
    "to_float",
    "render",
    "parse_scalar",
    "is_zero",
    "TolerancePolicy",
    "DEFAULT_TOL",
    "FinMatrix",
    "RangeBasis",
    "SpectralDecomposition",
    "psd_check",
    "psd_witness",
    "rank_of",
    "orth_basis_of_range",
    "spectral_rank_one_decomp",
    "invert",
    "nullspace",
    "rref",
    "in_span",
    "inner",
]


class GaussQ:
    """Complex number with rational real and imaginary parts (``im != 0``)."""

    __slots__ = ("re", "im")

    def __init__(self, re, im):
        self.re = Fraction(re)
        self.im = Fraction(im)

    @property
    def real(self) -> Fraction:
        return self.re

    @property
    def imag(self) -> Fraction:
        return self.im

    def conjugate(self):
        return GaussQ(self.re, -self.im)

    def __complex__(self) -> complex:
        return complex(float(self.re), float(self.im))

    def __repr__(self) -> str:
        return f"GaussQ({self.re}, {self.im})"

    def __str__(self) -> str:
        return render(self)

    def __hash__(self) -> int:
        return hash((self.re, self.im))

    def __eq__(self, other):
        if isinstance(other, GaussQ):
            return self.re == other.re and self.im == other.im
        if isinstance(other, (int, Fraction)):
            return False
        return NotImplemented

    def __bool__(self) -> bool:
        return True

    def __neg__(self):
        return GaussQ(-self.re, -self.im)

    def __pos__(self):
        return self

    def __abs__(self) -> float:
        return abs(complex(self))

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            return GaussQ(self.re + other, self.im)
        if isinstance(other, GaussQ):
            return cq(self.re + other.re, self.im + other.im)
        if isinstance(other, (float, complex)):
            return complex(self) + other
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            return GaussQ(self.re - other, self.im)
        if isinstance(other, GaussQ):
            return cq(self.re - other.re, self.im - other.im)
        if isinstance(other, (float, complex)):
            return complex(self) - other
        return NotImplemented

    def __rsub__(self, other):
        if isinstance(other, (int, Fraction)):
            return GaussQ(other - self.re, -self.im)
        if isinstance(other, (float, complex)):
            return other - complex(self)
        return NotImplemented

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return cq(self.re * other, self.im * other)
        if isinstance(other, GaussQ):
            return cq(
                self.re * other.re - self.im * other.im,
                self.re * other.im + self.im * other.re,
            )
        if isinstance(other, (float, complex)):
            return complex(self) * other
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return cq(self.re / other, self.im / other)
        if isinstance(other, GaussQ):
            n = other.re * other.re + other.im * other.im
            return self * GaussQ(other.re / n, -other.im / n)
        if isinstance(other, (float, complex)):
            return complex(self) / other
        return NotImplemented

    def __rtruediv__(self, other):
        n = self.re * self.re + self.im * self.im
        inv = GaussQ(self.re / n, -self.im / n)
        if isinstance(other, (int, Fraction)):
            return inv * other
        if isinstance(other, (float, complex)):
            return other / complex(self)
        return NotImplemented

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return complex(self) ** k
        out = Fraction(1)
        base = self if k >= 0 else 1 / self
        for _ in range(abs(k)):
            out = out * base
        return out


def cq(re, im=0):
    """Exact complex constructor; returns a ``Fraction`` when ``im == 0``."""
    re = Fraction(re)
    im = Fraction(im)
    if im == 0:
        return re
    return GaussQ(re, im)


def is_exact(x) -> bool:
    return isinstance(x, (int, Fraction, GaussQ))


def conj(x):
    return x.conjugate()


def abs2(x):
    """|x|^2, exact for exact input."""
    if isinstance(x, GaussQ):
        return x.re * x.re + x.im * x.im
    if isinstance(x, (int, Fraction)):
        return Fraction(x) * x
    return abs(x) ** 2


def sqrt_exact(x) -> Fraction | None:
    """Rational square root of a nonnegative rational, or None."""
    if not isinstance(x, (int, Fraction)):
        return None
    x = Fraction(x)
    if x < 0:
        return None
    n, d = x.numerator, x.denominator
    rn, rd = math.isqrt(n), math.isqrt(d)
    if rn * rn == n and rd * rd == d:
        return Fraction(rn, rd)
    return None


def to_exact(x):
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, (Fraction, GaussQ)):
        return x
    if isinstance(x, float):
        return Fraction(x)
    if isinstance(x, complex):
        return cq(Fraction(x.real), Fraction(x.imag))
    raise TypeError(f"cannot convert {x!r} to an exact scalar")


def to_float(x) -> complex:
    return complex(x)


def is_zero(x, tol: float = 0.0) -> bool:
    if is_exact(x):
        return x == 0
    return abs(x) <= tol


def inner(x: Sequence, y: Sequence):
    """<x, y>, linear in x and conjugate-linear in y."""
    s = Fraction(0)
    for a, b in zip(x, y):
        if a != 0 and b != 0:
            s = s + a * b.conjugate()
    return s


def _render_real(x) -> str:
    if isinstance(x, (int, Fraction)):
        x = Fraction(x)
        if x.denominator == 1:
            return str(x.numerator)
        return f"{x.numerator}/{x.denominator}"
    return repr(float(x))


def render(x) -> str:
    """Canonical text of a scalar: ``p/q`` for rationals, ``a+bi`` for complex."""
    if isinstance(x, (int, Fraction)):
        return _render_real(x)
    if isinstance(x, GaussQ):
        re_, im_ = x.re, x.im
    else:
        c = complex(x)
        if c.imag == 0:
            return repr(c.real)
        re_, im_ = c.real, c.imag
    im_txt = _render_real(abs(im_))
    im_txt = "i" if im_txt == "1" else im_txt + "i"
    sign = "-" if im_ < 0 else "+"
    if re_ == 0:
        return ("-" if im_ < 0 else "") + im_txt
    return f"{_render_real(re_)}{sign}{im_txt}"


def _parse_real(text: str, exact: bool):
    if exact:
        return Fraction(text)
    if "/" in text:
        return float(Fraction(text))
    return float(text)


def _split_complex(text: str) -> tuple[str, str | None]:
    """Split ``a+bi`` into ("a", "+b"); purely real input gives (text, None)."""
    if not text.endswith("i"):
        return text, None
    body = text[:-1]
    for k in range(len(body) - 1, 0, -1):
        if body[k] in "+-" and body[k - 1] not in "eE":
            return body[:k], body[k:]
    return "", body


def parse_scalar(text: str, exact: bool = True):
    """Parse ``3/4``, ``-0.5``, ``2i``, ``1/2-1/3i`` and similar forms."""
    t = text.replace(" ", "")
    if not t:
        raise ValueError("empty scalar")
    re_txt, im_txt = _split_complex(t)
    try:
        re_val = _parse_real(re_txt, exact) if re_txt else 0
        im_val = 0
        if im_txt is not None:
            if im_txt in ("", "+", "-"):
                im_txt += "1"
            im_val = _parse_real(im_txt, exact)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a scalar: {text!r}") from exc
    if exact:
        return cq(re_val, im_val)
    return complex(re_val, im_val)


@dataclass(frozen=True)
class TolerancePolicy:
    rank_tol: float = 1e-10
    psd_tol: float = 1e-10
    circle_samples: int = 128


DEFAULT_TOL = TolerancePolicy()


@dataclass(frozen=True)
class FinMatrix:
    rows: int
    cols: int
    entries: tuple

    def __post_init__(self):
        if len(self.entries) != self.rows or any(len(r) != self.cols for r in self.entries):
            raise ShapeMismatch(f"grid does not match shape ({self.rows}, {self.cols})")

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable]) -> "FinMatrix":
        data = tuple(tuple(_coerce(v) for v in r) for r in rows)
        ncols = len(data[0]) if data else 0
        return cls(len(data), ncols, data)

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "FinMatrix":
        z = Fraction(0)
        return cls(rows, cols, tuple((z,) * cols for _ in range(rows)))

    @classmethod
    def identity(cls, n: int) -> "FinMatrix":
        return cls.diag([Fraction(1)] * n)

    @classmethod
    def diag(cls, values: Sequence) -> "FinMatrix":
        n = len(values)
        z = Fraction(0)
        return cls(n, n, tuple(tuple(_coerce(values[i]) if i == j else z for j in range(n)) for i in range(n)))

    @classmethod
    def column(cls, values: Sequence) -> "FinMatrix":
        return cls.from_rows([[v] for v in values])

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def is_exact(self) -> bool:
        return all(is_exact(v) for r in self.entries for v in r)

    def to_lists(self) -> list[list]:
        return [list(r) for r in self.entries]

    def to_numpy(self) -> np.ndarray:
        if self.rows == 0 or self.cols == 0:
            return np.zeros((self.rows, self.cols), dtype=complex)
        return np.array([[complex(v) for v in r] for r in self.entries], dtype=complex)

    def adjoint(self) -> "FinMatrix":
        return FinMatrix(
            self.cols,
            self.rows,
            tuple(tuple(self.entries[i][j].conjugate() for i in range(self.rows)) for j in range(self.cols)),
        )

    H = property(adjoint)

    def __add__(self, other: "FinMatrix") -> "FinMatrix":
        if self.shape != other.shape:
            raise ShapeMismatch(f"{self.shape} + {other.shape}")
        return FinMatrix(
            self.rows,
            self.cols,
            tuple(tuple(a + b for a, b in zip(r, s)) for r, s in zip(self.entries, other.entries)),
        )

    def __sub__(self, other: "FinMatrix") -> "FinMatrix":
        return self + other.scale(-1)

    def __neg__(self) -> "FinMatrix":
        return self.scale(-1)

    def scale(self, c) -> "FinMatrix":
        return FinMatrix(self.rows, self.cols, tuple(tuple(c * v for v in r) for r in self.entries))

    def __matmul__(self, other: "FinMatrix") -> "FinMatrix":
        if self.cols != other.rows:
            raise ShapeMismatch(f"{self.shape} @ {other.shape}")
        cols = list(zip(*other.entries)) if other.rows else [()] * other.cols
        out = []
        for r in self.entries:
            nz = [(k, v) for k, v in enumerate(r) if v != 0]
            row = []
            for c in cols:
                s = Fraction(0)
                for k, v in nz:
                    w = c[k]
                    if w != 0:
                        s = s + v * w
                row.append(s)
            out.append(tuple(row))
        return FinMatrix(self.rows, other.cols, tuple(out))

    def apply(self, v: Sequence) -> tuple:
        if len(v) != self.cols:
            raise ShapeMismatch(f"vector of length {len(v)} for {self.shape}")
        out = []
        for r in self.entries:
            s = Fraction(0)
            for a, b in zip(r, v):
                if a != 0 and b != 0:
                    s = s + a * b
            out.append(s)
        return tuple(out)

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(is_zero(v, tol) for r in self.entries for v in r)

    def equals(self, other: "FinMatrix", tol: float = 0.0) -> bool:
        if self.shape != other.shape:
            return False
        return all(is_zero(a - b, tol) for r, s in zip(self.entries, other.entries) for a, b in zip(r, s))

    def is_hermitian(self, tol: float = 0.0) -> bool:
        if self.rows != self.cols:
            return False
        return all(
            is_zero(self.entries[i][j] - self.entries[j][i].conjugate(), tol)
            for i in range(self.rows)
            for j in range(i, self.rows)
        )

    def is_normal(self, tol: float = 0.0) -> bool:
        a = self.adjoint()
        return (self @ a).equals(a @ self, tol)

    def submatrix(self, rows: Sequence[int], cols: Sequence[int]) -> "FinMatrix":
        return FinMatrix(len(rows), len(cols), tuple(tuple(self.entries[i][j] for j in cols) for i in rows))

    def __repr__(self) -> str:
        body = "; ".join(", ".join(render(v) for v in r) for r in self.entries)
        return f"FinMatrix[{body}]"


def _coerce(v):
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, str):
        return parse_scalar(v)
    return v


def _mode_exact(m: FinMatrix) -> bool:
    return m.is_exact()


def rref(rows: list[list]) -> tuple[list[list], list[int]]:
    """Exact reduced row echelon form; returns (R, pivot columns)."""
    a = [list(r) for r in rows]
    nrows = len(a)
    ncols = len(a[0]) if a else 0
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        if r >= nrows:
            break
        piv = next((i for i in range(r, nrows) if a[i][c] != 0), None)
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        pv = a[r][c]
        if pv != 1:
            inv = 1 / pv
            a[r] = [x * inv if x != 0 else x for x in a[r]]
        prow = a[r]
        nz = [(j, x) for j, x in enumerate(prow) if x != 0]
        for i in range(nrows):
            if i != r:
                f = a[i][c]
                if f != 0:
                    row = a[i]
                    for j, x in nz:
                        row[j] = row[j] - f * x
        pivots.append(c)
        r += 1
    return a[:r], pivots


def _first_nonzero_positive(v: list, tol: float = 0.0) -> list:
    """Rescale v so its first nonzero entry is positive real (exact-safe)."""
    for x in v:
        if not is_zero(x, tol):
            if is_exact(x):
                if isinstance(x, GaussQ):
                    c = x.conjugate()
                    return [y * c for y in v]
                return [-y for y in v] if x < 0 else list(v)
            phase = x / abs(x)
            return [y / phase for y in v]
    return list(v)


def nullspace(m: FinMatrix, tol: TolerancePolicy = DEFAULT_TOL) -> list[tuple]:
    """Basis of ker m; exact RREF parametrization or float SVD."""
    if m.cols == 0:
        return []
    if _mode_exact(m):
        if m.rows == 0:
            return [tuple(Fraction(int(i == j)) for i in range(m.cols)) for j in range(m.cols)]
        r, piv = rref(m.to_lists())
        free = [c for c in range(m.cols) if c not in set(piv)]
        out = []
        for f in free:
            v = [Fraction(0)] * m.cols
            v[f] = Fraction(1)
            for row, pc in zip(r, piv):
                if row[f] != 0:
                    v[pc] = -row[f]
            out.append(tuple(_first_nonzero_positive(v)))
        return out
    a = m.to_numpy()
    if a.shape[0] == 0:
        return [tuple(complex(int(i == j)) for i in range(m.cols)) for j in range(m.cols)]
    _, s, vh = np.linalg.svd(a)
    cut = tol.rank_tol * max(1.0, s[0] if len(s) else 0.0)
    rank = int(np.sum(s > cut))
    return [tuple(complex(x) for x in np.conj(vh[k])) for k in range(rank, m.cols)]


def rank_of(m: FinMatrix, tol: TolerancePolicy = DEFAULT_TOL) -> int:
    if m.rows == 0 or m.cols == 0:
        return 0
    if _mode_exact(m):
        return len(rref(m.to_lists())[1])
    s = np.linalg.svd(m.to_numpy(), compute_uv=False)
    cut = tol.rank_tol * max(1.0, s[0])
    return int(np.sum(s > cut))


def in_span(basis: Sequence[Sequence], v: Sequence, tol: TolerancePolicy = DEFAULT_TOL) -> bool:
    """Whether v lies in the span of the given vectors."""
    if all(is_zero(x, tol.rank_tol) for x in v):
        return True
    if not basis:
        return False
    b = FinMatrix.from_rows(list(zip(*basis)))
    aug = FinMatrix.from_rows([list(r) + [x] for r, x in zip(b.entries, v)])
    return rank_of(aug, tol) == rank_of(b, tol)


def psd_witness(m: FinMatrix, tol: TolerancePolicy = DEFAULT_TOL):
    """None if m is PSD, otherwise a vector x with <m x, x> < 0.

    Exact mode runs a symmetric LDL* elimination tracking the congruence
    E m E*, so a negative pivot (or a zero pivot with a nonzero off-diagonal
    entry) turns directly into a witness in the original coordinates.
    """
    if not m.is_hermitian(0.0 if _mode_exact(m) else tol.psd_tol):
        raise NotHermitian("matrix is not hermitian")
    n = m.rows
    if n == 0:
        return None
    if not _mode_exact(m):
        w, v = np.linalg.eigh(m.to_numpy())
        if w[0] >= -tol.psd_tol:
            return None
        return tuple(complex(x) for x in v[:, 0])
    a = m.to_lists()
    e = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]

    def lift(y: list) -> tuple:
        # x = E* y
        x = [Fraction(0)] * n
        for k, yk in enumerate(y):
            if yk != 0:
                for i in range(n):
                    if e[k][i] != 0:
                        x[i] = x[i] + e[k][i].conjugate() * yk
        return tuple(x)

    for k in range(n):
        akk = a[k][k].real
        if akk < 0:
            y = [Fraction(0)] * n
            y[k] = Fraction(1)
            return lift(y)
        if akk == 0:
            j = next((j for j in range(k + 1, n) if a[k][j] != 0), None)
            if j is None:
                continue
            akj = a[k][j]
            ajj = a[j][j].real
            t = (abs(ajj) + 1) / abs2(akj)
            y = [Fraction(0)] * n
            y[k] = -t * akj
            y[j] = Fraction(1)
            return lift(y)
        rowk = a[k]
        for i in range(k + 1, n):
            l = a[i][k] / akk
            if l == 0:
                continue
            lc = l.conjugate()
            a[i] = [x - l * y for x, y in zip(a[i], rowk)]
            for r in range(n):
                a[r][i] = a[r][i] - lc * a[r][k]
            e[i] = [x - l * y for x, y in zip(e[i], e[k])]
    return None


def psd_check(m: FinMatrix, tol: TolerancePolicy = DEFAULT_TOL) -> bool:
    return psd_witness(m, tol) is None


@dataclass(frozen=True)
class RangeBasis:
    """Pairwise orthogonal basis of a range; ``gram[k] = <v_k, v_k>``."""

    vectors: tuple
    gram: tuple

    def __len__(self) -> int:
        return len(self.vectors)

    def __iter__(self):
        return iter(self.vectors)


def gram_schmidt(vectors: Sequence[Sequence], tol: float = 0.0) -> tuple[list[tuple], list]:
    """Orthogonalize without normalizing; drops vectors that become zero."""
    out: list[tuple] = []
    grams: list = []
    for v in vectors:
        w = list(v)
        for u, g in zip(out, grams):
            c = inner(w, u) / g
            if not is_zero(c, 0.0):
                w = [x - c * y for x, y in zip(w, u)]
        g = inner(w, w)
        if is_zero(g, tol):
            continue
        out.append(tuple(w))
        grams.append(g.real if is_exact(g) else float(g.real))
    return out, grams


def orth_basis_of_range(m: FinMatrix, tol: TolerancePolicy = DEFAULT_TOL) -> RangeBasis:
    if m.rows == 0 or m.cols == 0:
        return RangeBasis((), ())
    if _mode_exact(m):
        _, piv = rref(m.to_lists())
        cols = [tuple(m.entries[i][c] for i in range(m.rows)) for c in piv]
        vecs, grams = gram_schmidt(cols)
        return RangeBasis(tuple(vecs), tuple(grams))
    u, s, _ = np.linalg.svd(m.to_numpy())
    cut = tol.rank_tol * max(1.0, s[0] if len(s) else 0.0)
    vecs = []
    for k in range(int(np.sum(s > cut))):
        v = _first_nonzero_positive([complex(x) for x in u[:, k]], tol.rank_tol)
        vecs.append(tuple(v))
    return RangeBasis(tuple(vecs), tuple(1.0 for _ in vecs))


@dataclass(frozen=True)
class SpectralDecomposition:
    """M = sum alpha_j e_j e_j^*, alpha ascending, e_j orthonormal."""

    pairs: tuple
    float_derived: bool = False

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __getitem__(self, k):
        return self.pairs[k]

    @property
    def alphas(self) -> tuple:
        return tuple(a for a, _ in self.pairs)


def _exact_spectral(m: FinMatrix, tol: TolerancePolicy):
    n = m.rows
    w = np.linalg.eigvalsh(m.to_numpy())
    cands = sorted({Fraction(float(x)).limit_denominator(10**6) for x in w if x > 1e-9})
    pairs = []
    total = 0
    for lam in cands:
        shifted = FinMatrix(
            n, n, tuple(tuple(v - lam if i == j else v for j, v in enumerate(r)) for i, r in enumerate(m.entries))
        )
        ker = nullspace(shifted)
        if not ker:
            continue
        vecs, grams = gram_schmidt(ker)
        for v, g in zip(vecs, grams):
            v = _first_nonzero_positive(list(v))
            g = inner(v, v).real
            root = sqrt_exact(g)
            if root is None:
                return None
            pairs.append((lam, tuple(x / root for x in v)))
        total += len(vecs)
    if total != rank_of(m, tol):
        return None
    return pairs


def _float_spectral(m: FinMatrix, tol: TolerancePolicy):
    a = m.to_numpy()
    n = a.shape[0]
    w, v = np.linalg.eigh(a)
    scale = max(1.0, float(np.max(np.abs(w)))) if n else 1.0
    keep = [k for k in range(n) if w[k] > tol.rank_tol * scale]
    pairs = []
    k = 0
    while k < len(keep):
        group = [keep[k]]
        while k + 1 < len(keep) and abs(w[keep[k + 1]] - w[group[0]]) <= 1e-9 * scale:
            k += 1
            group.append(keep[k])
        k += 1
        basis = v[:, group]
        proj = basis @ basis.conj().T
        chosen: list[np.ndarray] = []
        for c in range(n):
            x = proj[:, c].copy()
            for u in chosen:
                x = x - (u.conj() @ x) * u
            nrm = np.linalg.norm(x)
            if nrm > 1e-8:
                chosen.append(x / nrm)
            if len(chosen) == len(group):
                break
        lam = float(np.mean(w[group]))
        for u in chosen:
            pairs.append((lam, tuple(_first_nonzero_positive([complex(x) for x in u], 1e-12))))
    return pairs


def spectral_rank_one_decomp(m: FinMatrix, tol: TolerancePolicy = DEFAULT_TOL) -> SpectralDecomposition:
    """Positive spectrum of a hermitian PSD matrix as ascending rank-one terms.

    Exact mode guesses eigenvalues numerically, snaps them to nearby
    rationals and then verifies eigenspaces by exact elimination; the result
    is exact only when every eigenvalue is rational and every eigenvector
    normalizes over the rationals.  Otherwise the decomposition is redone in
    floating point and flagged.
    """
    if not psd_check(m, tol):
        raise NotPSD("matrix is not positive semidefinite")
    if m.rows == 0:
        return SpectralDecomposition(())
    if _mode_exact(m):
        pairs = _exact_spectral(m, tol)
        if pairs is not None:
            return SpectralDecomposition(tuple(pairs), False)
        return SpectralDecomposition(tuple(_float_spectral(m, tol)), True)
    return SpectralDecomposition(tuple(_float_spectral(m, tol)), True)


def invert(m: FinMatrix) -> FinMatrix:
    if m.rows != m.cols:
        raise ShapeMismatch("invert needs a square matrix")
    n = m.rows
    if n == 0:
        return m
    if not _mode_exact(m):
        a = m.to_numpy()
        if np.linalg.matrix_rank(a) < n:
            raise Singular("matrix is singular")
        return FinMatrix.from_rows(np.linalg.inv(a).tolist())
    aug = [list(r) + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(m.entries)]
    r, piv = rref(aug)
    if len(piv) < n or piv[n - 1] != n - 1:
        ker = nullspace(m)
        raise Singular("matrix is singular", witness=ker[0] if ker else None)
    return FinMatrix(n, n, tuple(tuple(row[n:]) for row in r))
