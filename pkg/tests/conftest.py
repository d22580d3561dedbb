from __future__ import annotations

import math
import random
from fractions import Fraction

import numpy as np
from hypothesis import strategies as st

from shiftlab import opcore as oc
from shiftlab.exactnum import GaussQ, cq
from shiftlab.opcore import TAIL, SpaceShape, StructuredOperator

# -- scalar and operator generators ----------------------------------------

small_fractions = st.builds(
    Fraction, st.integers(-3, 3), st.sampled_from([1, 2, 3, 4])
)


@st.composite
def gauss(draw, complex_ok: bool = True):
    re = draw(small_fractions)
    if complex_ok and draw(st.booleans()):
        return cq(re, draw(small_fractions))
    return re


@st.composite
def shapes(draw, max_p: int = 2, max_q: int = 2):
    return SpaceShape(draw(st.integers(1, max_p)), draw(st.integers(0, max_q)))


@st.composite
def operators(draw, shape: SpaceShape | None = None, band: int = 2, levels: int = 3, complex_ok: bool = True):
    sh = shape or draw(shapes())
    sym = {}
    for _ in range(draw(st.integers(0, 4))):
        key = (draw(st.integers(-band, band)), draw(st.integers(0, sh.p - 1)), draw(st.integers(0, sh.p - 1)))
        sym[key] = draw(gauss(complex_ok))
    coords = sh.window_coords(levels)
    ker = {}
    for _ in range(draw(st.integers(0, 4))):
        ker[(draw(st.sampled_from(coords)), draw(st.sampled_from(coords)))] = draw(gauss(complex_ok))
    return StructuredOperator(sh, sh, sym, ker)


def random_operator(rng: random.Random, sh: SpaceShape, band: int = 2, levels: int = 3) -> StructuredOperator:
    """Seeded counterpart of ``operators`` for fixed-count loops."""

    def val():
        re = Fraction(rng.randint(-3, 3), rng.choice([1, 2, 3, 4]))
        if rng.random() < 0.3:
            return cq(re, Fraction(rng.randint(-3, 3), rng.choice([1, 2, 3])))
        return re

    sym = {(rng.randint(-band, band), rng.randrange(sh.p), rng.randrange(sh.p)): val() for _ in range(rng.randint(1, 4))}
    coords = sh.window_coords(levels)
    ker = {(rng.choice(coords), rng.choice(coords)): val() for _ in range(rng.randint(0, 4))}
    return StructuredOperator(sh, sh, sym, ker)


# -- independent dense oracle ----------------------------------------------
# Entries are scaled by a common denominator and kept as integer real and
# imaginary parts, so products are exact in int64.


def _parts(v):
    if isinstance(v, GaussQ):
        return Fraction(v.re), Fraction(v.im)
    return Fraction(v), Fraction(0)


def common_denominator(*ops: StructuredOperator) -> int:
    d = 1
    for op in ops:
        for v in list(op.symbol.values()) + list(op.kernel.values()):
            for part in _parts(v):
                d = math.lcm(d, part.denominator)
    return d


def dense(op: StructuredOperator, levels: int, scale: int):
    """(re, im) integer arrays of scale * P_levels op P_levels, tail last."""
    p, q = op.shape_in.p, op.shape_in.q
    n = levels * p + q

    def idx(c):
        lv, i = c
        return levels * p + i if lv == TAIL else lv * p + i

    re = np.zeros((n, n), dtype=np.int64)
    im = np.zeros((n, n), dtype=np.int64)

    def put(r, c, v):
        a, b = _parts(v)
        re[idx(r), idx(c)] += int(a * scale)
        im[idx(r), idx(c)] += int(b * scale)

    for (k, a, b), v in op.symbol.items():
        for col in range(levels):
            row = col + k
            if 0 <= row < levels:
                put((row, a), (col, b), v)
    for (r, c), v in op.kernel.items():
        if all(x[0] == TAIL or x[0] < levels for x in (r, c)):
            put(r, c, v)
    return re, im


def cmul(x, y):
    return x[0] @ y[0] - x[1] @ y[1], x[0] @ y[1] + x[1] @ y[0]


def window_ints(op: StructuredOperator, levels: int, scale: int):
    """The implementation's own truncation, scaled to integers."""
    m = op.window_block(levels)
    re = np.zeros((m.rows, m.cols), dtype=np.int64)
    im = np.zeros((m.rows, m.cols), dtype=np.int64)
    for i in range(m.rows):
        for j in range(m.cols):
            a, b = _parts(m[i, j])
            a, b = a * scale, b * scale
            assert a.denominator == 1 and b.denominator == 1
            re[i, j], im[i, j] = int(a), int(b)
    return re, im


def restrict_window(x, big: int, small: int, p: int, q: int):
    keep = list(range(small * p)) + [big * p + t for t in range(q)]
    return x[0][np.ix_(keep, keep)], x[1][np.ix_(keep, keep)]


def same(x, y) -> bool:
    return np.array_equal(x[0], y[0]) and np.array_equal(x[1], y[1])


def reach(op: StructuredOperator) -> int:
    return op.band + op.window + 1


# -- acceptance summary ----------------------------------------------------

ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
