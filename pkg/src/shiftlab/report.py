"""JSON-ready report records with deterministic scalar rendering."""

from __future__ import annotations

import json
from dataclasses import fields, is_dataclass
from fractions import Fraction

from .analysis import Certainty, Certificate, Classification, DefectData, Decomposition, Failure
from .exactnum import FinMatrix, GaussQ, TolerancePolicy, render
from .opcore import TAIL, FinSupportVector, SpaceShape, StructuredOperator

FLOAT_NOTE = "float fallback: some quantities were computed in floating point and are not exact"


def scalar(v):
    """Rationals as "p/q" strings, floats as JSON numbers, complex as "a+bi"."""
    if isinstance(v, bool):
        return v
    if isinstance(v, (int, Fraction, GaussQ)):
        return render(v)
    if isinstance(v, float):
        return v
    if isinstance(v, complex):
        return v.real if v.imag == 0 else render(v)
    return v


def coord(c) -> str:
    lv, i = c
    return f"t{i}" if lv == TAIL else f"{lv},{i}"


def shape(sh: SpaceShape) -> dict:
    return {"p": sh.p, "q": sh.q}


def vector(x: FinSupportVector | None):
    if x is None:
        return None
    return [[coord(c), scalar(v)] for c, v in x.sorted_items()]


def matrix(m: FinMatrix) -> list:
    return [[scalar(v) for v in row] for row in m.entries]


def operator(op: StructuredOperator) -> dict:
    sym = sorted(op.symbol.items())
    ker = sorted(op.kernel.items(), key=lambda kv: (_ck(kv[0][0]), _ck(kv[0][1])))
    return {
        "shape_in": shape(op.shape_in),
        "shape_out": shape(op.shape_out),
        "symbol": [[k, a, b, scalar(v)] for (k, a, b), v in sym],
        "kernel": [[coord(r), coord(c), scalar(v)] for (r, c), v in ker],
    }


def _ck(c):
    lv, i = c
    return (1, 0, i) if lv == TAIL else (0, lv, i)


def jsonify(x):
    """Best-effort conversion of analysis payloads."""
    if isinstance(x, (bool, str)) or x is None:
        return x
    if isinstance(x, (int, Fraction, GaussQ, float, complex)):
        return scalar(x)
    if isinstance(x, FinSupportVector):
        return vector(x)
    if isinstance(x, FinMatrix):
        return matrix(x)
    if isinstance(x, StructuredOperator):
        return operator(x)
    if isinstance(x, SpaceShape):
        return shape(x)
    if isinstance(x, dict):
        return {str(k): jsonify(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, set, frozenset)):
        items = [jsonify(v) for v in x]
        return sorted(items, key=repr) if isinstance(x, (set, frozenset)) else items
    if is_dataclass(x):
        return {f.name: jsonify(getattr(x, f.name)) for f in fields(x)}
    return str(x)


def certainty(c: Certainty) -> dict:
    return {"verdict": c.verdict, "witness": vector(c.witness), "evidence": jsonify(c.evidence)}


def defect(d: DefectData) -> dict:
    out = {"finite_rank": d.finite_rank, "resolved": d.resolved}
    if d.resolved:
        out.update(
            dim=d.dim,
            window_levels=d.levels,
            basis=[vector(v) for v in d.basis],
            strand_range=[[scalar(v) for v in r] for r in d.strand_range],
        )
    return out


def certificate(c: Certificate | Failure) -> dict:
    out = {
        "kind": c.kind,
        "issued": c.issued,
        "checked_hypotheses": [[name, jsonify(v)] for name, v in c.checked_hypotheses],
    }
    if isinstance(c, Certificate):
        out["conclusion"] = c.conclusion
        out["details"] = jsonify(c.details)
    else:
        out["failed"] = list(c.failed)
    return out


def classification(c: Classification) -> dict:
    sc = c.selfcomm
    comm = {
        "finite_rank": sc.finite_rank,
        "psd": sc.psd,
        "rank": sc.rank if sc.finite_rank else None,
        "alphas": sorted((scalar(a) for a in sc.alphas), key=_alpha_key),
        "eigenpairs": [[scalar(a), vector(e)] for a, e in sc.pairs],
        "operator": operator(sc.operator),
    }
    return {
        "contraction": certainty(c.contraction),
        "hyponormal": certainty(c.hyponormal),
        "self_commutator": comm,
        "defect": defect(c.defect),
        "defect_adjoint": defect(c.defect_adjoint),
        "finite_isometry": c.finite_isometry,
        "n_finite": None
        if c.n_finite is None
        else {"n": c.n_finite.n, "alphas": [scalar(a) for a in c.n_finite.alphas]},
        "purity": certainty(c.purity),
    }


def _alpha_key(a):
    if isinstance(a, str):
        return float(Fraction(a)) if "i" not in a else 0.0
    return float(a)


def float_derived(c: Classification) -> bool:
    return c.selfcomm.float_derived or not all(
        isinstance(v, (int, Fraction, GaussQ)) for v in c.selfcomm.operator.kernel.values()
    )


def decomposition(d: Decomposition, reassembled: bool) -> dict:
    return {
        "S": operator(d.S),
        "A": operator(d.A),
        "B": operator(d.B),
        "basis_change": operator(d.basis_change),
        "window_levels": d.levels,
        "defect_strands": list(d.defect_strands),
        "unitary_part_of_S": certainty(d.unitary_part),
        "float_derived": d.float_derived,
        "reassembly_equal": reassembled,
    }


def tolerance(tol: TolerancePolicy, exact: bool) -> dict:
    if exact:
        return {"comparison": "exact"}
    return {"rank_tol": tol.rank_tol, "psd_tol": tol.psd_tol, "circle_samples": tol.circle_samples}


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
