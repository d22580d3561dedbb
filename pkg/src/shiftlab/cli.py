"""Command line entry point: ``shiftlab <command> ...``.

Exit codes: 0 on success (whatever the verdicts), 2 for parse, shape and
argument errors, 3 when a precondition of the requested computation fails.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from importlib import resources

from . import analysis as an
from . import opcore as oc
from . import report as rp
from .dsl import emit_operator, evaluate, parse_dsl
from .equivalence import STANDARD_POINTS, coefficients, model_unitary_thm52, shimorin_model, verify_intertwine
from .errors import (
    NonOrthonormalImages,
    NotPerfectSquare,
    OutOfRange,
    ParseError,
    PreconditionFailed,
    ShapeError,
    ShapeMismatch,
    Singular,
    SpecInvalid,
    SpecMismatch,
)
from .exactnum import DEFAULT_TOL, FinMatrix, TolerancePolicy, parse_scalar
from .models import FIXTURE_IDS, ModelSpec, build_model, fixture
from .opcore import FinSupportVector, StructuredOperator

EXIT_OK, EXIT_INPUT, EXIT_PRECONDITION = 0, 2, 3


class UsageError(Exception):
    """Bad command line values (exit code 2)."""


# ---------------------------------------------------------------- inputs


def fixture_text(fid: str) -> str:
    if fid not in FIXTURE_IDS:
        raise UsageError(f"unknown fixture {fid!r}; known: {', '.join(FIXTURE_IDS)}")
    return resources.files("shiftlab").joinpath("data", f"{fid}.op").read_text(encoding="utf-8")


def _fixture_notes(digest: str) -> list[str]:
    """Adaptation notes of a shipped fixture whose program matches ``digest``."""
    notes = []
    for fid in FIXTURE_IDS:
        if parse_dsl(fixture_text(fid)).digest() == digest:
            note = fixture(fid).note
            if note:
                notes.append(f"{fid}: {note}")
    return notes


def resolve_mode(flag: str | None, directive: str | None) -> str:
    """Flag, then the file's #mode directive, then SHIFTLAB_MODE, then exact."""
    for v in (flag, directive, os.environ.get("SHIFTLAB_MODE")):
        if v:
            if v not in ("exact", "float"):
                raise UsageError(f"mode must be exact or float, got {v!r}")
            return v
    return "exact"


class Loaded:
    def __init__(self, args):
        try:
            with open(args.file, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise UsageError(f"cannot read {args.file}: {exc.strerror}") from exc
        prog = parse_dsl(text)
        self.mode = resolve_mode(args.mode, prog.directives.get("mode"))
        self.exact = self.mode == "exact"
        if not self.exact and prog.directives.get("mode") != "float":
            prog = parse_dsl(text, exact=False)
        self.program = prog
        self.digest = prog.digest()
        values = evaluate(prog, self.exact)
        if args.op not in values:
            raise UsageError(f"no binding named {args.op!r} in {args.file}")
        op = values[args.op]
        if not isinstance(op, StructuredOperator):
            raise ShapeError(f"{args.op!r} is a scalar, not an operator", (args.op,))
        if not op.is_square:
            raise ShapeError(f"{args.op!r} is not an operator on a single space", (args.op,))
        self.op = op
        tol = prog.directives.get("tol")
        self.tol = TolerancePolicy(tol, tol) if tol is not None and not self.exact else DEFAULT_TOL
        self.depth = prog.directives.get("depth")
        self.notes = _fixture_notes(self.digest)

    def header(self) -> dict:
        return {
            "input_digest": self.digest,
            "mode": self.mode,
            "tolerance": rp.tolerance(self.tol, self.exact),
        }


def parse_list(text: str) -> list:
    return [parse_scalar(x.strip()) for x in text.split(",") if x.strip()]


def parse_matrix(text: str) -> FinMatrix:
    """Rows separated by ';', entries by ','."""
    rows = [parse_list(r) for r in text.split(";") if r.strip()]
    if rows and any(len(r) != len(rows[0]) for r in rows):
        raise UsageError("matrix rows have different lengths")
    return FinMatrix.from_rows(rows) if rows else FinMatrix.zeros(0, 0)


def parse_model_spec(text: str, normal: FinMatrix | None) -> ModelSpec:
    """``x1:n`` or ``x2:n,m,a1,...,am``."""
    kind, _, rest = text.partition(":")
    parts = [x.strip() for x in rest.split(",") if x.strip()]
    try:
        if kind.lower() == "x1" and len(parts) == 1:
            return ModelSpec.x1(int(parts[0]), normal)
        if kind.lower() == "x2" and len(parts) >= 2:
            n, m = int(parts[0]), int(parts[1])
            return ModelSpec.x2(n, m, [parse_scalar(a) for a in parts[2:]], normal)
    except ValueError as exc:
        raise UsageError(f"bad model spec {text!r}: {exc}") from exc
    raise UsageError(f"bad model spec {text!r}; expected x1:n or x2:n,m,alpha...")


# ---------------------------------------------------------------- commands


def _finish(report: dict, args, started: float) -> None:
    if getattr(args, "timing", False):
        report["timing"] = {"seconds": round(time.perf_counter() - started, 6)}
    text = rp.dumps(report)
    path = getattr(args, "json", None)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _classification_report(op: StructuredOperator, tol: TolerancePolicy) -> tuple[an.Classification, dict]:
    c = an.classify(op, tol)
    return c, {
        "classification": rp.classification(c),
        "certificates": [rp.certificate(x) for x in c.certificates],
        "failed_certificates": [rp.certificate(x) for x in c.failures],
    }


def _notes(base: list, float_used: bool) -> list:
    return base + ([rp.FLOAT_NOTE] if float_used else [])


def cmd_classify(args) -> int:
    started = time.perf_counter()
    ld = Loaded(args)
    c, body = _classification_report(ld.op, ld.tol)
    report = {**ld.header(), **body}
    report["adaptation_notes"] = _notes(ld.notes, not ld.exact or rp.float_derived(c))
    _finish(report, args, started)
    return EXIT_OK


def cmd_decompose(args) -> int:
    started = time.perf_counter()
    ld = Loaded(args)
    c = an.classify(ld.op, ld.tol)
    dec = an.decompose_prop21(ld.op, c.purity, ld.tol)
    lim = ld.tol.psd_tol if dec.float_derived else 0.0
    u = dec.basis_change
    same = oc.equals(u @ dec.conjugated @ u.H, oc.to_float_op(ld.op) if dec.float_derived else ld.op, lim)
    report = {**ld.header(), "decomposition": rp.decomposition(dec, same)}
    report["adaptation_notes"] = _notes(ld.notes, not ld.exact or dec.float_derived)
    _finish(report, args, started)
    return EXIT_OK


def cmd_model(args) -> int:
    started = time.perf_counter()
    normal = parse_matrix(args.normal) if args.normal else None
    if args.x1:
        if args.m not in (None, 0) or args.alpha:
            raise UsageError("--x1 takes no --m or --alpha")
        spec = ModelSpec.x1(args.n, normal)
    else:
        if args.m is None:
            raise UsageError("--x2 needs --m")
        alphas = parse_list(args.alpha) if args.alpha else []
        spec = ModelSpec.x2(args.n, args.m, alphas, normal)
    op = build_model(spec)
    text = emit_operator(op, "T")
    if args.dsl_only:
        sys.stdout.write(text)
        return EXIT_OK
    prog = parse_dsl(text)
    c, body = _classification_report(op, DEFAULT_TOL)
    report = {
        "input_digest": prog.digest(),
        "mode": "exact",
        "tolerance": rp.tolerance(DEFAULT_TOL, True),
        "model": {
            "kind": spec.kind,
            "n": spec.n,
            "m": spec.m,
            "alphas": [rp.scalar(a) for a in spec.alphas],
            "normal_block": rp.matrix(spec.normal_block),
            "dsl": text,
        },
        **body,
        "adaptation_notes": _notes([], rp.float_derived(c)),
    }
    _finish(report, args, started)
    return EXIT_OK


def cmd_verify(args) -> int:
    started = time.perf_counter()
    ld = Loaded(args)
    normal = parse_matrix(args.normal) if args.normal else None
    spec = parse_model_spec(args.against_model, normal)
    depth = args.depth if args.depth is not None else (ld.depth or 64)
    model = build_model(spec)
    u = model_unitary_thm52(ld.op, spec, tol=ld.tol)
    exact = ld.op.is_exact()
    tol = 0.0 if exact else 1e-9
    orth = {"ok": True, "depth": depth}
    try:
        u.verify_orthonormal(depth, tol)
    except NonOrthonormalImages as exc:
        orth = {"ok": False, "depth": depth, "message": str(exc), "pair": [rp.coord(c) for c in exc.pair]}
    res = verify_intertwine(u, ld.op, model, depth, tol)
    report = {
        **ld.header(),
        "model": {"kind": spec.kind, "n": spec.n, "m": spec.m, "alphas": [rp.scalar(a) for a in spec.alphas]},
        "intertwiner": {
            "relation": "T U = U X on model basis labels",
            "depth": depth,
            "labels_checked": res.checked,
            "max_residual": res.max_residual,
            "violations": [rp.coord(c) for c in res.violations],
            "ok": res.ok,
            "orthonormal_images": orth,
        },
        "adaptation_notes": _notes(ld.notes, not exact),
    }
    _finish(report, args, started)
    return EXIT_OK


def cmd_shimorin(args) -> int:
    started = time.perf_counter()
    ld = Loaded(args)
    depth = args.depth if args.depth is not None else (ld.depth or 32)
    points = parse_list(args.points) if args.points else list(STANDARD_POINTS)
    data = shimorin_model(ld.op, depth, points)
    exact = ld.op.is_exact()
    lim = 0.0 if exact else 1e-9
    lt = oc.equals(data.left_inverse @ ld.op, oc.identity(ld.op.shape_in), lim)
    shift_ok = True
    for g in data.generators:
        cx = data.coefficients[data.generators.index(g)]
        ctx = coefficients(data.left_inverse, data.kernel_projection, oc.apply(ld.op, g), depth)
        if not ctx[0].is_zero(lim) or any(not (a - b).is_zero(lim) for a, b in zip(ctx[1:], cx)):
            shift_ok = False
    report = {
        **ld.header(),
        "shimorin": {
            "normalization": data.normalization,
            "depth": depth,
            "left_inverse": rp.operator(data.left_inverse),
            "left_inverse_times_T_is_identity": lt,
            "kernel_basis": [rp.vector(v) for v in data.kernel_basis],
            "kernel_gram": [rp.scalar(g) for g in data.kernel_gram],
            "coefficient_shift_holds": shift_ok,
            "sample_points": [rp.scalar(z) for z in data.sample_points],
            "gram": rp.matrix(data.gram),
            "gram_psd": data.gram_psd,
            "gram_min_eigenvalue": data.gram_min_eigenvalue,
        },
        "adaptation_notes": _notes(ld.notes, not exact),
    }
    _finish(report, args, started)
    return EXIT_OK


def cmd_fixtures(args) -> int:
    if args.emit:
        sys.stdout.write(fixture_text(args.emit))
        return EXIT_OK
    for fid in FIXTURE_IDS:
        note = fixture(fid).note
        sys.stdout.write(f"{fid}\t{'adapted' if note else 'as stated'}\n")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="shiftlab", description="Exact analysis of shift-plus-finite-rank operators.")
    sub = ap.add_subparsers(dest="command", required=True)

    def file_cmd(name: str, helptext: str):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("file", help=".op program")
        p.add_argument("--op", required=True, help="name of the operator binding")
        mode = p.add_mutually_exclusive_group()
        mode.add_argument("--exact", dest="mode", action="store_const", const="exact")
        mode.add_argument("--float", dest="mode", action="store_const", const="float")
        p.add_argument("--json", metavar="PATH", help="write the report here instead of stdout")
        p.add_argument("--timing", action="store_true", help="include wall-clock time in the report")
        return p

    file_cmd("classify", "classification report").set_defaults(func=cmd_classify)
    file_cmd("decompose", "split into [[S, A], [0, B]]").set_defaults(func=cmd_decompose)

    p = file_cmd("verify", "check the model intertwiner")
    p.add_argument("--against-model", required=True, metavar="SPEC", help="x1:n or x2:n,m,alpha...")
    p.add_argument("--normal", metavar="MAT", help="normal block, rows split by ';'")
    p.add_argument("--depth", type=int)
    p.set_defaults(func=cmd_verify)

    p = file_cmd("shimorin", "left-inverse model data")
    p.add_argument("--depth", type=int)
    p.add_argument("--points", metavar="LIST", help="comma separated disc points")
    p.set_defaults(func=cmd_shimorin)

    p = sub.add_parser("model", help="emit a model operator")
    kind = p.add_mutually_exclusive_group(required=True)
    kind.add_argument("--x1", action="store_true")
    kind.add_argument("--x2", action="store_true")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int)
    p.add_argument("--alpha", metavar="LIST", help="comma separated alphas below 1")
    p.add_argument("--normal", metavar="MAT", help="normal block, rows split by ';'")
    p.add_argument("--dsl-only", action="store_true", help="print only the program text")
    p.add_argument("--json", metavar="PATH")
    p.add_argument("--timing", action="store_true")
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("fixtures", help="shipped example programs")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--list", action="store_true")
    g.add_argument("--emit", metavar="ID")
    p.set_defaults(func=cmd_fixtures)
    return ap


INPUT_ERRORS = (ParseError, ShapeError, ShapeMismatch, SpecInvalid, OutOfRange, NotPerfectSquare, UsageError)
PRECONDITION_ERRORS = (PreconditionFailed, SpecMismatch, Singular)


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        print(f"shiftlab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PRECONDITION_ERRORS as exc:
        print(f"shiftlab: precondition failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
