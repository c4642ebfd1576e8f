"""Command-line front end and the JSON/CSV file formats.

Problem file (JSON object)::

    {"a": [[...], ...],          # n x n, row-major
     "b": [[...], ...],          # n x m
     "poles": [[re, im], ...],   # n entries, closed under conjugation
     "config": {"multistart": 1, "seed": 0, "baseline": false}}   # optional

Solution file: fields ``f, x, t, blocks, orthogonal, report, step_log`` in
that order, two-space indentation, floats in Python's shortest round-trip
``repr`` form, non-finite values written as ``null``.

Exit codes: 0 success, 2 bad input or flags, 3 uncontrollable pair,
4 a step of the assignment failed, 5 validation failed.
"""

import argparse
import csv
import json
import logging
import math
import os
import sys

import numpy as np

from . import bench
from .errors import NotControllable, PolecraftError, RankDeficientB, StepError, UnmatchedConjugate
from .model import FeedbackSolution, StepRecord, canonicalize_poles, new_system
from .solver import SolveConfig, Tolerances, assign, assign_multistart, validate

log = logging.getLogger("polecraft")

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_UNCONTROLLABLE = 3
EXIT_STEP = 4
EXIT_INVALID = 5

CSV_HEADER = ["case", "n", "m", "k", "method", "repeat", "dep", "cond_x", "precs", "wall_ms", "status"]
SOLUTION_FIELDS = ("f", "x", "t", "blocks", "orthogonal", "report", "step_log")
CONFIG_KEYS = {"multistart", "seed", "baseline", "rank_tol"}


class InputError(Exception):
    """Malformed problem or solution file."""


def _matrix(obj, field, rows=None, cols=None):
    if not isinstance(obj, list) or not obj:
        raise InputError(f"field {field!r}: expected a non-empty list of rows")
    width = None
    for i, row in enumerate(obj):
        if not isinstance(row, list):
            raise InputError(f"field {field!r}: row {i} is not a list")
        if width is None:
            width = len(row)
        if len(row) != width:
            raise InputError(f"field {field!r}: row {i} has {len(row)} entries, expected {width}")
        for v in row:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise InputError(f"field {field!r}: row {i} has non-numeric entry {v!r}")
    M = np.array(obj, dtype=float)
    if rows is not None and M.shape[0] != rows:
        raise InputError(f"field {field!r}: has {M.shape[0]} rows, expected {rows}")
    if cols is not None and M.shape[1] != cols:
        raise InputError(f"field {field!r}: has {M.shape[1]} columns, expected {cols}")
    if not np.all(np.isfinite(M)):
        raise InputError(f"field {field!r}: entries must be finite")
    return M


def _load_json(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise InputError(f"{path}: top level must be an object")
    return data


def parse_problem(data):
    """``(A, B, poles, config)`` from a decoded problem object."""
    for key in ("a", "b", "poles"):
        if key not in data:
            raise InputError(f"missing field {key!r}")
    A = _matrix(data["a"], "a")
    n = A.shape[0]
    if A.shape[1] != n:
        raise InputError(f"field 'a': must be square, got {A.shape[0]}x{A.shape[1]}")
    B = _matrix(data["b"], "b", rows=n)
    raw = data["poles"]
    if not isinstance(raw, list) or len(raw) != n:
        raise InputError(f"field 'poles': expected {n} entries")
    vals = []
    for i, p in enumerate(raw):
        if (
            not isinstance(p, list)
            or len(p) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in p)
        ):
            raise InputError(f"field 'poles': entry {i} must be [re, im]")
        vals.append(complex(p[0], p[1]))
    try:
        poles = canonicalize_poles(vals)
    except UnmatchedConjugate as exc:
        raise InputError(f"field 'poles': pole {exc.pole} has no conjugate partner") from exc
    except ValueError as exc:
        raise InputError(f"field 'poles': {exc}") from exc
    config = data.get("config", {}) or {}
    if not isinstance(config, dict):
        raise InputError("field 'config': must be an object")
    unknown = set(config) - CONFIG_KEYS
    if unknown:
        raise InputError(f"field 'config': unknown keys {sorted(unknown)}")
    return A, B, poles, config


def load_problem(path):
    return parse_problem(_load_json(path))


def problem_to_dict(A, B, poles, config=None):
    out = {
        "a": np.asarray(A, dtype=float).tolist(),
        "b": np.asarray(B, dtype=float).tolist(),
        "poles": [[float(p.real), float(p.imag)] for p in poles.expand()],
    }
    if config:
        out["config"] = dict(config)
    return out


def _finite_or_none(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, (np.integer,)):
        obj = int(obj)
    if isinstance(obj, (np.bool_,)):
        obj = bool(obj)
    return _finite_or_none(obj)


def dumps_canonical(obj):
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def solution_to_dict(sol, report=None):
    return {
        "f": sol.F.tolist(),
        "x": sol.X.tolist(),
        "t": sol.T.tolist(),
        "blocks": list(sol.blocks),
        "orthogonal": bool(sol.orthogonal),
        "report": report.as_dict() if report is not None else None,
        "step_log": [rec.as_dict() for rec in sol.step_log],
    }


def serialize_solution(data):
    ordered = {k: data[k] for k in SOLUTION_FIELDS}
    return dumps_canonical(ordered)


def parse_solution(data):
    """Decoded solution object -> ``(FeedbackSolution, dict)``."""
    for key in SOLUTION_FIELDS:
        if key not in data:
            raise InputError(f"missing field {key!r}")
    X = _matrix(data["x"], "x")
    n = X.shape[0]
    X = _matrix(data["x"], "x", cols=n)
    T = _matrix(data["t"], "t", rows=n, cols=n)
    F = _matrix(data["f"], "f", cols=n)
    blocks = data["blocks"]
    if not isinstance(blocks, list) or any(b not in (1, 2) for b in blocks) or sum(blocks) != n:
        raise InputError(f"field 'blocks': must list 1/2 block sizes summing to {n}")
    steps = []
    for i, rec in enumerate(data["step_log"]):
        try:
            fields = {k: (math.nan if v is None else v) for k, v in rec.items()}
            steps.append(StepRecord(**fields))
        except TypeError as exc:
            raise InputError(f"field 'step_log': entry {i}: {exc}") from exc
    sol = FeedbackSolution(F, X, T, tuple(blocks), tuple(steps), bool(data["orthogonal"]))
    return sol, data


def load_solution(path):
    return parse_solution(_load_json(path))


def _setup_logging():
    level = os.environ.get("POLECRAFT_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _fmt(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "nan"
    return f"{v:.3e}"


def cmd_assign(args):
    try:
        A, B, poles, config = load_problem(args.input)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    multistart = args.multistart if args.multistart is not None else config.get("multistart", 1)
    seed = args.seed if args.seed is not None else config.get("seed", 0)
    baseline = args.baseline or bool(config.get("baseline", False))
    try:
        cfg = SolveConfig(
            rank_tol=config.get("rank_tol"),
            multistart_count=int(multistart),
            rng_seed=int(seed),
            baseline_mode=baseline,
        )
    except (TypeError, ValueError) as exc:
        print(f"error: field 'config': {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        sysp = new_system(A, B)
    except NotControllable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNCONTROLLABLE
    except RankDeficientB as exc:
        print(f"error: field 'b': {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        if cfg.multistart_count > 1:
            sol = assign_multistart(sysp, poles, cfg)
        else:
            sol = assign(sysp, poles, cfg)
    except StepError as exc:
        # str(exc) carries the "step N:" prefix
        print(f"error: assignment failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_STEP
    except PolecraftError as exc:
        print(f"error: assignment failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_STEP
    report = validate(sol, sysp, poles)
    text = serialize_solution(solution_to_dict(sol, report))
    if args.output == "-":
        sys.stdout.write(text)
    else:
        with open(args.output, "w") as fh:
            fh.write(text)
    print(f"dep={_fmt(report.dep)} cond_x={_fmt(report.cond_x)} precs={report.precs}")
    return EXIT_OK


def cmd_validate(args):
    try:
        A, B, poles, _ = load_problem(args.input)
        sol, _ = load_solution(args.solution)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if sol.X.shape[0] != A.shape[0] or sol.F.shape != (B.shape[1], A.shape[0]):
        print("error: solution dimensions do not match the problem", file=sys.stderr)
        return EXIT_PARSE
    try:
        sysp = new_system(A, B, check_controllable=False)
    except RankDeficientB as exc:
        print(f"error: field 'b': {exc}", file=sys.stderr)
        return EXIT_PARSE
    report = validate(sol, sysp, poles, Tolerances())
    for key, value in report.as_dict().items():
        if key == "failures":
            value = ",".join(value) if value else "-"
        print(f"{key}: {value}")
    return EXIT_OK if report.passed else EXIT_INVALID


def _csv_float(v):
    if v is None:
        return ""
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def write_csv(rows, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(
            [
                r.case,
                r.n,
                r.m,
                "" if r.k is None else repr(float(r.k)),
                r.method,
                r.repeat,
                _csv_float(r.dep),
                _csv_float(r.cond_x),
                r.precs,
                f"{r.wall_ms:.3f}",
                r.status,
            ]
        )


def cmd_bench(args):
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    bad = [m for m in methods if m not in bench.METHODS]
    if bad:
        print(f"error: unknown method(s) {bad}; choose from {list(bench.METHODS)}", file=sys.stderr)
        return EXIT_PARSE
    if args.repeats < 1:
        print("error: --repeats must be >= 1", file=sys.stderr)
        return EXIT_PARSE
    cases = []
    if args.example41:
        if not args.k:
            print("error: --example41 needs --k", file=sys.stderr)
            return EXIT_PARSE
        if any(n < 3 for n in args.n) or any(k <= 0 for k in args.k):
            print("error: --example41 needs n >= 3 and k > 0", file=sys.stderr)
            return EXIT_PARSE
        cases = [bench.CaseSpec("example41", n, k=k) for n in args.n for k in args.k]
    else:
        if not args.m:
            print("error: --random needs --m", file=sys.stderr)
            return EXIT_PARSE
        for n in args.n:
            for m in args.m:
                if not 1 <= m <= n:
                    print(f"error: need 1 <= m <= n, got n={n}, m={m}", file=sys.stderr)
                    return EXIT_PARSE
                cases.append(bench.CaseSpec("random", n, m=m))
    rows = bench.run_suite(cases, methods, args.repeats, args.seed, args.multistart)
    if args.output == "-":
        write_csv(rows, sys.stdout)
    else:
        with open(args.output, "w", newline="") as fh:
            write_csv(rows, fh)
    for agg in bench.aggregate(rows):
        print(
            f"{agg.case} {agg.method}: dep median={_fmt(agg.dep_median)} mean={_fmt(agg.dep_mean)}"
            f" precs median={agg.precs_median} failures={agg.failures}/{agg.count}",
            file=sys.stderr if args.output == "-" else sys.stdout,
        )
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="polecraft", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("assign", help="solve a pole assignment problem file")
    a.add_argument("--input", required=True)
    a.add_argument("--output", required=True, help="solution path, or - for stdout")
    a.add_argument("--multistart", type=int, default=None)
    a.add_argument("--seed", type=int, default=None)
    a.add_argument("--baseline", action="store_true", help="non-orthogonal delta=1 pair steps")
    a.set_defaults(func=cmd_assign)

    b = sub.add_parser("bench", help="run a benchmark grid and write CSV")
    kind = b.add_mutually_exclusive_group(required=True)
    kind.add_argument("--example41", action="store_true")
    kind.add_argument("--random", action="store_true")
    b.add_argument("--n", type=int, nargs="+", required=True)
    b.add_argument("--m", type=int, nargs="+")
    b.add_argument("--k", type=float, nargs="+")
    b.add_argument("--repeats", type=int, default=1)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--methods", default=",".join(bench.METHODS))
    b.add_argument("--multistart", type=int, default=bench.DEFAULT_MULTISTART)
    b.add_argument("--output", required=True, help="CSV path, or - for stdout")
    b.set_defaults(func=cmd_bench)

    v = sub.add_parser("validate", help="check a solution file against its problem")
    v.add_argument("--solution", required=True)
    v.add_argument("--input", required=True, help="problem file")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None):
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
