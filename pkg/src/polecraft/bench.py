"""Benchmark generators and a small comparison harness.

Randomness comes from ``numpy.random.Generator(PCG64(seed))``; normal
variates use numpy's ziggurat ``standard_normal``. Per-trial seeds are
derived with ``numpy.random.SeedSequence(seed).spawn`` in the order
(case, repeat), so a run is reproducible from its top-level seed alone.
"""

import logging
import math
import statistics
import time
from dataclasses import dataclass

import numpy as np

from .errors import PolecraftError
from .model import Pair, PoleSpec, Real, UnmatchedConjugate, canonicalize_poles, new_system
from .solver import SolveConfig, assign, assign_multistart, validate

log = logging.getLogger(__name__)

METHODS = ("schur-rob", "o-schur-rob", "baseline-schur")
DEFAULT_MULTISTART = 10


@dataclass(frozen=True)
class BenchCase:
    name: str
    sys: object
    poles: PoleSpec
    tags: tuple


@dataclass(frozen=True)
class CaseSpec:
    """Recipe for a family of cases; one instance is drawn per repeat."""

    kind: str
    n: int
    m: int = None
    k: float = None

    @property
    def name(self):
        if self.kind == "example41":
            return f"example41(n={self.n},k={self.k:g})"
        return f"random(n={self.n},m={self.m})"

    def generate(self, seed):
        if self.kind == "example41":
            return gen_example41(self.n, self.k, seed)
        if self.kind == "random":
            return gen_random(self.n, self.m, seed)
        raise ValueError(f"unknown case kind {self.kind!r}")


@dataclass(frozen=True)
class BenchRow:
    case: str
    n: int
    m: int
    k: float
    method: str
    repeat: int
    dep: float
    cond_x: float
    precs: int
    wall_ms: float
    status: str


def _rng(seed):
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(int(seed)))


def example41_matrices(n):
    if n < 3:
        raise ValueError("the banded test family needs n >= 3")
    A = np.eye(n)
    A[n - 1, :] = 0.0
    A[n - 1, 1:] = 0.5
    B = np.vstack([np.eye(n - 1), np.zeros((1, n - 1))])
    return A, B


def gen_example41(n, k, seed):
    """``n - 2`` standard normal real poles followed by ``0.5 +/- k i``."""
    A, B = example41_matrices(n)
    reals = _rng(seed).standard_normal(n - 2)
    poles = PoleSpec(tuple(Real(float(v)) for v in reals) + (Pair(0.5, float(k)),))
    return BenchCase(f"example41(n={n},k={k:g})", new_system(A, B), poles, (n, n - 1, float(k)))


def gen_random(n, m, seed, max_tries=100):
    """Random ``A``, ``B``, ``F0``; the poles are the spectrum of ``A + B F0``."""
    if not 1 <= m <= n:
        raise ValueError("need 1 <= m <= n")
    rng = _rng(seed)
    for _ in range(max_tries):
        A = rng.standard_normal((n, n))
        B = rng.standard_normal((n, m))
        F0 = rng.standard_normal((m, n))
        try:
            poles = canonicalize_poles(np.linalg.eigvals(A + B @ F0))
            sys = new_system(A, B)
        except (UnmatchedConjugate, PolecraftError):
            continue
        return BenchCase(f"random(n={n},m={m})", sys, poles, (n, m, None))
    raise RuntimeError("could not draw a valid random case")


def solve_with(method, case, seed, multistart=DEFAULT_MULTISTART):
    sys, poles = case.sys, case.poles
    if method == "schur-rob":
        return assign(sys, poles, SolveConfig())
    if method == "o-schur-rob":
        return assign_multistart(sys, poles, SolveConfig(multistart_count=multistart, rng_seed=seed))
    if method == "baseline-schur":
        return assign(sys, poles, SolveConfig(baseline_mode=True))
    raise ValueError(f"unknown method {method!r}")


def trial_seeds(seed, n_cases, repeats):
    """Seeds for every (case, repeat) trial, derived from one root seed."""
    children = np.random.SeedSequence(seed).spawn(n_cases * repeats)
    return [
        [int(children[c * repeats + r].generate_state(1, np.uint64)[0]) for r in range(repeats)]
        for c in range(n_cases)
    ]


def run_suite(cases, methods, repeats=1, seed=0, multistart=DEFAULT_MULTISTART):
    """Evaluate every method on ``repeats`` draws of every case spec.

    A failing solve produces a row with ``status`` set to the error and
    NaN metrics; the suite itself never raises on solver errors.
    """
    methods = list(methods)
    if not methods:
        return []
    for meth in methods:
        if meth not in METHODS:
            raise ValueError(f"unknown method {meth!r}")
    cases = list(cases)
    seeds = trial_seeds(seed, len(cases), repeats)
    rows = []
    for ci, spec in enumerate(cases):
        for rep in range(repeats):
            s = seeds[ci][rep]
            case = spec.generate(s)
            n, m, k = case.tags
            for meth in methods:
                t0 = time.perf_counter()
                try:
                    sol = solve_with(meth, case, s, multistart)
                    rep_ = validate(sol, case.sys, case.poles)
                    status = "ok"
                    dep, cond_x, precs = rep_.dep, rep_.cond_x, rep_.precs
                except PolecraftError as exc:
                    status = f"{type(exc).__name__}: {exc}"
                    dep, cond_x, precs = math.nan, math.nan, -1
                wall = (time.perf_counter() - t0) * 1e3
                rows.append(BenchRow(spec.name, n, m, k, meth, rep, dep, cond_x, precs, wall, status))
                log.debug("%s %s #%d: %s", spec.name, meth, rep, status)
    return rows


@dataclass(frozen=True)
class Aggregate:
    case: str
    method: str
    count: int
    failures: int
    dep_median: float
    dep_mean: float
    cond_median: float
    precs_median: float
    precs_mean: float
    precs_min: int


def aggregate(rows):
    """Median and mean per (case, method), in first-appearance order."""
    groups = {}
    for row in rows:
        groups.setdefault((row.case, row.method), []).append(row)
    out = []
    for (case, meth), rs in groups.items():
        ok = [r for r in rs if r.status == "ok"]
        deps = [r.dep for r in ok]
        conds = [r.cond_x for r in ok]
        precs = [r.precs for r in ok]
        out.append(
            Aggregate(
                case,
                meth,
                len(rs),
                len(rs) - len(ok),
                statistics.median(deps) if deps else math.nan,
                statistics.fmean(deps) if deps else math.nan,
                statistics.median(conds) if conds else math.nan,
                statistics.median(precs) if precs else math.nan,
                statistics.fmean(precs) if precs else math.nan,
                min(precs) if precs else -1,
            )
        )
    return out
