"""Column-by-column robust pole assignment and its quality metrics."""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.optimize import linear_sum_assignment

from . import matcore, step_complex, step_real
from .errors import AllStartsFailed, EmptyNullSpace, StepError
from .model import FeedbackSolution, PartialSchur, Real, RobustnessReport, StepRecord

log = logging.getLogger(__name__)

PRECS_CAP = 16


@dataclass(frozen=True)
class SolveConfig:
    rank_tol: float = None
    step_residual_tol: float = 1e-8
    orth_tol: float = 1e-8
    multistart_count: int = 1
    rng_seed: int = 0
    baseline_mode: bool = False

    def __post_init__(self):
        if self.rank_tol is not None and not self.rank_tol > 0:
            raise ValueError("rank_tol must be positive")
        if not self.step_residual_tol > 0 or not self.orth_tol > 0:
            raise ValueError("tolerances must be positive")
        if self.multistart_count < 1:
            raise ValueError("multistart_count must be >= 1")


@dataclass(frozen=True)
class MetricsBundle:
    dep: float
    cond_x: float
    precs: int
    schur_residual: float


def _leading(sys, item, start):
    """Initial ``(X, T)`` for the first pole item.

    ``start`` is ``None`` for the default choice, otherwise a dict with
    ``coeffs`` (real pole) or ``nu2``/``branch`` (conjugate pair).
    """
    start = start or {}
    if isinstance(item, Real):
        try:
            x1 = step_real.init_real(sys, item.lam, start.get("coeffs"))
        except EmptyNullSpace as exc:
            raise exc.at_step(0)
        r = step_real.init_null_basis(sys, item.lam).shape[1]
        partial = PartialSchur(x1[:, None], np.array([[item.lam]]), (1,), 0.0)
        return partial, StepRecord(0, "real", "init", r)
    try:
        x1, x2, T2, info = step_complex.init_complex(
            sys, item.alpha, item.beta, start.get("nu2"), start.get("branch")
        )
    except StepError as exc:
        raise exc.at_step(0)
    X = np.column_stack([x1, x2])
    dep_sq = (T2[0, 1] + T2[1, 0]) ** 2
    partial = PartialSchur(X, T2, (2,), float(dep_sq))
    strategy = "init-fallback" if info["fallback"] else "init"
    return partial, StepRecord(0, "pair", strategy, info["r"], increment=float(dep_sq))


def assign(sys, poles, cfg=None, start=None):
    """Feedback ``F`` placing ``poles`` with a small departure from normality.

    Builds an orthogonal ``X`` and quasi-triangular ``T`` column by column
    with ``Q2^T (A X - X T) = 0``, then ``F = R^-1 Q1^T (X T X^T - A)``.

    Raises:
        NoViableCandidate, EmptyNullSpace, ...: a step failed; the
            exception's ``step`` attribute gives the column index.
    """
    cfg = cfg or SolveConfig()
    if poles.n != sys.n:
        raise ValueError(f"{poles.n} poles given for a system of order {sys.n}")
    items = list(poles)
    partial, rec = _leading(sys, items[0], start)
    log_entries = [rec]
    orthogonal = True
    for item in items[1:]:
        j = partial.j
        if isinstance(item, Real):
            try:
                res = step_real.solve_real_step(sys, partial, item.lam, cfg.rank_tol)
            except StepError as exc:
                raise exc.at_step(j)
            # earlier baseline pair steps leave X non-orthogonal
            partial = step_real.update_real(partial, res, item.lam, cfg.orth_tol, orthogonal)
            log_entries.append(StepRecord(j, "real", "real", res.r, increment=res.objective))
            continue
        if cfg.baseline_mode:
            partial, cand, r = step_complex.baseline_complex_step(
                sys, partial, item.alpha, item.beta, cfg.rank_tol
            )
            orthogonal = False
            log_entries.append(
                StepRecord(j, "pair", "baseline", r, increment=cand.objective, orthogonal=False)
            )
            continue
        out = step_complex.solve_pair_step(
            sys, partial, item.alpha, item.beta, cfg.rank_tol, cfg.orth_tol
        )
        partial = out.partial
        log_entries.append(
            StepRecord(
                j,
                "pair",
                out.chosen.strategy,
                out.r,
                dep1=out.jacobi.objective if out.jacobi is not None else math.inf,
                dep2=out.balanced.objective if out.balanced is not None else math.inf,
                increment=out.chosen.objective,
                jacobi_bound=out.jacobi.bound if out.jacobi is not None else math.nan,
                balanced_bound=out.balanced.bound if out.balanced is not None else math.nan,
            )
        )
        log.debug("pair step %d: %s", j, log_entries[-1])
    F = recover_f(sys, partial.X, partial.T, orthogonal=orthogonal)
    return FeedbackSolution(F, partial.X, partial.T, partial.blocks, tuple(log_entries), orthogonal)


def recover_f(sys, X, T, orthogonal=True):
    """``F = R^-1 Q1^T (X T X^-1 - A)``; ``X^-1 = X^T`` when orthogonal."""
    if orthogonal:
        Ac = X @ T @ X.T
    else:
        Ac = X @ np.linalg.solve(X.T, T.T).T
    return solve_triangular(sys.r_factor, sys.q1.T @ (Ac - sys.A))


def _random_start(sys, item, rng):
    if isinstance(item, Real):
        r = step_real.init_null_basis(sys, item.lam).shape[1]
        c = rng.standard_normal(r)
        return {"coeffs": c / np.linalg.norm(c)}
    branch = -1 if rng.random() < 0.5 else 1
    return {"nu2": float(rng.random()), "branch": branch}


def assign_multistart(sys, poles, cfg=None):
    """Best of ``cfg.multistart_count`` runs with different first columns.

    Start 0 is the default choice of :func:`assign`. Further starts draw a
    random unit coefficient vector in the initial null-space basis (leading
    real pole) or a random member of the balanced family (leading pair),
    from ``numpy.random.Generator(PCG64(cfg.rng_seed))``. The solution with
    the smallest departure from normality wins; ties keep the earlier start.
    """
    cfg = cfg or SolveConfig()
    rng = np.random.Generator(np.random.PCG64(cfg.rng_seed))
    lam = poles.expand()
    best, best_dep = None, math.inf
    errors = []
    first = poles.items[0]
    for k in range(cfg.multistart_count):
        start = None if k == 0 else _random_start(sys, first, rng)
        if start is not None and not isinstance(first, Real):
            # nu2 must lie in the admissible interval of the current frame;
            # scale the unit draw into it inside init_complex's family
            start = _scale_pair_start(sys, first, start)
        try:
            sol = assign(sys, poles, cfg, start)
        except StepError as exc:
            errors.append(exc)
            continue
        dep = departure(_ac(sys, sol), lam)
        if dep < best_dep:
            best, best_dep = sol, dep
    if best is None:
        raise AllStartsFailed(f"all {cfg.multistart_count} starts failed: {errors[0]}")
    return best


def _scale_pair_start(sys, item, start):
    lam = complex(item.alpha, item.beta)
    S = matcore.null_basis(sys.q2.T @ (sys.A - lam * np.eye(sys.n)))
    theta, _ = step_complex.hamiltonian_basis(step_complex.init_frame_matrices(S)[0])
    if theta.shape[0] < 2 or theta[0] <= step_complex.DEGENERACY_FLOOR:
        return {"nu2": start["nu2"], "branch": start["branch"]}
    limit = np.sqrt(theta[0] / (theta[0] + theta[1]))
    return {"nu2": start["nu2"] * limit, "branch": start["branch"]}


def _ac(sys, sol):
    return sys.A + sys.B @ sol.F


def departure_sq(Ac, poles):
    lam = poles.expand() if hasattr(poles, "expand") else np.asarray(poles)
    return float(np.linalg.norm(Ac, "fro") ** 2 - np.sum(np.abs(lam) ** 2))


def departure(Ac, poles):
    """Departure from normality ``sqrt(||Ac||_F^2 - sum |lambda|^2)``.

    A negative difference (roundoff on nearly normal matrices) is clamped
    to zero.
    """
    d2 = departure_sq(Ac, poles)
    if d2 < 0:
        log.debug("departure^2 = %.3e clamped to 0", d2)
        return 0.0
    return math.sqrt(d2)


def block_departure_sq(T, blocks):
    """``||N||_F^2 + sum (delta - 1/delta)^2 beta^2`` read off ``T``.

    For a block ``[[a, p], [q, a]]`` with ``p = delta beta`` and
    ``q = -beta / delta`` the block term equals ``(p + q)^2``.
    """
    N = np.triu(T, 1).copy()
    diag_term = 0.0
    i = 0
    for size in blocks:
        if size == 2:
            N[i, i + 1] = 0.0
            diag_term += (T[i, i + 1] + T[i + 1, i]) ** 2
        i += size
    return float(np.sum(N**2) + diag_term)


def cond_eigvec(Ac, poles=None):
    """``||V||_F ||V^-1||_F`` for the unit-column eigenvector matrix ``V``.

    Returns ``inf`` when ``V`` is numerically singular.
    """
    _, V = np.linalg.eig(Ac)
    V = V / np.linalg.norm(V, axis=0)
    n = V.shape[0]
    if np.linalg.cond(V) * np.finfo(float).eps * n >= 1.0:
        return math.inf
    try:
        Vinv = np.linalg.inv(V)
    except np.linalg.LinAlgError:
        return math.inf
    return float(np.linalg.norm(V, "fro") * np.linalg.norm(Vinv, "fro"))


def precision_digits(assigned, computed):
    """Correct leading decimal digits of the worst-placed pole.

    Poles are matched to computed eigenvalues by a minimum total distance
    assignment; per pole the digits are ``-log10(|err| / |lambda|)``
    (absolute error for ``|lambda| < 1e-300``), capped at 16, and rounded
    to 1e-6 before flooring so that the floating-point representation of
    the error does not cost a digit.
    """
    lam = assigned.expand() if hasattr(assigned, "expand") else np.asarray(assigned, complex)
    mu = np.asarray(computed, dtype=complex)
    if lam.shape != mu.shape:
        raise ValueError("pole lists differ in length")
    cost = np.abs(lam[:, None] - mu[None, :])
    rows, cols = linear_sum_assignment(cost)
    worst = float(PRECS_CAP)
    for i, k in zip(rows, cols):
        err = cost[i, k]
        ref = abs(lam[i])
        rel = err / ref if ref >= 1e-300 else err
        digits = PRECS_CAP if rel == 0.0 else min(PRECS_CAP, -math.log10(rel))
        worst = min(worst, digits)
    return int(math.floor(round(worst, 6)))


def metrics(sys, sol, poles):
    Ac = sys.A + sys.B @ sol.F
    lam = poles.expand()
    return MetricsBundle(
        dep=departure(Ac, poles),
        cond_x=cond_eigvec(Ac),
        precs=precision_digits(lam, np.linalg.eigvals(Ac)),
        schur_residual=_schur_residual(sys, sol),
    )


def _schur_residual(sys, sol):
    Ac = sys.A + sys.B @ sol.F
    X, T = sol.X, sol.T
    scale = np.linalg.norm(sys.A, "fro") + np.linalg.norm(T, "fro")
    return float(np.linalg.norm(Ac @ X - X @ T, "fro") / max(scale, 1.0))


@dataclass(frozen=True)
class Tolerances:
    orth: float = 1e-10
    schur: float = 1e-10
    constraint: float = 1e-10
    identity: float = 1e-8


def validate(sol, sys, poles, tol=None):
    """Metrics plus structural residuals of a solution.

    ``orth`` is scaled by ``n``; ``schur`` and ``constraint`` residuals are
    relative to ``||A||_F + ||T||_F``.
    """
    tol = tol or Tolerances()
    n = sys.n
    m = metrics(sys, sol, poles)
    X, T = sol.X, sol.T
    orth = float(np.linalg.norm(X.T @ X - np.eye(n), "fro"))
    scale = max(np.linalg.norm(sys.A, "fro") + np.linalg.norm(T, "fro"), 1.0)
    constraint = float(np.linalg.norm(sys.q2.T @ (sys.A @ X - X @ T), "fro") / scale)
    d2 = departure_sq(sys.A + sys.B @ sol.F, poles)
    ident = abs(d2 - block_departure_sq(T, sol.blocks)) / (1.0 + abs(d2))
    failures = []
    if orth > tol.orth * n:
        failures.append("orth_residual")
    if m.schur_residual > tol.schur:
        failures.append("schur_residual")
    if constraint > tol.constraint:
        failures.append("constraint_residual")
    if ident > tol.identity:
        failures.append("dep_identity_residual")
    return RobustnessReport(
        dep=m.dep,
        cond_x=m.cond_x,
        precs=m.precs,
        schur_residual=m.schur_residual,
        orth_residual=orth,
        constraint_residual=constraint,
        dep_identity_residual=float(ident),
        passed=not failures,
        failures=tuple(failures),
    )


__all__ = [
    "SolveConfig",
    "MetricsBundle",
    "Tolerances",
    "assign",
    "assign_multistart",
    "recover_f",
    "departure",
    "departure_sq",
    "block_departure_sq",
    "cond_eigvec",
    "precision_digits",
    "metrics",
    "validate",
]
