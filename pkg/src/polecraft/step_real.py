"""Assignment of a single real pole.

Given ``X_j, T_j`` the admissible next columns ``(x, v)`` form the null
space of ``M = [[Q2^T (A - lam I), -Q2^T X_j], [X_j^T, 0]]``. With an
orthonormal null basis ``S = [S1; S2]`` the problem

    min ||v||^2  s.t.  ||x|| = 1

reduces to ``min y^T y`` over ``y^T S1^T S1 y = 1`` because
``S2^T S2 = I - S1^T S1``; the minimizer is the top eigenvector of
``S1^T S1`` scaled onto the constraint.
"""

from dataclasses import dataclass

import numpy as np

from . import matcore
from .errors import DegenerateDirection, EmptyNullSpace, OrthogonalityLoss
from .model import PartialSchur

DEGENERACY_FLOOR = 1e-12


@dataclass(frozen=True)
class RealStepResult:
    x_next: np.ndarray
    v_next: np.ndarray
    objective: float
    r: int


def init_null_basis(sys, lam):
    """Orthonormal basis of the null space of ``Q2^T (A - lam I)``."""
    n = sys.n
    shift = np.asarray(lam)
    C = sys.q2.T @ (sys.A - shift * np.eye(n))
    return matcore.null_basis(C)


def init_real(sys, lam, coeffs=None):
    """First Schur vector for a leading real pole.

    With ``coeffs=None`` the null-space basis vectors are summed (the
    all-ones combination); otherwise ``S @ coeffs`` is used. The result is
    normalized.
    """
    S = init_null_basis(sys, lam)
    c = np.ones(S.shape[1]) if coeffs is None else np.asarray(coeffs, dtype=float)
    x = S @ c
    nrm = np.linalg.norm(x)
    if nrm <= DEGENERACY_FLOOR:
        # all-ones can cancel exactly; fall back to the first basis vector
        x, nrm = S[:, 0], np.linalg.norm(S[:, 0])
    return x / nrm


def build_m_real(sys, partial, lam):
    n = sys.n
    X = partial.X
    j = X.shape[1]
    top = np.hstack([sys.q2.T @ (sys.A - lam * np.eye(n)), -(sys.q2.T @ X)])
    bottom = np.hstack([X.T, np.zeros((j, j))])
    return np.vstack([top, bottom])


def solve_real_step(sys, partial, lam, rank_tol=None):
    """Best ``(x_{j+1}, v_{j+1})`` for real pole ``lam``.

    Raises:
        EmptyNullSpace: the step matrix has full column rank.
        DegenerateDirection: ``S1`` is numerically zero.
    """
    n, j = sys.n, partial.j
    M = build_m_real(sys, partial, lam)
    S = matcore.null_basis(M, tol=rank_tol)
    S1, S2 = S[:n], S[n:]
    evals, evecs = matcore.sym_eig(S1.T @ S1)
    top = evals[0]
    if top <= DEGENERACY_FLOOR:
        raise DegenerateDirection(f"top eigenvalue of S1^T S1 is {top:.3e}").at_step(j)
    y = evecs[:, 0] / np.sqrt(top)
    x = S1 @ y
    v = S2 @ y
    # renormalize x exactly; v follows the same scaling
    nx = np.linalg.norm(x)
    x, v = x / nx, v / nx
    return RealStepResult(x, v, float(v @ v), S.shape[1])


def update_real(partial, result, lam, orth_tol=1e-8, check_orth=True):
    X, T = partial.X, partial.T
    j = partial.j
    Xn = np.hstack([X, result.x_next[:, None]])
    Tn = np.zeros((j + 1, j + 1))
    Tn[:j, :j] = T
    Tn[:j, j] = result.v_next
    Tn[j, j] = lam
    err = np.linalg.norm(Xn.T @ Xn - np.eye(j + 1)) if check_orth else 0.0
    if err > orth_tol * (j + 1):
        raise OrthogonalityLoss(f"||X^T X - I||_F = {err:.3e}").at_step(j)
    return PartialSchur(
        Xn,
        Tn,
        partial.blocks + (1,),
        partial.dep_sq_accum + float(result.v_next @ result.v_next),
    )


__all__ = [
    "RealStepResult",
    "init_real",
    "init_null_basis",
    "build_m_real",
    "solve_real_step",
    "update_real",
    "EmptyNullSpace",
]
