"""Value types carried between assignment steps."""

from dataclasses import dataclass, field

import numpy as np

from . import matcore
from .errors import NotControllable, RankDeficientB, RankDeficientInput, UnmatchedConjugate

CONJUGATE_RTOL = 1e-10


@dataclass(frozen=True)
class Real:
    lam: float

    @property
    def size(self):
        return 1

    def values(self):
        return [complex(self.lam, 0.0)]


@dataclass(frozen=True)
class Pair:
    """Conjugate pair ``alpha +/- i beta`` with ``beta > 0``."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"Pair needs beta > 0, got {self.beta}")

    @property
    def size(self):
        return 2

    def values(self):
        return [complex(self.alpha, self.beta), complex(self.alpha, -self.beta)]


@dataclass(frozen=True)
class PoleSpec:
    """Self-conjugate pole list in assignment order."""

    items: tuple

    @property
    def n(self):
        return sum(item.size for item in self.items)

    def expand(self):
        """All poles as a complex array, each pair as ``(a+ib, a-ib)``."""
        out = []
        for item in self.items:
            out.extend(item.values())
        return np.array(out, dtype=complex)

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)


def canonicalize_poles(raw, rtol=CONJUGATE_RTOL):
    """Group a flat list of complex poles into real poles and conjugate pairs.

    Real poles keep their order; a complex value is paired with the first
    later unused value equal to its conjugate within ``rtol`` (relative to
    its modulus). Items appear in order of their first occurrence.

    Raises:
        UnmatchedConjugate: if a non-real pole has no partner.
    """
    vals = [complex(v) for v in np.ravel(np.asarray(raw, dtype=complex))]
    if not vals:
        raise ValueError("pole list is empty")
    for v in vals:
        if not (np.isfinite(v.real) and np.isfinite(v.imag)):
            raise ValueError(f"non-finite pole {v!r}")
    used = [False] * len(vals)
    items = []
    for i, v in enumerate(vals):
        if used[i]:
            continue
        used[i] = True
        scale = abs(v)
        if abs(v.imag) <= rtol * scale or v.imag == 0.0:
            items.append(Real(v.real))
            continue
        partner = None
        for k in range(i + 1, len(vals)):
            c = vals[k]
            if used[k]:
                continue
            if abs(c.real - v.real) <= rtol * scale and abs(c.imag + v.imag) <= rtol * scale:
                partner = k
                break
        if partner is None:
            raise UnmatchedConjugate(v)
        used[partner] = True
        c = vals[partner]
        items.append(Pair(0.5 * (v.real + c.real), 0.5 * (abs(v.imag) + abs(c.imag))))
    return PoleSpec(tuple(items))


def controllability_matrix(A, B):
    n = A.shape[0]
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def controllability_rank(A, B, tol=1e-10):
    """Rank of ``[B, AB, ..., A^(n-1) B]`` via block Arnoldi.

    Each new Krylov block is orthogonalized (twice) against the basis built
    so far and its surviving directions are kept, so the rank decision is
    not spoiled by the geometric growth of ``A^k B``.
    """
    n = A.shape[0]
    nrm = np.linalg.norm(A, 2)
    As = A / nrm if nrm > 0 else A
    U, s, _ = np.linalg.svd(B, full_matrices=False)
    basis = U[:, s > tol * s[0]] if s.size and s[0] > 0 else np.zeros((n, 0))
    newest = basis
    while newest.shape[1] and basis.shape[1] < n:
        W = As @ newest
        for _ in range(2):
            W = W - basis @ (basis.T @ W)
        U, s, _ = np.linalg.svd(W, full_matrices=False)
        keep = s > tol
        newest = U[:, keep]
        basis = np.hstack([basis, newest])
    return basis.shape[1]


@dataclass(frozen=True)
class SystemPair:
    A: np.ndarray
    B: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    r_factor: np.ndarray
    ctrb_rank: int

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def controllable(self):
        return self.ctrb_rank == self.n


def new_system(A, B, check_controllable=True):
    """Validate ``(A, B)`` and cache the QR factors of ``B``.

    Raises:
        ValueError: on inconsistent shapes.
        RankDeficientB: if ``B`` lacks full column rank.
        NotControllable: if the controllability matrix is rank deficient
            (only when ``check_controllable``).
    """
    A = np.array(A, dtype=float)
    B = np.array(B, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"A must be square, got shape {A.shape}")
    if B.ndim != 2 or B.shape[0] != A.shape[0]:
        raise ValueError(f"B must have {A.shape[0]} rows, got shape {B.shape}")
    try:
        q1, q2, r = matcore.qr_thin(B)
    except RankDeficientInput as exc:
        raise RankDeficientB(str(exc)) from exc
    rank = controllability_rank(A, q1)
    if check_controllable and rank < A.shape[0]:
        raise NotControllable(f"controllability matrix has rank {rank} < n = {A.shape[0]}")
    for arr in (A, B, q1, q2, r):
        arr.setflags(write=False)
    return SystemPair(A, B, q1, q2, r, rank)


@dataclass(frozen=True)
class PartialSchur:
    """Columns assigned so far: ``Q2^T (A X - X T) = 0`` and ``X^T X = I``.

    ``blocks`` lists the diagonal block sizes of ``T`` in order.
    """

    X: np.ndarray
    T: np.ndarray
    blocks: tuple = ()
    dep_sq_accum: float = 0.0

    @property
    def j(self):
        return self.X.shape[1]

    @classmethod
    def empty(cls, n):
        return cls(np.zeros((n, 0)), np.zeros((0, 0)))


@dataclass(frozen=True)
class StepRecord:
    """Diagnostics for one assignment step."""

    index: int
    kind: str
    strategy: str
    r: int
    dep1: float = float("nan")
    dep2: float = float("nan")
    increment: float = 0.0
    jacobi_bound: float = float("nan")
    balanced_bound: float = float("nan")
    orthogonal: bool = True

    def as_dict(self):
        return {
            "index": self.index,
            "kind": self.kind,
            "strategy": self.strategy,
            "r": self.r,
            "dep1": self.dep1,
            "dep2": self.dep2,
            "increment": self.increment,
            "jacobi_bound": self.jacobi_bound,
            "balanced_bound": self.balanced_bound,
            "orthogonal": self.orthogonal,
        }


@dataclass(frozen=True)
class FeedbackSolution:
    F: np.ndarray
    X: np.ndarray
    T: np.ndarray
    blocks: tuple
    step_log: tuple = field(default_factory=tuple)
    orthogonal: bool = True

    @property
    def closed_loop(self):
        if self.orthogonal:
            return self.X @ self.T @ self.X.T
        return self.X @ np.linalg.solve(self.X.T, self.T.T).T


@dataclass(frozen=True)
class RobustnessReport:
    dep: float
    cond_x: float
    precs: int
    schur_residual: float
    orth_residual: float
    constraint_residual: float = 0.0
    dep_identity_residual: float = 0.0
    passed: bool = True
    failures: tuple = ()

    def as_dict(self):
        return {
            "dep": self.dep,
            "cond_x": self.cond_x,
            "precs": self.precs,
            "schur_residual": self.schur_residual,
            "orth_residual": self.orth_residual,
            "constraint_residual": self.constraint_residual,
            "dep_identity_residual": self.dep_identity_residual,
            "passed": self.passed,
            "failures": list(self.failures),
        }
