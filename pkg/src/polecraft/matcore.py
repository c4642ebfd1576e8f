"""Dense factorization and subspace kernels.

Thin wrappers over LAPACK (through numpy) that pin down ordering and sign
conventions so that results are reproducible, plus the orthonormal
null-space routine every assignment step relies on.
"""

from dataclasses import dataclass

import numpy as np

from .errors import EmptyNullSpace, RankDeficientInput

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SvdResult:
    """Economy SVD ``M = left @ diag(singular_values) @ right.conj().T``."""

    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray

    def reconstruct(self):
        return (self.left * self.singular_values) @ self.right.conj().T


def _phase_of_first_nonzero(vectors, rtol=1e-12):
    """Unit scalars that make each column's first significant entry real >= 0."""
    vectors = np.asarray(vectors)
    k = vectors.shape[1]
    phases = np.ones(k, dtype=vectors.dtype)
    for i in range(k):
        col = vectors[:, i]
        scale = np.max(np.abs(col)) if col.size else 0.0
        if scale == 0.0:
            continue
        idx = np.flatnonzero(np.abs(col) > rtol * scale)[0]
        entry = col[idx]
        phases[i] = np.conj(entry) / abs(entry)
    return phases


def _check_finite(M, name="matrix"):
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")


def qr_thin(B):
    """QR factorization of a full-column-rank ``n x m`` matrix.

    Returns ``(Q1, Q2, R)`` where ``Q1`` (n x m) and ``Q2`` (n x (n-m))
    together form an orthogonal matrix and ``B = Q1 @ R``. The diagonal of
    ``R`` is made nonnegative.

    Raises:
        RankDeficientInput: if ``B`` is not of full column rank.
    """
    B = np.asarray(B, dtype=float)
    if B.ndim != 2:
        raise ValueError("B must be two-dimensional")
    _check_finite(B, "B")
    n, m = B.shape
    if m > n or m == 0:
        raise RankDeficientInput(f"B of shape {B.shape} cannot have full column rank")
    Q, R = np.linalg.qr(B, mode="complete")
    R = R[:m]
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    Q[:, :m] *= signs
    R = signs[:, None] * R
    s = np.linalg.svd(B, compute_uv=False)
    if s[-1] <= max(n, m) * EPS * s[0]:
        raise RankDeficientInput(
            f"B is numerically rank deficient (sigma_min/sigma_max = {s[-1] / s[0]:.3e})"
        )
    return Q[:, :m], Q[:, m:], R


def svd(M):
    """Economy SVD with nonincreasing singular values.

    Each left singular vector is scaled so its first significant entry is
    real and nonnegative; the right vectors absorb the matching phase.
    """
    M = np.asarray(M)
    _check_finite(M)
    U, s, Vh = np.linalg.svd(M, full_matrices=False)
    V = Vh.conj().T
    if U.size:
        ph = _phase_of_first_nonzero(U)
        U = U * ph
        V = V * ph
    return SvdResult(U, s, V)


def sym_eig(H):
    """Eigen-decomposition of a symmetric matrix, eigenvalues nonincreasing.

    ``H`` is symmetrized before factorization. Eigenvectors follow the
    first-nonzero-entry-nonnegative sign convention.
    """
    H = np.asarray(H, dtype=float)
    _check_finite(H)
    H = 0.5 * (H + H.T)
    w, V = np.linalg.eigh(H)
    w = w[::-1]
    V = V[:, ::-1]
    if V.size:
        V = V * _phase_of_first_nonzero(V)
    return w, V


def default_rank_tol(shape, smax):
    return max(shape) * EPS * smax


def null_basis(M, tol=None):
    """Orthonormal basis of the null space of ``M`` (real or complex).

    Args:
        M: ``p x q`` matrix. ``p`` may be zero, in which case the whole
            space is returned.
        tol: relative rank tolerance; singular values at or below
            ``tol * sigma_max`` count as zero. Defaults to
            ``max(p, q) * eps``.

    Returns:
        ``q x r`` array with orthonormal columns, ``r`` = nullity.

    Raises:
        EmptyNullSpace: if ``M`` has full column rank.
    """
    M = np.asarray(M)
    if M.ndim != 2:
        raise ValueError("M must be two-dimensional")
    _check_finite(M)
    p, q = M.shape
    if p == 0:
        return np.eye(q, dtype=M.dtype)
    _, s, Vh = np.linalg.svd(M, full_matrices=True)
    smax = s[0] if s.size else 0.0
    if smax == 0.0:
        return np.eye(q, dtype=M.dtype)
    thresh = (max(p, q) * EPS if tol is None else tol) * smax
    rank = int(np.count_nonzero(s > thresh))
    if rank >= q:
        raise EmptyNullSpace(f"null space of a {p}x{q} matrix is trivial")
    S = Vh[rank:].conj().T
    return S * _phase_of_first_nonzero(S)


def numerical_rank(M, tol=None):
    M = np.asarray(M)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0
    thresh = (max(M.shape) * EPS if tol is None else tol) * s[0]
    return int(np.count_nonzero(s > thresh))
