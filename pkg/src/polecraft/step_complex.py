"""Assignment of a conjugate pole pair ``alpha +/- i beta``.

Admissible pairs of new columns come from null vectors ``(z, w)`` of the
complex step matrix; ``x_{j+1} + i x_{j+2}`` is ``z`` up to a real
rotation and a column scaling. Two cheap strategies produce an orthogonal
pair:

* ``jacobi``: take the direction of the largest singular value of ``S1``
  and rotate its real and imaginary parts until they are orthogonal. The
  columns end up with unequal norms, which costs
  ``beta^2 (delta - 1/delta)^2`` in the departure from normality.
* ``balanced``: combine the two leading directions so that the real and
  imaginary parts are orthogonal *and* of equal length (``delta = 1``).
  The combination coefficients come from the spectral decomposition of a
  4x4 symmetric Hamiltonian matrix.

Both are evaluated and the cheaper one is kept.
"""

from dataclasses import dataclass

import numpy as np

from . import matcore
from .errors import (
    EmptyNullSpace,
    InfeasibleBalancing,
    LinearlyDependentParts,
    NoViableCandidate,
    OrthogonalityLoss,
    SubspaceTooSmall,
)
from .model import PartialSchur

SMALL_COLUMN_FLOOR = 1e-6
DEPENDENCE_RTOL = 1e-8
DEGENERACY_FLOOR = 1e-12
SIGMA_FLOOR = 1e-14


@dataclass(frozen=True)
class PairStepCandidate:
    """Orthogonal (unnormalized) columns and the objective they achieve.

    ``delta1 = 1/||x_a||``, ``delta2 = 1/||x_b||``; after scaling the new
    columns of ``X`` are ``delta1 x_a`` and ``delta2 x_b``.
    """

    strategy: str
    x_a: np.ndarray
    x_b: np.ndarray
    v_a: np.ndarray
    v_b: np.ndarray
    delta1: float
    delta2: float
    objective: float
    bound: float

    @property
    def delta(self):
        return self.delta2 / self.delta1

    def recompute_objective(self, beta):
        d = self.delta
        return float(
            np.sum((self.delta1 * self.v_a) ** 2)
            + np.sum((self.delta2 * self.v_b) ** 2)
            + beta**2 * (d - 1.0 / d) ** 2
        )


@dataclass(frozen=True)
class HamiltonianFrame:
    """Spectral data of the 4x4 matrix ``I - 2 [Y X]^T [Y X]``.

    ``omega`` has columns ``[p1; q1], [p2; q2], [-q1; p1], [-q2; p2]`` and
    ``omega @ diag(phi1, phi2, -phi1, -phi2) @ omega.T`` reproduces
    ``matrix``.
    """

    omega: np.ndarray
    phi1: float
    phi2: float
    xi1: float
    xi2: float
    eta1: float
    eta2: float
    zeta12: float
    zeta21: float
    matrix: np.ndarray

    @property
    def p1(self):
        return self.omega[:2, 0]

    @property
    def q1(self):
        return self.omega[2:, 0]

    @property
    def p2(self):
        return self.omega[:2, 1]

    @property
    def q2(self):
        return self.omega[2:, 1]


def _j_swap(u):
    """``[[0, -I], [I, 0]] @ u`` for a vector of even length."""
    k = u.shape[0] // 2
    return np.concatenate([-u[k:], u[:k]])


def hamiltonian_basis(H):
    """Orthogonal ``U`` with ``H = U diag(theta, -theta) U^T``.

    ``H`` must be a symmetric Hamiltonian matrix ``[[P, Q], [Q, -P]]``.
    Columns ``k`` and ``r + k`` of ``U`` are related by the swap
    ``u_{r+k} = [[0, -I], [I, 0]] u_k``; ``theta`` is nonincreasing and
    nonnegative. Eigenvectors are taken in order of decreasing eigenvalue
    and deflated against the span already built, which keeps the pairing
    intact on a multiple zero eigenvalue.
    """
    H = np.asarray(H, dtype=float)
    k = H.shape[0] // 2
    evals, evecs = matcore.sym_eig(H)
    cols = []
    thetas = []
    for i in range(evals.shape[0]):
        if len(cols) == k:
            break
        u = evecs[:, i].copy()
        if cols:
            Ub = np.column_stack(cols + [_j_swap(c) for c in cols])
            for _ in range(2):
                u -= Ub @ (Ub.T @ u)
        nrm = np.linalg.norm(u)
        if nrm < 0.5:
            continue
        u /= nrm
        cols.append(u)
        thetas.append(max(float(u @ H @ u), 0.0))
    U = np.column_stack(cols + [_j_swap(c) for c in cols])
    return np.array(thetas), U


def init_frame_matrices(S):
    """The two symmetric Hamiltonian matrices of a leading pair.

    For ``x1 = [SR, -SI] g`` and ``x2 = [SI, SR] g`` the first matrix gives
    ``x1^T x2 + x2^T x1`` and the second ``x1^T x1 - x2^T x2`` as
    quadratic forms in ``g``.
    """
    SR, SI = S.real, S.imag
    P = SR.T @ SI + SI.T @ SR
    Q = SR.T @ SR - SI.T @ SI
    H1 = np.block([[P, Q], [Q, -P]])
    H2 = np.block([[Q, -P], [-P, -Q]])
    return H1, H2


def munu_family(phi1, phi2, nu2, branch):
    """One member of the solution family of the balancing equations.

    ``branch`` is ``-1`` for ``mu1 nu2 <= 0`` and ``+1`` for
    ``mu1 nu2 > 0``. ``mu2`` is taken nonnegative.
    """
    tot = phi1 + phi2
    ratio = np.sqrt(phi2 / phi1)
    mu2 = np.sqrt(max(phi1 / tot - nu2**2, 0.0))
    nu1_mag = np.sqrt(max(phi2 / tot - (phi2 / phi1) * nu2**2, 0.0))
    if branch < 0:
        mu1 = -ratio * nu2
        nu1 = nu1_mag
    else:
        mu1 = ratio * nu2
        nu1 = -nu1_mag
    return np.array([mu1, mu2, nu1, nu2])


def init_complex(sys, alpha, beta, nu2=None, branch=None):
    """First two Schur vectors for a leading conjugate pair.

    Returns ``(x1, x2, T2, info)`` where ``T2`` is the 2x2 diagonal block
    and ``info`` carries ``theta``, ``mu``/``nu`` and the null dimension.
    By default ``x1, x2`` are orthonormal and ``T2 = [[a, b], [-b, a]]``.
    ``nu2``/``branch`` select another member of the admissible family
    (used by the multi-start driver).

    Raises:
        EmptyNullSpace: no admissible direction exists.
    """
    n = sys.n
    lam = complex(alpha, beta)
    S = matcore.null_basis(sys.q2.T @ (sys.A - lam * np.eye(n)))
    r = S.shape[1]
    H1, _ = init_frame_matrices(S)
    theta, U = hamiltonian_basis(H1)
    tol = DEGENERACY_FLOOR
    SR, SI = S.real, S.imag

    if r == 1 and theta[0] > tol:
        # No second direction to balance with: orthogonalize Re/Im of the
        # single null vector and accept delta != 1.
        z = S[:, 0]
        x_a, x_b, _, _ = jacobi_orthogonalize(z, np.zeros(0, dtype=complex))
        d1, d2 = 1.0 / np.linalg.norm(x_a), 1.0 / np.linalg.norm(x_b)
        d = d2 / d1
        T2 = np.array([[alpha, d * beta], [-beta / d, alpha]])
        info = {"r": r, "theta": theta, "fallback": True}
        return d1 * x_a, d2 * x_b, T2, info

    mu = np.zeros(r)
    nu = np.zeros(r)
    if theta[0] <= tol:
        # every combination is balanced already
        mu[0] = nu[0] = 1.0
        if nu2 is not None:
            mu[0] = np.sqrt(max(1.0 - nu2**2, 0.0))
            nu[0] = nu2
    else:
        t1, t2 = theta[0], theta[1]
        if nu2 is None and branch is None:
            ratio = np.sqrt(t2 / t1)
            mu[:2] = [ratio, 1.0]
            nu[:2] = [-ratio, 1.0]
        else:
            tot = t1 + t2
            if nu2 is None:
                nu2 = np.sqrt(t1 / (2 * tot))
            sol = munu_family(t1, t2, nu2, -1 if branch is None else branch)
            mu[:2] = sol[:2]
            nu[:2] = sol[2:]
    g = U @ np.concatenate([mu, nu])
    x1 = np.hstack([SR, -SI]) @ g
    scale = np.linalg.norm(x1)
    if scale <= DEGENERACY_FLOOR:
        raise InfeasibleBalancing("initial pair collapsed to zero")
    g = g / scale
    mu, nu = mu / scale, nu / scale
    x1 = np.hstack([SR, -SI]) @ g
    x2 = np.hstack([SI, SR]) @ g
    T2 = np.array([[alpha, beta], [-beta, alpha]])
    info = {"r": r, "theta": theta, "mu": mu, "nu": nu, "U": U, "g": g, "fallback": False}
    return x1, x2, T2, info


def build_m_complex(sys, partial, alpha, beta):
    n = sys.n
    X = partial.X
    j = X.shape[1]
    lam = complex(alpha, beta)
    top = np.hstack([sys.q2.T @ (sys.A - lam * np.eye(n)), -(sys.q2.T @ X).astype(complex)])
    bottom = np.hstack([X.T.astype(complex), np.zeros((j, j), dtype=complex)])
    return np.vstack([top, bottom])


def jacobi_orthogonalize(z, w):
    """Rotate ``[Re z, Im z]`` (and ``[Re w, Im w]``) to orthogonal columns.

    Returns ``(x_a, x_b, v_a, v_b)``.

    Raises:
        LinearlyDependentParts: ``Re z`` and ``Im z`` are (numerically)
            parallel.
    """
    x, y = z.real, z.imag
    sv = np.linalg.svd(np.column_stack([x, y]), compute_uv=False)
    if sv[0] == 0.0 or sv[1] <= DEPENDENCE_RTOL * sv[0]:
        raise LinearlyDependentParts(
            "real and imaginary parts are linearly dependent"
            f" (sigma ratio {sv[1] / sv[0] if sv[0] else 0.0:.3e})"
        )
    rho1, rho2, gamma = x @ x, y @ y, x @ y
    if gamma == 0.0:
        c, s = 1.0, 0.0
    else:
        tau = (rho2 - rho1) / (2.0 * gamma)
        if tau >= 0:
            t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
        else:
            t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
        c = 1.0 / np.sqrt(1.0 + t * t)
        s = t * c
    x_a = c * x - s * y
    x_b = s * x + c * y
    v_a = c * w.real - s * w.imag
    v_b = s * w.real + c * w.imag
    return x_a, x_b, v_a, v_b


def jacobi_omega(x, y):
    """Closed-form shift ``omega`` with ``||x_a||^2 = ||x||^2 - omega``."""
    rho1, rho2, gamma = x @ x, y @ y, x @ y
    diff = rho2 - rho1
    root = np.sqrt(4 * gamma**2 + diff**2)
    if np.sqrt(rho1) < np.sqrt(rho2):
        return 2 * gamma**2 / (diff + root)
    denom = diff - root
    return 0.0 if denom == 0.0 else 2 * gamma**2 / denom


def strategy_jacobi(S1, S2, sv, beta):
    """Candidate from the leading singular direction of ``S1``.

    Returns ``None`` (the ``dep1 = inf`` case) when the real and imaginary
    parts of ``u1`` are dependent or a rotated column is too short.
    """
    sigma1 = sv.singular_values[0]
    if sigma1 <= SIGMA_FLOOR:
        return None
    b = sv.right[:, 0] / sigma1
    z = S1 @ b
    w = S2 @ b
    try:
        x_a, x_b, v_a, v_b = jacobi_orthogonalize(z, w)
    except LinearlyDependentParts:
        return None
    na, nb = np.linalg.norm(x_a), np.linalg.norm(x_b)
    if min(na, nb) < SMALL_COLUMN_FLOOR * np.linalg.norm(z):
        return None
    d1, d2 = 1.0 / na, 1.0 / nb
    d = d2 / d1
    obj = float(
        np.sum((d1 * v_a) ** 2) + np.sum((d2 * v_b) ** 2) + beta**2 * (d - 1.0 / d) ** 2
    )
    bound = (1.0 / min(na, nb) ** 2) * ((1.0 - sigma1**2) / sigma1**2 + beta**2)
    return PairStepCandidate("jacobi", x_a, x_b, v_a, v_b, d1, d2, obj, float(bound))


def _xi_weights(sigma1, sigma2):
    return np.array([(1.0 - sigma1**2) / sigma1**2, (1.0 - sigma2**2) / sigma2**2])


def hamiltonian_frame(u1, u2, sigma1, sigma2):
    """Spectral frame for balancing ``z = [u1 u2] (gamma + i zeta)``.

    ``u1, u2`` must be orthonormal complex vectors.
    """
    Xt = np.column_stack([u1.real, u2.real])
    Yt = np.column_stack([u1.imag, u2.imag])
    YX = np.hstack([Yt, Xt])
    _, s, Vh = np.linalg.svd(YX, full_matrices=True)
    s = np.concatenate([s, np.zeros(4 - s.shape[0])])
    order = np.argsort(s, kind="stable")
    H = np.eye(4) - 2.0 * YX.T @ YX
    H = 0.5 * (H + H.T)
    cols = []
    for idx in order:
        if len(cols) == 2:
            break
        u = Vh[idx].copy()
        if cols:
            Ub = np.column_stack(cols + [_j_swap(c) for c in cols])
            for _ in range(2):
                u -= Ub @ (Ub.T @ u)
        nrm = np.linalg.norm(u)
        if nrm < 0.5:
            continue
        cols.append(u / nrm)
    omega = np.column_stack(cols + [_j_swap(c) for c in cols])
    # Rayleigh quotients equal 1 - 2 s^2 for the two smallest singular
    # values s; they stay correct after deflation of a tie
    phi1 = max(float(cols[0] @ H @ cols[0]), 0.0)
    phi2 = max(float(cols[1] @ H @ cols[1]), 0.0)
    if phi2 > phi1:
        omega = omega[:, [1, 0, 3, 2]]
        phi1, phi2 = phi2, phi1
    Xi = np.diag(_xi_weights(sigma1, sigma2))
    p1, q1 = omega[:2, 0], omega[2:, 0]
    p2, q2 = omega[:2, 1], omega[2:, 1]
    return HamiltonianFrame(
        omega=omega,
        phi1=phi1,
        phi2=phi2,
        xi1=float(p1 @ Xi @ p1),
        xi2=float(p2 @ Xi @ p2),
        eta1=float(q1 @ Xi @ q1),
        eta2=float(q2 @ Xi @ q2),
        zeta12=float(q1 @ Xi @ p2),
        zeta21=float(q2 @ Xi @ p1),
        matrix=H,
    )


def choose_branch(frame):
    """Sign pattern of ``mu1 nu2`` that gives the smaller ``||w||``."""
    return -1 if frame.zeta21 <= frame.zeta12 else 1


def solve_munu(frame, nu2=None, branch=None):
    """Coefficients ``(mu1, mu2, nu1, nu2)`` balancing the new pair.

    They satisfy ``phi1 mu1 nu1 + phi2 mu2 nu2 = 0``,
    ``phi1 (mu1^2 - nu1^2) + phi2 (mu2^2 - nu2^2) = 0`` and unit norm.
    ``nu2`` defaults to ``sqrt(phi1 / (2 (phi1 + phi2)))``; ``branch``
    defaults to the sign rule of :func:`choose_branch`.
    """
    phi1, phi2 = frame.phi1, frame.phi2
    if phi1 <= DEGENERACY_FLOOR:
        return np.array([0.0, 1.0 / np.sqrt(2.0), 0.0, 1.0 / np.sqrt(2.0)])
    if nu2 is None:
        nu2 = np.sqrt(phi1 / (2.0 * (phi1 + phi2)))
    if branch is None:
        branch = choose_branch(frame)
    return munu_family(phi1, phi2, nu2, branch)


def w_norm_sq_closed_form(frame, branch):
    """``||w||^2`` of the balanced pair as a function of the sign branch."""
    phi1, phi2 = frame.phi1, frame.phi2
    tot = phi1 + phi2
    base = phi2 / tot * (frame.xi1 + frame.eta1) + phi1 / tot * (frame.xi2 + frame.eta2)
    cross = 2.0 * np.sqrt(phi2 / phi1) * phi1 / tot
    if branch < 0:
        return base + cross * (frame.zeta21 - frame.zeta12)
    return base + cross * (frame.zeta12 - frame.zeta21)


@dataclass(frozen=True)
class BalancedDetails:
    frame: HamiltonianFrame
    munu: np.ndarray
    gz: np.ndarray
    z: np.ndarray
    w: np.ndarray


def strategy_balanced(S1, S2, sv, beta, nu2=None, branch=None, details=False):
    """Candidate from the two leading singular directions with ``delta = 1``.

    Raises:
        SubspaceTooSmall: fewer than two null directions.
    """
    s = sv.singular_values
    if s.shape[0] < 2:
        raise SubspaceTooSmall("balanced strategy needs r >= 2")
    sigma1, sigma2 = s[0], s[1]
    if sigma2 <= SIGMA_FLOOR:
        return None
    b1 = sv.right[:, 0] / sigma1
    b2 = sv.right[:, 1] / sigma2
    z1, z2 = S1 @ b1, S1 @ b2
    w1, w2 = S2 @ b1, S2 @ b2
    frame = hamiltonian_frame(z1, z2, sigma1, sigma2)
    munu = solve_munu(frame, nu2=nu2, branch=branch)
    gz = frame.omega @ munu
    coef = gz[:2] + 1j * gz[2:]
    z = np.column_stack([z1, z2]) @ coef
    w = np.column_stack([w1, w2]) @ coef
    xi = _xi_weights(sigma1, sigma2)
    dep2 = 2.0 * float((gz[0] ** 2 + gz[2] ** 2) * xi[0] + (gz[1] ** 2 + gz[3] ** 2) * xi[1])
    nx, ny = np.linalg.norm(z.real), np.linalg.norm(z.imag)
    cand = PairStepCandidate(
        "balanced",
        z.real,
        z.imag,
        w.real,
        w.imag,
        1.0 / nx,
        1.0 / ny,
        dep2,
        float(2.0 * xi[1]),
    )
    if details:
        return cand, BalancedDetails(frame, munu, gz, z, w)
    return cand


def append_pair(partial, cand, alpha, beta, orth_tol=1e-8, orthogonal=True):
    """Append the scaled pair to ``(X, T)``.

    New columns are ``delta1 x_a, delta2 x_b``; the diagonal block is
    ``[[alpha, delta beta], [-beta/delta, alpha]]``.
    """
    X, T = partial.X, partial.T
    j = partial.j
    d1, d2 = cand.delta1, cand.delta2
    d = d2 / d1
    Xn = np.hstack([X, (d1 * cand.x_a)[:, None], (d2 * cand.x_b)[:, None]])
    Tn = np.zeros((j + 2, j + 2))
    Tn[:j, :j] = T
    Tn[:j, j] = d1 * cand.v_a
    Tn[:j, j + 1] = d2 * cand.v_b
    Tn[j:, j:] = [[alpha, d * beta], [-beta / d, alpha]]
    if orthogonal:
        err = np.linalg.norm(Xn.T @ Xn - np.eye(j + 2))
        if err > orth_tol * (j + 2):
            raise OrthogonalityLoss(f"||X^T X - I||_F = {err:.3e}").at_step(j)
    return PartialSchur(Xn, Tn, partial.blocks + (2,), partial.dep_sq_accum + cand.objective)


def choose_and_update(partial, cand1, cand2, alpha, beta, orth_tol=1e-8):
    """Keep the cheaper candidate; ties go to the balanced one.

    Raises:
        NoViableCandidate: both candidates are missing.
    """
    dep1 = cand1.objective if cand1 is not None else np.inf
    dep2 = cand2.objective if cand2 is not None else np.inf
    if not (np.isfinite(dep1) or np.isfinite(dep2)):
        raise NoViableCandidate("both pair strategies were rejected").at_step(partial.j)
    chosen = cand1 if dep1 < dep2 else cand2
    return append_pair(partial, chosen, alpha, beta, orth_tol), chosen


@dataclass(frozen=True)
class PairStepOutcome:
    partial: PartialSchur
    chosen: PairStepCandidate
    jacobi: PairStepCandidate
    balanced: PairStepCandidate
    r: int
    sigma: np.ndarray


def pair_subspace(sys, partial, alpha, beta, rank_tol=None):
    n = sys.n
    M = build_m_complex(sys, partial, alpha, beta)
    S = matcore.null_basis(M, tol=rank_tol)
    return S[:n], S[n:]


def solve_pair_step(sys, partial, alpha, beta, rank_tol=None, orth_tol=1e-8):
    """Run both strategies and append the better pair."""
    try:
        S1, S2 = pair_subspace(sys, partial, alpha, beta, rank_tol)
    except EmptyNullSpace as exc:
        raise exc.at_step(partial.j)
    sv = matcore.svd(S1)
    r = S1.shape[1]
    cand1 = strategy_jacobi(S1, S2, sv, beta)
    cand2 = strategy_balanced(S1, S2, sv, beta) if r >= 2 else None
    new, chosen = choose_and_update(partial, cand1, cand2, alpha, beta, orth_tol)
    return PairStepOutcome(new, chosen, cand1, cand2, r, sv.singular_values)


def baseline_complex_step(sys, partial, alpha, beta, rank_tol=None):
    """Pair step with ``delta = 1`` and no orthogonalization of the pair.

    Uses ``z = u1`` directly; both columns share the scale ``sqrt(2)`` so
    that their squared norms average to one. ``X`` generally stops being
    orthogonal.
    """
    try:
        S1, S2 = pair_subspace(sys, partial, alpha, beta, rank_tol)
    except EmptyNullSpace as exc:
        raise exc.at_step(partial.j)
    sv = matcore.svd(S1)
    sigma1 = sv.singular_values[0]
    b = sv.right[:, 0] / sigma1
    z, w = S1 @ b, S2 @ b
    k = np.sqrt(2.0)
    cand = PairStepCandidate(
        "baseline", z.real, z.imag, w.real, w.imag, k, k, 2.0 * float(np.vdot(w, w).real), np.nan
    )
    return append_pair(partial, cand, alpha, beta, orthogonal=False), cand, S1.shape[1]
