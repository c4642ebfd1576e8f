import numpy as np
import pytest

from polecraft import matcore
from polecraft.bench import example41_matrices
from polecraft.errors import LinearlyDependentParts, NoViableCandidate, SubspaceTooSmall
from polecraft.model import PartialSchur, new_system
from polecraft.step_complex import (
    PairStepCandidate,
    append_pair,
    baseline_complex_step,
    build_m_complex,
    choose_and_update,
    hamiltonian_basis,
    hamiltonian_frame,
    init_complex,
    init_frame_matrices,
    jacobi_omega,
    jacobi_orthogonalize,
    munu_family,
    pair_subspace,
    solve_munu,
    solve_pair_step,
    strategy_balanced,
    strategy_jacobi,
    w_norm_sq_closed_form,
)
from polecraft.step_real import init_real


def random_symmetric(rng, n):
    G = rng.standard_normal((n, n))
    return G + G.T


def check_swap_identities(A, B, tol=1e-10):
    """Both eigen-relations for the symmetric Hamiltonian [[A, B], [B, -A]]."""
    n = A.shape[0]
    H = np.block([[A, B], [B, -A]])
    K = np.block([[B, -A], [-A, -B]])
    w, V = np.linalg.eigh(H)
    scale = max(np.linalg.norm(H), 1.0)
    c = np.sqrt(2) / 2
    R = np.array([[c, -c], [-c, -c]])
    for lam, u in zip(w, V.T):
        x, y = u[:n], u[n:]
        W = np.column_stack([np.r_[x, y], np.r_[-y, x]])
        D = np.diag([lam, -lam])
        assert np.linalg.norm(H @ W - W @ D) <= tol * scale
        assert np.linalg.norm(K @ W @ R - W @ R @ D) <= tol * scale
    theta, U = hamiltonian_basis(H)
    Th = np.diag(theta)
    Z = np.zeros((n, n))
    assert np.all(theta >= 0) and np.all(np.diff(theta) <= 0)
    assert np.linalg.norm(U.T @ U - np.eye(2 * n)) <= tol
    assert np.linalg.norm(H - U @ np.block([[Th, Z], [Z, -Th]]) @ U.T) <= tol * scale
    assert np.linalg.norm(K - U @ np.block([[Z, -Th], [-Th, Z]]) @ U.T) <= tol * scale


def check_munu_equations(phi1, phi2, munu, tol=1e-12):
    mu1, mu2, nu1, nu2 = munu
    assert abs(phi1 * mu1 * nu1 + phi2 * mu2 * nu2) <= tol
    assert abs(phi1 * (mu1**2 - nu1**2) + phi2 * (mu2**2 - nu2**2)) <= tol
    assert abs(mu1**2 + mu2**2 + nu1**2 + nu2**2 - 1) <= tol


def system_with_start(seed=0, n=6, m=3, lam=-1.0):
    rng = np.random.default_rng(seed)
    sys = new_system(rng.standard_normal((n, n)), rng.standard_normal((n, m)))
    x = init_real(sys, lam)
    return sys, PartialSchur(x[:, None], np.array([[lam]]), (1,), 0.0)


def subspace(sys, partial, alpha, beta):
    S1, S2 = pair_subspace(sys, partial, alpha, beta)
    return S1, S2, matcore.svd(S1)


# -- symmetric Hamiltonian identities ---------------------------------------


@pytest.mark.parametrize("n", [1, 2, 4])
def test_swap_identities(rng, n):
    for _ in range(5):
        check_swap_identities(random_symmetric(rng, n), random_symmetric(rng, n))


def test_hamiltonian_basis_zero_matrix():
    theta, U = hamiltonian_basis(np.zeros((4, 4)))
    assert np.allclose(theta, 0) and np.allclose(U.T @ U, np.eye(4))
    assert np.allclose(U[:, 2:], np.vstack([-U[2:, :2], U[:2, :2]]))


# -- leading pair -----------------------------------------------------------


def test_init_complex_full_input(rng):
    sys = new_system(rng.standard_normal((4, 4)), rng.standard_normal((4, 4)))
    x1, x2, T2, info = init_complex(sys, 1.0, 2.0)
    assert info["r"] == 4
    X = np.column_stack([x1, x2])
    assert np.allclose(X.T @ X, np.eye(2), atol=1e-12)
    assert np.allclose(T2, [[1, 2], [-2, 1]])


def test_init_complex_example41():
    A, B = example41_matrices(4)
    sys = new_system(A, B)
    x1, x2, T2, _ = init_complex(sys, 0.5, 10.0)
    X = np.column_stack([x1, x2])
    assert abs(x1 @ x2) < 1e-12
    assert np.allclose(np.linalg.norm(X, axis=0), 1.0, atol=1e-12)
    assert np.linalg.norm(sys.q2.T @ (A @ X - X @ T2)) <= 1e-10


def test_theta_identity(rng):
    sys = new_system(rng.standard_normal((7, 7)), rng.standard_normal((7, 4)))
    lam = complex(0.3, 1.7)
    S = matcore.null_basis(sys.q2.T @ (sys.A - lam * np.eye(7)))
    H1, H2 = init_frame_matrices(S)
    theta, U = hamiltonian_basis(H1)
    r = S.shape[1]
    L1 = np.hstack([S.real, -S.imag])
    L2 = np.hstack([S.imag, S.real])
    for _ in range(5):
        mu, nu = rng.standard_normal(r), rng.standard_normal(r)
        g = U @ np.r_[mu, nu]
        x1, x2 = L1 @ g, L2 @ g
        assert np.isclose(2 * x1 @ x2, np.sum(theta * (mu**2 - nu**2)), atol=1e-12)
        assert np.isclose(x1 @ x1 - x2 @ x2, -2 * np.sum(theta * mu * nu), atol=1e-12)
    # the default coefficients make both vanish
    x1, x2, _, info = init_complex(sys, lam.real, lam.imag)
    mu, nu = info["mu"], info["nu"]
    assert abs(np.sum(theta * (mu**2 - nu**2))) < 1e-12
    assert abs(np.sum(theta * mu * nu)) < 1e-12
    assert abs(x1 @ x2) < 1e-12 and abs(x1 @ x1 - x2 @ x2) < 1e-12


def test_init_complex_family_member(rng):
    sys = new_system(rng.standard_normal((6, 6)), rng.standard_normal((6, 3)))
    x1, x2, T2, _ = init_complex(sys, -0.2, 0.9, nu2=0.1, branch=1)
    X = np.column_stack([x1, x2])
    assert np.allclose(X.T @ X, np.eye(2), atol=1e-10)
    assert np.linalg.norm(sys.q2.T @ (sys.A @ X - X @ T2)) < 1e-10


def test_init_complex_single_direction_fallback(rng):
    sys = new_system(rng.standard_normal((5, 5)), rng.standard_normal((5, 1)))
    x1, x2, T2, info = init_complex(sys, 0.4, 1.3)
    assert info["fallback"] and info["r"] == 1
    X = np.column_stack([x1, x2])
    assert np.allclose(X.T @ X, np.eye(2), atol=1e-12)
    assert np.linalg.norm(sys.q2.T @ (sys.A @ X - X @ T2)) < 1e-10
    ev = np.linalg.eigvals(T2)
    assert np.allclose(sorted(ev, key=lambda z: z.imag), [0.4 - 1.3j, 0.4 + 1.3j])


# -- step matrix ------------------------------------------------------------


def test_build_m_complex_shapes_and_conjugation():
    sys, p = system_with_start()
    M0 = build_m_complex(sys, PartialSchur.empty(6), 0.5, 2.0)
    assert M0.shape == (3, 6)
    M = build_m_complex(sys, p, 0.5, 2.0)
    assert M.shape == (4, 7)
    assert np.array_equal(build_m_complex(sys, p, 0.5, -2.0), M.conj())


def test_null_vectors_satisfy_real_constraints():
    sys, p = system_with_start()
    alpha, beta = 0.5, 2.0
    S1, S2 = pair_subspace(sys, p, alpha, beta)
    X, T = p.X, p.T
    rng = np.random.default_rng(1)
    for _ in range(10):
        c = rng.standard_normal(S1.shape[1]) + 1j * rng.standard_normal(S1.shape[1])
        z, w = S1 @ c, S2 @ c
        x, y = z.real, z.imag
        # A [x y] = [X x y] [[Re w, Im w], [alpha, beta], [-beta, alpha]] on range(Q2)
        rhs = X @ np.column_stack([w.real, w.imag]) + np.column_stack([x, y]) @ np.array(
            [[alpha, beta], [-beta, alpha]]
        )
        assert np.linalg.norm(sys.q2.T @ (sys.A @ np.column_stack([x, y]) - rhs)) < 1e-10
        assert np.linalg.norm(X.T @ np.column_stack([x, y])) < 1e-10


# -- rotation ---------------------------------------------------------------


def test_jacobi_identity_when_orthogonal():
    z = np.array([1.0, 0.0, 0.0]) + 1j * np.array([0.0, 2.0, 0.0])
    w = np.array([3.0 + 4.0j])
    x_a, x_b, v_a, v_b = jacobi_orthogonalize(z, w)
    assert np.array_equal(x_a, z.real) and np.array_equal(x_b, z.imag)
    assert np.array_equal(v_a, w.real) and np.array_equal(v_b, w.imag)


def test_jacobi_e1_e1pe2_against_eigen_oracle():
    x = np.array([1.0, 0.0, 0.0])
    y = np.array([1.0, 1.0, 0.0])
    x_a, x_b, _, _ = jacobi_orthogonalize(x + 1j * y, np.zeros(0, complex))
    assert abs(x_a @ x_b) < 1e-15
    G = np.column_stack([x, y])
    oracle = np.sort(np.linalg.eigvalsh(G.T @ G))
    assert np.allclose(np.sort([x_a @ x_a, x_b @ x_b]), oracle, atol=1e-12)
    omega = jacobi_omega(x, y)
    assert np.isclose(x_a @ x_a, x @ x - omega, atol=1e-10)
    assert np.isclose(x_b @ x_b, y @ y + omega, atol=1e-10)


def test_jacobi_random_properties(rng):
    for _ in range(50):
        z = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        w = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        x_a, x_b, v_a, v_b = jacobi_orthogonalize(z, w)
        x, y = z.real, z.imag
        assert abs(x_a @ x_b) < 1e-12 * (x @ x + y @ y)
        assert np.isclose(x_a @ x_a + x_b @ x_b, x @ x + y @ y, rtol=1e-12)
        om = jacobi_omega(x, y)
        assert np.isclose(x_a @ x_a, x @ x - om, rtol=1e-10, atol=1e-10)
        assert np.isclose(x_b @ x_b, y @ y + om, rtol=1e-10, atol=1e-10)
        # same real rotation applied to z and w
        c, s = np.linalg.lstsq(np.column_stack([x, -y]), x_a, rcond=None)[0]
        assert np.allclose(v_a, c * w.real - s * w.imag, atol=1e-10)
        assert np.allclose(v_b, s * w.real + c * w.imag, atol=1e-10)


def test_jacobi_dependent_parts():
    x = np.array([1.0, 2.0, 3.0])
    with pytest.raises(LinearlyDependentParts):
        jacobi_orthogonalize(x + 2j * x, np.zeros(0, complex))


# -- first strategy ---------------------------------------------------------


def test_strategy_jacobi_real_direction_rejected():
    S1 = np.eye(3, 2).astype(complex)
    S2 = np.zeros((1, 2), complex)
    assert strategy_jacobi(S1, S2, matcore.svd(S1), 1.0) is None


def test_strategy_jacobi_bound_and_residual(rng):
    sys = new_system(rng.standard_normal((6, 6)), rng.standard_normal((6, 3)))
    alpha, beta = 0.2, 1.5
    S1, S2, sv = subspace(sys, PartialSchur.empty(6), alpha, beta)
    cand = strategy_jacobi(S1, S2, sv, beta)
    assert cand is not None
    s1 = sv.singular_values[0]
    na2 = min(cand.x_a @ cand.x_a, cand.x_b @ cand.x_b)
    assert cand.objective <= (1 / na2) * ((1 - s1**2) / s1**2 + beta**2) + 1e-8
    assert np.isclose(cand.recompute_objective(beta), cand.objective, rtol=1e-10)
    p = append_pair(PartialSchur.empty(6), cand, alpha, beta)
    assert np.linalg.norm(sys.q2.T @ (sys.A @ p.X - p.X @ p.T)) < 1e-10
    assert np.allclose(p.X.T @ p.X, np.eye(2), atol=1e-12)


# -- balanced strategy ------------------------------------------------------


def random_frame(rng, n=6):
    Q, _ = np.linalg.qr(rng.standard_normal((n, 2)) + 1j * rng.standard_normal((n, 2)))
    s = np.sort(rng.uniform(0.05, 1.0, 2))[::-1]
    return hamiltonian_frame(Q[:, 0], Q[:, 1], s[0], s[1])


def test_frame_identities(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((5, 2)) + 1j * rng.standard_normal((5, 2)))
    Xt, Yt = Q.real, Q.imag
    assert np.allclose(Xt.T @ Xt + Yt.T @ Yt, np.eye(2), atol=1e-12)
    assert np.allclose(Xt.T @ Yt, Yt.T @ Xt, atol=1e-12)
    f = hamiltonian_frame(Q[:, 0], Q[:, 1], 0.9, 0.4)
    assert np.allclose(f.omega.T @ f.omega, np.eye(4), atol=1e-10)
    D = np.diag([f.phi1, f.phi2, -f.phi1, -f.phi2])
    assert np.linalg.norm(f.omega @ D @ f.omega.T - f.matrix) < 1e-10
    assert 1 >= f.phi1 >= f.phi2 >= 0


def test_frame_reconstruction_many(rng):
    for _ in range(100):
        f = random_frame(rng)
        D = np.diag([f.phi1, f.phi2, -f.phi1, -f.phi2])
        assert np.linalg.norm(f.omega @ D @ f.omega.T - f.matrix) < 1e-10


def test_munu_decoupled_case():
    f = type("F", (), {"phi1": 0.5, "phi2": 0.0, "zeta12": 0.0, "zeta21": 0.0})()
    munu = solve_munu(f)
    assert abs(munu[0]) < 1e-15 and abs(munu[2]) < 1e-15
    check_munu_equations(0.5, 0.0, munu)


@pytest.mark.parametrize("branch", [-1, 1])
def test_munu_substitution(branch):
    munu = munu_family(0.8, 0.2, 0.3, branch)
    check_munu_equations(0.8, 0.2, munu)
    assert np.sign(munu[0] * munu[3]) == branch


def test_munu_default_and_degenerate():
    f = type("F", (), {"phi1": 0.0, "phi2": 0.0, "zeta12": 0.0, "zeta21": 0.0})()
    assert np.allclose(solve_munu(f), [0, np.sqrt(0.5), 0, np.sqrt(0.5)])
    f = type("F", (), {"phi1": 0.6, "phi2": 0.3, "zeta12": 1.0, "zeta21": 0.0})()
    munu = solve_munu(f)
    assert np.isclose(munu[3] ** 2, 0.6 / (2 * 0.9))
    assert munu[0] * munu[3] <= 0


def _balanced_instance(seed):
    sys, p = system_with_start(seed, n=7, m=4)
    S1, S2, sv = subspace(sys, p, 0.1, 1.1)
    return S1, S2, sv


def test_balanced_candidate_shape_and_objective():
    S1, S2, sv = _balanced_instance(2)
    cand, det = strategy_balanced(S1, S2, sv, 1.1, details=True)
    x, y = cand.x_a, cand.x_b
    assert np.isclose(np.linalg.norm(x), np.sqrt(2) / 2, atol=1e-10)
    assert np.isclose(np.linalg.norm(y), np.sqrt(2) / 2, atol=1e-10)
    assert abs(x @ y) < 1e-10
    assert np.isclose(2 * np.vdot(det.w, det.w).real, cand.objective, rtol=1e-12, atol=1e-14)
    s2 = sv.singular_values[1]
    assert cand.objective <= 2 * (1 - s2**2) / s2**2 + 1e-8
    assert np.isclose(det.gz[:2] @ det.gz[:2] + det.gz[2:] @ det.gz[2:], 1.0)


def test_w_norm_closed_form_matches():
    for seed in range(5):
        S1, S2, sv = _balanced_instance(seed)
        for branch in (-1, 1):
            cand, det = strategy_balanced(S1, S2, sv, 1.0, branch=branch, details=True)
            closed = w_norm_sq_closed_form(det.frame, branch)
            assert np.isclose(cand.objective / 2, closed, rtol=1e-10, atol=1e-12)


def test_nu2_invariance():
    S1, S2, sv = _balanced_instance(4)
    _, det = strategy_balanced(S1, S2, sv, 1.0, details=True)
    f = det.frame
    limit = np.sqrt(f.phi1 / (f.phi1 + f.phi2))
    for branch in (-1, 1):
        vals = [
            strategy_balanced(S1, S2, sv, 1.0, nu2=t * limit, branch=branch).objective
            for t in (0.1, 0.5, 0.9)
        ]
        assert np.allclose(vals, vals[0], rtol=1e-10, atol=1e-12)


def test_balanced_needs_two_directions():
    S1 = np.ones((3, 1), complex) / np.sqrt(3)
    with pytest.raises(SubspaceTooSmall):
        strategy_balanced(S1, np.zeros((0, 1), complex), matcore.svd(S1), 1.0)


def test_balanced_unit_singular_values_give_zero_w(rng):
    sys = new_system(rng.standard_normal((5, 5)), rng.standard_normal((5, 5)))
    x = init_real(sys, 1.0)
    p = PartialSchur(x[:, None], np.array([[1.0]]), (1,))
    S1, S2, sv = subspace(sys, p, 0.0, 2.0)
    assert np.allclose(sv.singular_values[:2], 1.0)
    cand = strategy_balanced(S1, S2, sv, 2.0)
    assert cand.objective < 1e-20
    assert np.linalg.norm(cand.v_a) < 1e-10 and np.linalg.norm(cand.v_b) < 1e-10


# -- comparison and update --------------------------------------------------


def _cand(strategy, objective, n=4):
    e = np.eye(n)
    return PairStepCandidate(strategy, e[:, 1], e[:, 2], np.zeros(1), np.zeros(1),
                             1.0, 1.0, objective, np.inf)


def _p(n=4):
    return PartialSchur(np.eye(n)[:, :1], np.array([[0.0]]), (1,))


def test_choose_rejected_first():
    _, chosen = choose_and_update(_p(), None, _cand("balanced", 3.0), 1.0, 2.0)
    assert chosen.strategy == "balanced"


def test_choose_tie_goes_to_balanced():
    _, chosen = choose_and_update(_p(), _cand("jacobi", 1.5), _cand("balanced", 1.5), 1.0, 2.0)
    assert chosen.strategy == "balanced"


def test_choose_cheaper_jacobi():
    _, chosen = choose_and_update(_p(), _cand("jacobi", 1.0), _cand("balanced", 1.5), 1.0, 2.0)
    assert chosen.strategy == "jacobi"


def test_choose_none_raises():
    with pytest.raises(NoViableCandidate) as info:
        choose_and_update(_p(), None, None, 1.0, 2.0)
    assert info.value.step == 1


def test_pair_step_block_eigenvalues():
    sys, p = system_with_start(3, n=6, m=2)
    out = solve_pair_step(sys, p, -0.5, 3.0)
    T = out.partial.T
    ev = np.linalg.eigvals(T[1:3, 1:3])
    assert np.allclose(sorted(ev, key=lambda z: z.imag), [-0.5 - 3j, -0.5 + 3j], atol=1e-12)
    X = out.partial.X
    assert np.allclose(X.T @ X, np.eye(3), atol=1e-12)
    assert np.linalg.norm(sys.q2.T @ (sys.A @ X - X @ T)) < 1e-10
    assert np.isclose(out.partial.dep_sq_accum, out.chosen.objective)


def test_baseline_step_not_orthogonal():
    sys, p = system_with_start(3, n=6, m=2)
    new, cand, r = baseline_complex_step(sys, p, -0.5, 3.0)
    X = new.X
    assert np.linalg.norm(X.T @ X - np.eye(3)) > 1e-6
    assert np.isclose(np.sum(X[:, 1:] ** 2), 2.0)
    assert np.allclose(new.T[1:, 1:], [[-0.5, 3.0], [-3.0, -0.5]])
    assert np.linalg.norm(sys.q2.T @ (sys.A @ X - X @ new.T)) < 1e-10
