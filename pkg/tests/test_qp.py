"""Active-set QP solver against a brute-force KKT enumeration oracle."""

import itertools

import numpy as np
import pytest

from iqrfv.qp import (
    LOWER,
    UPPER,
    QPError,
    QPProblem,
    QPSolution,
    kkt_residual,
    solve_qp,
    solve_qp_batch,
)


def brute_force_qp(G, c, A, b, B, tol=1e-8):
    """Enumerate all signed active subsets, solve the equality-constrained
    systems, and keep the feasible KKT point with nonnegative multipliers."""
    n, m = len(c), len(b)
    best = None
    for k in range(min(n, m) + 1):
        for rows in itertools.combinations(range(m), k):
            for sides in itertools.product((LOWER, UPPER), repeat=k):
                Aw = A[list(rows)]
                targets = np.array([b[r] if s == LOWER else B[r]
                                    for r, s in zip(rows, sides)])
                kkt = np.block([[G, Aw.T], [Aw, np.zeros((k, k))]])
                rhs = np.concatenate([-c, targets])
                try:
                    sol = np.linalg.solve(kkt, rhs)
                except np.linalg.LinAlgError:
                    continue
                if not np.all(np.isfinite(sol)) or np.max(np.abs(kkt @ sol - rhs)) > 1e-8:
                    continue
                # block system solves G phi + Aw^T mu_kkt = -c, so the
                # stationarity multipliers are -mu_kkt
                phi, mu = sol[:n], -sol[n:]
                lam = np.array([m_ if s == LOWER else -m_
                                for m_, s in zip(mu, sides)])
                if len(lam) and lam.min() < -tol:
                    continue
                Aphi = A @ phi
                if np.any(Aphi < b - tol) or np.any(Aphi > B + tol):
                    continue
                obj = 0.5 * phi @ G @ phi + c @ phi
                if best is None or obj < best[0]:
                    best = (obj, phi)
    assert best is not None, "oracle found no KKT point"
    return best


def random_problem(rng, n=None, m=None):
    n = n or rng.integers(1, 6)
    m = m or rng.integers(1, 10)
    R = rng.standard_normal((n, n))
    G = R @ R.T + 0.5 * np.eye(n)
    c = rng.standard_normal(n)
    A = rng.standard_normal((m, n))
    b = -np.abs(rng.standard_normal(m)) * rng.uniform(0.05, 1.0)
    B = np.abs(rng.standard_normal(m)) * rng.uniform(0.05, 1.0)
    return QPProblem(G, c, A, b, B)


def test_unconstrained_interior_optimum():
    prob = QPProblem(2 * np.eye(2), [-1.0, 0.0], np.eye(2),
                     [-10.0, -10.0], [10.0, 10.0])
    sol = solve_qp(prob)
    assert sol.status == "optimal"
    assert sol.active_set == []
    np.testing.assert_allclose(sol.phi, [0.5, 0.0], atol=1e-13)


def test_1d_reconstruction_instance_loose_bounds():
    # three-cell averages (0, -1, 1) on a uniform line
    prob = QPProblem(2 * np.eye(2), [-2.0, 0.0],
                     np.array([[0.0, -1 / 12], [-0.5, 1 / 6], [0.5, 1 / 6]]),
                     [-100.0] * 3, [100.0] * 3)
    sol = solve_qp(prob)
    np.testing.assert_allclose(sol.phi, [1.0, 0.0], atol=1e-13)


def test_scalar_upper_bound_active():
    prob = QPProblem([[2.0]], [-2.0], [[1.0]], [0.0], [0.5])
    sol = solve_qp(prob)
    assert sol.status == "optimal"
    np.testing.assert_allclose(sol.phi, [0.5], atol=1e-13)
    assert sol.active_set == [(0, UPPER)]
    np.testing.assert_allclose(sol.multipliers, [1.0], atol=1e-12)
    # brute-force over the three KKT candidates agrees
    obj, phi = brute_force_qp(np.array([[2.0]]), np.array([-2.0]),
                              np.array([[1.0]]), np.array([0.0]), np.array([0.5]))
    np.testing.assert_allclose(phi, sol.phi, atol=1e-12)


def test_kkt_residual_values():
    prob = QPProblem([[2.0]], [-2.0], [[1.0]], [0.0], [0.5])
    sol = solve_qp(prob)
    assert kkt_residual(prob, sol) <= 1e-10

    off = QPSolution(np.array([0.4]), [], np.zeros(0), 0, "optimal")
    assert kkt_residual(prob, off) > 1e-6

    interior = QPProblem(2 * np.eye(2), [-1.0, 0.0], np.eye(2),
                         [-10.0, -10.0], [10.0, 10.0])
    phi = np.array([0.2, 0.1])
    res = kkt_residual(interior, QPSolution(phi, [], np.zeros(0), 0, "optimal"))
    assert res == pytest.approx(np.max(np.abs(interior.G @ phi + interior.c)))


def test_infeasible_start_rejected():
    prob = QPProblem([[2.0]], [-2.0], [[1.0]], [0.0], [0.5])
    with pytest.raises(QPError):
        solve_qp(prob, start=np.array([2.0]))


def test_lower_exceeds_upper_rejected():
    with pytest.raises(QPError):
        QPProblem([[1.0]], [0.0], [[1.0]], [1.0], [-1.0])


def test_iteration_cap_returns_start_as_fallback():
    prob = QPProblem([[2.0]], [-2.0], [[1.0]], [0.0], [0.5])
    sol = solve_qp(prob, max_iterations=1)
    assert sol.status == "fallback"
    np.testing.assert_allclose(sol.phi, [0.0])


def test_matches_bruteforce_on_random_problems():
    rng = np.random.default_rng(7)
    for _ in range(200):
        prob = random_problem(rng)
        sol = solve_qp(prob)
        assert sol.status == "optimal"
        obj, phi = brute_force_qp(prob.G, prob.c, prob.A, prob.b, prob.B)
        assert abs(prob.objective(sol.phi) - obj) < 1e-9
        np.testing.assert_allclose(sol.phi, phi, atol=1e-8)
        assert kkt_residual(prob, sol) < 1e-8


def test_objective_nonincreasing_and_iterates_feasible():
    rng = np.random.default_rng(11)
    for _ in range(50):
        prob = random_problem(rng)
        sol = solve_qp(prob, record_iterates=True)
        objs = [prob.objective(p) for p in sol.trajectory]
        for prev, cur in zip(objs, objs[1:]):
            assert cur <= prev + 1e-12
        scale = np.maximum(1.0, np.maximum(np.abs(prob.b), np.abs(prob.B)))
        for p in sol.trajectory:
            Ap = prob.A @ p
            assert np.all(Ap >= prob.b - 1e-9 * scale)
            assert np.all(Ap <= prob.B + 1e-9 * scale)


def test_unique_optimum_from_any_feasible_start():
    rng = np.random.default_rng(13)
    for _ in range(50):
        prob = random_problem(rng)
        from_zero = solve_qp(prob)
        # random feasible start: scale a random direction into the box
        m = len(prob.b)
        for _try in range(50):
            cand = 0.1 * rng.standard_normal(len(prob.c))
            Ac = prob.A @ cand
            if np.all(Ac >= prob.b) and np.all(Ac <= prob.B):
                break
            cand = None
        if cand is None:
            continue
        from_rand = solve_qp(prob, start=cand)
        assert abs(prob.objective(from_zero.phi)
                   - prob.objective(from_rand.phi)) < 1e-9


def test_batch_matches_percell():
    rng = np.random.default_rng(17)
    n, m, k = 4, 7, 60
    Gs, As, cs, bs, Bs = [], [], [], [], []
    for _ in range(k):
        prob = random_problem(rng, n=n, m=m)
        Gs.append(prob.G)
        As.append(prob.A)
        cs.append(prob.c)
        bs.append(prob.b)
        Bs.append(prob.B)
    Ginv = np.linalg.inv(np.array(Gs))
    phis, fallback, _ = solve_qp_batch(Ginv, np.array(As), np.array(cs),
                                       np.array(bs), np.array(Bs))
    assert not fallback.any()
    for i in range(k):
        prob = QPProblem(Gs[i], cs[i], As[i], bs[i], Bs[i])
        ref = solve_qp(prob)
        assert abs(prob.objective(phis[i]) - prob.objective(ref.phi)) < 1e-9
        np.testing.assert_allclose(phis[i], ref.phi, atol=1e-7)


def test_regularization_of_near_singular_hessian():
    # rank-deficient G triggers the one-shot diagonal lift
    G = np.array([[1.0, 1.0], [1.0, 1.0]])
    prob = QPProblem(G, [0.1, -0.2], np.eye(2), [-1.0, -1.0], [1.0, 1.0])
    sol = solve_qp(prob)
    assert sol.regularized
    assert sol.status == "optimal"
