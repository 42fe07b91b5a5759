import itertools

import numpy as np
import pytest

from ampc_dyc.qp import QuadraticProgram, kkt_residuals, solve_active_set


def enumerate_oracle(qp):
    """Exhaustive active-set search: solve the KKT system for every subset of
    inequality rows and keep the best primal-dual feasible point."""
    n, m = qp.n, qp.G.shape[0]
    A_eq = qp.A_eq if qp.A_eq is not None else np.zeros((0, n))
    b_eq = qp.b_eq if qp.b_eq is not None else np.zeros(0)
    best = None
    for k in range(0, min(m, n - A_eq.shape[0]) + 1):
        for W in itertools.combinations(range(m), k):
            M = np.vstack([A_eq, qp.G[list(W)]])
            b = np.concatenate([b_eq, qp.h[list(W)]])
            K = np.block([[qp.H, M.T], [M, np.zeros((M.shape[0], M.shape[0]))]])
            rhs = np.concatenate([-qp.g, b])
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                continue
            z = sol[:n]
            lam = sol[n + A_eq.shape[0]:]
            if np.any(qp.G @ z - qp.h > 1e-9) or np.any(lam < -1e-9):
                continue
            f = qp.objective(z)
            if best is None or f < best[0]:
                best = (f, z)
    return best


def random_qp(rng, n, m, m_eq=0):
    Q = rng.normal(size=(n, n))
    H = Q @ Q.T + 0.1 * np.eye(n)
    g = rng.normal(size=n) * 3
    G = rng.normal(size=(m, n))
    z_feas = rng.normal(size=n) * 0.3
    h = G @ z_feas + rng.uniform(0.0, 1.0, size=m)
    A_eq = b_eq = None
    if m_eq:
        A_eq = rng.normal(size=(m_eq, n))
        b_eq = A_eq @ z_feas
    return QuadraticProgram(H=H, g=g, G=G, h=h, A_eq=A_eq, b_eq=b_eq), z_feas


@pytest.mark.parametrize("seed", range(60))
def test_matches_enumeration_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    m = int(rng.integers(1, 9))
    m_eq = int(rng.integers(0, 2))
    qp, z0 = random_qp(rng, n, m, m_eq)
    res = solve_active_set(qp, z0)
    f_star, z_star = enumerate_oracle(qp)
    assert res.status == "solved"
    assert res.objective == pytest.approx(f_star, rel=1e-6, abs=1e-9)
    np.testing.assert_allclose(res.z, z_star, atol=1e-6)
    assert res.stationarity < 1e-8
    assert res.feasibility < 1e-9
    assert np.all(res.lam >= -1e-10)


def test_unconstrained_minimum():
    H = np.diag([2.0, 4.0])
    g = np.array([-2.0, -4.0])
    qp = QuadraticProgram(H=H, g=g, G=np.zeros((0, 2)), h=np.zeros(0))
    res = solve_active_set(qp, np.zeros(2))
    np.testing.assert_allclose(res.z, [1.0, 1.0], atol=1e-14)
    assert res.active == []


def test_box_clips_to_bound():
    # min (z - 2)^2 subject to z <= 1
    qp = QuadraticProgram(H=np.array([[2.0]]), g=np.array([-4.0]),
                          G=np.array([[1.0]]), h=np.array([1.0]))
    res = solve_active_set(qp, np.zeros(1))
    assert res.z[0] == pytest.approx(1.0, abs=1e-14)
    assert res.lam[0] == pytest.approx(2.0, abs=1e-12)
    assert res.active == [0]


def test_deterministic_pivoting():
    rng = np.random.default_rng(3)
    qp, z0 = random_qp(rng, 5, 8)
    a = solve_active_set(qp, z0)
    b = solve_active_set(qp, z0)
    assert a.z.tobytes() == b.z.tobytes()
    assert a.active == b.active and a.iterations == b.iterations


def test_kkt_residuals_zero_at_optimum():
    qp = QuadraticProgram(H=np.array([[2.0]]), g=np.array([-4.0]),
                          G=np.array([[1.0]]), h=np.array([1.0]))
    stat, feas, comp = kkt_residuals(qp, np.array([1.0]), np.array([2.0]), np.zeros(0))
    assert stat == 0.0 and feas == 0.0 and comp == 0.0
