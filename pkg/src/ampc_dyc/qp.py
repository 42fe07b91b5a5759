"""Dense primal active-set solver for small convex QPs.

Solves::

    minimize    0.5 z'Hz + g'z
    subject to  A_eq z  = b_eq
                G z    <= h

with ``H`` symmetric positive definite.  Each iteration solves the
equality-constrained subproblem on the current working set by the
range-space method (Cholesky of ``H`` once, then the Schur complement of the
working constraints).  Pivoting is deterministic: the blocking constraint
with the smallest step wins, ties go to the lowest index, and the constraint
dropped on a negative multiplier is the most negative one, ties again to the
lowest index.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve


class QpError(RuntimeError):
    pass


@dataclass
class QuadraticProgram:
    H: np.ndarray
    g: np.ndarray
    G: np.ndarray | None = None
    h: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    const: float = 0.0

    @property
    def n(self) -> int:
        return self.g.shape[0]

    def objective(self, z: np.ndarray) -> float:
        return float(0.5 * z @ self.H @ z + self.g @ z + self.const)


@dataclass
class ActiveSetResult:
    z: np.ndarray
    lam: np.ndarray          # inequality multipliers, >= 0 at optimum
    nu: np.ndarray           # equality multipliers
    active: list[int]
    iterations: int
    status: str              # "solved" or "max_iter"
    objective: float
    stationarity: float = field(default=np.nan)
    feasibility: float = field(default=np.nan)
    complementarity: float = field(default=np.nan)


def kkt_residuals(qp: QuadraticProgram, z, lam, nu) -> tuple[float, float, float]:
    """Scaled KKT residuals ``(stationarity, feasibility, complementarity)``.

    Stationarity is normalised by the size of the terms that cancel in the
    gradient of the Lagrangian, so it is insensitive to the overall scale of
    the cost.  Feasibility is the absolute worst violation.
    """
    grad = qp.H @ z + qp.g
    terms = [np.max(np.abs(qp.H), initial=0.0) * np.max(np.abs(z), initial=0.0),
             np.max(np.abs(qp.g), initial=0.0)]
    feas = 0.0
    comp = 0.0
    if qp.A_eq is not None and qp.A_eq.size:
        t = qp.A_eq.T @ nu
        grad = grad + t
        terms.append(np.max(np.abs(t), initial=0.0))
        feas = max(feas, float(np.max(np.abs(qp.A_eq @ z - qp.b_eq), initial=0.0)))
    if qp.G is not None and qp.G.size:
        t = qp.G.T @ lam
        grad = grad + t
        terms.append(np.max(np.abs(t), initial=0.0))
        slack = qp.G @ z - qp.h
        feas = max(feas, float(np.max(slack, initial=0.0)))
        scale = np.maximum(1.0, np.abs(qp.h))
        comp = float(np.max(np.abs(lam * slack) / scale, initial=0.0))
    stat = float(np.max(np.abs(grad), initial=0.0)) / max(1.0, max(terms))
    return stat, feas, comp


def solve_active_set(qp: QuadraticProgram, z0: np.ndarray, *,
                     working: list[int] | None = None, max_iter: int | None = None,
                     tol: float = 1e-12) -> ActiveSetResult:
    """Primal active-set iterations from a feasible starting point ``z0``."""
    H, g = qp.H, qp.g
    n = g.shape[0]
    G = qp.G if qp.G is not None else np.zeros((0, n))
    h = qp.h if qp.h is not None else np.zeros(0)
    A_eq = qp.A_eq if qp.A_eq is not None else np.zeros((0, n))
    b_eq = qp.b_eq if qp.b_eq is not None else np.zeros(0)
    m_eq = A_eq.shape[0]
    m = G.shape[0]
    if max_iter is None:
        max_iter = 10 * (n + m) + 20

    chol = cho_factor(H)
    Hinv_g = cho_solve(chol, g)
    z = np.array(z0, dtype=float)
    W = sorted(working) if working else []
    lam_w = np.zeros(0)
    nu = np.zeros(m_eq)
    status = "max_iter"
    it = 0
    for it in range(1, max_iter + 1):
        M = np.vstack([A_eq, G[W]]) if W else A_eq
        b = np.concatenate([b_eq, h[W]]) if W else b_eq
        if M.shape[0]:
            Hinv_Mt = cho_solve(chol, M.T)
            S = M @ Hinv_Mt
            mult = np.linalg.solve(S, -(b + M @ Hinv_g))
            z_star = -(Hinv_g + Hinv_Mt @ mult)
        else:
            mult = np.zeros(0)
            z_star = -Hinv_g
        nu = mult[:m_eq]
        lam_w = mult[m_eq:]
        p = z_star - z
        if np.max(np.abs(p), initial=0.0) <= 1e-11 * (1.0 + np.max(np.abs(z), initial=0.0)):
            z = z_star
            if lam_w.size == 0 or lam_w.min() >= -tol * (1.0 + np.max(np.abs(lam_w))):
                status = "solved"
                break
            drop = int(np.argmin(lam_w))  # argmin returns the first (lowest index) minimum
            W.pop(drop)
            continue
        alpha = 1.0
        blocking = -1
        Gp = G @ p
        for i in range(m):
            if i in W or Gp[i] <= tol * (1.0 + abs(h[i])):
                continue
            step = (h[i] - G[i] @ z) / Gp[i]
            if step < alpha:
                alpha = max(step, 0.0)
                blocking = i
        z = z + alpha * p
        if blocking >= 0:
            W.append(blocking)
            W.sort()
        else:
            z = z_star
    lam = np.zeros(m)
    if W and status == "solved":
        lam[W] = lam_w
    res = ActiveSetResult(z=z, lam=lam, nu=nu, active=list(W), iterations=it,
                          status=status, objective=qp.objective(z))
    res.stationarity, res.feasibility, res.complementarity = kkt_residuals(qp, z, lam, nu)
    return res
