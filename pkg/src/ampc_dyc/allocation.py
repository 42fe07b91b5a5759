"""Four-wheel torque allocation at minimum tire adhesion utilisation.

Minimises ``sum (T_ij / r)^2 / (mu Fz_ij)^2`` subject to the force/moment
balance ``A T = [Fx_total, Mz]`` and per-wheel torque bounds.  The steer
angle is ignored in the effectiveness matrix.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .qp import QuadraticProgram, solve_active_set


@dataclass(frozen=True)
class AllocationProblem:
    Fx_total: float
    Mz: float
    Fz: tuple[float, float, float, float]
    mu: float
    r: float
    d: float
    Tmax: float

    def __post_init__(self):
        if min(self.Fz) <= 0:
            raise ValueError("all wheel loads must be positive")
        if not (self.r > 0 and self.d > 0):
            raise ValueError("wheel radius and track must be positive")


class WheelTorques(NamedTuple):
    T_fl: float
    T_fr: float
    T_rl: float
    T_rr: float


@dataclass(frozen=True)
class AllocationResult:
    torques: WheelTorques
    status: str                 # "exact" or "scaled"
    scale: float
    residual: float
    objective: float
    iterations: int = 0


def effectiveness_matrix(r: float, d: float) -> np.ndarray:
    return np.array([[1.0, 1.0, 1.0, 1.0],
                     [-d / 2, d / 2, -d / 2, d / 2]]) / r


def torque_bounds(Fz: Sequence[float], mu: float, r: float, Tmax: float) -> np.ndarray:
    """Per-wheel torque magnitude limit ``min(mu Fz r, Tmax)``."""
    return np.minimum(mu * np.asarray(Fz, dtype=float) * r, Tmax)


def _side_sums(Fx_total, Mz, r, d):
    # left = T_fl + T_rl, right = T_fr + T_rr
    left = 0.5 * (Fx_total * r - 2.0 * r * Mz / d)
    right = 0.5 * (Fx_total * r + 2.0 * r * Mz / d)
    return left, right


def feasible_scale(problem: AllocationProblem, bounds: np.ndarray) -> float:
    """Largest ``s`` in [0, 1] for which ``s * (Fx_total, Mz)`` is achievable.

    Each side's torque sum is fixed by the demand and can reach at most the
    sum of that side's bounds, which makes the scale available in closed form.
    """
    left, right = _side_sums(problem.Fx_total, problem.Mz, problem.r, problem.d)
    cap_left = bounds[0] + bounds[2]
    cap_right = bounds[1] + bounds[3]
    s = 1.0
    if abs(left) > cap_left:
        s = min(s, cap_left / abs(left))
    if abs(right) > cap_right:
        s = min(s, cap_right / abs(right))
    return s


def weighted_pseudo_inverse(problem: AllocationProblem) -> np.ndarray:
    """Minimiser of the utilisation cost under the equality alone."""
    A = effectiveness_matrix(problem.r, problem.d)
    w = 1.0 / (problem.mu * np.asarray(problem.Fz) * problem.r) ** 2
    Winv = np.diag(1.0 / w)
    N = np.array([problem.Fx_total, problem.Mz])
    return Winv @ A.T @ np.linalg.solve(A @ Winv @ A.T, N)


def allocate(problem: AllocationProblem) -> AllocationResult:
    bounds = torque_bounds(problem.Fz, problem.mu, problem.r, problem.Tmax)
    s = feasible_scale(problem, bounds)
    status = "exact" if s == 1.0 else "scaled"
    if s < 1.0:
        # shave a hair off so the scaled demand sits strictly inside the box
        s *= 1.0 - 1e-12
    Fx, Mz = s * problem.Fx_total, s * problem.Mz
    A = effectiveness_matrix(problem.r, problem.d)
    N = np.array([Fx, Mz])
    # work in units of each wheel's own bound so the Hessian is well scaled
    w = 1.0 / (problem.mu * np.asarray(problem.Fz) * problem.r) ** 2
    scaled = problem if s == 1.0 else AllocationProblem(
        Fx, Mz, problem.Fz, problem.mu, problem.r, problem.d, problem.Tmax)
    T = weighted_pseudo_inverse(scaled)
    iterations = 0
    if np.any(np.abs(T) > bounds):
        T, iterations = _active_set(A, N, w, bounds)
        # the solver can leave rounding-level excursions past the box
        T = np.clip(T, -bounds, bounds)
    residual = float(np.max(np.abs(A @ T - N)))
    return AllocationResult(WheelTorques(*map(float, T)), status, float(s), residual,
                            float(np.sum(w * T ** 2)), iterations)


def _active_set(A, N, w, bounds):
    # variables x = T / bound, so every box is [-1, 1]
    D = np.diag(bounds)
    H = 2.0 * np.diag(w * bounds ** 2)
    H /= np.max(H)
    Ax = A @ D
    x0 = _feasible_start(A, N, bounds)
    G = np.vstack([np.eye(4), -np.eye(4)])
    h = np.ones(8)
    qp = QuadraticProgram(H=H, g=np.zeros(4), G=G, h=h, A_eq=Ax, b_eq=N)
    res = solve_active_set(qp, x0)
    return D @ res.z, res.iterations


def _feasible_start(A, N, bounds):
    # split each side's required torque sum in proportion to the wheel bounds
    r = 1.0 / A[0, 0]
    d = 2.0 * A[1, 1] * r
    left, right = _side_sums(N[0], N[1], r, d)
    fl = left / (bounds[0] + bounds[2])
    fr = right / (bounds[1] + bounds[3])
    return np.array([fl, fr, fl, fr])
