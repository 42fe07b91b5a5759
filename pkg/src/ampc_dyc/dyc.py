"""LQR direct yaw moment control.

The lower layer watches a yaw-rate error threshold and a sideslip phase-plane
envelope; while either is violated it commands a yaw moment from an LQR
tracking law on the linear 2-DOF (sideslip, yaw rate) model, with the steer
angle treated as a measured disturbance.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from .vehicle import DegenerateSpeedError, PlantState, VehicleParams

log = logging.getLogger(__name__)

DELTA_EPS = 1e-4


class CareError(RuntimeError):
    pass


@dataclass(frozen=True)
class StabilityEnvelope:
    yaw_err_threshold: float = 0.035
    B1: float = 1.468
    B2: float = 12.33
    hysteresis_off_factor: float = 0.5

    def __post_init__(self):
        if not self.yaw_err_threshold > 0:
            raise ValueError("yaw error threshold must be positive")
        if not (math.isfinite(self.B1) and math.isfinite(self.B2)):
            raise ValueError("B1, B2 must be finite")
        if not 0 < self.hysteresis_off_factor < 1:
            raise ValueError("hysteresis factor must lie in (0, 1)")


@dataclass(frozen=True)
class DycConfig:
    q_beta: float = 1000.0
    q_phidot: float = 5000.0
    R: float = 3e-6
    Mz_max: float = 3000.0
    gain_resolution: float = 0.5
    envelope: StabilityEnvelope = field(default_factory=StabilityEnvelope)

    def __post_init__(self):
        if min(self.q_beta, self.q_phidot) < 0 or not self.R > 0:
            raise ValueError("LQR weights: Q must be PSD and R positive")
        if not self.Mz_max > 0:
            raise ValueError("Mz_max must be positive")

    @property
    def Q(self) -> np.ndarray:
        return np.diag([self.q_beta, self.q_phidot])


@dataclass(frozen=True)
class TwoDofModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    vx: float


@dataclass
class LqrGains:
    P: np.ndarray
    K_FB: np.ndarray
    K_FF: float
    Q: np.ndarray
    R: float
    feedforward: bool = True
    residual: float = 0.0


@dataclass(frozen=True)
class YawMomentCommand:
    Mz: float = 0.0
    active: bool = False
    reference: tuple[float, float] = (0.0, 0.0)


def two_dof_model(params: VehicleParams, vx: float) -> TwoDofModel:
    """Linear sideslip/yaw-rate model ``xi' = A xi + B Mz + C delta_f``."""
    if vx <= 0.5:
        raise DegenerateSpeedError(f"2-DOF model undefined at vx={vx:.4g} m/s")
    p = params
    Cf, Cr = p.Caf, p.Car
    A = np.array([
        [2 * (Cf + Cr) / (p.m * vx), 2 * (p.a * Cf - p.b * Cr) / (p.m * vx ** 2) - 1.0],
        [2 * (p.a * Cf - p.b * Cr) / p.Iz, 2 * (p.a ** 2 * Cf + p.b ** 2 * Cr) / (p.Iz * vx)],
    ])
    B = np.array([[0.0], [1.0 / p.Iz]])
    C = np.array([[-2 * Cf / (p.m * vx)], [-2 * p.a * Cf / p.Iz]])
    return TwoDofModel(A, B, C, vx)


def reference_yaw_rate(vx: float, delta_f: float, mu: float,
                       params: VehicleParams) -> tuple[float, float]:
    """Steady-state yaw rate and its friction-limited reference.

    Returns ``(phi_dot_d, phi_dot_ref)`` where ``phi_dot_d`` is the Mz = 0
    equilibrium of the 2-DOF model and ``phi_dot_ref`` is it clipped in
    magnitude to ``0.85 mu g / vx``.
    """
    model = two_dof_model(params, vx)
    xi = -np.linalg.solve(model.A, model.C[:, 0] * delta_f)
    phi_dot_d = float(xi[1])
    limit = 0.85 * mu * params.g / vx
    phi_dot_ref = math.copysign(min(abs(phi_dot_d), limit), phi_dot_d)
    return phi_dot_d, phi_dot_ref


def intervention_check(state: PlantState, phi_dot_d: float, envelope: StabilityEnvelope,
                       beta_dot: float, was_active: bool = False) -> bool:
    """Whether yaw moment control should act this step.

    Engages when either stability condition fails; once engaged, releases only
    after both quantities drop below ``hysteresis_off_factor`` times their
    thresholds.
    """
    yaw_err = abs(state.phi_dot - phi_dot_d)
    phase = abs(envelope.B1 * beta_dot + envelope.B2 * state.beta)
    if was_active:
        f = envelope.hysteresis_off_factor
        return not (yaw_err < f * envelope.yaw_err_threshold and phase < f)
    return not (yaw_err <= envelope.yaw_err_threshold and phase <= 1.0)


def care_residual(A, B, Q, R, P) -> float:
    Rinv = np.linalg.inv(np.atleast_2d(R))
    res = A.T @ P + P @ A + Q - P @ B @ Rinv @ B.T @ P
    return float(np.linalg.norm(res))


def _stabilizing_seed(A, B, Rinv) -> np.ndarray:
    n = A.shape[0]
    if np.max(np.linalg.eigvals(A).real) < 0:
        return np.zeros((B.shape[1], n))
    # Bass: shift past the spectrum, then K0 = R^-1 B' Z^-1 with
    # (A + sI) Z + Z (A + sI)' = 2 B R^-1 B'
    shift = np.linalg.norm(A, 2) + 1.0
    As = A + shift * np.eye(n)
    Z = solve_continuous_lyapunov(As, 2.0 * B @ Rinv @ B.T)
    K0 = Rinv @ B.T @ np.linalg.pinv(Z)
    if np.max(np.linalg.eigvals(A - B @ K0).real) >= 0:
        raise CareError("no stabilizing initial gain found; is (A, B) stabilizable?")
    return K0


def solve_care(A, B, Q, R, *, tol: float = 1e-13, max_iter: int = 100) -> np.ndarray:
    """Stabilizing solution of ``A'P + PA + Q - P B R^-1 B' P = 0``.

    Newton-Kleinman: each iteration solves the Lyapunov equation of the
    current closed loop and updates the gain, starting from a stabilizing
    gain.  Convergence is quadratic once close.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    Rinv = np.linalg.inv(R)
    K = _stabilizing_seed(A, B, Rinv)
    P = np.zeros_like(A)
    prev_step = np.inf
    for it in range(max_iter):
        Ak = A - B @ K
        P_new = solve_continuous_lyapunov(Ak.T, -(Q + K.T @ R @ K))
        P_new = 0.5 * (P_new + P_new.T)
        step = np.linalg.norm(P_new - P)
        P = P_new
        K = Rinv @ B.T @ P
        scale = max(1.0, np.linalg.norm(P))
        if step <= tol * scale:
            break
        # quadratic convergence has hit the rounding floor
        if it > 2 and step >= prev_step and step <= 1e-8 * scale:
            break
        prev_step = step
    else:
        raise CareError(f"Newton-Kleinman did not converge, residual "
                        f"{care_residual(A, B, Q, R, P):.3e}")
    if np.max(np.linalg.eigvals(A - B @ K).real) >= 0:
        raise CareError("Riccati solution is not stabilizing")
    return P


def lqr_gains(model: TwoDofModel, Q, R: float, phi_dot_ref: float, delta_f: float,
              P: np.ndarray | None = None) -> LqrGains:
    """Feedback and feedforward gains of the tracking LQR.

    The desired state is ``X_d = A_d * delta_f`` with
    ``A_d = [0, phi_dot_ref / delta_f]``.  For ``|delta_f| <= DELTA_EPS`` the
    ratio is undefined and the feedforward gain is reported as zero; callers
    then regulate the tracking error directly.
    """
    A, B, C = model.A, model.B, model.C
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if P is None:
        P = solve_care(A, B, Q, R)
    Rinv = 1.0 / float(R)
    K_FB = -Rinv * B.T @ P
    gains = LqrGains(P=P, K_FB=K_FB, K_FF=0.0, Q=Q, R=float(R),
                     residual=care_residual(A, B, Q, R, P))
    if abs(delta_f) <= DELTA_EPS:
        gains.feedforward = False
        return gains
    A_d = np.array([[0.0], [phi_dot_ref / delta_f]])
    bracket = P @ B * Rinv @ B.T - A.T
    try:
        K_FF = Rinv * B.T @ np.linalg.solve(bracket, Q @ A_d - P @ C)
    except np.linalg.LinAlgError:
        log.warning("singular feedforward bracket; using feedback only")
        gains.feedforward = False
        return gains
    gains.K_FF = float(K_FF[0, 0])
    return gains


class YawMomentController:
    """Stateful wrapper: intervention memory bit plus a per-speed CARE cache."""

    def __init__(self, config: DycConfig, params: VehicleParams):
        self.config = config
        self.params = params
        self.active = False
        self._cache_vx: float | None = None
        self._model: TwoDofModel | None = None
        self._P: np.ndarray | None = None
        self.gain_updates = 0
        self.last_gains: LqrGains | None = None

    def _refresh(self, vx: float):
        if self._cache_vx is None or abs(vx - self._cache_vx) >= self.config.gain_resolution:
            self._model = two_dof_model(self.params, vx)
            self._P = solve_care(self._model.A, self._model.B, self.config.Q, self.config.R)
            self._cache_vx = vx
            self.gain_updates += 1

    def command(self, state: PlantState, delta_f: float, beta_dot: float,
                mu: float) -> YawMomentCommand:
        cfg = self.config
        phi_dot_d, phi_dot_ref = reference_yaw_rate(state.vx, delta_f, mu, self.params)
        self.active = intervention_check(state, phi_dot_d, cfg.envelope, beta_dot,
                                         self.active)
        ref = (0.0, phi_dot_ref)
        if not self.active:
            return YawMomentCommand(0.0, False, ref)
        self._refresh(state.vx)
        gains = lqr_gains(self._model, cfg.Q, cfg.R, phi_dot_ref, delta_f, P=self._P)
        self.last_gains = gains
        return yaw_moment_command(state, delta_f, gains, active=True, reference=ref,
                                  Mz_max=cfg.Mz_max)


def yaw_moment_command(state: PlantState, delta_f: float, gains: LqrGains, *,
                       active: bool,
                       reference: tuple[float, float] = (0.0, 0.0),
                       Mz_max: float = 3000.0) -> YawMomentCommand:
    """Stateless form of the control law for a given activation decision."""
    if not active:
        return YawMomentCommand(0.0, False, reference)
    xi = np.array([state.beta, state.phi_dot])
    if gains.feedforward:
        mz = float((gains.K_FB @ xi)[0]) + gains.K_FF * delta_f
    else:
        mz = float((gains.K_FB @ (xi - np.array(reference)))[0])
    return YawMomentCommand(min(max(mz, -Mz_max), Mz_max), True, reference)
