"""Fit the sideslip phase-plane envelope ``|B1 beta_dot + B2 beta| <= 1``.

The intercept on the beta axis is the largest steady-state sideslip the
nonlinear single-track model with brush tires can hold at the given speed
and friction: the rear axle force is pushed along the steady-cornering curve
up to its friction limit and the resulting sideslip is recorded.  The slope
of the boundary is the slowest decay rate of the linear 2-DOF model, so that
a trajectory converging at the natural rate runs parallel to the boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from ..dyc import StabilityEnvelope, two_dof_model
from ..vehicle import VehicleParams, brush_lateral_force


@dataclass(frozen=True)
class EnvelopeFit:
    B1: float
    B2: float
    beta_limit: float
    time_constant: float
    vx: float
    mu: float


def _rear_slip_for_force(Fy: float, C_mag: float, mu: float, Fz: float) -> float:
    """Rear slip angle producing lateral force ``Fy`` (inverse brush curve)."""
    alpha_sl = math.atan(3.0 * mu * Fz / C_mag)
    if abs(Fy) >= mu * Fz:
        return -math.copysign(alpha_sl, Fy)
    if Fy == 0.0:
        return 0.0
    target = abs(Fy)
    a = brentq(lambda x: brush_lateral_force(x, C_mag, mu, Fz) - target, -alpha_sl, 0.0,
               xtol=1e-15)
    return math.copysign(1.0, Fy) * a


def steady_state_beta_limit(vx: float, mu: float, params: VehicleParams,
                            samples: int = 400) -> float:
    """Largest ``|beta|`` over steady cornering equilibria at speed ``vx``."""
    p = params
    Fz_r = p.m * p.g * p.a / (2.0 * p.L)
    C_r = -p.Car
    best = 0.0
    for ay in np.linspace(0.0, mu * p.g, samples):
        # rear axle carries the share of the lateral force set by moment balance
        Fy_wheel = p.m * ay * p.a / p.L / 2.0
        alpha_r = _rear_slip_for_force(Fy_wheel, C_r, mu, Fz_r)
        r = ay / vx
        beta = math.tan(alpha_r) + p.b * r / vx
        best = max(best, abs(beta))
    return best


def fit_envelope(vx: float, mu: float, params: VehicleParams | None = None,
                 yaw_err_threshold: float = 0.035) -> EnvelopeFit:
    params = params or VehicleParams()
    beta_lim = steady_state_beta_limit(vx, mu, params)
    model = two_dof_model(params, vx)
    slowest = float(np.min(np.abs(np.linalg.eigvals(model.A).real)))
    tau = 1.0 / slowest
    B2 = 1.0 / beta_lim
    return EnvelopeFit(B1=tau * B2, B2=B2, beta_limit=beta_lim, time_constant=tau,
                       vx=vx, mu=mu)


def envelope_from_fit(fit: EnvelopeFit, base: StabilityEnvelope | None = None
                      ) -> StabilityEnvelope:
    base = base or StabilityEnvelope()
    return StabilityEnvelope(base.yaw_err_threshold, round(fit.B1, 4), round(fit.B2, 4),
                             base.hysteresis_off_factor)
