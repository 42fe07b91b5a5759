"""Reference paths, speed profiles and the longitudinal speed controller."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .config import PathConfig, SpeedConfig, SpeedControlConfig


class PathReference:
    def __init__(self, config: PathConfig):
        self.config = config

    def reference_at(self, X: float) -> tuple[float, float]:
        """``(Y_ref, theta_ref)`` at station ``X``; clamped outside the domain."""
        c = self.config
        X = min(max(X, c.X_min), c.X_max)
        if c.kind == "straight":
            return c.Y0, 0.0
        k1 = c.shape / c.dx1
        k2 = c.shape / c.dx2
        z1 = k1 * (X - c.X1) - c.shape / 2
        z2 = k2 * (X - c.X2) - c.shape / 2
        t1, t2 = math.tanh(z1), math.tanh(z2)
        Y = c.Y0 + 0.5 * c.dy1 * (1 + t1) - 0.5 * c.dy2 * (1 + t2)
        slope = 0.5 * c.dy1 * k1 * (1 - t1 * t1) - 0.5 * c.dy2 * k2 * (1 - t2 * t2)
        return Y, math.atan(slope)

    def window(self, X0: float, ds: float, n: int) -> list[tuple[float, float]]:
        """``n`` rows of ``(theta_ref, Y_ref)`` at stations ``X0 + k ds``, k = 1..n."""
        out = []
        for k in range(1, n + 1):
            Y, th = self.reference_at(X0 + k * ds)
            out.append((th, Y))
        return out


def speed_target(profile: SpeedConfig, X: float) -> float:
    """Target speed in m/s at station ``X``."""
    if profile.kind == "constant":
        return profile.v0_kmh / 3.6
    frac = min(max(X / profile.ramp_end_X, 0.0), 1.0)
    return (profile.v0_kmh + frac * (profile.v1_kmh - profile.v0_kmh)) / 3.6


@dataclass
class SpeedController:
    """PI speed loop producing a total longitudinal force.

    Anti-windup by conditional integration: the integrator is frozen while the
    output sits on a limit and the error would push it further out.
    """

    config: SpeedControlConfig
    mass: float
    F_max: float
    integral: float = 0.0

    def update(self, v_target: float, vx: float, dt: float) -> float:
        err = v_target - vx
        unsat = self.mass * (self.config.kp * err + self.config.ki * self.integral)
        out = min(max(unsat, -self.F_max), self.F_max)
        if out == unsat or (out > 0) != (err > 0):
            self.integral += err * dt
        return out


def speed_controller(v_target: float, vx: float, config: SpeedControlConfig, mass: float,
                     F_max: float, integral: float = 0.0) -> float:
    """Stateless PI evaluation for a given integrator value."""
    err = v_target - vx
    return min(max(mass * (config.kp * err + config.ki * integral), -F_max), F_max)
