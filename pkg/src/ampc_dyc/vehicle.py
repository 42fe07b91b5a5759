"""Nonlinear double-track vehicle plant and shared tire-force primitives.

Frame convention: body x forward, y to the left, yaw counter-clockwise
positive.  Cornering stiffnesses are stored negative, so ``Fy = C * alpha``
and a positive slip angle produces a negative (rightward) lateral force.
Wheel order everywhere is ``(fl, fr, rl, rr)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

WHEELS = ("fl", "fr", "rl", "rr")

# slip angles are evaluated with vx clamped to this inside the plant
LOW_SPEED_CLAMP = 0.5
MIN_SPEED = 0.1


class SimulationError(RuntimeError):
    """Base class for plant states the simulation cannot continue from."""


class DegenerateSpeedError(SimulationError):
    pass


class RolloverError(SimulationError):
    pass


@dataclass(frozen=True)
class VehicleParams:
    """Physical constants of the test vehicle.

    Defaults for ``m, Iz, a, b, d, r, Caf, Car`` are the reference vehicle
    data.  ``h_cg, Tmax, g, Clf, Clr`` have no reference value and carry
    documented engineering defaults.  ``Caf`` and ``Car`` are per-tire
    values (the single-track equations multiply them by two).
    ``tire_model="linear"`` swaps the brush curve for ``Fy = C * alpha``
    with no friction limit, which is only meant for model-reduction checks.
    """

    m: float = 1860.0
    Iz: float = 4175.0
    a: float = 1.232
    b: float = 1.468
    d: float = 1.6
    r: float = 0.3
    Caf: float = -77223.0
    Car: float = -66782.0
    Clf: float = 50000.0
    Clr: float = 50000.0
    h_cg: float = 0.54
    Tmax: float = 300.0
    g: float = 9.81
    tire_model: str = "brush"

    def __post_init__(self):
        if self.tire_model not in ("brush", "linear"):
            raise ValueError("tire_model must be 'brush' or 'linear'")
        for name in ("m", "Iz", "a", "b", "d", "r", "h_cg", "Tmax", "g"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if not (self.Caf < 0 and self.Car < 0):
            raise ValueError("cornering stiffnesses are negative by convention")

    @property
    def L(self) -> float:
        return self.a + self.b


@dataclass(frozen=True)
class RoadCondition:
    mu: float = 0.6

    def __post_init__(self):
        if not 0 < self.mu <= 1.2:
            raise ValueError(f"road adhesion {self.mu} outside (0, 1.2]")


@dataclass(frozen=True)
class PlantState:
    """Global pose plus body-frame velocities.

    Sideslip is derived, so it can never disagree with ``vy / vx``.
    """

    X: float = 0.0
    Y: float = 0.0
    phi: float = 0.0
    vx: float = 10.0
    vy: float = 0.0
    phi_dot: float = 0.0

    @property
    def beta(self) -> float:
        return self.vy / self.vx

    def as_tuple(self) -> tuple[float, float, float, float, float, float]:
        return (self.X, self.Y, self.phi, self.vx, self.vy, self.phi_dot)


class PlantInputs(NamedTuple):
    delta_f: float
    wheel_torques: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)


class WheelForce(NamedTuple):
    Fx: float
    Fy: float
    Fz: float
    alpha: float


@dataclass(frozen=True)
class WheelForces:
    fl: WheelForce
    fr: WheelForce
    rl: WheelForce
    rr: WheelForce

    def __iter__(self):
        return iter((self.fl, self.fr, self.rl, self.rr))


@dataclass(frozen=True)
class SlipAngles:
    fl: float
    fr: float
    rl: float
    rr: float
    front: float
    rear: float


def wheel_slip_angles(state: PlantState, delta_f: float,
                      params: VehicleParams) -> SlipAngles:
    """Per-wheel slip angles.

    ``front`` and ``rear`` are the single-track values; the per-wheel values
    use the wheel's own longitudinal velocity ``vx -/+ (d/2) phi_dot`` for
    the left/right side.
    """
    vx, vy, r = state.vx, state.vy, state.phi_dot
    if vx <= MIN_SPEED:
        raise DegenerateSpeedError(f"vx={vx:.4g} m/s below {MIN_SPEED} m/s")
    return _slip_angles(vx, vy, r, delta_f, params)


def _slip_angles(vx, vy, r, delta_f, p):
    half = 0.5 * p.d * r
    vf = vy + p.a * r
    vr = vy - p.b * r
    return SlipAngles(
        fl=vf / (vx - half) - delta_f,
        fr=vf / (vx + half) - delta_f,
        rl=vr / (vx - half),
        rr=vr / (vx + half),
        front=vf / vx - delta_f,
        rear=vr / vx,
    )


def brush_lateral_force(alpha: float, C_alpha_mag: float, mu: float,
                        Fz: float) -> float:
    """Brush-model lateral tire force (cubic below full sliding)."""
    t = math.tan(alpha)
    mu_fz = mu * Fz
    if abs(alpha) >= math.atan(3.0 * mu_fz / C_alpha_mag):
        return -mu_fz * math.copysign(1.0, alpha)
    c = C_alpha_mag
    return (-c * t
            + c * c / (3.0 * mu_fz) * abs(t) * t
            - c ** 3 / (27.0 * mu_fz * mu_fz) * t ** 3)


def linear_lateral_force(alpha: float, C_alpha_signed: float) -> float:
    return C_alpha_signed * alpha


def quasi_static_accel(Fx_total: float, ay_kin: float, mu: float,
                       p: VehicleParams) -> tuple[float, float]:
    """Accelerations used for load transfer, each capped at ``mu g``.

    ``vx * phi_dot`` overstates the lateral acceleration whenever the
    sideslip changes quickly (a spinning vehicle), while the tires can never
    deliver more than the friction limit.
    """
    cap = mu * p.g
    ax = Fx_total / p.m
    return min(max(ax, -cap), cap), min(max(ay_kin, -cap), cap)


def vertical_loads(state: PlantState, ax: float, ay: float,
                   params: VehicleParams) -> tuple[float, float, float, float]:
    """Quasi-static wheel loads with longitudinal and lateral transfer.

    Lateral transfer is split between the axles in proportion to their
    static load share, so the four loads always sum to ``m * g``.
    """
    loads = _vertical_loads(ax, ay, params)
    if min(loads) <= 0.0:
        raise RolloverError(
            f"non-positive wheel load {min(loads):.1f} N at ax={ax:.3g}, ay={ay:.3g}")
    return loads


def _vertical_loads(ax, ay, p):
    L = p.L
    mg = p.m * p.g
    front = mg * p.b / (2.0 * L)
    rear = mg * p.a / (2.0 * L)
    dlong = p.m * ax * p.h_cg / (2.0 * L)
    lat = p.m * ay * p.h_cg / p.d
    dlat_f = lat * p.b / L
    dlat_r = lat * p.a / L
    # ay > 0 (left turn) loads the right-hand wheels
    return (front - dlong - dlat_f,
            front - dlong + dlat_f,
            rear + dlong - dlat_r,
            rear + dlong + dlat_r)


def _wheel_forces(vx, vy, r, delta_f, torques, mu, p):
    vx_s = vx if vx > LOW_SPEED_CLAMP else LOW_SPEED_CLAMP
    slips = _slip_angles(vx_s, vy, r, delta_f, p)
    if p.tire_model == "linear":
        # loads do not enter the linear tire; report the static axle split
        loads = _vertical_loads(0.0, 0.0, p)
        return [WheelForce(t / p.r, c * alpha, fz, alpha)
                for alpha, fz, t, c in zip((slips.fl, slips.fr, slips.rl, slips.rr), loads,
                                           torques, (p.Caf, p.Caf, p.Car, p.Car))]
    ax, ay = quasi_static_accel(sum(torques) / p.r, vx * r, mu, p)
    loads = _vertical_loads(ax, ay, p)
    if min(loads) <= 0.0:
        raise RolloverError(f"non-positive wheel load {min(loads):.1f} N")
    cf, cr = -p.Caf, -p.Car
    out = []
    for alpha, fz, torque, c in zip((slips.fl, slips.fr, slips.rl, slips.rr),
                                    loads, torques, (cf, cf, cr, cr)):
        fx = torque / p.r
        fy = brush_lateral_force(alpha, c, mu, fz)
        limit = mu * fz
        total = math.hypot(fx, fy)
        if total > limit:
            # friction circle: scale the force vector back onto the limit
            s = limit / total
            fx *= s
            fy *= s
        out.append(WheelForce(fx, fy, fz, alpha))
    return out


def wheel_forces(state: PlantState, inputs: PlantInputs, road: RoadCondition,
                 params: VehicleParams) -> WheelForces:
    if state.vx <= MIN_SPEED:
        raise DegenerateSpeedError(f"vx={state.vx:.4g} m/s below {MIN_SPEED} m/s")
    fl, fr, rl, rr = _wheel_forces(state.vx, state.vy, state.phi_dot,
                                   inputs.delta_f, inputs.wheel_torques,
                                   road.mu, params)
    return WheelForces(fl, fr, rl, rr)


def _derivative(s, delta_f, torques, mu, p):
    X, Y, phi, vx, vy, r = s
    if vx <= MIN_SPEED:
        raise DegenerateSpeedError(f"vx={vx:.4g} m/s below {MIN_SPEED} m/s")
    fl, fr, rl, rr = _wheel_forces(vx, vy, r, delta_f, torques, mu, p)
    cd, sd = math.cos(delta_f), math.sin(delta_f)
    fx_fl = fl.Fx * cd - fl.Fy * sd
    fy_fl = fl.Fx * sd + fl.Fy * cd
    fx_fr = fr.Fx * cd - fr.Fy * sd
    fy_fr = fr.Fx * sd + fr.Fy * cd
    fx_sum = fx_fl + fx_fr + rl.Fx + rr.Fx
    fy_sum = fy_fl + fy_fr + rl.Fy + rr.Fy
    mz = (p.a * (fy_fl + fy_fr) - p.b * (rl.Fy + rr.Fy)
          + 0.5 * p.d * (fx_fr + rr.Fx - fx_fl - rl.Fx))
    cphi, sphi = math.cos(phi), math.sin(phi)
    return (vx * cphi - vy * sphi,
            vx * sphi + vy * cphi,
            r,
            vy * r + fx_sum / p.m,
            -vx * r + fy_sum / p.m,
            mz / p.Iz)


def plant_derivative(state: PlantState, inputs: PlantInputs,
                     road: RoadCondition, params: VehicleParams) -> tuple[float, ...]:
    """Time derivative ``(dX, dY, dphi, dvx, dvy, dphi_dot)`` of the plant."""
    return _derivative(state.as_tuple(), inputs.delta_f, inputs.wheel_torques,
                       road.mu, params)


def _rk4(s, dt, delta_f, torques, mu, p):
    k1 = _derivative(s, delta_f, torques, mu, p)
    h = 0.5 * dt
    k2 = _derivative(tuple(x + h * k for x, k in zip(s, k1)), delta_f, torques, mu, p)
    k3 = _derivative(tuple(x + h * k for x, k in zip(s, k2)), delta_f, torques, mu, p)
    k4 = _derivative(tuple(x + dt * k for x, k in zip(s, k3)), delta_f, torques, mu, p)
    w = dt / 6.0
    return tuple(x + w * (a + 2.0 * b + 2.0 * c + d)
                 for x, a, b, c, d in zip(s, k1, k2, k3, k4))


def integrate_step(state: PlantState, inputs: PlantInputs, road: RoadCondition,
                   params: VehicleParams, dt: float, substeps: int = 1) -> PlantState:
    """Advance the plant by ``substeps`` classical RK4 steps of size ``dt``.

    Inputs are held constant (zero-order hold) across all substeps.
    """
    if not 0.0 < dt <= 0.01:
        raise ValueError(f"dt={dt} outside (0, 0.01]")
    s = state.as_tuple()
    torques = tuple(inputs.wheel_torques)
    for _ in range(substeps):
        s = _rk4(s, dt, inputs.delta_f, torques, road.mu, params)
    return PlantState(*s)
