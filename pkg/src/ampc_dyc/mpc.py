"""Linear time-varying MPC for path tracking with a front-steer input.

Prediction model state ``x = [vy, vx, phi, phi_dot, Y, X, beta]``, input
``u = delta_f``, output ``eta = [theta, Y]`` with ``theta = phi + beta``.
Each control step the single-track model is linearised about the measured
state and the previous command, discretised by forward Euler, augmented with
the previous input so the decision variables are steer increments, condensed
over the horizon, and solved as a QP with one slack on the steer bounds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .qp import QpError, QuadraticProgram, solve_active_set
from .vehicle import DegenerateSpeedError, PlantState, RoadCondition, VehicleParams

NX = 7
NU = 1
NY = 2
IVY, IVX, IPHI, IR, IY, IX, IBETA = range(NX)

OUTPUT_MAP = np.zeros((NY, NX))
OUTPUT_MAP[0, IPHI] = 1.0
OUTPUT_MAP[0, IBETA] = 1.0
OUTPUT_MAP[1, IY] = 1.0


@dataclass(frozen=True)
class MpcConfig:
    Np: int = 25
    Nc: int = 10
    T: float = 0.05
    Q_theta: float = 20.0
    Q_y: float = 100.0
    R_delta: float = 1500.0
    rho: float = 1000.0
    u_min: float = -0.44
    u_max: float = 0.44
    du_min: float = -0.015
    du_max: float = 0.015

    def __post_init__(self):
        if not 1 <= self.Nc <= self.Np:
            raise ValueError(f"need 1 <= Nc <= Np, got Nc={self.Nc}, Np={self.Np}")
        if min(self.Q_theta, self.Q_y, self.R_delta) < 0:
            raise ValueError("weights must be non-negative")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not self.u_min < self.u_max:
            raise ValueError("u_min must be below u_max")
        if not self.du_min < 0 < self.du_max:
            raise ValueError("increment bounds must bracket zero")
        if not self.T > 0:
            raise ValueError("T must be positive")

    def with_schedule(self, Np: int, Q_y: float, R_delta: float) -> "MpcConfig":
        from dataclasses import replace
        return replace(self, Np=Np, Nc=min(self.Nc, Np), Q_y=Q_y, R_delta=R_delta)


@dataclass
class LinearizedModel:
    A_c: np.ndarray
    B_c: np.ndarray
    f0: np.ndarray
    x0: np.ndarray
    u0: float
    A_d: np.ndarray | None = None
    B_d: np.ndarray | None = None
    C: np.ndarray = field(default_factory=lambda: OUTPUT_MAP.copy())

    @property
    def affine(self) -> np.ndarray:
        """Continuous-time residual ``f(x0,u0) - A x0 - B u0`` of the linearisation."""
        return self.f0 - self.A_c @ self.x0 - self.B_c[:, 0] * self.u0


@dataclass
class AugmentedModel:
    A_tilde: np.ndarray
    B_tilde: np.ndarray
    C_tilde: np.ndarray
    c_tilde: np.ndarray | None = None


@dataclass
class PredictionMatrices:
    Psi: np.ndarray
    Theta: np.ndarray
    offset: np.ndarray | None = None


@dataclass
class QpSolution:
    dU: np.ndarray
    eps: float
    objective: float
    active_set: list[int]
    status: str
    iterations: int = 0
    stationarity: float = 0.0
    feasibility: float = 0.0
    complementarity: float = 0.0


def model_rhs(x: np.ndarray, u: float, params: VehicleParams,
              slip_ratios: tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
    """Single-track prediction model with linear tires (small-angle form).

    The ``vx`` row uses the physical drag sign ``-Fyf * delta_f`` of the
    rotated front-axle force.
    """
    vy, vx, phi, r, _, _, _ = x
    p = params
    af = (vy + p.a * r) / vx - u
    ar = (vy - p.b * r) / vx
    fyf = p.Caf * af
    fyr = p.Car * ar
    sf, sr = slip_ratios
    out = np.empty(NX)
    out[IVY] = -vx * r + 2.0 / p.m * (fyf + fyr)
    out[IVX] = vy * r + 2.0 / p.m * (p.Clf * sf - fyf * u + p.Clr * sr)
    out[IPHI] = r
    out[IR] = 2.0 / p.Iz * (p.a * fyf - p.b * fyr)
    out[IY] = vx * math.sin(phi) + vy * math.cos(phi)
    out[IX] = vx * math.cos(phi) - vy * math.sin(phi)
    out[IBETA] = 2.0 / (p.m * vx) * (fyf + fyr) - r
    return out


def linearize_at(operating_state: np.ndarray, operating_input: float,
                 params: VehicleParams, road: RoadCondition | None = None,
                 slip_ratios: tuple[float, float] = (0.0, 0.0)) -> LinearizedModel:
    """Analytic Jacobians of :func:`model_rhs` at an operating point.

    ``road`` is accepted for interface symmetry; the linear-tire prediction
    model does not depend on adhesion.
    """
    x = np.asarray(operating_state, dtype=float)
    vy, vx, phi, r = x[IVY], x[IVX], x[IPHI], x[IR]
    if vx <= 0.5:
        raise DegenerateSpeedError(f"cannot linearise at vx={vx:.4g} m/s")
    u = float(operating_input)
    p = params
    Cf, Cr = p.Caf, p.Car
    af = (vy + p.a * r) / vx - u
    ar = (vy - p.b * r) / vx
    # partial derivatives of the slip angles
    daf = {IVY: 1.0 / vx, IVX: -(vy + p.a * r) / vx ** 2, IR: p.a / vx}
    dar = {IVY: 1.0 / vx, IVX: -(vy - p.b * r) / vx ** 2, IR: -p.b / vx}
    S = Cf * af + Cr * ar
    dS = {k: Cf * daf[k] + Cr * dar[k] for k in daf}

    A = np.zeros((NX, NX))
    B = np.zeros((NX, NU))
    k_m = 2.0 / p.m
    for k in (IVY, IVX, IR):
        A[IVY, k] = k_m * dS[k]
    A[IVY, IVX] += -r
    A[IVY, IR] += -vx
    B[IVY, 0] = -k_m * Cf

    A[IVX, IVY] = r - k_m * Cf * u * daf[IVY]
    A[IVX, IVX] = -k_m * Cf * u * daf[IVX]
    A[IVX, IR] = vy - k_m * Cf * u * daf[IR]
    B[IVX, 0] = -k_m * Cf * (af - u)

    A[IPHI, IR] = 1.0

    k_i = 2.0 / p.Iz
    for k in (IVY, IVX, IR):
        A[IR, k] = k_i * (p.a * Cf * daf[k] - p.b * Cr * dar[k])
    B[IR, 0] = -k_i * p.a * Cf

    c, s = math.cos(phi), math.sin(phi)
    A[IY, IVY] = c
    A[IY, IVX] = s
    A[IY, IPHI] = vx * c - vy * s
    A[IX, IVY] = -s
    A[IX, IVX] = c
    A[IX, IPHI] = -vx * s - vy * c

    k_b = 2.0 / (p.m * vx)
    for k in (IVY, IVX, IR):
        A[IBETA, k] = k_b * dS[k]
    A[IBETA, IVX] += -2.0 / (p.m * vx ** 2) * S
    A[IBETA, IR] += -1.0
    B[IBETA, 0] = -k_b * Cf

    return LinearizedModel(A_c=A, B_c=B, f0=model_rhs(x, u, p, slip_ratios), x0=x, u0=u)


def discretize(model: LinearizedModel, T: float) -> LinearizedModel:
    if not T > 0:
        raise ValueError("sample period must be positive")
    model.A_d = np.eye(model.A_c.shape[0]) + T * model.A_c
    model.B_d = T * model.B_c
    return model


def augment(model: LinearizedModel, T: float | None = None) -> AugmentedModel:
    """State-plus-previous-input form driven by input increments.

    When ``T`` is given the discrete affine term of the linearisation is
    carried along in ``c_tilde`` so predictions stay in absolute coordinates.
    """
    A_d, B_d, C = model.A_d, model.B_d, model.C
    n, m = B_d.shape
    A_t = np.block([[A_d, B_d], [np.zeros((m, n)), np.eye(m)]])
    B_t = np.vstack([B_d, np.eye(m)])
    C_t = np.hstack([C, np.zeros((C.shape[0], m))])
    c_t = None
    if T is not None:
        c_t = np.concatenate([T * model.affine, np.zeros(m)])
    return AugmentedModel(A_t, B_t, C_t, c_t)


def build_prediction(aug: AugmentedModel, Np: int, Nc: int) -> PredictionMatrices:
    """Condensed output prediction ``Y = Psi x~ + Theta dU (+ offset)``.

    Block ``(i, j)`` of ``Theta`` is ``C~ A~^(i-j) B~`` for ``j <= i``.
    Increments beyond the control horizon are zero, which holds the input at
    its last computed value.
    """
    if not 1 <= Nc <= Np:
        raise ValueError(f"need 1 <= Nc <= Np, got Nc={Nc}, Np={Np}")
    A, B, C = aug.A_tilde, aug.B_tilde, aug.C_tilde
    ny, nz = C.shape
    nu = B.shape[1]
    Psi = np.zeros((ny * Np, nz))
    # CAk[k] = C~ A~^k
    CAk = np.empty((Np + 1, ny, nz))
    CAk[0] = C
    for k in range(1, Np + 1):
        CAk[k] = CAk[k - 1] @ A
    for i in range(Np):
        Psi[ny * i:ny * (i + 1)] = CAk[i + 1]
    CAkB = CAk[:Np] @ B
    Theta = np.zeros((ny * Np, nu * Nc))
    for i in range(Np):
        for j in range(min(i + 1, Nc)):
            Theta[ny * i:ny * (i + 1), nu * j:nu * (j + 1)] = CAkB[i - j]
    offset = None
    if aug.c_tilde is not None:
        offset = np.zeros(ny * Np)
        acc = np.zeros(nz)
        for i in range(Np):
            acc = A @ acc + aug.c_tilde
            offset[ny * i:ny * (i + 1)] = C @ acc
    return PredictionMatrices(Psi, Theta, offset)


def build_qp(pred: PredictionMatrices, x_tilde_0: np.ndarray, reference: np.ndarray,
             config: MpcConfig) -> QuadraticProgram:
    """QP over ``z = [dU; eps]`` in ``0.5 z'Hz + g'z`` form.

    Increment bounds are hard; the cumulative steer bounds are softened by
    the single slack ``eps >= 0``.
    """
    Np, Nc = config.Np, config.Nc
    reference = np.asarray(reference, dtype=float)
    if reference.shape != (2 * Np,):
        raise ValueError(f"reference must have length {2 * Np}")
    x_tilde_0 = np.asarray(x_tilde_0, dtype=float)
    free = pred.Psi @ x_tilde_0
    if pred.offset is not None:
        free = free + pred.offset
    err = free - reference
    q = np.tile([config.Q_theta, config.Q_y], Np)
    Theta = pred.Theta
    QTheta = Theta * q[:, None]
    n = Nc + 1
    H = np.zeros((n, n))
    H[:Nc, :Nc] = 2.0 * (Theta.T @ QTheta + config.R_delta * np.eye(Nc))
    H[Nc, Nc] = 2.0 * config.rho
    H = 0.5 * (H + H.T)
    g = np.zeros(n)
    g[:Nc] = 2.0 * QTheta.T @ err

    u_prev = float(x_tilde_0[-1])
    I = np.eye(Nc)
    Lc = np.tril(np.ones((Nc, Nc)))
    col = np.zeros((Nc, 1))
    ones = np.ones((Nc, 1))
    G = np.vstack([
        np.hstack([I, col]),
        np.hstack([-I, col]),
        np.hstack([Lc, -ones]),
        np.hstack([-Lc, -ones]),
        np.hstack([np.zeros((1, Nc)), -np.ones((1, 1))]),
    ])
    h = np.concatenate([
        np.full(Nc, config.du_max),
        np.full(Nc, -config.du_min),
        np.full(Nc, config.u_max - u_prev),
        np.full(Nc, u_prev - config.u_min),
        [0.0],
    ])
    return QuadraticProgram(H=H, g=g, G=G, h=h, const=float(err @ (q * err)))


def solve_qp(qp: QuadraticProgram, u_prev: float | None = None,
             config: MpcConfig | None = None) -> QpSolution:
    """Solve the tracking QP; on failure return a zero move (command held)."""
    n = qp.n
    Nc = n - 1
    z0 = np.zeros(n)
    if qp.G is not None and qp.G.size:
        # with dU = 0 only the slack rows can be violated; eps absorbs them
        viol = -qp.h[qp.G[:, -1] < 0]
        z0[-1] = max(0.0, float(np.max(viol, initial=0.0)))
    try:
        res = solve_active_set(qp, z0)
    except (np.linalg.LinAlgError, QpError, ValueError):
        return QpSolution(dU=np.zeros(Nc), eps=float(z0[-1]), objective=np.nan,
                          active_set=[], status="infeasible-fallback")
    if res.status != "solved":
        return QpSolution(dU=np.zeros(Nc), eps=float(z0[-1]), objective=np.nan,
                          active_set=[], status="infeasible-fallback",
                          iterations=res.iterations)
    return QpSolution(dU=res.z[:Nc].copy(), eps=float(res.z[-1]),
                      objective=res.objective, active_set=res.active, status="solved",
                      iterations=res.iterations, stationarity=res.stationarity,
                      feasibility=res.feasibility, complementarity=res.complementarity)


def prediction_state(state: PlantState) -> np.ndarray:
    """Map a plant state onto the 7-element prediction-model state."""
    return np.array([state.vy, state.vx, state.phi, state.phi_dot, state.Y, state.X,
                     state.beta])


@dataclass
class MpcStepResult:
    delta_f: float
    solution: QpSolution


def mpc_step(state: PlantState, u_prev: float, reference_window: np.ndarray,
             config: MpcConfig, params: VehicleParams, road: RoadCondition | None = None,
             slip_ratios: tuple[float, float] = (0.0, 0.0)) -> MpcStepResult:
    """One receding-horizon step; returns the new steer command.

    ``reference_window`` has shape ``(Np, 2)`` with rows ``(theta_ref, Y_ref)``.
    """
    ref = np.asarray(reference_window, dtype=float)
    if ref.shape != (config.Np, 2):
        raise ValueError(f"reference window must be ({config.Np}, 2), got {ref.shape}")
    x = prediction_state(state)
    model = discretize(linearize_at(x, u_prev, params, road, slip_ratios), config.T)
    aug = augment(model, config.T)
    pred = build_prediction(aug, config.Np, config.Nc)
    x_tilde = np.append(x, u_prev)
    qp = build_qp(pred, x_tilde, ref.reshape(-1), config)
    sol = solve_qp(qp)
    u = u_prev + float(sol.dU[0])
    u = min(max(u, config.u_min), config.u_max)
    return MpcStepResult(u, sol)
