"""Closed-loop orchestration of plant, path-tracking MPC, DYC and allocation."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..allocation import AllocationProblem, allocate
from ..dyc import YawMomentController, reference_yaw_rate
from ..mpc import mpc_step
from ..schedule import schedule_params
from ..vehicle import (PlantInputs, PlantState, SimulationError, _vertical_loads,
                       integrate_step, plant_derivative, quasi_static_accel)
from .config import ScenarioConfig
from .scenario import PathReference, SpeedController, speed_target

log = logging.getLogger(__name__)

SCHEMA = "ampc_dyc.simlog/1"

COLUMNS = (
    "t", "X", "Y", "phi", "vx", "vy", "beta", "phi_dot", "phi_dot_ref", "delta_f", "Mz",
    "T_fl", "T_fr", "T_rl", "T_rr", "dY", "yaw_rate_err", "dyc_active",
    "Np", "Q_y", "R_delta", "Y_ref", "theta_ref", "v_target", "Fx_total",
    "qp_status", "qp_iterations", "qp_stationarity", "qp_feasibility",
    "qp_complementarity", "qp_eps", "alloc_status",
)
_INT_COLUMNS = {"dyc_active", "Np", "qp_iterations"}
_STR_COLUMNS = {"qp_status", "alloc_status"}


@dataclass
class SimLog:
    name: str = ""
    controller: str = ""
    records: list[dict] = field(default_factory=list)
    status: str = "ok"
    message: str = ""

    def __len__(self):
        return len(self.records)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.records], dtype=float)


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def log_to_csv(simlog: SimLog) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: {SCHEMA}; name: {simlog.name}; controller: {simlog.controller}; "
              f"status: {simlog.status}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for rec in simlog.records:
        w.writerow([_fmt(rec[c]) for c in COLUMNS])
    return buf.getvalue()


def write_log(simlog: SimLog, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(log_to_csv(simlog), encoding="utf-8")
    return path


def read_log(path: str | Path) -> SimLog:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    meta = {}
    if text and text[0].startswith("#"):
        for part in text[0][1:].split(";"):
            key, _, value = part.partition(":")
            meta[key.strip()] = value.strip()
        text = text[1:]
    if meta.get("schema", SCHEMA) != SCHEMA:
        raise ValueError(f"unsupported log schema {meta.get('schema')!r}")
    reader = csv.DictReader(text)
    records = []
    for row in reader:
        rec = {}
        for k, v in row.items():
            if k in _STR_COLUMNS:
                rec[k] = v
            elif k in _INT_COLUMNS:
                rec[k] = int(v)
            else:
                rec[k] = float(v)
        records.append(rec)
    return SimLog(meta.get("name", ""), meta.get("controller", ""), records,
                  meta.get("status", "ok"))


def run_scenario(config: ScenarioConfig) -> SimLog:
    """Simulate one scenario; the log stops at ``stop_X`` or ``max_time``.

    Plant failures (degenerate speed, wheel lift) end the run early and are
    reported through ``SimLog.status``; records up to the failure are kept.
    """
    p, road, mcfg, sim = config.vehicle, config.road, config.mpc, config.sim
    T = mcfg.T
    substeps = int(round(T / sim.dt))
    path = PathReference(config.path)
    speed = SpeedController(config.speed_control, p.m, 4.0 * p.Tmax / p.r)
    dyc = YawMomentController(config.dyc, p) if config.uses_dyc else None

    v0 = speed_target(config.speed, sim.X0)
    state = PlantState(sim.X0, sim.Y0, sim.phi0, max(v0, 0.5), 0.0, 0.0)
    u_prev = 0.0
    torques = (0.0, 0.0, 0.0, 0.0)
    out = SimLog(config.name, config.controller)
    n_steps = int(round(sim.max_time / T))

    for k in range(n_steps):
        if state.X >= sim.stop_X:
            break
        t = k * T
        try:
            if config.adaptive:
                Np, Q_y, R_delta = schedule_params(state.vx, config.schedule)
                cfg = mcfg.with_schedule(Np, Q_y, R_delta)
            else:
                cfg = mcfg
            window = path.window(state.X, state.vx * T, cfg.Np)
            step = mpc_step(state, u_prev, np.array(window), cfg, p, road)
            delta = step.delta_f
            sol = step.solution

            phi_dot_d, phi_dot_ref = reference_yaw_rate(state.vx, delta, road.mu, p)
            Mz, active = 0.0, False
            if dyc is not None:
                deriv = plant_derivative(state, PlantInputs(delta, torques), road, p)
                vx, vy = state.vx, state.vy
                beta_dot = (vx * deriv[4] - vy * deriv[3]) / (vx * vx + vy * vy)
                cmd = dyc.command(state, delta, beta_dot, road.mu)
                Mz, active = cmd.Mz, cmd.active

            v_t = speed_target(config.speed, state.X)
            Fx = speed.update(v_t, state.vx, T)
            ax, ay = quasi_static_accel(Fx, state.vx * state.phi_dot, road.mu, p)
            loads = _vertical_loads(ax, ay, p)
            if min(loads) <= 0:
                raise SimulationError("non-positive wheel load in allocation")
            alloc = allocate(AllocationProblem(Fx, Mz, loads, road.mu, p.r, p.d, p.Tmax))
            torques = tuple(alloc.torques)

            Y_ref, theta_ref = path.reference_at(state.X)
            out.records.append({
                "t": t, "X": state.X, "Y": state.Y, "phi": state.phi, "vx": state.vx,
                "vy": state.vy, "beta": state.beta, "phi_dot": state.phi_dot,
                "phi_dot_ref": phi_dot_ref, "delta_f": delta, "Mz": Mz,
                "T_fl": torques[0], "T_fr": torques[1], "T_rl": torques[2],
                "T_rr": torques[3], "dY": state.Y - Y_ref,
                "yaw_rate_err": state.phi_dot - phi_dot_ref, "dyc_active": int(active),
                "Np": cfg.Np, "Q_y": cfg.Q_y, "R_delta": cfg.R_delta,
                "Y_ref": Y_ref, "theta_ref": theta_ref, "v_target": v_t, "Fx_total": Fx,
                "qp_status": sol.status, "qp_iterations": sol.iterations,
                "qp_stationarity": sol.stationarity, "qp_feasibility": sol.feasibility,
                "qp_complementarity": sol.complementarity, "qp_eps": sol.eps,
                "alloc_status": alloc.status,
            })
            state = integrate_step(state, PlantInputs(delta, torques), road, p, sim.dt,
                                   substeps)
            u_prev = delta
        except SimulationError as exc:
            out.status = "aborted"
            out.message = f"t={t:.3f} s: {exc}"
            log.warning("%s aborted: %s", config.name, out.message)
            break
    return out
