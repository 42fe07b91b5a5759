"""One-parameter sweeps of the fixed-parameter MPC and their response features."""
from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .config import ScenarioConfig
from .simulate import COLUMNS, SimLog, _fmt, run_scenario

log = logging.getLogger(__name__)

SWEEP_PARAMETERS = ("Np", "Q_y", "R_delta")
STANDARD_SWEEPS = {
    "Np": (25, 30, 35, 40),
    "Q_y": (50.0, 75.0, 100.0, 125.0),
    "R_delta": (500.0, 1500.0, 2500.0, 3500.0),
}


@dataclass
class SweepRun:
    parameter: str
    value: float
    log: SimLog | None
    error: str = ""


@dataclass(frozen=True)
class StepFeatures:
    """Response features of a step in the lateral reference."""

    rise_X: float          # first station where Y covers ``rise_fraction`` of the step
    rise_time: float
    approach_rate: float   # rise_fraction * step / rise_time, in m/s
    peak_yaw_rate: float
    overshoot: float


def sweep_config(base: ScenarioConfig, parameter: str, value) -> ScenarioConfig:
    if parameter not in SWEEP_PARAMETERS:
        raise ValueError(f"sweep parameter must be one of {SWEEP_PARAMETERS}")
    value = int(value) if parameter == "Np" else float(value)
    mpc = replace(base.mpc, **{parameter: value})
    if parameter == "Np" and mpc.Nc > value:
        mpc = replace(mpc, Nc=value)
    # sweeps study the fixed-parameter controller
    ctrl = "LTV_MPC+DYC" if base.uses_dyc else "LTV_MPC"
    return replace(base, mpc=mpc, controller=ctrl, name=f"{base.name}-{parameter}={value:g}")


def _run_one(args) -> SweepRun:
    base, parameter, value = args
    try:
        return SweepRun(parameter, float(value), run_scenario(sweep_config(base, parameter, value)))
    except Exception as exc:  # keep the rest of the family going
        log.warning("sweep %s=%s failed: %s", parameter, value, exc)
        return SweepRun(parameter, float(value), None, str(exc))


def sweep(parameter: str, values, base: ScenarioConfig, jobs: int = 1) -> list[SweepRun]:
    values = [float(v) for v in values]
    if not all(np.isfinite(values)):
        raise ValueError("sweep values must be finite")
    tasks = [(base, parameter, v) for v in values]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_one, tasks))
    return [_run_one(t) for t in tasks]


def sweep_to_csv(runs: list[SweepRun]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("parameter", "value", "status") + COLUMNS)
    for run in runs:
        if run.log is None:
            continue
        for rec in run.log.records:
            w.writerow([run.parameter, _fmt(run.value), run.log.status]
                       + [_fmt(rec[c]) for c in COLUMNS])
    return buf.getvalue()


def step_features(simlog: SimLog, Y_target: float, Y_start: float = 0.0,
                  rise_fraction: float = 0.9) -> StepFeatures:
    Y = simlog.column("Y")
    X = simlog.column("X")
    t = simlog.column("t")
    step = Y_target - Y_start
    progress = (Y - Y_start) / step
    hit = np.nonzero(progress >= rise_fraction)[0]
    if hit.size:
        i = int(hit[0])
        # interpolate the crossing between the bracketing samples
        if i > 0:
            f = (rise_fraction - progress[i - 1]) / (progress[i] - progress[i - 1])
            rise_X = X[i - 1] + f * (X[i] - X[i - 1])
            rise_t = t[i - 1] + f * (t[i] - t[i - 1])
        else:
            rise_X, rise_t = X[0], t[0]
    else:
        rise_X, rise_t = float("inf"), float("inf")
    rate = rise_fraction * abs(step) / rise_t if rise_t > 0 else float("inf")
    return StepFeatures(float(rise_X), float(rise_t), float(rate),
                        float(np.max(np.abs(simlog.column("phi_dot")))),
                        float(max(np.max(progress) - 1.0, 0.0) * abs(step)))
