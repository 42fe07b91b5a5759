"""RMS metrics and percentage comparisons between runs."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .simulate import SimLog

CHANNELS = ("lateral", "yaw_rate", "yaw_rate_err", "beta")
_SOURCE = {"lateral": "dY", "yaw_rate": "phi_dot", "yaw_rate_err": "yaw_rate_err",
           "beta": "beta"}


class ComparisonError(ValueError):
    pass


@dataclass(frozen=True)
class Metrics:
    name: str
    lateral: float
    yaw_rate: float
    yaw_rate_err: float
    beta: float
    X_start: float
    X_end: float
    steps: int

    def get(self, channel: str) -> float:
        return getattr(self, channel)


def rms(values) -> float:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("RMS of an empty series")
    return float(np.sqrt(np.mean(v * v)))


def compute_metrics(simlog: SimLog, name: str | None = None) -> Metrics:
    if not simlog.records:
        raise ValueError("empty log")
    vals = {ch: rms(simlog.column(src)) for ch, src in _SOURCE.items()}
    X = simlog.column("X")
    return Metrics(name or simlog.name or simlog.controller, X_start=float(X[0]),
                   X_end=float(X[-1]), steps=len(simlog), **vals)


def delta_rms(rms_a: float, rms_b: float) -> float:
    """Percentage improvement of A over B: ``(RMS_B - RMS_A) / RMS_B * 100``."""
    if rms_b == 0:
        return 0.0 if rms_a == 0 else -math.inf
    return (rms_b - rms_a) / rms_b * 100.0


def compare_runs(metrics: list[Metrics], baseline: int = -1, *,
                 station_tol: float = 2.0) -> list[dict]:
    """One row per non-baseline run with its ΔRMS against the baseline run.

    Runs must cover the same station range (within ``station_tol`` metres,
    which absorbs the last-step overshoot past the stop station).
    """
    if len(metrics) < 2:
        raise ComparisonError("need at least two runs to compare")
    base = metrics[baseline]
    rows = []
    for m in metrics:
        if m is base:
            continue
        if (abs(m.X_start - base.X_start) > station_tol
                or abs(m.X_end - base.X_end) > station_tol):
            raise ComparisonError(
                f"station ranges differ: {m.name} [{m.X_start:.2f}, {m.X_end:.2f}] vs "
                f"{base.name} [{base.X_start:.2f}, {base.X_end:.2f}]")
        row = {"run": m.name, "baseline": base.name}
        for ch in CHANNELS:
            row[ch] = delta_rms(m.get(ch), base.get(ch))
        rows.append(row)
    return rows


def metrics_table(metrics: list[Metrics]) -> list[dict]:
    return [{"run": m.name, **{ch: m.get(ch) for ch in CHANNELS}} for m in metrics]


def format_table(rows: list[dict], digits: int = 4) -> str:
    """Aligned plain-text rendering of a list of homogeneous dicts."""
    if not rows:
        return ""
    keys = list(rows[0])
    cells = [[str(k) for k in keys]]
    for r in rows:
        cells.append([v if isinstance(v, str) else f"{v:.{digits}f}" for v in r.values()])
    widths = [max(len(row[i]) for row in cells) for i in range(len(keys))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells)
