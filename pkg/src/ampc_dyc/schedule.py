"""Speed-scheduled prediction horizon and cost weights for adaptive MPC.

Three one-dimensional lookup tables indexed by vehicle speed in km/h.  Below
the first breakpoint the first row is held (this covers the 0-5 km/h freeze
band), between breakpoints the horizon and control weight are interpolated
linearly and the lateral weight log-linearly, and above the last breakpoint
the final segment is extrapolated linearly.  Clamps are applied last.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import NamedTuple


class ScheduleRow(NamedTuple):
    v_kmh: float
    Np: int
    Q_y: float
    R_delta: float


class Schedule(NamedTuple):
    Np: int
    Q_y: float
    R_delta: float


DEFAULT_BREAKPOINTS = (
    ScheduleRow(18.0, 16, 2400.0, 860.0),
    ScheduleRow(35.0, 21, 800.0, 1400.0),
    ScheduleRow(40.0, 23, 600.0, 1600.0),
    ScheduleRow(60.0, 45, 4.0, 2500.0),
    ScheduleRow(62.0, 48, 4.0, 2700.0),
    ScheduleRow(72.0, 63, 3.8, 3700.0),
)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class ScheduleTable:
    breakpoints: tuple[ScheduleRow, ...] = DEFAULT_BREAKPOINTS
    Np_max: int = 75
    Q_y_min: float = 2.0
    freeze_kmh: float = 5.0
    v_max_kmh: float = 120.0
    speeds: tuple[float, ...] = field(init=False, repr=False)

    def __post_init__(self):
        rows = tuple(ScheduleRow(*r) for r in self.breakpoints)
        if not rows:
            raise ValueError("schedule needs at least one breakpoint")
        speeds = tuple(float(r.v_kmh) for r in rows)
        if any(b <= a for a, b in zip(speeds, speeds[1:])):
            raise ValueError("breakpoint speeds must be strictly increasing")
        if speeds[0] < self.freeze_kmh:
            raise ValueError("first breakpoint must lie at or above the freeze band")
        for a, b in zip(rows, rows[1:]):
            if b.Np < a.Np or b.R_delta < a.R_delta or b.Q_y > a.Q_y:
                raise ValueError("schedule must raise Np and R_delta and lower Q_y with speed")
        if min(r.Q_y for r in rows) <= 0:
            raise ValueError("Q_y breakpoints must be positive")
        object.__setattr__(self, "breakpoints", rows)
        object.__setattr__(self, "speeds", speeds)

    def lookup_kmh(self, v_kmh: float) -> Schedule:
        v = min(max(float(v_kmh), 0.0), self.v_max_kmh)
        rows = self.breakpoints
        if v <= self.speeds[0] or len(rows) == 1:
            row = rows[0]
            return self._clamp(row.Np, row.Q_y, row.R_delta)
        i = bisect.bisect_right(self.speeds, v) - 1
        if v == self.speeds[i]:
            row = rows[i]
            return self._clamp(row.Np, row.Q_y, row.R_delta)
        if i >= len(rows) - 1:
            lo, hi = rows[-2], rows[-1]
            t = (v - lo.v_kmh) / (hi.v_kmh - lo.v_kmh)
            np_ = lo.Np + t * (hi.Np - lo.Np)
            qy = lo.Q_y + t * (hi.Q_y - lo.Q_y)
            rd = lo.R_delta + t * (hi.R_delta - lo.R_delta)
        else:
            lo, hi = rows[i], rows[i + 1]
            t = (v - lo.v_kmh) / (hi.v_kmh - lo.v_kmh)
            np_ = lo.Np + t * (hi.Np - lo.Np)
            qy = math.exp(math.log(lo.Q_y) + t * (math.log(hi.Q_y) - math.log(lo.Q_y)))
            rd = lo.R_delta + t * (hi.R_delta - lo.R_delta)
        return self._clamp(_round_half_up(np_), qy, rd)

    def _clamp(self, Np, Q_y, R_delta) -> Schedule:
        return Schedule(max(1, min(int(Np), self.Np_max)), max(float(Q_y), self.Q_y_min),
                        float(R_delta))

    def to_dict(self) -> dict:
        return {
            "breakpoints": [list(r) for r in self.breakpoints],
            "Np_max": self.Np_max,
            "Q_y_min": self.Q_y_min,
            "freeze_kmh": self.freeze_kmh,
            "v_max_kmh": self.v_max_kmh,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScheduleTable":
        data = dict(data)
        if "breakpoints" in data:
            data["breakpoints"] = tuple(
                ScheduleRow(float(r[0]), int(r[1]), float(r[2]), float(r[3]))
                for r in data["breakpoints"])
        return cls(**data)


def schedule_params(vx: float, table: ScheduleTable | None = None) -> Schedule:
    """(Np, Q_y, R_delta) for a longitudinal speed in m/s.

    The km/h conversion is rounded to 1e-9 so that speeds given as exact
    km/h values (e.g. ``62 / 3.6``) land on their breakpoints.
    """
    table = table or ScheduleTable()
    return table.lookup_kmh(round(vx * 3.6, 9))
