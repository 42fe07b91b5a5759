"""Scenario configuration: nested frozen dataclasses with YAML round-tripping."""
from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml

from ..dyc import DycConfig, StabilityEnvelope
from ..mpc import MpcConfig
from ..schedule import ScheduleTable
from ..vehicle import RoadCondition, VehicleParams

CONTROLLERS = ("LTV_MPC", "AMPC", "LTV_MPC+DYC", "AMPC+DYC")


@dataclass(frozen=True)
class PathConfig:
    """Reference path.  ``straight`` uses ``Y0``; ``dlc`` the tanh geometry."""

    kind: str = "dlc"
    Y0: float = 0.0
    dy1: float = 4.05
    dy2: float = 5.7
    dx1: float = 25.0
    dx2: float = 21.95
    X1: float = 27.19
    X2: float = 56.46
    shape: float = 2.4
    X_min: float = -50.0
    X_max: float = 400.0

    def __post_init__(self):
        if self.kind not in ("straight", "dlc"):
            raise ValueError(f"unknown path kind {self.kind!r}")


@dataclass(frozen=True)
class SpeedConfig:
    """``constant`` holds ``v0_kmh``; ``ramp`` goes linearly in station from
    ``v0_kmh`` at X=0 to ``v1_kmh`` at ``ramp_end_X`` and then holds."""

    kind: str = "constant"
    v0_kmh: float = 60.0
    v1_kmh: float = 60.0
    ramp_end_X: float = 60.0

    def __post_init__(self):
        if self.kind not in ("constant", "ramp"):
            raise ValueError(f"unknown speed profile {self.kind!r}")
        for v in (self.v0_kmh, self.v1_kmh):
            if not 0 <= v <= 120:
                raise ValueError("speeds must lie within [0, 120] km/h")
        if self.kind == "ramp" and not self.ramp_end_X > 0:
            raise ValueError("ramp_end_X must be positive")


@dataclass(frozen=True)
class SpeedControlConfig:
    kp: float = 3.0
    ki: float = 0.3


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.001
    stop_X: float = 150.0
    max_time: float = 60.0
    X0: float = 0.0
    Y0: float = 0.0
    phi0: float = 0.0


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "scenario"
    controller: str = "AMPC"
    road: RoadCondition = field(default_factory=RoadCondition)
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    path: PathConfig = field(default_factory=PathConfig)
    speed: SpeedConfig = field(default_factory=SpeedConfig)
    mpc: MpcConfig = field(default_factory=MpcConfig)
    schedule: ScheduleTable = field(default_factory=ScheduleTable)
    dyc: DycConfig = field(default_factory=DycConfig)
    speed_control: SpeedControlConfig = field(default_factory=SpeedControlConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    output: str = ""

    def __post_init__(self):
        if self.controller not in CONTROLLERS:
            raise ValueError(f"controller must be one of {CONTROLLERS}")
        steps = self.mpc.T / self.sim.dt
        if abs(steps - round(steps)) > 1e-9 or round(steps) < 1:
            raise ValueError("controller period must be an integer multiple of dt")

    @property
    def adaptive(self) -> bool:
        return self.controller.startswith("AMPC")

    @property
    def uses_dyc(self) -> bool:
        return self.controller.endswith("+DYC")

    def with_controller(self, controller: str) -> "ScenarioConfig":
        return replace(self, controller=controller)

    def to_dict(self) -> dict:
        return _to_plain(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        return _from_plain(cls, data or {})


def _to_plain(obj):
    if isinstance(obj, ScheduleTable):
        return obj.to_dict()
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in fields(obj) if f.init}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    return obj


def _from_plain(cls, data):
    if cls is ScheduleTable:
        return ScheduleTable.from_dict(data)
    hints = typing.get_type_hints(cls)
    known = {f.name for f in fields(cls) if f.init}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown keys for {cls.__name__}: {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        tp = hints[name]
        if dataclasses.is_dataclass(tp) or tp is ScheduleTable:
            kwargs[name] = _from_plain(tp, value or {})
        elif tp is float:
            kwargs[name] = float(value)
        elif tp is int:
            kwargs[name] = int(value)
        else:
            kwargs[name] = value
    return cls(**kwargs)


def load_config(path: str | Path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return ScenarioConfig.from_dict(yaml.safe_load(fh))


class _Dumper(yaml.SafeDumper):
    pass


def _represent_list(dumper, data):
    flow = all(not isinstance(v, (list, dict)) for v in data)
    return dumper.represent_sequence("tag:yaml.org,2002:seq", data, flow_style=flow)


_Dumper.add_representer(list, _represent_list)


def dump_config(config: ScenarioConfig) -> str:
    return yaml.dump(config.to_dict(), Dumper=_Dumper, sort_keys=False)


def save_config(config: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(dump_config(config), encoding="utf-8")


# re-exported so config files and callers need a single import
__all__ = [
    "CONTROLLERS", "PathConfig", "SpeedConfig", "SpeedControlConfig", "SimConfig",
    "ScenarioConfig", "StabilityEnvelope", "load_config", "dump_config", "save_config",
]
