"""Scenario configuration: YAML file <-> nested dataclasses."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..turbine import TurbineParams


class ConfigError(ValueError):
    """Invalid or inconsistent scenario configuration."""


# time (s), level (fraction of total rated power); rescaled so the peak hits peak_fraction
DEFAULT_PROGRAM = [
    [300.0, 0.50], [400.0, 0.70], [600.0, 0.70], [660.0, 0.62], [720.0, 0.66],
    [800.0, 0.70], [900.0, 0.70], [960.0, 0.56], [1050.0, 0.62], [1200.0, 0.60],
]


@dataclass
class LayoutConfig:
    rows: int = 3
    columns: int = 3
    spacing_diameters: float = 5.0


@dataclass
class WakeConfig:
    ambient_speed: float = 13.0
    expansion: float = 0.05


@dataclass
class ControllerConfig:
    setting_case: int = 2
    start_time: float = 300.0
    ccl_gain: float | None = None
    tcl_gain: float = 0.5
    anti_windup: str = "conditional"
    ccl_distribution: str = "broadcast"
    input_disturbance_std: float = 0.0
    output_disturbance_std: float = 0.0


@dataclass
class SignalConfig:
    derate_fraction: float = 0.5
    peak_fraction: float = 0.7
    program: list = field(default_factory=lambda: [list(k) for k in DEFAULT_PROGRAM])
    file: str | None = None


@dataclass
class SimulationConfig:
    duration: float = 1200.0
    dt: float = 0.1
    seed: int = 0


@dataclass
class MetricsConfig:
    rms_window: list = field(default_factory=lambda: [300.0, 1000.0])
    occupancy_window: list | None = None


@dataclass
class IdentificationConfig:
    """Open-loop single-turbine step experiment."""

    inflow: float = 12.0
    baseline_power: float = 2.5e6
    step_size: float = 1.0e6
    step_time: float = 30.0
    duration: float = 90.0


@dataclass
class OutputConfig:
    directory: str | None = None


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    layout: LayoutConfig = field(default_factory=LayoutConfig)
    turbine: dict = field(default_factory=dict)
    aero_table: str | None = None
    wake: WakeConfig = field(default_factory=WakeConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    signal: SignalConfig = field(default_factory=SignalConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    identification: IdentificationConfig = field(default_factory=IdentificationConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def __post_init__(self):
        self.validate()

    @property
    def n_turbines(self) -> int:
        return self.layout.rows * self.layout.columns

    @property
    def n_steps(self) -> int:
        return int(round(self.simulation.duration / self.simulation.dt))

    def turbine_params(self) -> TurbineParams:
        try:
            return TurbineParams(**self.turbine)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"turbine: {exc}") from None

    def validate(self) -> None:
        sim, sig, ctl = self.simulation, self.signal, self.controller
        if sim.dt <= 0:
            raise ConfigError("simulation.dt must be positive")
        if sim.duration <= 0:
            raise ConfigError("simulation.duration must be positive")
        if abs(sim.duration / sim.dt - round(sim.duration / sim.dt)) > 1e-6:
            raise ConfigError("simulation.duration must be a multiple of simulation.dt")
        if not 0 < sig.derate_fraction <= 1:
            raise ConfigError("signal.derate_fraction must lie in (0, 1]")
        if not 0 < sig.peak_fraction <= 1:
            raise ConfigError("signal.peak_fraction must lie in (0, 1]")
        if sig.file is None:
            times = [k[0] for k in sig.program]
            if len(sig.program) < 1 or any(len(k) != 2 for k in sig.program):
                raise ConfigError("signal.program must be a list of [time, level] pairs")
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ConfigError("signal.program times must be strictly increasing")
            if max(k[1] for k in sig.program) <= 0:
                raise ConfigError("signal.program needs a positive level")
        if ctl.setting_case not in (0, 1, 2):
            raise ConfigError("controller.setting_case must be 0 (open loop), 1 or 2")
        if ctl.anti_windup not in ("conditional", "freeze"):
            raise ConfigError("controller.anti_windup must be 'conditional' or 'freeze'")
        if ctl.ccl_distribution not in ("broadcast", "masked"):
            raise ConfigError("controller.ccl_distribution must be 'broadcast' or 'masked'")
        if ctl.tcl_gain <= 0:
            raise ConfigError("controller.tcl_gain must be positive")
        if self.wake.ambient_speed <= 0:
            raise ConfigError("wake.ambient_speed must be positive")
        if self.layout.rows < 1 or self.layout.columns < 1:
            raise ConfigError("layout needs at least one row and one column")
        lo, hi = self.metrics.rms_window
        if not 0 <= lo < hi <= sim.duration + 1e-9:
            raise ConfigError("metrics.rms_window must lie inside the run")
        ident = self.identification
        if ident.inflow <= 0:
            raise ConfigError("identification.inflow must be positive")
        if ident.baseline_power < 0:
            raise ConfigError("identification.baseline_power must be non-negative")
        if not 0 < ident.step_time < ident.duration:
            raise ConfigError("identification.step_time must lie inside the experiment")
        self.turbine_params()

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        data = dict(data or {})
        sections = {f.name: f for f in dataclasses.fields(cls)}
        unknown = set(data) - set(sections)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        kwargs = {}
        for name, value in data.items():
            ftype = sections[name].default_factory if sections[name].default_factory is not dataclasses.MISSING else None
            if dataclasses.is_dataclass(ftype):
                if not isinstance(value, dict):
                    raise ConfigError(f"section {name!r} must be a mapping")
                allowed = {f.name for f in dataclasses.fields(ftype)}
                bad = set(value) - allowed
                if bad:
                    raise ConfigError(f"unknown keys in {name!r}: {sorted(bad)}")
                kwargs[name] = ftype(**value)
            else:
                kwargs[name] = value
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        try:
            data = yaml.safe_load(Path(path).read_text())
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if data is not None and not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        try:
            return cls.from_dict(data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def dump(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False))
