"""Scenario simulation loop.

Per tick, in order: wake advance, turbine measurement, farm controller,
set-point composition, turbine control and rotor update.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..aero import AeroTables
from ..farm_control import FarmController
from ..turbine import TurbineParams, TurbineState, control_step, measure, steady_state
from ..wake import FarmLayout, WakeField
from .config import ScenarioConfig
from .metrics import RunMetrics, compute_metrics
from .signals import ReferenceSignal

log = logging.getLogger(__name__)

PER_TURBINE_COLUMNS = ("P_dem", "P_meas", "F_T", "theta", "tau_gen", "omega_r", "s", "v_r")


class NumericalFailure(RuntimeError):
    """Non-finite value produced mid-run."""


def warm_start(layout: FarmLayout, ambient: float, p_dem, dt: float, params: TurbineParams,
               tables: AeroTables, expansion: float, iterations: int = 20):
    """Settled turbine states and a wake field consistent with them."""
    v = np.full(layout.size, ambient)
    state = steady_state(v, p_dem, params, tables)
    wake = WakeField(layout, ambient, dt, state.thrust_coefficient, expansion)
    for _ in range(iterations):
        v = wake.settle(state.thrust_coefficient)
        state = steady_state(v, p_dem, params, tables)
    # delays depend on the settled deficits
    wake = WakeField(layout, ambient, dt, state.thrust_coefficient, expansion)
    return state, wake


@dataclass
class RunResult:
    series: dict
    metrics: RunMetrics
    config: ScenarioConfig


class Simulation:
    """A farm scenario advanced one tick at a time.

    Attributes are public so tests and tools can perturb a running scenario
    (for example ``sim.wake.ambient``).
    """

    def __init__(self, config: ScenarioConfig, tables: AeroTables | None = None):
        self.config = config
        self.params = config.turbine_params()
        if tables is None:
            tables = AeroTables.load(config.aero_table) if config.aero_table else AeroTables.default()
        self.tables = tables
        self.dt = config.simulation.dt
        lay = config.layout
        self.layout = FarmLayout.grid(lay.rows, lay.columns, lay.spacing_diameters,
                                      2.0 * self.params.rotor_radius)
        self.n = self.layout.size
        self.reference = ReferenceSignal.from_config(config)
        ctl = config.controller
        self.controller = FarmController(
            self.n, self.dt, self.params.rated_power,
            ccl_enabled=ctl.setting_case >= 1, tcl_enabled=ctl.setting_case == 2,
            ccl_gain=ctl.ccl_gain, tcl_gains=ctl.tcl_gain,
            anti_windup=ctl.anti_windup, ccl_distribution=ctl.ccl_distribution)
        p0 = float(self.reference(0.0)) / self.n
        self.state, self.wake = warm_start(self.layout, config.wake.ambient_speed, p0, self.dt,
                                           self.params, self.tables, config.wake.expansion)
        self.rng = np.random.default_rng(config.simulation.seed)
        self.k = 0

    @property
    def time(self) -> float:
        return self.k * self.dt

    def step(self) -> dict:
        """Advance one tick and return the row recorded for it."""
        t = self.time
        ctl = self.config.controller
        v = self.wake.advance(self.state.thrust_coefficient)
        self.state = measured = measure(self.state, v, self.params, self.tables)
        p_ref_wf = float(self.reference(t))
        p_ref = np.full(self.n, p_ref_wf / self.n)
        f_meas = measured.thrust
        if ctl.output_disturbance_std > 0:
            f_meas = f_meas + self.rng.normal(0.0, ctl.output_disturbance_std, self.n)
        p_dem = self.controller.step(p_ref, measured.power, f_meas, measured.saturated,
                                     active=t >= ctl.start_time)
        p_applied = p_dem
        if ctl.input_disturbance_std > 0:
            p_applied = np.clip(p_dem + self.rng.normal(0.0, ctl.input_disturbance_std, self.n),
                                0.0, self.params.rated_power)
        self.state = control_step(p_applied, v, self.dt, measured, self.params, self.tables)
        row = {
            "t": t, "P_dem": p_dem, "P_meas": measured.power, "F_T": measured.thrust,
            "theta": measured.pitch, "tau_gen": measured.generator_torque,
            "omega_r": measured.rotor_speed, "s": (~measured.saturated).astype(int),
            "v_r": measured.wind_speed, "P_ref_WF": p_ref_wf,
            "P_meas_WF": float(np.sum(measured.power)),
            "u_P": self.controller.state.ccl_integrator,
        }
        check = np.concatenate([p_dem, self.state.rotor_speed, self.state.thrust, self.state.pitch,
                                [self.controller.state.ccl_integrator]])
        if not np.isfinite(check).all():
            raise NumericalFailure(f"non-finite value at t={t:.1f} s")
        self.k += 1
        return row

    def run(self, steps: int | None = None) -> dict:
        steps = self.config.n_steps if steps is None else steps
        rows = [self.step() for _ in range(steps)]
        return collect(rows)


def collect(rows) -> dict:
    series = {}
    for key in rows[0]:
        series[key] = np.array([r[key] for r in rows])
    return series


def run_scenario(config: ScenarioConfig, tables: AeroTables | None = None,
                 write: bool = True) -> RunResult:
    sim = Simulation(config, tables)
    series = sim.run()
    m = config.metrics
    occupancy = m.occupancy_window or [config.controller.start_time, config.simulation.duration]
    metrics = compute_metrics(series, config.simulation.dt, m.rms_window, occupancy)
    result = RunResult(series, metrics, config)
    if write and config.output.directory:
        write_run(result, config.output.directory)
    return result


def write_timeseries(path, series: dict) -> None:
    n = series["P_dem"].shape[1]
    header = ["t"]
    for i in range(1, n + 1):
        header += [f"{c}_{i}" for c in PER_TURBINE_COLUMNS]
    header += ["P_ref_WF", "P_meas_WF", "u_P"]
    per = np.stack([series[c] for c in PER_TURBINE_COLUMNS], axis=2).reshape(len(series["t"]), -1)
    table = np.column_stack([series["t"], per, series["P_ref_WF"], series["P_meas_WF"], series["u_P"]])
    np.savetxt(path, table, delimiter=",", header=",".join(header), comments="", fmt="%.12g")


def read_timeseries(path) -> dict:
    data = np.genfromtxt(path, delimiter=",", names=True)
    names = data.dtype.names
    n = sum(1 for c in names if c.startswith("P_dem_"))
    series = {"t": data["t"], "P_ref_WF": data["P_ref_WF"], "P_meas_WF": data["P_meas_WF"],
              "u_P": data["u_P"]}
    for c in PER_TURBINE_COLUMNS:
        series[c] = np.column_stack([data[f"{c}_{i}"] for i in range(1, n + 1)])
    return series


def write_run(result: RunResult, directory) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    write_timeseries(out / "timeseries.csv", result.series)
    (out / "metrics.json").write_text(result.metrics.to_json() + "\n")
    result.config.dump(out / "config.yaml")
    log.info("wrote run to %s", out)
    return out
