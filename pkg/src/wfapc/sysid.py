"""Thrust-response identification from an open-loop power step.

A single turbine is stepped in demanded power and its thrust response is
fitted with ``F(s) / P(s) = K1 / (T1 s + 1)``.  The continuous model is then
discretised with forward Euler and replicated into the diagonal farm model
``x(k+1) = A x(k) + B u(k)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import lfilter

from .aero import AeroTables
from .turbine import TurbineParams, control_step, measure, steady_state


class IdentificationError(RuntimeError):
    """The fit could not produce a usable first-order model."""


class InvalidExperiment(ValueError):
    """The step experiment violates its preconditions (e.g. saturation)."""


@dataclass
class StepExperiment:
    time: np.ndarray
    power_demand: np.ndarray
    thrust: np.ndarray
    baseline_power: float
    step_size: float
    inflow: float
    step_index: int

    def __post_init__(self):
        self.time = np.asarray(self.time, dtype=float)
        self.power_demand = np.asarray(self.power_demand, dtype=float)
        self.thrust = np.asarray(self.thrust, dtype=float)
        if not (self.time.shape == self.power_demand.shape == self.thrust.shape):
            raise ValueError("time, power and thrust series must have equal length")
        if self.time.size < 3:
            raise ValueError("experiment too short")
        steps = np.diff(self.time)
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
            raise ValueError("experiment must be uniformly sampled")
        if not 0 < self.step_index < self.time.size:
            raise ValueError("step index outside the record")

    @property
    def dt(self) -> float:
        return float(self.time[1] - self.time[0])

    def save(self, path) -> None:
        header = (f"baseline_power={self.baseline_power!r}\nstep_size={self.step_size!r}\n"
                  f"inflow={self.inflow!r}\nstep_index={self.step_index}\nt,P_dem,F_T")
        np.savetxt(path, np.column_stack([self.time, self.power_demand, self.thrust]),
                   delimiter=",", header=header, fmt="%.17g")

    @classmethod
    def load(cls, path) -> "StepExperiment":
        meta = {}
        with open(path) as fh:
            for line in fh:
                if not line.startswith("#"):
                    break
                key, sep, value = line[1:].strip().partition("=")
                if sep:
                    meta[key.strip()] = value.strip()
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
        return cls(data[:, 0], data[:, 1], data[:, 2], float(meta["baseline_power"]),
                   float(meta["step_size"]), float(meta["inflow"]), int(meta["step_index"]))


@dataclass
class LinearThrustModel:
    K1: float
    T1: float
    T_s: float
    fit_percent: float

    def __post_init__(self):
        if self.T1 <= 0:
            raise IdentificationError("time constant must be positive")

    @property
    def a(self) -> float:
        return discretize_fe(self.K1, self.T1, self.T_s)[0]

    @property
    def b(self) -> float:
        return discretize_fe(self.K1, self.T1, self.T_s)[1]

    def save(self, path) -> None:
        lines = ["# first-order thrust model F/P = K1 / (T1 s + 1)"]
        for key in ("K1", "T1", "T_s", "a", "b", "fit_percent"):
            lines.append(f"{key} = {getattr(self, key)!r}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "LinearThrustModel":
        values = {}
        for raw in Path(path).read_text().splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}: malformed line {raw!r}")
            values[key.strip()] = float(value)
        missing = {"K1", "T1", "T_s"} - set(values)
        if missing:
            raise ValueError(f"{path}: missing {sorted(missing)}")
        return cls(values["K1"], values["T1"], values["T_s"], values.get("fit_percent", math.nan))


def run_step_experiment(params: TurbineParams, tables: AeroTables, inflow: float = 12.0,
                        baseline_power: float = 2.5e6, step_size: float = 1.0e6,
                        step_time: float = 30.0, duration: float = 90.0,
                        dt: float = 0.1) -> StepExperiment:
    """Open-loop power step on one turbine in uniform inflow.

    Raises InvalidExperiment if the turbine saturates at any point, because
    the recorded response would then not be the tracking response.
    """
    if step_size == 0:
        raise InvalidExperiment("a zero step carries no information")
    n = int(round(duration / dt))
    k_step = int(round(step_time / dt))
    state = steady_state(inflow, baseline_power, params, tables)
    if state.saturated[0]:
        raise InvalidExperiment(f"baseline {baseline_power:.4g} W exceeds the power available at {inflow} m/s")
    t = np.arange(n) * dt
    demand = np.where(np.arange(n) >= k_step, baseline_power + step_size, baseline_power)
    thrust = np.empty(n)
    for k in range(n):
        state = measure(state, inflow, params, tables)
        thrust[k] = state.thrust[0]
        state = control_step(demand[k:k + 1], inflow, dt, state, params, tables)
        if state.saturated[0]:
            raise InvalidExperiment(f"turbine saturated at t={t[k]:.1f} s")
    return StepExperiment(t, demand, thrust, baseline_power, step_size, inflow, k_step)


def first_order_response(u, gain: float, tau: float, dt: float) -> np.ndarray:
    """Sampled output of ``gain / (tau s + 1)`` driven by the held input ``u``."""
    alpha = math.exp(-dt / tau)
    return lfilter([0.0, gain * (1.0 - alpha)], [1.0, -alpha], u)


def fit_percent(y, y_hat) -> float:
    y = np.asarray(y, dtype=float)
    spread = np.linalg.norm(y - y.mean())
    if spread == 0:
        raise IdentificationError("output has no variation")
    return float(100.0 * (1.0 - np.linalg.norm(y - y_hat) / spread))


def fit_first_order(exp: StepExperiment) -> LinearThrustModel:
    """Least-squares (K1, T1) on the de-trended step response."""
    k0 = exp.step_index
    u = exp.power_demand - exp.power_demand[:k0].mean()
    y = exp.thrust - exp.thrust[:k0].mean()
    if not np.any(u) or np.ptp(y) == 0:
        raise IdentificationError("output does not deviate from its baseline")
    dt = exp.dt

    # the response is linear in K1, so each grid T1 gets its optimal gain
    best = None
    for tau in np.geomspace(dt / 10, 100.0 * exp.time[-1], 80):
        unit = first_order_response(u, 1.0, tau, dt)
        denom = unit @ unit
        if denom == 0:
            continue
        gain = (unit @ y) / denom
        cost = np.sum((y - gain * unit) ** 2)
        if best is None or cost < best[0]:
            best = (cost, gain, tau)
    _, gain0, tau0 = best

    scale = max(abs(gain0), 1e-300)

    def residual(p):
        return (first_order_response(u, p[0] * scale, math.exp(p[1]), dt) - y) / np.ptp(y)

    sol = least_squares(residual, [gain0 / scale, math.log(tau0)], xtol=1e-14, ftol=1e-14, gtol=1e-14)
    if not sol.success or not np.all(np.isfinite(sol.x)):
        raise IdentificationError(f"fit did not converge: {sol.message}")
    gain, tau = sol.x[0] * scale, math.exp(sol.x[1])
    y_hat = first_order_response(u, gain, tau, dt)
    return LinearThrustModel(float(gain), float(tau), dt, fit_percent(y, y_hat))


def discretize_fe(K1: float, T1: float, T_s: float) -> tuple[float, float]:
    """Forward-Euler ``a = 1 - T_s/T1`` and ``b = T_s K1 / T1``."""
    if T1 <= 0:
        raise ValueError("T1 must be positive")
    if not 0 < T_s < T1:
        raise ValueError(f"forward Euler needs 0 < T_s < T1 (T_s={T_s}, T1={T1})")
    return 1.0 - T_s / T1, T_s * K1 / T1


def assemble_AB(a: float, b: float, n_turbines: int) -> tuple[np.ndarray, np.ndarray]:
    if n_turbines < 1:
        raise ValueError("need at least one turbine")
    eye = np.eye(n_turbines)
    return a * eye, b * eye


def identify(config, tables: AeroTables | None = None) -> tuple[StepExperiment, LinearThrustModel]:
    """Run the configured step experiment and fit it."""
    if tables is None:
        tables = AeroTables.load(config.aero_table) if config.aero_table else AeroTables.default()
    ident = config.identification
    exp = run_step_experiment(config.turbine_params(), tables, ident.inflow, ident.baseline_power,
                              ident.step_size, ident.step_time, ident.duration, config.simulation.dt)
    return exp, fit_first_order(exp)
