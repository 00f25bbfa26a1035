"""Single-turbine closed loop: rotor dynamics, generator torque and pitch control.

All state-transition functions accept scalars or equal-length numpy arrays,
so a whole farm steps as one vectorised turbine set.  Nothing here mutates
its inputs; every step returns a fresh :class:`TurbineState`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np
from scipy.optimize import brentq

from .aero import BETZ_LIMIT, AeroTables

RPM = 2.0 * math.pi / 60.0


@dataclass(frozen=True)
class TurbineParams:
    """Turbine constants.  Defaults are the published 5 MW reference machine.

    Pitch gains act on the rotor-speed error (generator-speed error divided
    by the gearbox ratio).
    """

    rated_power: float = 5.0e6
    rotor_radius: float = 63.0
    air_density: float = 1.225
    gearbox_ratio: float = 97.0
    generator_efficiency: float = 0.944
    rated_generator_speed: float = 1173.7 * RPM
    # 3 blades + hub + 97^2 * generator, referred to the low-speed shaft
    drivetrain_inertia: float = 43_784_725.0
    greedy_gain: float = 2.332287
    cut_in_generator_speed: float = 670.0 * RPM
    region2_generator_speed: float = 871.0 * RPM
    region3_generator_speed: float = 1161.963 * RPM
    slip_percent: float = 10.0
    torque_rate_limit: float = 15_000.0
    torque_max: float = 47_402.91
    pitch_min: float = 0.0
    pitch_max: float = math.pi / 2
    pitch_rate_limit: float = math.radians(8.0)
    pitch_kp: float = 1.82620057
    pitch_ki: float = 0.19566438
    pitch_schedule_angle: float = 0.1099965
    speed_floor_fraction: float = 0.1
    saturation_hysteresis: float = 0.02 * 5.0e6

    def __post_init__(self):
        for f in fields(self):
            if f.name in ("pitch_min", "pitch_kp", "pitch_ki"):
                continue
            if not getattr(self, f.name) > 0:
                raise ValueError(f"TurbineParams.{f.name} must be strictly positive")
        if self.generator_efficiency > 1.0:
            raise ValueError("generator_efficiency must be <= 1")
        if self.pitch_min < 0 or self.pitch_min >= self.pitch_max:
            raise ValueError("pitch limits must satisfy 0 <= pitch_min < pitch_max")
        if not (self.cut_in_generator_speed < self.region2_generator_speed
                < self.region3_generator_speed < self.rated_generator_speed):
            raise ValueError("torque-schedule breakpoints must be increasing and below rated speed")

    @property
    def rotor_area(self) -> float:
        return math.pi * self.rotor_radius**2

    @property
    def rated_rotor_speed(self) -> float:
        return self.rated_generator_speed / self.gearbox_ratio

    @property
    def speed_floor(self) -> float:
        """Generator-speed guard for the tracking law."""
        return self.speed_floor_fraction * self.rated_generator_speed

    @property
    def rated_torque(self) -> float:
        return self.rated_power / (self.generator_efficiency * self.rated_generator_speed)

    @property
    def _region15_slope(self) -> float:
        w2 = self.region2_generator_speed
        return self.greedy_gain * w2**2 / (w2 - self.cut_in_generator_speed)

    @property
    def _synchronous_speed(self) -> float:
        return self.region3_generator_speed / (1.0 + 0.01 * self.slip_percent)

    @property
    def _region25_slope(self) -> float:
        w3 = self.region3_generator_speed
        return (self.rated_power / self.generator_efficiency / w3) / (w3 - self._synchronous_speed)

    @property
    def _region2_end_speed(self) -> float:
        # where the quadratic curve meets the region-2.5 line
        k, s25, sync = self.greedy_gain, self._region25_slope, self._synchronous_speed
        return (s25 - math.sqrt(s25 * (s25 - 4.0 * k * sync))) / (2.0 * k)


def _vector(value, n, dtype, fill=None):
    if value is None:
        return np.full(n, fill, dtype=dtype)
    if type(value) is np.ndarray and value.dtype == dtype and value.ndim == 1 and (n is None or value.size == n):
        return value
    arr = np.atleast_1d(np.asarray(value, dtype=dtype))
    return arr if n is None else np.broadcast_to(arr, (n,)).copy()


@dataclass
class TurbineState:
    """Dynamic state of one turbine, or of N turbines with array fields."""

    rotor_speed: np.ndarray
    pitch: np.ndarray
    generator_torque: np.ndarray
    wind_speed: np.ndarray
    gearbox_ratio: float = 97.0
    generator_efficiency: float = 0.944
    speed_error_integral: np.ndarray = None
    saturated: np.ndarray = None
    near_stall: np.ndarray = None
    speed_floor_hit: np.ndarray = None
    extrapolated: np.ndarray = None
    tip_speed_ratio: np.ndarray = field(default=None)
    power_coefficient: np.ndarray = field(default=None)
    thrust_coefficient: np.ndarray = field(default=None)
    thrust: np.ndarray = field(default=None)

    def __post_init__(self):
        self.rotor_speed = _vector(self.rotor_speed, None, float)
        n = self.rotor_speed.size
        self.pitch = _vector(self.pitch, n, float)
        self.generator_torque = _vector(self.generator_torque, n, float)
        self.wind_speed = _vector(self.wind_speed, n, float)
        self.speed_error_integral = _vector(self.speed_error_integral, n, float, 0.0)
        for name in ("saturated", "near_stall", "speed_floor_hit", "extrapolated"):
            setattr(self, name, _vector(getattr(self, name), n, bool, False))
        if (self.rotor_speed < 0).any():
            raise ValueError("rotor speed must be non-negative")

    @property
    def size(self) -> int:
        return self.rotor_speed.size

    @property
    def generator_speed(self) -> np.ndarray:
        return self.gearbox_ratio * self.rotor_speed

    @property
    def power(self) -> np.ndarray:
        """Measured electrical power, tau_gen * omega_gen * eta_gen."""
        return self.generator_torque * self.generator_speed * self.generator_efficiency


# --- generator torque -------------------------------------------------------


def tracking_torque(p_dem, omega_gen, eta, omega_floor: float = 0.0, torque_max: float = np.inf):
    """Torque that turns ``p_dem`` into electrical power at ``omega_gen``.

    At or below ``omega_floor`` the law is not evaluated and ``torque_max`` is
    returned instead; callers detect that case with ``omega_gen <= omega_floor``.
    """
    p_dem = np.asarray(p_dem, dtype=float)
    omega_gen = np.asarray(omega_gen, dtype=float)
    at_floor = omega_gen <= omega_floor
    safe = np.where(at_floor, 1.0, omega_gen)
    return np.where(at_floor, torque_max, p_dem / (safe * eta))


def greedy_torque(omega_gen, params: TurbineParams):
    """Variable-speed torque schedule: K w^2 with linear transitions, capped at torque_max."""
    w = np.asarray(omega_gen, dtype=float)
    p = params
    w_in, w2, w3 = p.cut_in_generator_speed, p.region2_generator_speed, p.region3_generator_speed
    w25 = p._region2_end_speed
    torque = np.where(
        w < w3,
        np.where(w < w25,
                 np.where(w < w2,
                          np.where(w < w_in, 0.0, p._region15_slope * (w - w_in)),
                          p.greedy_gain * w * w),
                 p._region25_slope * (w - p._synchronous_speed)),
        p.rated_power / (p.generator_efficiency * np.maximum(w, w3)),
    )
    return np.minimum(torque, p.torque_max)


def combined_torque(tau_greedy, tau_tracking):
    return np.minimum(tau_greedy, tau_tracking)


def rate_limit(target, previous, max_rate: float, dt: float):
    step = max_rate * dt
    return previous + np.minimum(np.maximum(np.asarray(target) - previous, -step), step)


def greedy_power(omega_gen, params: TurbineParams):
    """Electrical power the greedy schedule would extract at ``omega_gen``."""
    return greedy_torque(omega_gen, params) * np.asarray(omega_gen) * params.generator_efficiency


def saturation_flag(p_dem, p_greedy, hysteresis: float, previous=False):
    """Hysteretic saturation detector; True means saturated.

    Sets when demand exceeds the greedy power by more than ``hysteresis``,
    clears when it falls below by more than ``hysteresis``, holds otherwise.
    """
    p_dem = np.asarray(p_dem, dtype=float)
    p_greedy = np.asarray(p_greedy, dtype=float)
    previous = np.asarray(previous, dtype=bool)
    set_ = p_dem > p_greedy + hysteresis
    clear = p_dem < p_greedy - hysteresis
    return np.where(previous, ~clear, set_)


# --- aerodynamics -----------------------------------------------------------


def thrust_force(v_r, lam, theta, params: TurbineParams, tables: AeroTables):
    """Rotor thrust 0.5 rho pi R^2 v^2 C_T(lambda, theta).

    Returns ``(thrust, extrapolated)``; off-grid (lambda, theta) are clamped.
    """
    _, ct, outside = tables.lookup(lam, theta)
    v = np.asarray(v_r, dtype=float)
    return 0.5 * params.air_density * params.rotor_area * v**2 * ct, outside


def available_power(v_r, params: TurbineParams, tables: AeroTables):
    v = np.asarray(v_r, dtype=float)
    raw = 0.5 * params.air_density * params.rotor_area * v**3 * tables.cp_max
    return np.minimum(raw, params.rated_power)


def betz_power(v_r, params: TurbineParams):
    v = np.asarray(v_r, dtype=float)
    return BETZ_LIMIT * 0.5 * params.air_density * params.rotor_area * v**3


def _with_measurements(state: TurbineState, params: TurbineParams, tables: AeroTables) -> TurbineState:
    v = np.maximum(state.wind_speed, 1e-6)
    lam = state.rotor_speed * params.rotor_radius / v
    cp, ct, outside = tables.lookup(lam, state.pitch)
    state.tip_speed_ratio = lam
    state.power_coefficient = cp
    state.thrust_coefficient = ct
    state.thrust = 0.5 * params.air_density * params.rotor_area * state.wind_speed**2 * ct
    state.extrapolated = outside
    return state


def measure(state: TurbineState, v_r, params: TurbineParams, tables: AeroTables) -> TurbineState:
    """Re-evaluate lambda, C_P, C_T and thrust for a new rotor-effective wind."""
    return _with_measurements(replace(state, wind_speed=np.broadcast_to(v_r, (state.size,)).copy()),
                              params, tables)


# --- pitch ------------------------------------------------------------------


def pitch_step(omega_gen, dt: float, state: TurbineState, params: TurbineParams):
    """Gain-scheduled PI on rotor-speed error with integrator clamping.

    Returns ``(pitch, speed_error_integral)``.  The integrator is held inside
    the range that maps onto the pitch limits, and the command is then
    clamped to the limits and to the pitch rate.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    p = params
    error = (np.asarray(omega_gen, dtype=float) - p.rated_generator_speed) / p.gearbox_ratio
    gk = 1.0 / (1.0 + state.pitch / p.pitch_schedule_angle)
    integral = state.speed_error_integral + error * dt
    if p.pitch_ki > 0:
        integral = np.minimum(np.maximum(integral, p.pitch_min / (gk * p.pitch_ki)),
                              p.pitch_max / (gk * p.pitch_ki))
    command = np.minimum(np.maximum(gk * (p.pitch_kp * error + p.pitch_ki * integral), p.pitch_min),
                         p.pitch_max)
    pitch = rate_limit(command, state.pitch, p.pitch_rate_limit, dt)
    return pitch, integral


# --- rotor ------------------------------------------------------------------


def rotor_step(v_r, tau_gen, dt: float, state: TurbineState, params: TurbineParams,
               tables: AeroTables) -> TurbineState:
    """Forward-Euler step of J dw_r/dt = tau_aero - N tau_gen at the state's pitch."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    p = params
    v = np.maximum(np.broadcast_to(np.asarray(v_r, dtype=float), (state.size,)), 1e-6)
    omega = state.rotor_speed
    cp = tables.power_coefficient(omega * p.rotor_radius / v, state.pitch)
    tau_aero = 0.5 * p.air_density * p.rotor_area * v**3 * cp / omega
    tau_gen = np.broadcast_to(np.asarray(tau_gen, dtype=float), (state.size,))
    omega_new = omega + dt * (tau_aero - p.gearbox_ratio * tau_gen) / p.drivetrain_inertia
    floor = p.speed_floor / p.gearbox_ratio
    near_stall = omega_new < floor
    new = replace(state, rotor_speed=np.maximum(omega_new, floor),
                  generator_torque=tau_gen.copy(), wind_speed=v.copy(),
                  near_stall=near_stall)
    return _with_measurements(new, p, tables)


def control_step(p_dem, v_r, dt: float, state: TurbineState, params: TurbineParams,
                 tables: AeroTables, greedy_only: bool = False) -> TurbineState:
    """One turbine-controller tick: torque law, pitch PI, rotor update.

    The saturation flag is refreshed against ``p_dem`` before the torque is
    applied, using the greedy power at the current generator speed.
    """
    p = params
    omega_gen = state.generator_speed
    tau_greedy = greedy_torque(omega_gen, p)
    if greedy_only:
        tau = tau_greedy
        floor_hit = np.zeros(state.size, dtype=bool)
    else:
        tau_track = tracking_torque(p_dem, omega_gen, p.generator_efficiency, p.speed_floor, p.torque_max)
        floor_hit = omega_gen <= p.speed_floor
        tau = combined_torque(tau_greedy, tau_track)
    tau = rate_limit(np.minimum(tau, p.torque_max), state.generator_torque, p.torque_rate_limit, dt)
    saturated = saturation_flag(p_dem, greedy_power(omega_gen, p), p.saturation_hysteresis, state.saturated)
    pitch, integral = pitch_step(omega_gen, dt, state, p)
    pitched = replace(state, pitch=pitch, speed_error_integral=integral,
                      saturated=saturated, speed_floor_hit=floor_hit)
    return rotor_step(v_r, tau, dt, pitched, p, tables)


# --- initial conditions -----------------------------------------------------


def _aero_torque(omega_r, v, theta, params, tables):
    cp = float(tables.power_coefficient(omega_r * params.rotor_radius / v, theta))
    return 0.5 * params.air_density * params.rotor_area * v**3 * cp / omega_r


def steady_state(v_r, p_dem, params: TurbineParams, tables: AeroTables) -> TurbineState:
    """Settled operating point for each (wind, demand) pair.

    Turbines that can deliver ``p_dem`` sit at rated speed with the pitch
    that balances the rotor; the rest sit at the greedy equilibrium on fine
    pitch and are marked saturated.
    """
    p = params
    v_arr, d_arr = np.broadcast_arrays(np.atleast_1d(np.asarray(v_r, dtype=float)),
                                       np.atleast_1d(np.asarray(p_dem, dtype=float)))
    w_rated = p.rated_rotor_speed
    speeds, pitches, torques, saturated = [], [], [], []
    for v, demand in zip(v_arr, d_arr):
        v = max(float(v), 0.1)
        tau_gen = demand / (p.rated_generator_speed * p.generator_efficiency)
        need = p.gearbox_ratio * tau_gen

        def excess(theta):
            return _aero_torque(w_rated, v, theta, p, tables) - need

        if excess(p.pitch_min) >= 0.0:
            hi = min(p.pitch_max, float(tables.theta[-1]))
            theta = p.pitch_min if excess(hi) >= 0 else brentq(excess, p.pitch_min, hi, xtol=1e-12)
            speeds.append(w_rated)
            pitches.append(theta)
            torques.append(tau_gen)
            saturated.append(False)
            continue

        def balance(w):
            return _aero_torque(w, v, p.pitch_min, p, tables) - p.gearbox_ratio * float(
                greedy_torque(p.gearbox_ratio * w, p))

        floor = p.speed_floor / p.gearbox_ratio
        w = brentq(balance, floor * 1.0001, w_rated, xtol=1e-12) if balance(floor * 1.0001) > 0 else floor
        speeds.append(w)
        pitches.append(p.pitch_min)
        torques.append(float(greedy_torque(p.gearbox_ratio * w, p)))
        saturated.append(True)
    pitch = np.array(pitches)
    gk = 1.0 / (1.0 + pitch / p.pitch_schedule_angle)
    integral = pitch / (gk * p.pitch_ki) if p.pitch_ki > 0 else np.zeros_like(pitch)
    state = TurbineState(rotor_speed=np.array(speeds), pitch=pitch,
                         generator_torque=np.array(torques), wind_speed=v_arr.copy(),
                         gearbox_ratio=p.gearbox_ratio, generator_efficiency=p.generator_efficiency,
                         speed_error_integral=integral, saturated=np.array(saturated))
    return _with_measurements(state, p, tables)
