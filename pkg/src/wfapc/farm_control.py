"""Farm-level power dispatch: saturation compensation and thrust balancing.

Two integral loops adjust the uniform per-turbine power references:

* the compensation loop integrates the farm-total power error and adds the
  result to every set point, so unsaturated turbines cover for saturated ones;
* the thrust loop integrates, per turbine, the deviation of its thrust from
  the mean thrust of the unsaturated turbines.

Saturation flags use the weight convention ``s_i = 1`` for an *unsaturated*
turbine, ``s_i = 0`` for a saturated one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ANTI_WINDUP_MODES = ("conditional", "freeze")
BROADCAST_MODES = ("broadcast", "masked")


def total_error(p_ref_wf: float, p_meas) -> float:
    return float(p_ref_wf - np.sum(p_meas))


def mean_thrust(f_meas, s) -> float | None:
    """Mean thrust over unsaturated turbines, or None when all are saturated."""
    s = np.asarray(s, dtype=bool)
    m = int(s.sum())
    if m == 0:
        return None
    return float(np.sum(np.asarray(f_meas, dtype=float)[s]) / m)


def thrust_error(f_meas, s) -> np.ndarray | None:
    """``(W / M - I) F`` with saturated entries forced to zero.

    Returns None when no turbine is unsaturated (the mean is undefined).
    """
    s = np.asarray(s, dtype=bool)
    f = np.asarray(f_meas, dtype=float)
    mean = mean_thrust(f, s)
    if mean is None:
        return None
    return np.where(s, mean - f, 0.0)


def compose_setpoints(p_ref, dp_ccl, dp_tcl, rated_power):
    """Sum the three set-point contributions and clamp to ``[0, rated_power]``.

    Returns ``(p_dem, clamped)``.
    """
    raw = np.asarray(p_ref, dtype=float) + np.asarray(dp_ccl, dtype=float) + np.asarray(dp_tcl, dtype=float)
    p_dem = np.clip(raw, 0.0, rated_power)
    return p_dem, p_dem != raw


@dataclass
class FarmControllerState:
    n_turbines: int
    ccl_integrator: float = 0.0
    tcl_integral_error: np.ndarray = None
    s: np.ndarray = None
    last_setpoints: np.ndarray = None
    ccl_enabled: bool = True
    tcl_enabled: bool = True
    tcl_skipped: bool = False
    clamped: np.ndarray = field(default=None)

    def __post_init__(self):
        n = self.n_turbines
        if n < 1:
            raise ValueError("need at least one turbine")
        if self.tcl_integral_error is None:
            self.tcl_integral_error = np.zeros(n)
        if self.s is None:
            self.s = np.ones(n, dtype=bool)
        if self.last_setpoints is None:
            self.last_setpoints = np.zeros(n)
        if self.clamped is None:
            self.clamped = np.zeros(n, dtype=bool)

    @property
    def unsaturated_count(self) -> int:
        return int(np.sum(self.s))


def ccl_step(e_total: float, s, dt: float, state: FarmControllerState, gain: float | None = None,
             anti_windup: str = "conditional", at_rated=None) -> np.ndarray:
    """Advance the compensation integrator and return its per-turbine output.

    ``gain`` defaults to ``1 / (dt * N_t)``.  With every turbine saturated the
    integrator is frozen; in ``conditional`` mode it may still unwind when the
    farm over-produces (``e_total < 0``), in ``freeze`` mode it never moves.
    Turbines flagged in ``at_rated`` (set point clamped at rated power) count
    as saturated for this purpose only.
    """
    s = np.asarray(s, dtype=bool)
    n = state.n_turbines
    if gain is None:
        gain = 1.0 / (dt * n)
    if at_rated is not None:
        s = s & ~np.asarray(at_rated, dtype=bool)
    all_saturated = not s.any()
    if anti_windup == "freeze":
        hold = all_saturated
    elif anti_windup == "conditional":
        hold = all_saturated and e_total >= 0.0
    else:
        raise ValueError(f"unknown anti-windup mode {anti_windup!r}")
    if not hold:
        state.ccl_integrator = state.ccl_integrator + gain * e_total * dt
    return np.full(n, state.ccl_integrator)


def tcl_step(e_t, dt: float, gains, state: FarmControllerState) -> np.ndarray:
    """Integrate the thrust error and return ``K_I e_I``.

    ``e_t`` of None (no unsaturated turbine) leaves the integrators untouched.
    ``gains`` is a diagonal matrix or the vector of its diagonal.
    """
    k = np.asarray(gains, dtype=float)
    if k.ndim == 2:
        k = np.diag(k)
    if e_t is None:
        state.tcl_skipped = True
    else:
        state.tcl_skipped = False
        state.tcl_integral_error = state.tcl_integral_error + np.asarray(e_t, dtype=float) * dt
    return k * state.tcl_integral_error


class FarmController:
    """Stateful wrapper running both loops once per tick.

    ``step`` is called after all turbine measurements for the tick are in.
    """

    def __init__(self, n_turbines: int, dt: float, rated_power: float,
                 ccl_enabled: bool = True, tcl_enabled: bool = True,
                 ccl_gain: float | None = None, tcl_gains=0.5,
                 anti_windup: str = "conditional", ccl_distribution: str = "broadcast"):
        if anti_windup not in ANTI_WINDUP_MODES:
            raise ValueError(f"anti_windup must be one of {ANTI_WINDUP_MODES}")
        if ccl_distribution not in BROADCAST_MODES:
            raise ValueError(f"ccl_distribution must be one of {BROADCAST_MODES}")
        self.dt = dt
        self.rated_power = rated_power
        self.ccl_gain = 1.0 / (dt * n_turbines) if ccl_gain is None else float(ccl_gain)
        gains = np.broadcast_to(np.asarray(tcl_gains, dtype=float), (n_turbines,))
        if gains.ndim != 1 or np.any(gains <= 0):
            raise ValueError("thrust-loop gains must be positive")
        self.tcl_gains = np.diag(gains)
        self.anti_windup = anti_windup
        self.ccl_distribution = ccl_distribution
        self.state = FarmControllerState(n_turbines, ccl_enabled=ccl_enabled, tcl_enabled=tcl_enabled)

    def step(self, p_ref, p_meas, f_meas, saturated, active: bool = True):
        """Return the demanded power per turbine for this tick.

        ``p_ref`` is the per-turbine uniform reference, ``saturated`` the
        turbines' own saturation flags.  While ``active`` is False the loops
        hold their state and only the references (plus held corrections) pass.
        """
        st = self.state
        n = st.n_turbines
        st.s = ~np.asarray(saturated, dtype=bool)
        p_ref = np.broadcast_to(np.asarray(p_ref, dtype=float), (n,))
        dp_ccl = np.zeros(n)
        dp_tcl = np.zeros(n)
        if st.ccl_enabled:
            if active:
                e = total_error(float(np.sum(p_ref)), p_meas)
                at_rated = st.last_setpoints >= self.rated_power
                dp_ccl = ccl_step(e, st.s, self.dt, st, self.ccl_gain, self.anti_windup, at_rated)
            else:
                dp_ccl = np.full(n, st.ccl_integrator)
            if self.ccl_distribution == "masked":
                dp_ccl = np.where(st.s, dp_ccl, 0.0)
        if st.tcl_enabled:
            if active:
                dp_tcl = tcl_step(thrust_error(f_meas, st.s), self.dt, self.tcl_gains, st)
            else:
                dp_tcl = np.diag(self.tcl_gains) * st.tcl_integral_error
        p_dem, st.clamped = compose_setpoints(p_ref, dp_ccl, dp_tcl, self.rated_power)
        st.last_setpoints = p_dem
        self.last_corrections = (dp_ccl, dp_tcl)
        return p_dem
