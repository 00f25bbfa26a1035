import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wfapc.turbine import (TurbineParams, TurbineState, available_power, betz_power, combined_torque,
                           control_step, greedy_power, greedy_torque, measure, pitch_step, rate_limit,
                           rotor_step, saturation_flag, steady_state, thrust_force, tracking_torque)


def test_default_parameters(params):
    assert params.rated_power == 5e6
    assert params.rotor_radius == 63.0
    assert params.gearbox_ratio == 97.0
    assert params.rated_generator_speed == pytest.approx(122.9096, abs=1e-4)


def test_tracking_torque_zero_demand():
    assert tracking_torque(0.0, 100.0, 0.944) == 0.0


def test_tracking_torque_values():
    # oracle: plain float arithmetic
    assert tracking_torque(2.5e6, 122.9, 0.944) == pytest.approx(2.5e6 / (122.9 * 0.944), rel=1e-15)
    assert float(tracking_torque(2.5e6, 122.9, 0.944)) == pytest.approx(21548.45, abs=0.01)
    assert float(tracking_torque(2.5e6, 61.45, 0.944)) == pytest.approx(43096.91, abs=0.01)


def test_tracking_torque_speed_floor(params):
    tau = tracking_torque(1e6, params.speed_floor, params.generator_efficiency,
                          params.speed_floor, params.torque_max)
    assert tau == params.torque_max


def test_greedy_torque_regions(params):
    assert greedy_torque(0.0, params) == 0.0
    assert 2.332287 * 80.0**2 == pytest.approx(14926.64, abs=0.01)
    # the quadratic law only holds between the region-2 breakpoints
    assert float(greedy_torque(100.0, params)) == pytest.approx(2.332287 * 100.0**2, rel=1e-12)
    assert params.region2_generator_speed > 80.0
    assert float(greedy_torque(80.0, params)) < 2.332287 * 80.0**2
    rated = params.rated_generator_speed
    assert float(greedy_torque(rated, params)) == pytest.approx(
        params.rated_power / (params.generator_efficiency * rated), rel=1e-12)


def test_greedy_torque_continuous(params):
    w = np.linspace(60.0, 130.0, 20001)
    tau = greedy_torque(w, params)
    assert np.max(np.abs(np.diff(tau))) < 20.0


def test_combined_torque_min_law():
    assert combined_torque(100.0, 50.0) == 50.0
    assert combined_torque(50.0, 100.0) == 50.0


def test_rate_limit_bounds_step():
    assert rate_limit(1e6, 0.0, 15000.0, 0.1) == pytest.approx(1500.0)
    assert rate_limit(-1e6, 0.0, 15000.0, 0.1) == pytest.approx(-1500.0)
    assert rate_limit(10.0, 0.0, 15000.0, 0.1) == 10.0


def test_saturation_flag_examples():
    h = 1e5
    assert not saturation_flag(2e6, 5e6, h)
    assert saturation_flag(5e6, 4e6, h)


def test_saturation_flag_does_not_chatter():
    rng = np.random.default_rng(1)
    eps = rng.uniform(-0.9e5, 0.9e5, 100)
    flag = False
    transitions = 0
    for e in eps:
        new = bool(saturation_flag(4e6 + e, 4e6, 1e5, flag))
        transitions += new != flag
        flag = new
    assert transitions <= 1


def test_thrust_force_value(params, tables):
    # C_T = 0.6 is reached on the theta = 0 column between grid lambdas; use a
    # flat table to pin the coefficient.
    from wfapc.aero import AeroTables
    flat = AeroTables([1.0, 20.0], [0.0, 1.0], np.full((2, 2), 0.4), np.full((2, 2), 0.6))
    f, outside = thrust_force(12.0, 7.0, 0.1, params, flat)
    oracle = 0.5 * 1.225 * math.pi * 63.0**2 * 144.0 * 0.6
    assert f == pytest.approx(oracle, rel=1e-14)
    assert float(f) == pytest.approx(659858.49, abs=0.01)
    assert not outside
    zero = AeroTables([1.0, 20.0], [0.0, 1.0], np.zeros((2, 2)), np.zeros((2, 2)))
    assert thrust_force(12.0, 7.0, 0.1, params, zero)[0] == 0.0


def test_available_power(params, tables):
    assert available_power(0.0, params, tables) == 0.0
    assert available_power(50.0, params, tables) == params.rated_power
    oracle = 0.5 * 1.225 * math.pi * 63.0**2 * 1000.0 * 0.482
    assert float(available_power(10.0, params, tables)) == pytest.approx(oracle, rel=1e-12)
    assert oracle == pytest.approx(3.68e6, rel=1e-3)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 40.0))
def test_available_power_below_betz(v):
    from wfapc.aero import AeroTables
    p = TurbineParams()
    assert available_power(v, p, AeroTables.default()) <= betz_power(v, p) + 1e-9


def test_pitch_hold_at_rated(params):
    state = TurbineState(params.rated_rotor_speed, 0.05, 0.0, 15.0, speed_error_integral=0.05 / params.pitch_ki
                         * (1 + 0.05 / params.pitch_schedule_angle))
    pitch, _ = pitch_step(params.rated_generator_speed, 0.1, state, params)
    assert pitch == pytest.approx(0.05, abs=1e-12)


def test_pitch_pi_closed_form():
    p = TurbineParams(pitch_schedule_angle=1e12, pitch_rate_limit=100.0)
    e_gen = 2.0  # generator-speed error, rad/s
    e = e_gen / p.gearbox_ratio
    state = TurbineState(0.0, 0.0, 0.0, 15.0)
    n = 5
    for _ in range(n):
        pitch, integral = pitch_step(p.rated_generator_speed + e_gen, 0.1, state, p)
        state = TurbineState(0.0, pitch, 0.0, 15.0, speed_error_integral=integral)
    assert float(pitch[0]) == pytest.approx(p.pitch_kp * e + p.pitch_ki * e * n * 0.1, rel=1e-6)


def test_pitch_rests_at_fine_pitch_below_rated(params):
    state = TurbineState(0.0, 0.0, 0.0, 8.0)
    for _ in range(50):
        pitch, integral = pitch_step(0.8 * params.rated_generator_speed, 0.1, state, params)
        state = TurbineState(0.0, pitch, 0.0, 8.0, speed_error_integral=integral)
    assert float(pitch[0]) == params.pitch_min


def test_rotor_equilibrium(params, tables):
    st0 = steady_state(15.0, 4e6, params, tables)
    after = rotor_step(15.0, st0.generator_torque, 0.1, st0, params, tables)
    assert float(after.rotor_speed[0]) == pytest.approx(float(st0.rotor_speed[0]), rel=1e-9)


def test_rotor_accelerates_without_torque(params, tables):
    st0 = steady_state(10.0, 2e6, params, tables)
    after = rotor_step(10.0, 0.0, 0.1, st0, params, tables)
    assert after.rotor_speed[0] > st0.rotor_speed[0]


def test_greedy_convergence_to_optimal_tsr(params, tables):
    state = TurbineState(0.8, 0.0, 0.0, 8.0)
    state = measure(state, 8.0, params, tables)
    for _ in range(6000):
        state = control_step(np.array([params.rated_power]), 8.0, 0.1, state, params, tables, greedy_only=True)
        state = measure(state, 8.0, params, tables)
    assert state.tip_speed_ratio[0] == pytest.approx(tables.lambda_opt, rel=0.01)


def test_power_is_torque_times_speed(params, tables):
    state = steady_state([12.0, 9.0], [3e6, 3e6], params, tables)
    assert np.array_equal(state.power, state.generator_torque * state.generator_speed
                          * params.generator_efficiency)


def test_steady_state_flags_saturation(params, tables):
    state = steady_state([7.0, 14.0], [4e6, 4e6], params, tables)
    assert list(state.saturated) == [True, False]
    assert state.power[1] == pytest.approx(4e6, rel=1e-9)


def test_greedy_power_matches_torque(params):
    w = np.array([80.0, 100.0, 122.9])
    assert np.allclose(greedy_power(w, params), greedy_torque(w, params) * w * params.generator_efficiency)


def test_torque_rate_limit_respected_in_loop(params, tables):
    state = measure(steady_state(13.0, 2e6, params, tables), 13.0, params, tables)
    prev = state.generator_torque.copy()
    for k in range(100):
        demand = np.array([4e6 if k % 20 < 10 else 1e6])
        state = control_step(demand, 13.0, 0.1, state, params, tables)
        assert abs(state.generator_torque[0] - prev[0]) <= params.torque_rate_limit * 0.1 + 1e-9
        prev = state.generator_torque.copy()
        state = measure(state, 13.0, params, tables)


def test_invalid_parameters_rejected():
    with pytest.raises(ValueError):
        TurbineParams(rated_power=-1.0)
    with pytest.raises(ValueError):
        TurbineParams(generator_efficiency=1.5)
