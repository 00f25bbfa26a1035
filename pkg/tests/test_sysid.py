import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wfapc.sysid import (IdentificationError, InvalidExperiment, LinearThrustModel, StepExperiment,
                         assemble_AB, discretize_fe, first_order_response, fit_first_order,
                         run_step_experiment)

DT = 0.1


def synthetic(K1=0.02, T1=1.0, step=1e6, noise=0.0, seed=0, n=400, k_step=200, p0=2.5e6, f0=3e5):
    t = np.arange(n) * DT
    u = np.where(np.arange(n) >= k_step, step, 0.0)
    y = first_order_response(u, K1, T1, DT)
    if noise:
        y = y + np.random.default_rng(seed).normal(0.0, noise * K1 * step, n)
    return StepExperiment(t, p0 + u, f0 + y, p0, step, 12.0, k_step)


def test_noiseless_recovery():
    m = fit_first_order(synthetic())
    assert m.K1 == pytest.approx(0.02, rel=1e-3)
    assert m.T1 == pytest.approx(1.0, rel=1e-3)
    assert m.fit_percent == pytest.approx(100.0, abs=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.005, 0.5), st.floats(0.3, 8.0))
def test_recovery_over_parameter_range(K1, T1):
    m = fit_first_order(synthetic(K1, T1))
    assert m.K1 == pytest.approx(K1, rel=1e-3)
    assert m.T1 == pytest.approx(T1, rel=1e-3)


def test_fit_degrades_with_noise():
    levels = [0.0, 0.02, 0.05, 0.1]
    means = [np.mean([fit_first_order(synthetic(noise=n, seed=s)).fit_percent for s in range(10)])
             for n in levels]
    assert all(a > b for a, b in zip(means, means[1:]))


def test_baseline_offset_invariance():
    base = fit_first_order(synthetic())
    c = 7e4
    shifted = synthetic(p0=2.5e6 + c / 0.02, f0=3e5 + c)
    m = fit_first_order(shifted)
    assert m.K1 == pytest.approx(base.K1, rel=1e-9)
    assert m.T1 == pytest.approx(base.T1, rel=1e-9)


def test_flat_output_rejected():
    exp = synthetic(K1=0.0)
    with pytest.raises(IdentificationError):
        fit_first_order(exp)


def test_discretize_examples():
    a, b = discretize_fe(0.02, 1.0, 0.1)
    assert a == 0.9 and b == 0.002
    a, b = discretize_fe(0.02, 1.0, 1e-9)
    assert a == pytest.approx(1.0) and b == pytest.approx(0.0, abs=1e-10)
    with pytest.raises(ValueError):
        discretize_fe(0.02, 0.1, 0.1)


def test_discrete_model_steady_state():
    a, b = discretize_fe(0.02, 1.0, 0.1)
    x = 0.0
    for _ in range(2000):
        x = a * x + b * 1e6
    assert x == pytest.approx(0.02 * 1e6, rel=1e-9)


def test_discrete_tracks_continuous_step():
    # frozen from the simulated turbine step experiment
    K1, T1 = 0.1333060135, 2.806941913
    a, b = discretize_fe(K1, T1, DT)
    k = np.arange(600)
    discrete = K1 * (1.0 - a**k)
    continuous = K1 * (1.0 - np.exp(-k * DT / T1))
    assert np.max(np.abs(discrete - continuous)) < 0.01 * K1


def test_assemble_AB():
    A, B = assemble_AB(0.9, 0.002, 1)
    assert A.shape == (1, 1) and A[0, 0] == 0.9 and B[0, 0] == 0.002
    A, B = assemble_AB(0.9, 0.002, 9)
    assert np.array_equal(A, 0.9 * np.eye(9))
    assert np.array_equal(A @ B, B @ A)


def test_model_file_round_trip(tmp_path):
    m = LinearThrustModel(0.02, 1.0, 0.1, 97.5)
    m.save(tmp_path / "model.txt")
    back = LinearThrustModel.load(tmp_path / "model.txt")
    assert (back.K1, back.T1, back.T_s, back.fit_percent) == (0.02, 1.0, 0.1, 97.5)
    assert back.a == 0.9 and back.b == 0.002


def test_experiment_csv_round_trip(tmp_path):
    exp = synthetic(noise=0.05)
    exp.save(tmp_path / "exp.csv")
    back = StepExperiment.load(tmp_path / "exp.csv")
    assert np.array_equal(back.thrust, exp.thrust) and back.step_index == exp.step_index


def test_turbine_step_experiment(params, tables):
    exp = run_step_experiment(params, tables)
    m = fit_first_order(exp)
    assert m.fit_percent >= 80.0
    assert m.T1 > DT


def test_zero_step_rejected(params, tables):
    with pytest.raises(InvalidExperiment):
        run_step_experiment(params, tables, step_size=0.0)


def test_saturating_baseline_rejected(params, tables):
    with pytest.raises(InvalidExperiment):
        run_step_experiment(params, tables, inflow=7.0, baseline_power=4e6)


def test_step_into_saturation_rejected(params, tables):
    with pytest.raises(InvalidExperiment):
        run_step_experiment(params, tables, inflow=9.0, baseline_power=1.5e6, step_size=2e6,
                            step_time=5.0, duration=30.0)
