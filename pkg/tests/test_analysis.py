import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wfapc.analysis import (AnalysisError, build_Acl, build_W, decoupled_poles, max_overdamped_gain,
                            place_gains, saturation_patterns, spectrum, sweep)

# frozen from the simulated turbine step experiment
A_ID, B_ID = 0.9643740401091778, 0.004749154691932694


def test_build_W_examples():
    W, M = build_W([1, 1, 1])
    assert np.array_equal(W, np.ones((3, 3))) and M == 3
    W, M = build_W([1, 0, 1])
    assert np.array_equal(W, np.array([[1, 0, 1]] * 3)) and M == 2


def test_singular_lower_block_for_every_pattern():
    for n in range(1, 6):
        for s in itertools.product((0, 1), repeat=n):
            if not any(s):
                continue
            W, M = build_W(s)
            assert abs(np.linalg.det(W / M - np.eye(n))) < 1e-9


def test_zero_gain_is_block_triangular():
    n = 3
    A = np.diag([0.5, 0.7, 0.9])
    W, M = build_W([1, 0, 1])
    sys = build_Acl(A, 0.01 * np.eye(n), np.zeros((n, n)), W, M, 0.1)
    eig = np.sort(spectrum(sys).eigenvalues.real)
    assert np.allclose(eig, [0.5, 0.7, 0.9, 1.0, 1.0, 1.0], atol=1e-12)


def test_single_turbine_example():
    sys = build_Acl([[0.9]], [[0.002]], [[0.5]], [[1.0]], 1, 0.1)
    assert np.array_equal(sys.A_cl, np.array([[0.9, 0.001], [0.0, 1.0]]))
    rep = spectrum(sys)
    assert np.allclose(np.sort(rep.eigenvalues.real), [0.9, 1.0])
    assert rep.count_on_unit_circle == 1 and rep.stable


def test_no_unsaturated_turbine_rejected():
    with pytest.raises(AnalysisError):
        build_Acl(np.eye(2), np.eye(2), np.eye(2), np.zeros((2, 2)), 0, 0.1)


def test_identity_spectrum():
    rep = spectrum(np.eye(4))
    assert np.allclose(rep.eigenvalues, 1.0) and rep.count_on_unit_circle == 4


def test_decoupled_poles_oracle():
    a, b, k, ts = 0.9, 0.002, 0.5, 0.1
    disc = (1 + a) ** 2 - 4 * (a + b * k * ts)
    oracle = sorted([((1 + a) + disc**0.5) / 2, ((1 + a) - disc**0.5) / 2], reverse=True)
    assert np.allclose(decoupled_poles(a, b, k, ts), oracle, atol=1e-12)
    assert np.allclose(oracle, [0.998990, 0.901010], atol=1e-6)
    m = np.array([[a, b * k], [-ts, 1.0]])
    assert np.allclose(np.sort(np.linalg.eigvals(m).real)[::-1], oracle, atol=1e-12)


def test_zero_gain_poles():
    assert np.allclose(decoupled_poles(0.9, 0.002, 0.0, 0.1), [1.0, 0.9])


@settings(max_examples=100, deadline=None)
@given(st.floats(0.5, 0.99), st.floats(1e-4, 1e-2), st.floats(0.01, 0.99))
def test_place_gains_round_trip(a, b, frac):
    pole = a + frac * (1.0 - a)
    k = place_gains(a, b, pole, 0.1)
    poles = decoupled_poles(a, b, k, 0.1)
    assert np.min(np.abs(poles - pole)) < 1e-6
    sys = build_Acl([[a, 0], [0, a]], [[b, 0], [0, b]], k * np.eye(2), *build_W([1, 1]), 0.1)
    eig = spectrum(sys).eigenvalues
    assert np.min(np.abs(eig - pole)) < 1e-6


def test_place_gains_single_turbine_closed_loop():
    a, b = 0.9, 0.002
    k = place_gains(a, b, 0.95, 0.1)
    # a lone turbine has a zero lower block, so check the decoupled 2x2 loop
    m = np.array([[a, b * k], [-0.1, 1.0]])
    assert np.min(np.abs(np.linalg.eigvals(m) - 0.95)) < 1e-6


def test_place_gains_rejects_infeasible():
    with pytest.raises(ValueError):
        place_gains(0.9, 0.002, complex(0.95, 0.01), 0.1)
    with pytest.raises(ValueError):
        place_gains(0.9, 0.002, 0.85, 0.1)
    with pytest.raises(ValueError):
        place_gains(0.9, 0.002, 1.0, 0.1)


def test_default_gain_is_overdamped():
    assert 0.5 < max_overdamped_gain(A_ID, B_ID, 0.1)
    assert np.all(np.isreal(decoupled_poles(A_ID, B_ID, 0.5, 0.1)))


def test_all_unsaturated_single_unit_pole():
    n = 9
    sys = build_Acl(A_ID * np.eye(n), B_ID * np.eye(n), 0.5 * np.eye(n), *build_W(np.ones(n)), 0.1)
    rep = spectrum(sys)
    assert rep.count_on_unit_circle == 1
    assert rep.stable and rep.max_interior_modulus < 1.0


def test_switching_stability_exhaustive_three():
    verdicts = sweep(A_ID, B_ID, 0.5, 0.1, 3)
    assert len(verdicts) == 7
    for v in verdicts:
        assert v.report.count_on_unit_circle >= 1
        assert v.report.max_interior_modulus <= 1 - 1e-6


def test_pattern_sampling_sizes():
    assert len(saturation_patterns(4)) == 15
    nine = saturation_patterns(9)
    singles_doubles = 1 + 9 + 36
    assert len(nine) >= singles_doubles
    assert len(saturation_patterns(9, exhaustive=True)) == 511
    assert all(p.any() for p in nine)
