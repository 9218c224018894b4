import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from spinprobe.spin import (GROUND_STATE, BlochState, PulseParams, detuning_sweep, drive, reference_state,
                            rotating_frame, rotating_frame_rhs, table_states, to_reporting_frame)

OMEGA0 = 3.16e11

# Representative prepared states quoted in the paper.
TABLE = [(0.0, 1.0, 0.0), (0.505, -0.329, 0.798), (0.222, 0.194, 0.956), (0.029, -0.083, 0.996)]


def test_table_states_match_paper():
    for got, want in zip(table_states(OMEGA0), TABLE):
        assert np.allclose(got.s, want, atol=0.01)


def test_reference_state_is_nearly_undriven():
    ref = reference_state(OMEGA0)
    assert math.hypot(ref.x, ref.y) < 1e-2
    assert abs(abs(ref.z) - 1.0) < 1e-4


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.2, 0.2), st.floats(1e-3, 0.05), st.floats(0.0, 3.0))
def test_closed_form_matches_ode(delta_ratio, rabi_ratio, frac):
    omega1, delta = rabi_ratio, delta_ratio
    t = frac * math.pi / (2 * omega1)
    sol = solve_ivp(lambda _t, s: rotating_frame_rhs(s, omega1, delta), (0, t), GROUND_STATE,
                    method="DOP853", rtol=1e-11, atol=1e-13)
    assert np.allclose(rotating_frame(GROUND_STATE, omega1, delta, t), sol.y[:, -1], atol=1e-8)


@settings(max_examples=60, deadline=None)
@given(st.floats(-1.0, 1.0), st.floats(-1.0, 1.0), st.floats(-1.0, 1.0), st.floats(-0.5, 0.5),
       st.floats(1e-3, 0.1))
def test_norm_preserved(a, b, c, delta_ratio, rabi_ratio):
    v = np.array([a, b, c])
    n = np.linalg.norm(v)
    if n < 1e-3:
        return
    s0 = BlochState(tuple(v / max(n, 1.0)))
    out = drive(s0, PulseParams.pi_half(rabi_ratio * OMEGA0, delta_ratio * OMEGA0), OMEGA0)
    assert out.norm == pytest.approx(s0.norm, abs=1e-12)


def test_reporting_frame_is_a_rotation():
    rng = np.random.default_rng(0)
    for _ in range(20):
        s = rng.normal(size=3)
        t = rng.uniform(0, 1e-9)
        assert np.linalg.norm(to_reporting_frame(s, OMEGA0, t)) == pytest.approx(np.linalg.norm(s), rel=1e-13)


def test_on_resonance_pi_half_reaches_equator():
    s = drive(BlochState(GROUND_STATE), PulseParams.pi_half(0.01 * OMEGA0, 0.0), OMEGA0)
    assert abs(s.z) < 1e-12 and abs(abs(s.y) - 1) < 1e-12


def test_sweep_validation():
    with pytest.raises(ValueError):
        detuning_sweep([], 1.0, OMEGA0)
    with pytest.raises(ValueError):
        PulseParams(omega1=0.0, delta=0.0, duration=1.0)
    with pytest.raises(ValueError):
        BlochState((1.0, 1.0, 0.0))


def test_transverse_scaled():
    s = BlochState((0.6, 0.0, 0.8)).transverse_scaled(0.5)
    assert s.s == (0.3, 0.0, 0.8)
