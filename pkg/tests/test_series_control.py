"""Series-module controllers: PI laws, feedforward, anti-windup, droop."""

import math

import numpy as np
import pytest

from gridrouter import (
    AcSeriesModuleState,
    DcSeriesModuleState,
    GridRouterError,
    HighPassFilter,
    Phasor,
    ac_pi_step,
    ac_reference_currents,
    dc_injection_step,
    dc_mismatch,
    droop_step,
    mismatch_feedforward,
    rk4_step,
    virtual_inertia_term,
)

DT = 1e-4


def test_reference_currents():
    assert ac_reference_currents(2300.0, 0.0, 230.0) == (10.0, 0.0)
    assert ac_reference_currents(0.0, 0.0, 17.0) == (0.0, 0.0)
    assert ac_reference_currents(1000.0, 500.0, 100.0) == (10.0, 5.0)


def test_reference_currents_reject_zero_voltage():
    with pytest.raises(GridRouterError):
        ac_reference_currents(100.0, 0.0, 0.0)


def test_ac_pi_first_step_arithmetic():
    """kp e + ki e dt on the first sample: 100*0.01 + 50*0.01*1e-4."""
    state = AcSeriesModuleState(kp=100.0, ki=50.0, v_max=100.0)
    out = ac_pi_step(state, (0.01, 0.0), (0.0, 0.0), (0.0, 0.0), DT)
    assert out.v_d == pytest.approx(1.00005, rel=1e-12)
    assert out.v_q == 0.0


def test_ac_pi_zero_error_is_inert():
    state = AcSeriesModuleState(kp=100.0, ki=50.0, v_max=100.0)
    out = ac_pi_step(state, (1.0, -2.0), (1.0, -2.0), (0.0, 0.0), DT)
    assert out == (0.0, 0.0)
    assert state.integrator_d == 0.0 and state.integrator_q == 0.0


def test_ac_pi_integral_ramp_slope():
    """Constant error grows the output affinely at ki*e per second."""
    state = AcSeriesModuleState(kp=2.0, ki=50.0, v_max=1e9)
    outs = []
    for _ in range(1000):
        outs.append(ac_pi_step(state, (0.1, 0.0), (0.0, 0.0), (0.0, 0.0), DT).v_d)
    slope = (outs[-1] - outs[0]) / (999 * DT)
    assert slope == pytest.approx(50.0 * 0.1, rel=1e-9)


def test_ac_pi_linearity_in_error():
    """Scaling the whole error sequence scales the unsaturated output."""
    seq = np.sin(np.linspace(0.0, 3.0, 40))
    alpha = 2.5
    s1 = AcSeriesModuleState(kp=3.0, ki=20.0, v_max=1e9)
    s2 = AcSeriesModuleState(kp=3.0, ki=20.0, v_max=1e9)
    for e in seq:
        o1 = ac_pi_step(s1, (float(e), 0.0), (0.0, 0.0), (0.0, 0.0), DT)
        o2 = ac_pi_step(s2, (alpha * float(e), 0.0), (0.0, 0.0), (0.0, 0.0), DT)
        assert o2.v_d == pytest.approx(alpha * o1.v_d, rel=1e-12, abs=1e-15)


def test_ac_pi_anti_windup_freezes_integrator():
    """The integrator holds its saturation-entry value through the
    saturated interval and resumes cleanly afterwards."""
    state = AcSeriesModuleState(kp=1.0, ki=100.0, v_max=0.5)
    ac_pi_step(state, (0.1, 0.0), (0.0, 0.0), (0.0, 0.0), DT)
    frozen = state.integrator_d
    for _ in range(50):
        out = ac_pi_step(state, (10.0, 0.0), (0.0, 0.0), (0.0, 0.0), DT)
        assert out.v_d == 0.5
        assert state.integrator_d == frozen
    out = ac_pi_step(state, (1e-4, 0.0), (0.0, 0.0), (0.0, 0.0), DT)
    assert out.v_d < 0.5
    assert state.integrator_d != frozen


def test_ac_pi_rejects_non_finite():
    state = AcSeriesModuleState()
    with pytest.raises(GridRouterError):
        ac_pi_step(state, (math.nan, 0.0), (0.0, 0.0), (0.0, 0.0), DT)


def test_mismatch_feedforward_matched():
    v = Phasor(230.0, 0.0)
    assert mismatch_feedforward(230.0, v, v, 0.0, 0.0) == (0.0, 0.0)


def test_mismatch_feedforward_magnitude_only():
    out = mismatch_feedforward(230.0, Phasor(225.0, 0.0), Phasor(230.0, 0.0), 0.0, 0.0)
    assert out == (0.0, 5.0)


def test_mismatch_feedforward_phase_chord():
    v_m_d, v_m_q = mismatch_feedforward(230.0, Phasor(230.0, 0.0),
                                        Phasor(230.0, 0.0), 0.02, 0.0)
    assert v_m_d == pytest.approx(2 * 230.0 * math.sin(0.01), rel=1e-12)
    assert v_m_q == pytest.approx(0.0, abs=1e-12)


def test_dc_injection_feedforward_only():
    state = DcSeriesModuleState(kp=0.0, ki=0.0, v_max=100.0)
    out = dc_injection_step(state, 0.0, 0.0, 0.0, 400.0, 5.0, DT)
    assert out == 5.0


def test_dc_injection_ripple_sign():
    state = DcSeriesModuleState(kp=0.0, ki=0.0, kr=1.0, v_max=100.0)
    out = dc_injection_step(state, 0.0, 0.0, 2.0, 400.0, 0.0, DT)
    assert out == -2.0


def test_dc_injection_first_step_arithmetic():
    state = DcSeriesModuleState(kp=100.0, ki=50.0, v_max=100.0)
    out = dc_injection_step(state, 0.01, 0.0, 0.0, 400.0, 0.0, DT)
    assert out == pytest.approx(1.00005, rel=1e-12)


def test_dc_injection_all_gains_zero_identity():
    state = DcSeriesModuleState(kp=0.0, ki=0.0, v_max=1e9)
    for v_mis in (-3.0, 0.0, 7.25):
        assert dc_injection_step(state, 1.0, -2.0, 9.0, 395.0, v_mis, DT) == v_mis


def test_dc_injection_derivatives_vanish_on_constant_signals():
    """Constant V_dc and constant error give zero inertia contribution
    from the second step onward."""
    state = DcSeriesModuleState(kp=0.0, ki=0.0, kc=0.5, kl=0.5, v_max=1e9)
    dc_injection_step(state, 1.0, 0.0, 0.0, 400.0, 0.0, DT)
    for _ in range(5):
        assert dc_injection_step(state, 1.0, 0.0, 0.0, 400.0, 0.0, DT) == 0.0


def test_dc_injection_anti_windup():
    state = DcSeriesModuleState(kp=1.0, ki=100.0, v_max=0.5)
    dc_injection_step(state, 0.1, 0.0, 0.0, 400.0, 0.0, DT)
    frozen = state.integrator
    for _ in range(30):
        assert dc_injection_step(state, 10.0, 0.0, 0.0, 400.0, 0.0, DT) == 0.5
        assert state.integrator == frozen


def test_dc_injection_rejects_non_finite():
    state = DcSeriesModuleState()
    with pytest.raises(GridRouterError):
        dc_injection_step(state, 0.0, math.inf, 0.0, 400.0, 0.0, DT)


def test_virtual_inertia_term_values():
    assert virtual_inertia_term(0.0, 0.0, 123.0, -456.0) == 0.0
    assert virtual_inertia_term(0.01, 0.0, 100.0, 0.0) == pytest.approx(1.0)
    assert virtual_inertia_term(0.0, 0.001, 0.0, 500.0) == pytest.approx(0.5)


def test_dc_mismatch_values():
    assert dc_mismatch(400.0, 400.0) == 0.0
    assert dc_mismatch(400.0, 395.0) == 5.0
    assert dc_mismatch(395.0, 400.0) == 5.0


def test_droop_values():
    assert droop_step(400.0, 0.5, 10.0) == 395.0
    assert droop_step(400.0, 0.0, 123.0) == 400.0
    assert droop_step(230.0, 0.1, -10.0) == 231.0
    with pytest.raises(GridRouterError):
        droop_step(400.0, -0.1, 1.0)


def test_pi_drives_rl_plant_to_reference():
    """Closed loop against i' = (v - R i)/L: zero steady-state error for
    any ki > 0."""
    r, l = 0.5, 1e-3
    dt = 1e-5
    state = AcSeriesModuleState(kp=5.0, ki=200.0, v_max=1e6)
    i = 0.0
    i_ref = 8.0
    for _ in range(60000):
        v = ac_pi_step(state, (i_ref, 0.0), (i, 0.0), (0.0, 0.0), dt).v_d
        (i,) = rk4_step(lambda t, y: [(v - r * y[0]) / l], 0.0, [i], dt)
    assert i == pytest.approx(i_ref, rel=1e-9)


def test_high_pass_filter_rejects_dc_and_passes_ripple():
    hpf = HighPassFilter(cutoff_hz=2.0)
    dt = 1e-4
    # settle on a constant input
    for _ in range(20000):
        y = hpf.step(5.0, dt)
    assert abs(y) < 1e-6
    # 100 Hz ripple passes nearly unattenuated
    hpf2 = HighPassFilter(cutoff_hz=2.0)
    t = 0.0
    outs, ins = [], []
    for _ in range(4000):
        x = math.sin(2 * math.pi * 100.0 * t)
        outs.append(hpf2.step(x, dt))
        ins.append(x)
        t += dt
    gain = max(abs(o) for o in outs[2000:]) / max(abs(x) for x in ins[2000:])
    assert gain == pytest.approx(1.0, abs=0.05)
