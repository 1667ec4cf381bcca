"""Hub accounting: front-end powers, bus balance, partial power, battery."""

import numpy as np
import pytest

from gridrouter import (
    AfeController,
    BessState,
    GridRouterError,
    afe_power,
    afe_power_aligned,
    bess_step,
    bus_balance_residual,
    dc_feeder_power,
    partial_power_metrics,
    rk4_step,
)

RNG = np.random.default_rng(555)


def test_afe_power_values():
    assert afe_power(325.0, 0.0, 10.0, 0.0) == (4875.0, 0.0)
    assert afe_power(325.0, 0.0, 0.0, 10.0) == (0.0, 4875.0)
    assert afe_power(0.0, 0.0, 3.0, -4.0) == (0.0, 0.0)


def test_afe_power_aligned_values():
    assert afe_power_aligned(325.0, 10.0) == 4875.0
    assert afe_power_aligned(325.0, -10.0) == -4875.0


def test_afe_aligned_matches_general_for_any_iq():
    """With v_q = 0, the aligned form equals the general active power
    regardless of the reactive current."""
    for _ in range(100):
        v_d = float(RNG.uniform(-400, 400))
        i_d = float(RNG.uniform(-50, 50))
        i_q = float(RNG.uniform(-50, 50))
        assert afe_power_aligned(v_d, i_d) == afe_power(v_d, 0.0, i_d, i_q).p


def test_dc_feeder_power_values():
    assert dc_feeder_power(400.0, 0.0, 10.0) == 4000.0
    assert dc_feeder_power(400.0, 40.0, 10.0) == 4400.0
    assert dc_feeder_power(400.0, -40.0, 10.0) == 3600.0


def test_bus_balance_residual_values():
    assert bus_balance_residual(4000.0, 0.0, [4000.0]) == 0.0
    assert bus_balance_residual(4000.0, 400.0, [4400.0]) == 0.0
    assert bus_balance_residual(4000.0, 0.0, [4400.0]) == -400.0


def test_partial_power_metrics_published_operating_point():
    """400 V bus, 40 V injection, 50 A: 20 kW transferred, 2 kW
    processed, fraction 0.10."""
    m = partial_power_metrics(400.0, 40.0, 50.0)
    assert m.p_transfer == 20000.0
    assert m.p_series == 2000.0
    assert m.fraction == 0.1


def test_partial_power_metrics_no_injection():
    m = partial_power_metrics(400.0, 0.0, 50.0)
    assert m == (20000.0, 0.0, 0.0)


def test_partial_power_fraction_current_independent():
    """The fraction is |v_inj|/V_bus for every nonzero current."""
    f_at = lambda i: partial_power_metrics(400.0, 40.0, i).fraction
    assert f_at(5.0) == f_at(50.0) == f_at(-3.3) == 0.1


def test_partial_power_fraction_absent_at_zero_transfer():
    m = partial_power_metrics(400.0, 40.0, 0.0)
    assert m.p_transfer == 0.0
    assert m.fraction is None
    with pytest.raises(GridRouterError):
        partial_power_metrics(0.0, 40.0, 1.0)


def _bess(charge=18000.0, capacity=36000.0):
    return BessState(charge=charge, capacity=capacity, v_battery=48.0,
                     p_limit=1500.0)


def test_bess_clamps_to_power_limit():
    out = bess_step(_bess(), 1e6, 1.0)
    assert out.p_bess == 1500.0
    out = bess_step(_bess(), -1e6, 1.0)
    assert out.p_bess == -1500.0


def test_bess_empty_delivers_nothing():
    out = bess_step(_bess(charge=0.0), 1000.0, 1.0)
    assert out.p_bess == 0.0
    assert out.soc == 0.0


def test_bess_charge_decrement():
    """1000 W for 1 s at 48 V drains 20.833 C."""
    out = bess_step(_bess(), 1000.0, 1.0)
    assert _bess().charge - out.charge == pytest.approx(1000.0 / 48.0, rel=1e-12)


def test_bess_soc_stays_bounded():
    """Arbitrary request sequences leave the state of charge in [0, 1]."""
    state = _bess(charge=100.0)
    for _ in range(2000):
        request = float(RNG.uniform(-4000.0, 4000.0))
        state = bess_step(state, request, 0.5)
        assert 0.0 <= state.soc <= 1.0
    assert state.capacity == 36000.0


def test_afe_controller_regulates_link():
    """The PI loop pulls a capacitive link back to its reference."""
    ctl = AfeController(kp=2.0, ki=200.0, v_ref=400.0)
    c = 3e-4
    v = 390.0
    dt = 1e-4
    for _ in range(20000):
        i_cmd = ctl.step(v, dt)
        (v,) = rk4_step(lambda t, y: [(i_cmd - 2.0) / c], 0.0, [v], dt)
    assert v == pytest.approx(400.0, abs=1e-6)
