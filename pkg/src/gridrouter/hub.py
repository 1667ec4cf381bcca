"""Hub-level power accounting.

Front-end dq powers, DC feeder power, the lossless bus balance, the
partial-power metrics that justify the series-module sizing, battery
state-of-charge bookkeeping, and the front-end DC-link regulator.
"""

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

from .ac_power import PowerPair
from .core import GridRouterError


@dataclass
class AfeState:
    """dq operating point of the front-end converter."""

    v_d: float = 0.0       # volts
    v_q: float = 0.0       # volts
    i_d: float = 0.0       # amps
    i_q: float = 0.0       # amps
    v_dc: float = 0.0      # volts
    i_afe_dc: float = 0.0  # amps


def afe_power(v_d, v_q, i_d, i_q):
    """Front-end powers P = 1.5 (v_d i_d + v_q i_q), Q = 1.5 (v_d i_q - v_q i_d)."""
    return PowerPair(1.5 * (v_d * i_d + v_q * i_q), 1.5 * (v_d * i_q - v_q * i_d))


def afe_power_aligned(v_d, i_d):
    """Active power with the frame aligned to the grid voltage (v_q = 0).

    Evaluated as 1.5 * (v_d * i_d) so it equals `afe_power` at v_q = 0
    bit for bit.
    """
    return 1.5 * (v_d * i_d)


def dc_feeder_power(v_dc, v_inj, i_line):
    """Power carried into a DC feeder, link share plus injection share."""
    return (v_dc + v_inj) * i_line


def bus_balance_residual(p_afe_dc, p_bess, dc_feeder_powers):
    """Net power into the DC bus; zero in a lossless steady state."""
    return p_afe_dc + p_bess - math.fsum(dc_feeder_powers)


class PartialPowerMetrics(NamedTuple):
    p_transfer: float        # watts
    p_series: float          # watts
    fraction: float | None   # dimensionless, absent at zero transfer


def partial_power_metrics(v_bus, v_inj, i_line):
    """Transferred power, series-processed power, and their ratio.

    The fraction reduces to |v_inj| / V_bus, independent of the line
    current; it is reported absent when the current is zero because the
    transfer power vanishes there.
    """
    if v_bus <= 0:
        raise GridRouterError(f"partial-power metrics need V_bus > 0, got {v_bus}")
    p_transfer = v_bus * i_line
    p_series = v_inj * i_line
    fraction = None if i_line == 0 else abs(v_inj) / v_bus
    return PartialPowerMetrics(p_transfer, p_series, fraction)


@dataclass(frozen=True)
class BessState:
    """Battery charge state; p_bess is the power actually flowing,
    positive for discharge."""

    charge: float          # coulombs
    capacity: float        # coulombs
    v_battery: float       # volts
    p_limit: float         # watts, symmetric bound
    p_bess: float = 0.0    # watts

    @property
    def soc(self):
        if self.capacity <= 0:
            return 0.0
        return self.charge / self.capacity


def bess_step(state, p_request, dt):
    """Advance the battery one step.

    The request is clamped to the power limit and to what the stored
    charge can source or sink over dt, then the charge is decremented by
    P dt / V_battery. Clamping is the contract, never an error.
    """
    if dt <= 0:
        raise GridRouterError(f"battery step needs dt > 0, got {dt}")
    p = min(max(p_request, -state.p_limit), state.p_limit)
    if state.capacity <= 0 or state.v_battery <= 0:
        return replace(state, p_bess=0.0)
    max_discharge = state.charge * state.v_battery / dt
    max_charge = (state.capacity - state.charge) * state.v_battery / dt
    p = min(p, max_discharge)
    p = max(p, -max_charge)
    charge = state.charge - p * dt / state.v_battery
    charge = min(max(charge, 0.0), state.capacity)
    return replace(state, charge=charge, p_bess=p)


@dataclass
class AfeController:
    """DC-link voltage regulator: PI on the link error commanding the
    front-end DC-side current."""

    kp: float = 2.0          # A/V
    ki: float = 200.0        # A/(V*s)
    v_ref: float = 400.0     # volts
    i_limit: float = math.inf  # amps
    integrator: float = 0.0  # V*s

    def step(self, v_dc, dt):
        err = self.v_ref - v_dc
        advanced = self.integrator + err * dt
        i_cmd = self.kp * err + self.ki * advanced
        if i_cmd > self.i_limit:
            return self.i_limit
        if i_cmd < -self.i_limit:
            return -self.i_limit
        self.integrator = advanced
        return i_cmd
