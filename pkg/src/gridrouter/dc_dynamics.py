"""Continuous-time DC plant pieces and the fixed-step integrator.

DC-link and line-current derivatives, load models including constant
power loads, ripple and hold-up sizing formulas, and a classical RK4
step that holds the controller output constant across the step.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

from .core import GridRouterError


class StateDiverged(RuntimeError):
    """Integration produced a non-finite state."""


@dataclass
class DcPlantState:
    """Link voltage and line current of the single-loop DC plant."""

    v_dc: float    # volts
    i_meas: float  # amps


def dc_link_derivative(c, i_dc, i_meas):
    """Link voltage slope (I_dc - i_meas) / C in V/s.

    I_dc is the net current delivered into the link node by sources and
    loads; i_meas is the current drawn through the controlled line.
    """
    if c <= 0:
        raise GridRouterError(f"link capacitance must be > 0, got {c}")
    return (i_dc - i_meas) / c


def line_current_derivative(l, r, i, v_dc, v_inj):
    """Line current slope (V_dc - v_inj - R i) / L in A/s."""
    if l <= 0:
        raise GridRouterError(f"line inductance must be > 0, got {l}")
    return (v_dc - v_inj - r * i) / l


def cpl_current(p, v, v_floor):
    """Constant-power load current P / max(V, v_floor).

    The voltage floor keeps the division finite during collapse; the
    incremental resistance dV/dI stays negative for P > 0.
    """
    if v_floor <= 0:
        raise GridRouterError(f"CPL voltage floor must be > 0, got {v_floor}")
    return p / max(v, v_floor)


@dataclass(frozen=True)
class LoadModel:
    """Bus-attached load: resistive, constant power, constant current,
    or a sinusoidal ripple current source."""

    kind: str
    r: float = 0.0         # ohms (resistive)
    p: float = 0.0         # watts (constant_power)
    i: float = 0.0         # amps (constant_current)
    delta_i: float = 0.0   # amps, ripple amplitude
    omega: float = 0.0     # rad/s, ripple frequency
    v_floor: float = 1.0   # volts, CPL division guard

    KINDS = ("resistive", "constant_power", "constant_current", "ripple_source")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise GridRouterError(f"unknown load kind {self.kind!r}")
        if self.kind == "resistive" and self.r <= 0:
            raise GridRouterError("resistive load needs R > 0")
        if self.kind == "constant_power" and not math.isfinite(self.p):
            raise GridRouterError("constant-power load needs finite P")
        if self.kind == "ripple_source" and self.omega <= 0:
            raise GridRouterError("ripple source needs omega > 0")

    @staticmethod
    def resistive(r):
        return LoadModel("resistive", r=r)

    @staticmethod
    def constant_power(p, v_floor=1.0):
        return LoadModel("constant_power", p=p, v_floor=v_floor)

    @staticmethod
    def constant_current(i):
        return LoadModel("constant_current", i=i)

    @staticmethod
    def ripple(delta_i, omega):
        return LoadModel("ripple_source", delta_i=delta_i, omega=omega)

    def current(self, v, t):
        """Current drawn from the bus at voltage v and time t (amps)."""
        if self.kind == "resistive":
            return v / self.r
        if self.kind == "constant_power":
            return cpl_current(self.p, v, self.v_floor)
        if self.kind == "constant_current":
            return self.i
        return self.delta_i * math.sin(self.omega * t)


def ripple_voltage(delta_i, omega, c_dc):
    """Link ripple amplitude dI / (omega * C) for a ripple current (volts)."""
    if omega <= 0:
        raise GridRouterError(f"ripple frequency must be > 0, got {omega}")
    if c_dc <= 0:
        raise GridRouterError(f"link capacitance must be > 0, got {c_dc}")
    return delta_i / (omega * c_dc)


def effective_ripple(dv_ripple, v_series):
    """Residual ripple after series compensation (volts)."""
    return dv_ripple - v_series


def required_capacitance(delta_i, omega, dv_effective):
    """Capacitance sizing index dI / (omega * dV_effective) in farads.

    Inverse of `ripple_voltage`; the proportionality constant is one, so
    treat the result as a sizing index rather than a design value.
    """
    if dv_effective <= 0:
        raise GridRouterError(f"effective ripple must be > 0, got {dv_effective}")
    if omega <= 0:
        raise GridRouterError(f"ripple frequency must be > 0, got {omega}")
    return delta_i / (omega * dv_effective)


class HoldupTimes(NamedTuple):
    t_capacitor: float   # seconds
    t_battery: float     # seconds
    t_total: float       # seconds


def holdup_time(c, v_init, v_min, p_load, q_battery, v_battery, energy_based=False):
    """Hold-up time from capacitor reserve plus battery reserve.

    The capacitor term follows the published sizing form
    2 C (V_init^2 - V_min^2) / P. With energy_based=True it is replaced
    by the stored-energy form C (V_init^2 - V_min^2) / (2 P), a factor
    four smaller, reported for comparison. The battery term is
    Q_battery * V_battery / P either way.
    """
    if p_load <= 0:
        raise GridRouterError(f"hold-up load must be > 0, got {p_load}")
    if not v_init >= v_min >= 0:
        raise GridRouterError("hold-up needs V_init >= V_min >= 0")
    dv2 = v_init * v_init - v_min * v_min
    if energy_based:
        t_cap = c * dv2 / (2.0 * p_load)
    else:
        t_cap = 2.0 * c * dv2 / p_load
    t_batt = q_battery * v_battery / p_load
    return HoldupTimes(t_cap, t_batt, t_cap + t_batt)


def rk4_step(f, t, y, dt):
    """One classical 4th-order Runge-Kutta step of dy/dt = f(t, y).

    y is a sequence of floats and f returns a sequence of the same
    length; the result is a list.
    """
    k1 = f(t, y)
    half = 0.5 * dt
    y2 = [yi + half * k for yi, k in zip(y, k1)]
    k2 = f(t + half, y2)
    y3 = [yi + half * k for yi, k in zip(y, k2)]
    k3 = f(t + half, y3)
    y4 = [yi + dt * k for yi, k in zip(y, k3)]
    k4 = f(t + dt, y4)
    sixth = dt / 6.0
    return [yi + sixth * (a + 2.0 * b + 2.0 * c + d)
            for yi, a, b, c, d in zip(y, k1, k2, k3, k4)]


def integrate_step(state, derivatives, dt, t=0.0):
    """Advance (V_dc, i_meas) one RK4 step.

    `derivatives(t, (v_dc, i_meas))` returns the coupled slopes with the
    controller output already frozen into the closure (zero-order hold).
    A non-finite result aborts with StateDiverged.
    """
    if dt <= 0:
        raise GridRouterError(f"integration needs dt > 0, got {dt}")
    v, i = rk4_step(derivatives, t, (state.v_dc, state.i_meas), dt)
    if not (math.isfinite(v) and math.isfinite(i)):
        raise StateDiverged(f"non-finite plant state after step at t={t}: ({v}, {i})")
    return DcPlantState(v, i)
