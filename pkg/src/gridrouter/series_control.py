"""Discrete-time series-module controllers.

AC modules run one PI per dq axis with optional feedforward. DC modules
add ripple feedforward and virtual-inertia terms on top of the PI law.
Every controller freezes its integrator while the output is saturated
(conditional anti-windup) and forms derivatives by backward differences,
defined as zero on the first sample so startup is causal.
"""

import math
from dataclasses import dataclass

from .ac_power import DqInjection
from .core import GridRouterError

# Default current-loop gains shared by the AC and DC module controllers.
DEFAULT_KP = 100.0   # V/A
DEFAULT_KI = 50.0    # V/(A*s)

# Default cutoff of the ripple-isolation high-pass, below the 100 Hz
# ripple the mitigation targets and above DC.
DEFAULT_RIPPLE_CUTOFF_HZ = 10.0


def _check_finite(name, *values):
    for v in values:
        if not math.isfinite(v):
            raise GridRouterError(f"{name}: non-finite input {v!r}")


def _pi_axis(kp, ki, integrator, err, ff, v_max, dt):
    """One PI axis with conditional anti-windup.

    Returns (output, new_integrator); the integrator only advances when
    the saturator is inactive, so it holds its entry value through a
    saturated interval.
    """
    advanced = integrator + err * dt
    out = kp * err + ki * advanced + ff
    if out > v_max:
        return v_max, integrator
    if out < -v_max:
        return -v_max, integrator
    return out, advanced


@dataclass
class AcSeriesModuleState:
    """Gains and integrator state of one AC series module."""

    kp: float = DEFAULT_KP          # V/A
    ki: float = DEFAULT_KI          # V/(A*s)
    v_max: float = math.inf         # volts, per-axis saturation
    integrator_d: float = 0.0       # A*s
    integrator_q: float = 0.0       # A*s
    last_injection: DqInjection = DqInjection(0.0, 0.0)

    def __post_init__(self):
        if self.kp < 0 or self.ki < 0:
            raise GridRouterError("ac module gains must be >= 0")


def ac_reference_currents(p_ref, q_ref, v_mag):
    """dq current references (P_ref/|V|, Q_ref/|V|)."""
    if v_mag <= 0:
        raise GridRouterError(f"reference currents need |V| > 0, got {v_mag}")
    return p_ref / v_mag, q_ref / v_mag


def ac_pi_step(state, i_ref, i_meas, feedforward, dt):
    """Advance both dq PI axes one sample and return the injection.

    Each axis computes kp*e + ki*int(e dt) + feedforward and saturates
    at +-v_max; the state is updated in place.
    """
    if dt <= 0:
        raise GridRouterError(f"controller step needs dt > 0, got {dt}")
    _check_finite("ac_pi_step", i_ref[0], i_ref[1], i_meas[0], i_meas[1],
                  feedforward[0], feedforward[1])
    e_d = i_ref[0] - i_meas[0]
    e_q = i_ref[1] - i_meas[1]
    v_d, state.integrator_d = _pi_axis(
        state.kp, state.ki, state.integrator_d, e_d, feedforward[0], state.v_max, dt)
    v_q, state.integrator_q = _pi_axis(
        state.kp, state.ki, state.integrator_q, e_q, feedforward[1], state.v_max, dt)
    state.last_injection = DqInjection(v_d, v_q)
    return state.last_injection


def mismatch_feedforward(v_mag_k, v_bus, v_feeder, dtheta, delta):
    """Feedforward pair correcting feeder-to-bus phase and magnitude error.

    The phase error enters through the chord 2|V| sin(dtheta/2), split on
    the dq axes by the feeder angle; the magnitude error |V_k - V_bus|
    lands on the q axis.
    """
    chord = 2.0 * v_mag_k * math.sin(dtheta / 2.0)
    v_m_d = chord * math.cos(delta)
    v_m_q = (v_feeder - v_bus).magnitude + chord * math.sin(delta)
    return v_m_d, v_m_q


@dataclass
class DcSeriesModuleState:
    """Gains, integrator, and previous samples of one DC series module."""

    kp: float = DEFAULT_KP          # V/A
    ki: float = DEFAULT_KI          # V/(A*s)
    kr: float = 0.0                 # ripple feedforward gain
    kc: float = 0.0                 # virtual capacitance gain (s)
    kl: float = 0.0                 # virtual inductance gain (V*s/A)
    v_max: float = math.inf         # volts
    integrator: float = 0.0         # A*s
    prev_error: float | None = None   # amps
    prev_v_dc: float | None = None    # volts

    def __post_init__(self):
        if min(self.kp, self.ki, self.kr, self.kc, self.kl) < 0:
            raise GridRouterError("dc module gains must be >= 0")


def virtual_inertia_term(kc, kl, dvdc_dt, de_dt):
    """Virtual capacitor plus virtual inductor contribution (volts)."""
    return kc * dvdc_dt + kl * de_dt


def dc_mismatch(v_i, v_j):
    """DC voltage-mismatch feedforward |V_i - V_j| (volts)."""
    return abs(v_i - v_j)


def dc_injection_step(state, i_ref, i_meas, v_ripple_meas, v_dc, v_mismatch, dt):
    """Advance the DC series-module law one sample.

    Output is kp*e + ki*int(e dt) - kr*v_ripple + kc*dV_dc/dt + kl*de/dt
    + v_mismatch, saturated at +-v_max with conditional anti-windup.
    Derivatives are backward differences over the stored previous sample
    and zero on the first call.
    """
    if dt <= 0:
        raise GridRouterError(f"controller step needs dt > 0, got {dt}")
    _check_finite("dc_injection_step", i_ref, i_meas, v_ripple_meas, v_dc, v_mismatch)
    err = i_ref - i_meas
    dvdc = 0.0 if state.prev_v_dc is None else (v_dc - state.prev_v_dc) / dt
    derr = 0.0 if state.prev_error is None else (err - state.prev_error) / dt
    advanced = state.integrator + err * dt
    out = (state.kp * err + state.ki * advanced
           - state.kr * v_ripple_meas
           + virtual_inertia_term(state.kc, state.kl, dvdc, derr)
           + v_mismatch)
    if out > state.v_max:
        out = state.v_max
    elif out < -state.v_max:
        out = -state.v_max
    else:
        state.integrator = advanced
    state.prev_error = err
    state.prev_v_dc = v_dc
    return out


def droop_step(v0, slope, i_meas):
    """Droop baseline V = V0 - m*i (slope m in ohms, m >= 0)."""
    if slope < 0:
        raise GridRouterError(f"droop slope must be >= 0, got {slope}")
    return v0 - slope * i_meas


class HighPassFilter:
    """First-order high-pass isolating DC-link ripple from the mean.

    Discretised as y[n] = a*(y[n-1] + x[n] - x[n-1]) with
    a = tau / (tau + dt). The first sample returns zero because there is
    no ripple information yet.
    """

    def __init__(self, cutoff_hz=DEFAULT_RIPPLE_CUTOFF_HZ):
        if cutoff_hz <= 0:
            raise GridRouterError(f"high-pass cutoff must be > 0, got {cutoff_hz}")
        self.cutoff_hz = cutoff_hz
        self.tau = 1.0 / (2.0 * math.pi * cutoff_hz)
        self._prev_in = None
        self._prev_out = 0.0

    def step(self, x, dt):
        if self._prev_in is None:
            self._prev_in = x
            return 0.0
        a = self.tau / (self.tau + dt)
        y = a * (self._prev_out + x - self._prev_in)
        self._prev_in = x
        self._prev_out = y
        return y
