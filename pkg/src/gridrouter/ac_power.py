"""Steady-state AC feeder power flow.

The exact complex-arithmetic route is the system of record for
simulation. The closed-form and small-angle dq evaluators reproduce
their textbook derivations term by term, so the gap between the routes
can be measured with `closed_form_gap` instead of being silently
absorbed. The dq model comes in two flavours:

* `approx_power_dq` keeps the raw cross-coupling correction terms.
* `decoupled_power_dq` forces the injection response onto orthogonal
  d/q axes; its injection Jacobian is exactly `sensitivity_matrix`,
  which makes it the model the decoupling design reasons about.
"""

import math

from typing import NamedTuple

import numpy as np

from .core import GridRouterError, Phasor, impedance_angle


class PowerPair(NamedTuple):
    p: float   # watts
    q: float   # vars


class DqInjection(NamedTuple):
    """Series-injected voltage resolved on the bus-aligned dq axes."""

    v_d: float = 0.0   # volts
    v_q: float = 0.0   # volts


def line_current(v_feeder, v_bus, v_inj, z):
    """Line current (V_feeder - V_bus - V_inj) / Z as a phasor."""
    if z.magnitude == 0.0:
        raise GridRouterError("line current undefined for |Z| = 0")
    num = v_feeder.to_complex() - v_bus.to_complex() - v_inj.to_complex()
    return Phasor.from_complex(num / z.to_complex())


def feeder_power_exact(v_feeder, i_line):
    """P + jQ = V I*, evaluated in complex arithmetic."""
    s = v_feeder.to_complex() * i_line.to_complex().conjugate()
    return PowerPair(s.real, s.imag)


def feeder_power_closed_form(v_mag, v_bus_mag, delta, delta_bus, z, v_inj, i_line):
    """Closed-form active/reactive power including the injection terms.

    Evaluates the derived trigonometric expressions verbatim, with the
    |V_inj| |I| cos/sin(phi_inj - theta_I) contributions. This is an
    approximation of the exact product; use `closed_form_gap` to
    quantify the difference at an operating point.
    """
    if z.magnitude == 0.0:
        raise GridRouterError("closed-form power undefined for |Z| = 0")
    ang = impedance_angle(z)
    k = v_mag * v_bus_mag / z.magnitude
    d = delta - delta_bus
    inj = v_inj.magnitude * i_line.magnitude
    rel = v_inj.angle - i_line.angle
    p = k * (math.cos(ang) * math.cos(d) + math.sin(ang) * math.sin(d)) + inj * math.cos(rel)
    q = k * (math.sin(ang) * math.cos(d) - math.cos(ang) * math.sin(d)) + inj * math.sin(rel)
    return PowerPair(p, q)


def cross_coupling_terms(v_mag, delta, z, inj):
    """Cross-coupling corrections (dP, dQ) of the small-angle dq model.

    For a purely reactive line these collapse to (0, |V| v_d / |Z|).
    """
    ang = impedance_angle(z)
    c, s = math.cos(ang), math.sin(ang)
    g = v_mag / z.magnitude
    dp = -g * inj.v_q * c + g * inj.v_d * s * delta - g * inj.v_q * c * delta
    dq = g * inj.v_d * s + g * inj.v_q * c * delta - g * inj.v_d * s * delta
    return dp, dq


def approx_power_dq(v_mag, v_bus_mag, delta, z, inj):
    """Small-angle dq power model including the cross-coupling terms.

    Valid only for small feeder-to-bus phase differences; the caller
    owns the small-angle budget.
    """
    ang = impedance_angle(z)
    c, s = math.cos(ang), math.sin(ang)
    g = v_mag / z.magnitude
    dp, dq = cross_coupling_terms(v_mag, delta, z, inj)
    p = g * v_bus_mag * (c + s * delta) + g * inj.v_d * c + dp
    q = g * (v_mag - v_bus_mag) * s + g * inj.v_q * s + dq
    return PowerPair(p, q)


def decoupled_power_dq(v_mag, v_bus_mag, delta, z, inj):
    """First-order dq power model with a decoupled injection response.

    The injection contribution is the antiderivative of
    `sensitivity_matrix`: d-axis voltage steers P, q-axis voltage steers
    Q, rotated by the impedance angle. The zero-injection base terms
    match `approx_power_dq`.
    """
    ang = impedance_angle(z)
    c, s = math.cos(ang), math.sin(ang)
    g = v_mag / z.magnitude
    p = g * v_bus_mag * (c + s * delta) + g * (c * inj.v_d - s * inj.v_q)
    q = g * (v_mag - v_bus_mag) * s + g * (s * inj.v_d + c * inj.v_q)
    return PowerPair(p, q)


def sensitivity_matrix(v_mag, z):
    """Injection-to-power sensitivities as a 2x2 array.

    Rows are (P, Q), columns are (v_d, v_q):

        [[ dP/dv_d, dP/dv_q ],      |V|   [[ cos, -sin ],
         [ dQ/dv_d, dQ/dv_q ]]  =  ----- * [ sin,  cos ]]
                                    |Z|

    which is |V|/|Z| times a rotation by the impedance angle, so the
    determinant is (|V|/|Z|)^2 and the columns are orthogonal.
    """
    ang = impedance_angle(z)
    g = v_mag / z.magnitude
    c, s = math.cos(ang), math.sin(ang)
    return np.array([[g * c, -g * s], [g * s, g * c]])


def closed_form_gap(v_feeder, v_bus, v_inj, z):
    """Relative gap between the closed-form and exact power routes.

    Both P and Q gaps are normalised by the apparent power |V||I| at the
    operating point, floored at 1% of the feeder's natural power scale
    |V|^2/|Z| so near-zero-current points stay meaningful. Returns
    (gap_p, gap_q).
    """
    i = line_current(v_feeder, v_bus, v_inj, z)
    exact = feeder_power_exact(v_feeder, i)
    closed = feeder_power_closed_form(
        v_feeder.magnitude, v_bus.magnitude, v_feeder.angle, v_bus.angle, z, v_inj, i
    )
    v = v_feeder.magnitude
    s_app = max(v * i.magnitude, 0.01 * v * v / z.magnitude)
    return abs(closed.p - exact.p) / s_app, abs(closed.q - exact.q) / s_app
