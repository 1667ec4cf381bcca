"""Linearised analysis of the DC series-module loop.

Closed-loop current transfer function, characteristic polynomial,
stability predicates for the damping and virtual-inertia conditions,
the current-loop pole, and Bode sampling.

The controller transfer function is G_c(s) = K_p + K_i/s + K_L s. After
clearing the 1/s terms the published second-order arrangement carries
the derivative gain K_L in the damping coefficient:

    L s^2 + [R + K_p + K_L - (K_C - K_r)/C] s + K_i + 1/C = 0

`closed_loop_tf` and `characteristic_poly` use that arrangement
verbatim so the stability condition K_C - K_r < (R + K_p + K_L) C reads
directly off the s^1 coefficient.
"""

import math
from dataclasses import dataclass

import numpy as np

from .core import GridRouterError


@dataclass(frozen=True)
class SmallSignalParams:
    """Plant and controller parameters of the linearised DC loop."""

    l: float                # henries
    r: float                # ohms
    c: float                # farads
    kp: float = 0.0         # V/A
    ki: float = 0.0         # V/(A*s)
    kl: float = 0.0         # V*s/A
    kc: float = 0.0         # s
    kr: float = 0.0         # dimensionless
    z: float = 1.0          # ohms, loop impedance of the inertia voltage loop

    def __post_init__(self):
        if self.l <= 0:
            raise GridRouterError("small-signal model needs L > 0")
        if self.c <= 0:
            raise GridRouterError("small-signal model needs C > 0")
        if self.r < 0:
            raise GridRouterError("small-signal model needs R >= 0")
        if self.z <= 0:
            raise GridRouterError("small-signal model needs Z > 0")


@dataclass(frozen=True)
class RationalTF:
    """Ratio of polynomials in s, coefficients in descending powers."""

    num: tuple
    den: tuple

    def __post_init__(self):
        if not self.den or self.den[0] == 0:
            raise GridRouterError("transfer function needs a nonzero leading denominator")
        for coeff in (*self.num, *self.den):
            if not math.isfinite(coeff):
                raise GridRouterError("transfer function coefficients must be finite")

    def evaluate(self, s):
        """Complex value of the transfer function at s."""
        num = 0j
        for c in self.num:
            num = num * s + c
        den = 0j
        for c in self.den:
            den = den * s + c
        return num / den


def characteristic_poly(p):
    """Quadratic coefficients (a2, a1, a0) of the closed current loop."""
    a2 = p.l
    a1 = p.r + p.kp + p.kl - (p.kc - p.kr) / p.c
    a0 = p.ki + 1.0 / p.c
    return (a2, a1, a0)


def closed_loop_tf(p):
    """Closed-loop current-tracking transfer function i(s)/i_ref(s).

    G_c(s) over the loop impedance, cleared of 1/s terms by multiplying
    through by s; the denominator equals `characteristic_poly` exactly.
    """
    return RationalTF((p.kl, p.kp, p.ki), characteristic_poly(p))


def poles(poly):
    """Both roots of a2 s^2 + a1 s + a0 in a cancellation-free form.

    Real roots use q = -(a1 + sign(a1) sqrt(disc))/2 with roots q/a2 and
    a0/q, which keeps the smaller root accurate when the coefficients
    are widely scaled.
    """
    a2, a1, a0 = poly
    if a2 == 0:
        raise GridRouterError("pole extraction needs a quadratic (a2 != 0)")
    disc = a1 * a1 - 4.0 * a2 * a0
    if disc >= 0:
        root = math.sqrt(disc)
        q = -(a1 + math.copysign(root, a1)) / 2.0
        if q == 0.0:
            return (complex(-a1 / (2.0 * a2)), complex(-a1 / (2.0 * a2)))
        return (complex(q / a2), complex(a0 / q))
    root = math.sqrt(-disc)
    re = -a1 / (2.0 * a2)
    im = root / (2.0 * a2)
    return (complex(re, im), complex(re, -im))


def stability_margin(p):
    """Signed damping margin (R + K_p + K_L) C - (K_C - K_r).

    Positive means the damping condition holds.
    """
    return (p.r + p.kp + p.kl) * p.c - (p.kc - p.kr)


def is_stable_condition(p):
    """Damping condition K_C - K_r < (R + K_p + K_L) C."""
    return (p.kc - p.kr) < (p.r + p.kp + p.kl) * p.c


MARGINAL_BAND = 1e-9


def classify_stability(p, band=MARGINAL_BAND):
    """'stable', 'unstable', or 'marginal' within +-band of equality."""
    margin = stability_margin(p)
    if margin > band:
        return "stable"
    if margin < -band:
        return "unstable"
    return "marginal"


def closed_loop_tf_filtered(p, cutoff_hz):
    """Closed current loop with a realizable ripple measurement.

    `closed_loop_tf` treats the ripple measurement as a pure
    differentiator, which no physical filter provides. This variant
    models the measurement as a first-order high-pass with time
    constant tau = 1/(2 pi cutoff) acting across the feeder loop, the
    same path the time-domain engine uses, and returns the third-order
    transfer function that results. At kr = kc = kl = 0 it factors into
    the unfiltered quadratic times (tau s + 1).
    """
    if cutoff_hz <= 0:
        raise GridRouterError(f"filter cutoff must be > 0, got {cutoff_hz}")
    tau = 1.0 / (2.0 * math.pi * cutoff_hz)
    c, l = p.c, p.l
    r_eff = p.r + p.kp
    num = (
        c * tau * p.kl,
        c * (p.kl + tau * p.kp),
        c * (p.kp + tau * p.ki),
        c * p.ki,
    )
    den = (
        c * tau * (l + p.kl),
        c * (l + p.kl) + c * tau * r_eff - tau * p.kc,
        c * r_eff - p.kc + c * p.ki * tau + tau * (1.0 - p.kr),
        c * p.ki + 1.0,
    )
    return RationalTF(num, den)


def filtered_loop_stable(p, cutoff_hz):
    """Root check of the filtered loop: every pole in the open left
    half-plane (a 1e-9 relative margin counts as unstable)."""
    tf = closed_loop_tf_filtered(p, cutoff_hz)
    roots = np.roots(tf.den)
    scale = max(abs(r) for r in roots) if len(roots) else 1.0
    return all(r.real < -1e-9 * scale for r in roots)


def vic_tf(c, kc, z):
    """DC-link voltage response -1 / ((C + K_C/Z) s) of the inertia loop.

    K_C/Z acts as added capacitance, lowering the magnitude uniformly by
    20 log10((C + K_C/Z)/C) dB relative to the bare link.
    """
    if c <= 0:
        raise GridRouterError(f"inertia loop needs C > 0, got {c}")
    if z <= 0:
        raise GridRouterError(f"inertia loop needs Z > 0, got {z}")
    return RationalTF((-1.0,), (c + kc / z, 0.0))


def vic_stable(c, kc, z):
    """Inertia-loop condition K_C < Z C."""
    return kc < z * c


def current_loop_pole(r, l, kl):
    """Real current-loop pole -R / (L + K_L) in 1/s."""
    if l + kl <= 0:
        raise GridRouterError(f"current loop needs L + K_L > 0, got {l + kl}")
    return -r / (l + kl)


def bode_sample(tf, f_min, f_max, points):
    """Sample gain (dB) and unwrapped phase (deg) on a log-spaced grid.

    Returns a list of (f_hz, gain_db, phase_deg) rows with strictly
    increasing frequency.
    """
    if f_min <= 0:
        raise GridRouterError(f"Bode sampling needs f_min > 0, got {f_min}")
    if f_max <= f_min:
        raise GridRouterError("Bode sampling needs f_max > f_min")
    if points < 2:
        raise GridRouterError(f"Bode sampling needs at least 2 points, got {points}")
    freqs = np.logspace(math.log10(f_min), math.log10(f_max), int(points))
    resp = np.array([tf.evaluate(2j * math.pi * f) for f in freqs])
    gains = 20.0 * np.log10(np.abs(resp))
    phases = np.degrees(np.unwrap(np.angle(resp)))
    return [(float(f), float(g), float(ph)) for f, g, ph in zip(freqs, gains, phases)]
