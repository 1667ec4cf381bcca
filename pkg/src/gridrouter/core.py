"""Shared domain types for the grid-router simulator.

Phasors, line impedances, and the parameter containers for AC feeders,
DC feeders, and the hub. All electrical quantities are SI internally
(volts, amps, ohms, henries, farads, watts, vars, radians); per-unit
exists only at the configuration boundary.

Phasors are stored rectangular so arithmetic never wraps angles; polar
form appears only at the API surface.
"""

import math
from dataclasses import dataclass

DEFAULT_FREQUENCY_HZ = 50.0


class GridRouterError(ValueError):
    """Invalid electrical parameter or operation."""


@dataclass(frozen=True)
class Phasor:
    """Complex AC quantity (voltage or current) in rectangular form."""

    re: float = 0.0
    im: float = 0.0

    @property
    def magnitude(self):
        return math.hypot(self.re, self.im)

    @property
    def angle(self):
        """Phase in radians, atan2 convention."""
        return math.atan2(self.im, self.re)

    def to_complex(self):
        return complex(self.re, self.im)

    @staticmethod
    def from_complex(z):
        return Phasor(z.real, z.imag)

    def conjugate(self):
        return Phasor(self.re, -self.im)

    def __add__(self, other):
        return Phasor(self.re + other.re, self.im + other.im)

    def __sub__(self, other):
        return Phasor(self.re - other.re, self.im - other.im)

    def __neg__(self):
        return Phasor(-self.re, -self.im)

    def __mul__(self, other):
        if isinstance(other, Phasor):
            return Phasor.from_complex(self.to_complex() * other.to_complex())
        return Phasor(self.re * other, self.im * other)

    __rmul__ = __mul__


def phasor_from_polar(magnitude, angle):
    """Build a phasor from magnitude (>= 0) and angle in radians."""
    if magnitude < 0:
        raise GridRouterError(f"phasor magnitude must be >= 0, got {magnitude}")
    return Phasor(magnitude * math.cos(angle), magnitude * math.sin(angle))


@dataclass(frozen=True)
class Impedance:
    """Series line impedance R + jX at the nominal grid frequency.

    When the reactance was derived from an inductance the inductance is
    kept so dynamic models can reuse it.
    """

    r: float                 # ohms
    x: float                 # ohms
    l: float | None = None   # henries, origin of x when known

    @staticmethod
    def from_rl(r, l, omega):
        return Impedance(r, omega * l, l)

    @property
    def magnitude(self):
        return math.hypot(self.r, self.x)

    def to_complex(self):
        return complex(self.r, self.x)


def impedance_angle(z):
    """Impedance angle atan2(X, R) in radians; |Z| = 0 is rejected."""
    if z.magnitude == 0.0:
        raise GridRouterError("impedance angle undefined for |Z| = 0")
    return math.atan2(z.x, z.r)


@dataclass
class AcFeeder:
    """AC feeder: a stiff source behind a line, optionally steered by a
    series module.

    `module` holds an AcSeriesModuleState when the feeder carries one;
    the engine owns its update.
    """

    id: str
    source: Phasor            # volts
    line: Impedance
    module: object = None
    p_ref: float = 0.0        # watts
    q_ref: float = 0.0        # vars

    def __post_init__(self):
        if self.source.magnitude <= 0:
            raise GridRouterError(f"ac feeder {self.id!r}: source magnitude must be > 0")
        if self.line.magnitude <= 0:
            raise GridRouterError(f"ac feeder {self.id!r}: line |Z| must be > 0")


@dataclass
class DcFeeder:
    """DC feeder: a stiff source behind an RL line, optionally steered by
    a series module."""

    id: str
    v_source: float           # volts
    r: float                  # ohms
    l: float                  # henries
    module: object = None
    i_meas: float = 0.0       # amps, line current state

    def __post_init__(self):
        if self.v_source <= 0:
            raise GridRouterError(f"dc feeder {self.id!r}: source voltage must be > 0")
        if self.l <= 0:
            raise GridRouterError(f"dc feeder {self.id!r}: line inductance must be > 0")
        if self.r < 0:
            raise GridRouterError(f"dc feeder {self.id!r}: line resistance must be >= 0")


@dataclass
class HubParams:
    """Hub DC-link and battery ratings."""

    v_dc: float               # volts, nominal link voltage
    c_dc: float               # farads
    q_battery: float = 0.0    # coulombs
    v_battery: float = 0.0    # volts
    p_bess_limit: float = 0.0  # watts

    def __post_init__(self):
        if self.v_dc <= 0:
            raise GridRouterError("hub: nominal DC voltage must be > 0")
        if self.c_dc <= 0:
            raise GridRouterError("hub: link capacitance must be > 0")
        if self.q_battery < 0:
            raise GridRouterError("hub: battery capacity must be >= 0")
