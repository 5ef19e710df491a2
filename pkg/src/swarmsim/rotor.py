"""Per-rotor aerodynamic wrench model and coefficient derivation.

Each spinning rotor contributes four effects, all expressed in the body frame:

* thrust ``T = omega^2 * C_T`` along +z body,
* H-force ``H = -omega * C_D * v_perp`` (in-plane drag),
* rolling moment ``M_R = -zeta * omega * C_R * v_perp``,
* drag moment ``M_D = -zeta * C_M * T`` about body z (opposes rotor spin).

``v_perp`` is the body velocity projected onto the rotor plane (z zeroed);
rotors are assumed coplanar and normal to body z. The four coefficients can
be supplied directly or derived from blade geometry via ``derive_coeffs``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .geometry import Vec3

COEFF_EPSILON = 1e-12  # clamp floor for degenerate (zero) derived coefficients


class InvalidGeometry(ValueError):
    """Blade geometry violates a physical invariant."""


class NegativeSpeed(ValueError):
    """Rotor angular speed must be >= 0."""


class LengthMismatch(ValueError):
    """Rotor speed list and rotor definition list differ in length."""


class DegenerateCoefficient(UserWarning):
    """A derived coefficient came out non-positive and was clamped."""


@dataclass(frozen=True)
class BladeGeometry:
    """Blade and air constants from which rotor coefficients derive."""

    rho: float        # air density, kg/m^3
    Ct0: float        # static thrust coefficient
    Cd0: float        # static drag coefficient
    Cm0: float        # static moment coefficient
    theta0: float     # blade-root pitch, rad
    theta1: float     # blade twist, rad
    k_lift: float     # lift-curve slope, 1/rad
    d: float          # rotor diameter, m
    n_blades: int     # blades per rotor
    c_chord: float    # mean chord, m

    def __post_init__(self) -> None:
        if self.rho <= 0.0:
            raise InvalidGeometry(f"air density must be > 0, got {self.rho}")
        if self.d <= 0.0:
            raise InvalidGeometry(f"rotor diameter must be > 0, got {self.d}")
        if self.c_chord <= 0.0:
            raise InvalidGeometry(f"mean chord must be > 0, got {self.c_chord}")
        if self.n_blades < 2:
            raise InvalidGeometry(f"need at least 2 blades, got {self.n_blades}")
        if self.Ct0 <= 0.0:
            raise InvalidGeometry(f"static thrust coefficient must be > 0, got {self.Ct0}")


@dataclass(frozen=True)
class RotorCoeffs:
    C_T: float  # N*s^2, thrust per omega^2
    C_D: float  # N*s,   H-force per omega per m/s
    C_R: float  # N*m*s, rolling moment per omega per m/s
    C_M: float  # m,     drag moment per N of thrust

    def __post_init__(self) -> None:
        for name in ("C_T", "C_D", "C_R", "C_M"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"rotor coefficient {name} must be positive")


def derive_coeffs(g: BladeGeometry) -> RotorCoeffs:
    """Derive the four rotor coefficients from blade geometry.

    C_T = Ct0 * rho * d^4 / (2*pi)^2
    C_D = rho * n_blades * c * Cd0 * d^2 / 16
    C_R = (theta0/48 + theta1/64) * rho * n_blades * k * c * d^3
    C_M = (Cm0 / Ct0) * d

    A geometry that legitimately yields a zero coefficient (e.g. an untwisted
    flat blade giving C_R = 0) is warned about and clamped to a tiny positive
    epsilon so the all-positive invariant holds downstream.
    """
    d2 = g.d * g.d
    c_t = g.Ct0 * g.rho * d2 * d2 / (4.0 * math.pi * math.pi)
    c_d = g.rho * g.n_blades * g.c_chord * g.Cd0 * d2 / 16.0
    c_r = (g.theta0 / 48.0 + g.theta1 / 64.0) * g.rho * g.n_blades * g.k_lift * g.c_chord * d2 * g.d
    c_m = (g.Cm0 / g.Ct0) * g.d

    clamped = {}
    for name, val in (("C_T", c_t), ("C_D", c_d), ("C_R", c_r), ("C_M", c_m)):
        if val <= 0.0:
            warnings.warn(
                f"derived {name} = {val:g} is not positive; clamping to {COEFF_EPSILON:g}",
                DegenerateCoefficient,
                stacklevel=2,
            )
            clamped[name] = COEFF_EPSILON
    return RotorCoeffs(
        C_T=clamped.get("C_T", c_t),
        C_D=clamped.get("C_D", c_d),
        C_R=clamped.get("C_R", c_r),
        C_M=clamped.get("C_M", c_m),
    )


@dataclass(frozen=True)
class RotorDef:
    """One rotor: mounting point, spin direction, coefficients, speed limit."""

    r: Vec3            # offset from CoG, body frame, m
    zeta: int          # +1 CCW, -1 CW
    coeffs: RotorCoeffs
    omega_max: float   # rad/s

    def __post_init__(self) -> None:
        if self.zeta not in (1, -1):
            raise ValueError(f"zeta must be +1 or -1, got {self.zeta}")
        if self.omega_max <= 0.0:
            raise ValueError("omega_max must be positive")


@dataclass(frozen=True)
class RotorWrench:
    """Force/moment contribution of a single rotor, body frame."""

    T: Vec3    # thrust, along +z body
    H: Vec3    # H-force, in rotor plane
    M_R: Vec3  # rolling moment, in rotor plane
    M_D: Vec3  # drag moment, about body z


def rotor_wrench(omega: float, rotor: RotorDef, v_body: Vec3) -> RotorWrench:
    """Aerodynamic wrench of one rotor spinning at ``omega`` rad/s."""
    if omega < 0.0:
        raise NegativeSpeed(f"rotor speed must be >= 0, got {omega}")
    c = rotor.coeffs
    thrust = omega * omega * c.C_T
    # velocity projected onto the rotor plane (rotors normal to body z)
    vpx, vpy = v_body[0], v_body[1]
    kh = -omega * c.C_D
    kr = -rotor.zeta * omega * c.C_R
    return RotorWrench(
        T=(0.0, 0.0, thrust),
        H=(kh * vpx, kh * vpy, 0.0),
        M_R=(kr * vpx, kr * vpy, 0.0),
        M_D=(0.0, 0.0, -rotor.zeta * c.C_M * thrust),
    )


def total_rotor_wrench(
    omegas: list[float], rotors: list[RotorDef], v_body: Vec3
) -> tuple[Vec3, Vec3]:
    """Sum all rotor contributions into one body-frame force and moment.

    F = sum(T_i + H_i); M = sum(M_R_i + M_D_i + r_i x (T_i + H_i)).
    Summation runs in rotor index order so symmetric layouts cancel exactly.
    """
    if len(omegas) != len(rotors):
        raise LengthMismatch(f"{len(omegas)} speeds for {len(rotors)} rotors")
    if not rotors:
        raise LengthMismatch("need at least one rotor")
    vpx, vpy = v_body[0], v_body[1]
    fx = fy = fz = 0.0
    mx = my = mz = 0.0
    # inlined rotor_wrench per rotor; identical arithmetic, no temporaries
    # (this runs once per vehicle per physics tick)
    for omega, rotor in zip(omegas, rotors):
        if omega < 0.0:
            raise NegativeSpeed(f"rotor speed must be >= 0, got {omega}")
        c = rotor.coeffs
        thrust = omega * omega * c.C_T
        kh = -omega * c.C_D
        hx = kh * vpx
        hy = kh * vpy
        kr = -rotor.zeta * omega * c.C_R
        rx, ry, rz = rotor.r
        fx += hx
        fy += hy
        fz += thrust
        mx += kr * vpx + (ry * thrust - rz * hy)
        my += kr * vpy + (rz * hx - rx * thrust)
        mz += -rotor.zeta * c.C_M * thrust + (rx * hy - ry * hx)
    return (fx, fy, fz), (mx, my, mz)


@dataclass
class RotorLag:
    """First-order spin-up lag between commanded and actual rotor speeds.

    Thrust cannot step instantaneously; each speed relaxes toward its command
    with time constant tau (0 disables the lag).
    """

    tau: float = 0.02

    def advance(self, omegas: list[float], commands: list[float], dt: float) -> list[float]:
        if self.tau <= 0.0:
            return list(commands)
        decay = math.exp(-dt / self.tau)
        return [cmd + (w - cmd) * decay for w, cmd in zip(omegas, commands)]
