"""6-DoF rigid body state and fixed-step semi-implicit Euler integration.

The integrator is symplectic (velocity first, then position with the new
velocity) at a fixed dt, which is stable for the stiff rotor loop and makes
every run bit-reproducible. Ground contact is a simple clamp: a vehicle whose
CoG reaches z < 0 while descending is parked at z = 0 with zero twist.
"""

from __future__ import annotations

from dataclasses import dataclass

from .geometry import (
    Quat,
    Vec3,
    quat_integrate,
    rotate,
    vfinite,
)

GRAVITY = 9.81  # m/s^2, configurable per SimConfig


class SingularInertia(ValueError):
    """Inertia matrix is not symmetric positive-definite."""


Mat3 = tuple[Vec3, Vec3, Vec3]


@dataclass(frozen=True)
class MassProperties:
    """Mass and body-frame inertia, with the inverse cached for the hot loop."""

    mass: float
    J: Mat3
    J_inv: Mat3 = None  # type: ignore[assignment]  # computed in __post_init__

    def __post_init__(self) -> None:
        if self.mass <= 0.0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        j = self.J
        for i in range(3):
            for k in range(i + 1, 3):
                if abs(j[i][k] - j[k][i]) > 1e-12:
                    raise SingularInertia("inertia matrix must be symmetric")
        # SPD check + inverse via numpy (construction only, never in the loop)
        import numpy as np

        arr = np.asarray(j, dtype=np.float64)
        eigvals = np.linalg.eigvalsh(arr)
        if eigvals.min() <= 0.0:
            raise SingularInertia(f"inertia matrix not positive-definite (eigvals {eigvals})")
        inv = np.linalg.inv(arr)
        object.__setattr__(self, "J_inv", tuple(tuple(float(x) for x in row) for row in inv))

    @staticmethod
    def diagonal(mass: float, jx: float, jy: float, jz: float) -> "MassProperties":
        return MassProperties(mass, ((jx, 0.0, 0.0), (0.0, jy, 0.0), (0.0, 0.0, jz)))


@dataclass(frozen=True)
class DragModel:
    """Optional quadratic fuselage drag; disabled by default (low-speed regime)."""

    enabled: bool = False
    Cd_body: float = 0.0   # dimensionless
    area: float = 0.0      # m^2
    rho: float = 1.225     # kg/m^3

    def __post_init__(self) -> None:
        if self.Cd_body < 0.0 or self.area < 0.0:
            raise ValueError("drag coefficient and area must be >= 0")


@dataclass(frozen=True)
class RigidBodyState:
    p: Vec3      # position, world, m
    v: Vec3      # velocity, world, m/s
    q: Quat      # attitude, body->world
    Omega: Vec3  # angular velocity, body frame, rad/s

    def __post_init__(self) -> None:
        if not (vfinite(self.p) and vfinite(self.v) and vfinite(self.Omega)):
            raise ValueError("rigid body state contains non-finite components")


def _matvec(m: Mat3, v: Vec3) -> Vec3:
    return (
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    )


def net_wrench(
    s: RigidBodyState,
    F_rotor_body: Vec3,
    M_rotor_body: Vec3,
    mp: MassProperties,
    drag: DragModel,
    g: float = GRAVITY,
) -> tuple[Vec3, Vec3]:
    """World-frame force and body-frame moment acting on the vehicle.

    Rotor force is rotated into the world frame, gravity added, and an
    optional quadratic drag -0.5*rho*Cd*A*|v|*v applied. Gravity acts at the
    CoG so the moment passes through unchanged.
    """
    fx, fy, fz = rotate(s.q, F_rotor_body)
    fz -= mp.mass * g
    if drag.enabled:
        vx, vy, vz = s.v
        speed = (vx * vx + vy * vy + vz * vz) ** 0.5
        k = -0.5 * drag.rho * drag.Cd_body * drag.area * speed
        fx += k * vx
        fy += k * vy
        fz += k * vz
    return (fx, fy, fz), M_rotor_body


def step(
    s: RigidBodyState,
    F_world: Vec3,
    M_body: Vec3,
    mp: MassProperties,
    dt: float,
    ground_clamp: bool = True,
) -> RigidBodyState:
    """Advance the state one fixed step with semi-implicit Euler.

    v' = v + (F/m) dt;  p' = p + v' dt;
    Omega' = Omega + J^-1 (M - Omega x (J Omega)) dt;  q' = exp-map(q, Omega', dt).

    Identical inputs give bit-identical outputs.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    inv_m = 1.0 / mp.mass
    vx = s.v[0] + F_world[0] * inv_m * dt
    vy = s.v[1] + F_world[1] * inv_m * dt
    vz = s.v[2] + F_world[2] * inv_m * dt
    px = s.p[0] + vx * dt
    py = s.p[1] + vy * dt
    pz = s.p[2] + vz * dt

    ox, oy, oz = s.Omega
    jw = _matvec(mp.J, s.Omega)
    # gyroscopic torque Omega x (J Omega)
    gx = oy * jw[2] - oz * jw[1]
    gy = oz * jw[0] - ox * jw[2]
    gz = ox * jw[1] - oy * jw[0]
    dom = _matvec(mp.J_inv, (M_body[0] - gx, M_body[1] - gy, M_body[2] - gz))
    omega = (ox + dom[0] * dt, oy + dom[1] * dt, oz + dom[2] * dt)
    q = quat_integrate(s.q, omega, dt)

    if ground_clamp and pz < 0.0 and vz < 0.0:
        return RigidBodyState(p=(px, py, 0.0), v=(0.0, 0.0, 0.0), q=q, Omega=(0.0, 0.0, 0.0))
    return RigidBodyState(p=(px, py, pz), v=(vx, vy, vz), q=q, Omega=omega)


def is_landed(s: RigidBodyState) -> bool:
    """True when the ground clamp has parked the vehicle."""
    return s.p[2] <= 0.0 and s.v == (0.0, 0.0, 0.0)
