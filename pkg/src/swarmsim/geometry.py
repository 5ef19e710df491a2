"""Frames, vectors, quaternions, poses and the lockstep clock.

Conventions used everywhere in this package:

* World frame is ENU (x east, y north, z up), so gravity is (0, 0, -g).
* Body frame is FLU (x forward, y left, z up); rotor thrust acts along +z body.
* Quaternions are scalar-first (w, x, y, z) and map body to world:
  ``v_world = rotate(q, v_body)``.
* Vectors are plain float 3-tuples. The 1 kHz inner loop runs these in scalar
  Python on purpose: tiny-array library calls cost more than the math here,
  and plain IEEE-754 double arithmetic keeps runs bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

Vec3 = tuple[float, float, float]
Quat = tuple[float, float, float, float]  # (w, x, y, z)

ZERO3: Vec3 = (0.0, 0.0, 0.0)
QUAT_IDENTITY: Quat = (1.0, 0.0, 0.0, 0.0)


def vec3(x: float, y: float, z: float) -> Vec3:
    return (float(x), float(y), float(z))


def vadd(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def vsub(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def vscale(a: Vec3, s: float) -> Vec3:
    return (a[0] * s, a[1] * s, a[2] * s)


def vdot(a: Vec3, b: Vec3) -> float:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def vcross(a: Vec3, b: Vec3) -> Vec3:
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def vnorm(a: Vec3) -> float:
    return math.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])


def vclamp_norm(a: Vec3, max_norm: float) -> Vec3:
    """Scale ``a`` down so its norm does not exceed ``max_norm``."""
    n = vnorm(a)
    if n <= max_norm or n == 0.0:
        return a
    return vscale(a, max_norm / n)


def vfinite(a: Vec3) -> bool:
    return math.isfinite(a[0]) and math.isfinite(a[1]) and math.isfinite(a[2])


# --- quaternions -----------------------------------------------------------


def quat_normalize(q: Quat) -> Quat:
    n = math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    inv = 1.0 / n
    return (q[0] * inv, q[1] * inv, q[2] * inv, q[3] * inv)


def quat_conj(q: Quat) -> Quat:
    return (q[0], -q[1], -q[2], -q[3])


def quat_mul(a: Quat, b: Quat) -> Quat:
    """Hamilton product a ⊗ b (scalar-first)."""
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return (
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    )


def rotate(q: Quat, v: Vec3) -> Vec3:
    """Rotate body-frame vector ``v`` into the parent (world) frame.

    Preserves the norm of ``v``; ``q`` must be unit-norm.
    """
    w, x, y, z = q
    vx, vy, vz = v
    # q * (0, v) * q^-1 expanded; ~24 multiplies, no trig
    tx = 2.0 * (y * vz - z * vy)
    ty = 2.0 * (z * vx - x * vz)
    tz = 2.0 * (x * vy - y * vx)
    return (
        vx + w * tx + (y * tz - z * ty),
        vy + w * ty + (z * tx - x * tz),
        vz + w * tz + (x * ty - y * tx),
    )


def rotate_inv(q: Quat, v: Vec3) -> Vec3:
    """Rotate parent-frame vector ``v`` into the body frame (inverse of rotate)."""
    return rotate(quat_conj(q), v)


def quat_from_axis_angle(axis: Vec3, angle: float) -> Quat:
    n = vnorm(axis)
    if n == 0.0:
        return QUAT_IDENTITY
    half = 0.5 * angle
    s = math.sin(half) / n
    return (math.cos(half), axis[0] * s, axis[1] * s, axis[2] * s)


def quat_integrate(q: Quat, omega_body: Quat | Vec3, dt: float) -> Quat:
    """Advance attitude by body angular velocity over dt via the exponential map.

    Exact for constant omega across the step. Result is renormalized so the
    unit-norm invariant survives arbitrarily many calls.
    """
    wx, wy, wz = omega_body[0], omega_body[1], omega_body[2]
    theta = math.sqrt(wx * wx + wy * wy + wz * wz) * dt
    if theta == 0.0:
        return q
    half = 0.5 * theta
    s = math.sin(half) / theta * dt
    dq = (math.cos(half), wx * s, wy * s, wz * s)
    return quat_normalize(quat_mul(q, dq))


def quat_to_matrix(q: Quat) -> tuple[Vec3, Vec3, Vec3]:
    """Rows of the body-to-world rotation matrix R(q)."""
    w, x, y, z = q
    xx, yy, zz = x * x, y * y, z * z
    wx, wy, wz = w * x, w * y, w * z
    xy, xz, yz = x * y, x * z, y * z
    return (
        (1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy)),
        (2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx)),
        (2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy)),
    )


def quat_from_matrix(r: tuple[Vec3, Vec3, Vec3]) -> Quat:
    """Quaternion from a body-to-world rotation matrix (Shepperd's method)."""
    trace = r[0][0] + r[1][1] + r[2][2]
    if trace > 0.0:
        s = math.sqrt(trace + 1.0) * 2.0
        q = (0.25 * s, (r[2][1] - r[1][2]) / s, (r[0][2] - r[2][0]) / s, (r[1][0] - r[0][1]) / s)
    elif r[0][0] > r[1][1] and r[0][0] > r[2][2]:
        s = math.sqrt(1.0 + r[0][0] - r[1][1] - r[2][2]) * 2.0
        q = ((r[2][1] - r[1][2]) / s, 0.25 * s, (r[0][1] + r[1][0]) / s, (r[0][2] + r[2][0]) / s)
    elif r[1][1] > r[2][2]:
        s = math.sqrt(1.0 + r[1][1] - r[0][0] - r[2][2]) * 2.0
        q = ((r[0][2] - r[2][0]) / s, (r[0][1] + r[1][0]) / s, 0.25 * s, (r[1][2] + r[2][1]) / s)
    else:
        s = math.sqrt(1.0 + r[2][2] - r[0][0] - r[1][1]) * 2.0
        q = ((r[1][0] - r[0][1]) / s, (r[0][2] + r[2][0]) / s, (r[1][2] + r[2][1]) / s, 0.25 * s)
    return quat_normalize(q)


def quat_angle(q: Quat) -> float:
    """Rotation angle of q in radians, in [0, pi]."""
    vec = math.sqrt(q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    return 2.0 * math.atan2(vec, abs(q[0]))


def yaw_of(q: Quat) -> float:
    """Heading angle of the body x axis projected on the world xy plane."""
    r = quat_to_matrix(q)
    return math.atan2(r[1][0], r[0][0])


def quat_from_yaw(yaw: float) -> Quat:
    return (math.cos(0.5 * yaw), 0.0, 0.0, math.sin(0.5 * yaw))


# --- poses and time --------------------------------------------------------


@dataclass
class Pose:
    """A timestamped rigid transform: world position plus body-to-world attitude."""

    t: float
    p: Vec3
    q: Quat

    def __post_init__(self) -> None:
        if self.t < 0.0:
            raise ValueError(f"pose timestamp must be >= 0, got {self.t}")


UNBOUNDED = "unbounded"


@dataclass
class SimClock:
    """Lockstep simulation clock.

    Time is always recomputed as ``step_index * dt`` (one multiply), never
    accumulated by repeated addition, so t is bit-identical for a given step
    count on every run and platform.
    """

    dt: float
    step_index: int = 0
    realtime_factor: float | str = UNBOUNDED

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.realtime_factor != UNBOUNDED and float(self.realtime_factor) <= 0.0:
            raise ValueError("realtime_factor must be positive or 'unbounded'")

    @property
    def t(self) -> float:
        return self.step_index * self.dt

    def advance(self) -> float:
        """Advance one step; return the advised wall-clock delay in seconds.

        The delay is advisory pacing only (dt / realtime_factor, or 0 when
        unbounded); simulation results never depend on whether the caller
        actually sleeps.
        """
        self.step_index += 1
        if self.realtime_factor == UNBOUNDED:
            return 0.0
        return self.dt / float(self.realtime_factor)
