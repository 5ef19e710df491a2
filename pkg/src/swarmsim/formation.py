"""Centralized leader-follower formation flight.

One leader broadcasts its kinematics once per tick; eight followers each
track a fixed world-aligned offset from it with a PD + acceleration
feedforward law. The same follower law drives both the fast point-mass
swarm simulator and the full rigid-body simulator; only the plant differs.

``follower_accel`` is written against numpy broadcasting so a single code
path serves the scalar (one follower) and batched (N followers) cases.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import linear_sum_assignment

from .geometry import Vec3, vfinite

D_SAFE_DEFAULT = 0.8  # m, min pairwise spacing between follower targets


class ShapeMismatch(ValueError):
    """Shapes with different follower counts cannot be reassigned."""


@dataclass(frozen=True)
class FormationShape:
    name: str
    offsets: tuple[Vec3, ...]  # leader-relative, world-aligned
    d_safe: float = D_SAFE_DEFAULT

    def __post_init__(self) -> None:
        n = len(self.offsets)
        for i in range(n):
            for j in range(i + 1, n):
                a, b = self.offsets[i], self.offsets[j]
                d = math.dist(a, b)
                if d < self.d_safe:
                    raise ValueError(
                        f"offsets {i} and {j} are {d:.3f} m apart, below d_safe={self.d_safe}"
                    )


@dataclass(frozen=True)
class PointMassState:
    p: Vec3
    v: Vec3

    def __post_init__(self) -> None:
        if not (vfinite(self.p) and vfinite(self.v)):
            raise ValueError("point mass state must be finite")


@dataclass(frozen=True)
class LeaderMsg:
    p: Vec3
    v: Vec3
    a: Vec3


@dataclass(frozen=True)
class FollowerLaw:
    kp: float = 2.0
    kd: float = 3.0
    a_max: float = 5.0
    v_max: float = 8.0

    def __post_init__(self) -> None:
        if self.kp <= 0.0 or self.kd <= 0.0 or self.a_max <= 0.0 or self.v_max <= 0.0:
            raise ValueError("follower law gains and clamps must be positive")


def leader_broadcast(leader, a_leader: Vec3 = (0.0, 0.0, 0.0)) -> LeaderMsg:
    """Snapshot the leader's kinematics into the per-tick message.

    Accepts anything with .p and .v (point mass or rigid body state), so the
    message shape is identical between the fast and full simulators.
    """
    return LeaderMsg(p=tuple(leader.p), v=tuple(leader.v), a=tuple(a_leader))


def follower_accel(
    p: NDArray[np.float64] | Vec3,
    v: NDArray[np.float64] | Vec3,
    msg: LeaderMsg,
    offset: NDArray[np.float64] | Vec3,
    law: FollowerLaw,
) -> NDArray[np.float64]:
    """PD tracking of (leader + offset) with leader acceleration feedforward.

        u = msg.a + kp ((msg.p + offset) - p) + kd (msg.v - v),  |u| <= a_max

    Args:
      p, v: follower position/velocity, shape (3,) or (N, 3).
      offset: target offset(s), broadcastable against p.
    Returns:
      Acceleration command(s), same shape as p.
    """
    p = np.asarray(p, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    u = (
        np.asarray(msg.a)
        + law.kp * (np.asarray(msg.p) + np.asarray(offset) - p)
        + law.kd * (np.asarray(msg.v) - v)
    )
    n = np.linalg.norm(u, axis=-1, keepdims=True)
    # n = 0 rows take the 1.0 branch, but the division still evaluates
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(n > law.a_max, law.a_max / n, 1.0)
    return u * scale


def follower_accel_single(s: PointMassState, msg: LeaderMsg, offset: Vec3, law: FollowerLaw) -> Vec3:
    """Scalar convenience wrapper; same code path as the batched form."""
    u = follower_accel(s.p, s.v, msg, offset, law)
    return (float(u[0]), float(u[1]), float(u[2]))


def follower_velocity_ref(p: Vec3, v_self: Vec3, msg: LeaderMsg, offset: Vec3, law: FollowerLaw) -> Vec3:
    """Velocity-interface adapter for the full simulator.

    The flight controller consumes velocity setpoints, so the acceleration
    law is folded into v_ref = msg.v + (kp/kd) err; the controller's own
    velocity loop supplies the damping that kd provides at the point-mass
    level. Clamped to v_max.
    """
    k = law.kp / law.kd
    vr = (
        msg.v[0] + k * (msg.p[0] + offset[0] - p[0]),
        msg.v[1] + k * (msg.p[1] + offset[1] - p[1]),
        msg.v[2] + k * (msg.p[2] + offset[2] - p[2]),
    )
    n = math.sqrt(vr[0] ** 2 + vr[1] ** 2 + vr[2] ** 2)
    if n > law.v_max:
        s = law.v_max / n
        return (vr[0] * s, vr[1] * s, vr[2] * s)
    return vr


def point_mass_step(s: PointMassState, u: Vec3, law: FollowerLaw, dt: float) -> PointMassState:
    """Semi-implicit Euler on the double integrator; speed clamped to v_max."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    v = (s.v[0] + u[0] * dt, s.v[1] + u[1] * dt, s.v[2] + u[2] * dt)
    n = math.sqrt(v[0] ** 2 + v[1] ** 2 + v[2] ** 2)
    if n > law.v_max:
        c = law.v_max / n
        v = (v[0] * c, v[1] * c, v[2] * c)
    p = (s.p[0] + v[0] * dt, s.p[1] + v[1] * dt, s.p[2] + v[2] * dt)
    return PointMassState(p=p, v=v)


def reconfigure(
    current: FormationShape,
    target: FormationShape,
    assignment: str = "identity",
) -> list[tuple[int, Vec3]]:
    """Map each follower to an offset of the target shape.

    identity: follower i takes target.offsets[i]. min_distance: solves the
    linear assignment minimizing total travel between old and new offsets.
    """
    if len(current.offsets) != len(target.offsets):
        raise ShapeMismatch(
            f"{len(current.offsets)} followers vs {len(target.offsets)} target slots"
        )
    if assignment == "identity":
        return list(enumerate(target.offsets))
    if assignment == "min_distance":
        cur = np.asarray(current.offsets)
        tgt = np.asarray(target.offsets)
        cost = np.linalg.norm(cur[:, None, :] - tgt[None, :, :], axis=-1)
        rows, cols = linear_sum_assignment(cost)
        return [(int(i), target.offsets[int(j)]) for i, j in zip(rows, cols)]
    raise ValueError(f"unknown assignment policy {assignment!r}")


# ---------------------------------------------------------------------------
# built-in shapes, sized so pairwise slot spacing stays >= 0.8 m

def _triangle_outline(side: float, n: int) -> tuple[Vec3, ...]:
    """n points spaced uniformly along an equilateral triangle's perimeter,
    centroid at the origin, one vertex on +x, z = 0."""
    r = side / math.sqrt(3.0)
    verts = [
        (r * math.cos(a), r * math.sin(a))
        for a in (0.0, 2.0 * math.pi / 3.0, 4.0 * math.pi / 3.0)
    ]
    pts = []
    for k in range(n):
        s = 3.0 * side * k / n
        edge = int(s // side)
        f = (s - edge * side) / side
        ax, ay = verts[edge]
        bx, by = verts[(edge + 1) % 3]
        pts.append((ax + f * (bx - ax), ay + f * (by - ay), 0.0))
    return tuple(pts)


CUBE = FormationShape(
    name="cube",
    offsets=(
        (1.0, 1.0, 1.0), (1.0, -1.0, 1.0), (-1.0, -1.0, 1.0), (-1.0, 1.0, 1.0),
        (1.0, 1.0, -1.0), (1.0, -1.0, -1.0), (-1.0, -1.0, -1.0), (-1.0, 1.0, -1.0),
    ),
)

PYRAMID = FormationShape(
    name="pyramid",
    offsets=(
        (1.0, 1.0, -1.0), (1.0, -1.0, -1.0), (-1.0, -1.0, -1.0), (-1.0, 1.0, -1.0),
        (1.0, 0.0, 0.0), (0.0, -1.0, 0.0), (-1.0, 0.0, 0.0), (0.0, 1.0, 0.0),
    ),
)

TRIANGLE = FormationShape(name="triangle", offsets=_triangle_outline(4.0, 8))

BUILTIN_SHAPES = {"cube": CUBE, "pyramid": PYRAMID, "triangle": TRIANGLE}


def load_shape(path: str, name: str | None = None, d_safe: float = D_SAFE_DEFAULT) -> FormationShape:
    """Read a shape file: CSV rows follower_index,dx,dy,dz (header optional)."""
    rows: list[tuple[int, Vec3]] = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].strip().startswith("#"):
                continue
            if rec[0].strip().lower() in ("follower_index", "index", "i"):
                continue
            idx = int(rec[0])
            rows.append((idx, (float(rec[1]), float(rec[2]), float(rec[3]))))
    rows.sort(key=lambda r: r[0])
    if [r[0] for r in rows] != list(range(len(rows))):
        raise ValueError(f"{path}: follower indices must be 0..n-1 without gaps")
    return FormationShape(
        name=name or path, offsets=tuple(r[1] for r in rows), d_safe=d_safe
    )


def save_shape(path: str, shape: FormationShape) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["follower_index", "dx", "dy", "dz"])
        for i, off in enumerate(shape.offsets):
            w.writerow([i, repr(off[0]), repr(off[1]), repr(off[2])])


# ---------------------------------------------------------------------------
# fast point-mass swarm simulator

@dataclass
class LeaderScript:
    """Piecewise-constant leader velocity schedule: list of (t_start, v)."""

    segments: list[tuple[float, Vec3]]

    def velocity(self, t: float) -> Vec3:
        v = (0.0, 0.0, 0.0)
        for t0, seg_v in self.segments:
            if t >= t0:
                v = seg_v
        return v


class FastSwarm:
    """Vectorized 2nd-order point-mass swarm, one leader plus N followers.

    State is held in (N, 3) float64 arrays; one step costs a handful of
    numpy ops regardless of N, which is what makes the 100-agent benchmark
    run orders of magnitude faster than realtime.
    """

    def __init__(
        self,
        offsets: NDArray[np.float64] | tuple[Vec3, ...],
        law: FollowerLaw = FollowerLaw(),
        dt: float = 0.01,
        leader_start: Vec3 = (0.0, 0.0, 0.0),
        follower_start: NDArray[np.float64] | None = None,
        script: LeaderScript | None = None,
        delay_ticks: int = 0,
    ):
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        if delay_ticks < 0:
            raise ValueError("delay_ticks must be >= 0")
        self.offsets = np.asarray(offsets, dtype=np.float64)
        self.n = self.offsets.shape[0]
        self.law = law
        self.dt = dt
        self.tick = 0
        self.leader = PointMassState(p=tuple(leader_start), v=(0.0, 0.0, 0.0))
        if follower_start is None:  # default: already on station
            follower_start = np.asarray(leader_start, dtype=np.float64) + self.offsets
        self.p = np.array(follower_start, dtype=np.float64).reshape(self.n, 3)
        self.v = np.zeros((self.n, 3))
        self.script = script or LeaderScript(segments=[(0.0, (0.0, 0.0, 0.0))])
        self._delay = delay_ticks
        self._msg_fifo: list[LeaderMsg] = []

    @property
    def t(self) -> float:
        return self.tick * self.dt

    def set_offsets(self, offsets) -> None:
        off = np.asarray(offsets, dtype=np.float64)
        if off.shape != self.offsets.shape:
            raise ShapeMismatch(f"{off.shape} vs {self.offsets.shape}")
        self.offsets = off

    def step(self, n: int = 1) -> None:
        for _ in range(n):
            v_l = self.script.velocity(self.t)
            lp = self.leader.p
            self.leader = PointMassState(
                p=(lp[0] + v_l[0] * self.dt, lp[1] + v_l[1] * self.dt, lp[2] + v_l[2] * self.dt),
                v=v_l,
            )
            self._msg_fifo.append(leader_broadcast(self.leader))
            if len(self._msg_fifo) > self._delay + 1:
                self._msg_fifo.pop(0)
            msg = self._msg_fifo[0]  # delay_ticks old once the FIFO is warm
            u = follower_accel(self.p, self.v, msg, self.offsets, self.law)
            self.v = self.v + u * self.dt
            speed = np.linalg.norm(self.v, axis=-1, keepdims=True)
            over = speed > self.law.v_max
            if over.any():
                self.v = np.where(over, self.v * (self.law.v_max / speed), self.v)
            self.p = self.p + self.v * self.dt
            self.tick += 1

    def errors(self) -> NDArray[np.float64]:
        """Per-follower distance to its current target point."""
        tgt = np.asarray(self.leader.p) + self.offsets
        return np.linalg.norm(self.p - tgt, axis=-1)
