"""Cascaded flight controller and motor mixer.

The loop structure is the textbook multirotor cascade:

    position error --P--> velocity ref --PID--> acceleration ref
                 -> desired thrust vector + attitude
    attitude error --P--> body-rate ref --PID--> (collective thrust, moments)
                 -> mixer -> per-rotor speed commands

Outer loops (position through attitude) run at the control rate; the rate
loop and mixer run every physics tick. Gravity compensation is built into
the acceleration-to-thrust conversion, so a vehicle in hover commands thrust
equal to its weight exactly. All controller state (integrators, latched
references, mode) lives on the instance and nowhere else; stepping is
deterministic.

Shipped default gains target the default 1.5 kg quad and are tuned for this
engine, not taken from any flight stack.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    Quat,
    Vec3,
    quat_conj,
    quat_from_matrix,
    quat_mul,
    rotate,
    vclamp_norm,
    yaw_of,
)
from .rigidbody import MassProperties, RigidBodyState, _matvec
from .rotor import RotorDef


class RankDeficientLayout(ValueError):
    """Rotor layout cannot span thrust plus three moments."""


class Mode(enum.Enum):
    POSITION_HOLD = "position_hold"
    VELOCITY_YAW = "velocity_yaw"
    TAKEOFF = "takeoff"
    LAND = "land"


@dataclass(frozen=True)
class Setpoint:
    mode: Mode
    p_ref: Vec3 | None = None
    v_ref: Vec3 | None = None       # world frame
    yaw_ref: float | None = None
    yaw_rate_ref: float = 0.0

    def __post_init__(self) -> None:
        if self.mode is Mode.POSITION_HOLD and self.p_ref is None:
            raise ValueError("PositionHold requires p_ref")
        if self.mode is Mode.VELOCITY_YAW and self.v_ref is None:
            raise ValueError("VelocityYaw requires v_ref")


@dataclass(frozen=True)
class PidGains:
    """Per-axis PID gains for one loop."""

    kp: Vec3
    ki: Vec3 = (0.0, 0.0, 0.0)
    kd: Vec3 = (0.0, 0.0, 0.0)
    i_limit: float = 1.0       # clamp on each integrator state
    output_limit: float = 1e9  # clamp on the output vector norm

    def __post_init__(self) -> None:
        for g in (*self.kp, *self.ki, *self.kd):
            if g < 0.0:
                raise ValueError("PID gains must be >= 0")
        if self.i_limit <= 0.0 or self.output_limit <= 0.0:
            raise ValueError("PID limits must be positive")


@dataclass(frozen=True)
class ControllerGains:
    pos: PidGains = PidGains(kp=(1.2, 1.2, 1.2), output_limit=3.0)
    vel: PidGains = PidGains(
        kp=(3.0, 3.0, 4.0), ki=(0.6, 0.6, 1.0), i_limit=2.0, output_limit=6.0
    )
    att: PidGains = PidGains(kp=(10.0, 10.0, 4.0), output_limit=4.0)
    rate: PidGains = PidGains(
        kp=(40.0, 40.0, 20.0), ki=(10.0, 10.0, 5.0), i_limit=1.0, output_limit=80.0
    )
    tilt_max: float = 0.6        # rad from vertical
    takeoff_speed: float = 0.5   # m/s
    land_speed: float = 0.5      # m/s
    takeoff_alt: float = 2.5     # m above start


@dataclass(frozen=True)
class MotorCommand:
    omega_cmd: tuple[float, ...]  # rad/s, one per rotor, within [0, omega_max]


class Mixer:
    """Linear allocation from (collective thrust, 3 moments) to squared speeds.

    Built once per layout: A maps omega^2 to wrench through C_T, the rotor
    arms and the zeta*C_M drag-moment couplings; solving uses the
    pseudo-inverse. Negative squared speeds are clamped to zero, then each
    speed saturates at its rotor's omega_max.
    """

    def __init__(self, rotors: list[RotorDef]):
        if len(rotors) < 4:
            raise RankDeficientLayout(f"need >= 4 rotors, got {len(rotors)}")
        rows = [
            [r.coeffs.C_T for r in rotors],
            [r.coeffs.C_T * r.r[1] for r in rotors],
            [-r.coeffs.C_T * r.r[0] for r in rotors],
            [-r.zeta * r.coeffs.C_M * r.coeffs.C_T for r in rotors],
        ]
        a = np.asarray(rows, dtype=np.float64)
        if np.linalg.matrix_rank(a) < 4:
            raise RankDeficientLayout("rotor layout does not span thrust + 3 moments")
        pinv = np.linalg.pinv(a)
        self._pinv = tuple(tuple(float(x) for x in row) for row in pinv)
        self._omega_max = tuple(r.omega_max for r in rotors)
        self._n = len(rotors)

    def solve(self, thrust: float, moments: Vec3) -> tuple[MotorCommand, bool]:
        """Allocate; returns (command, saturated flag)."""
        b = (thrust, moments[0], moments[1], moments[2])
        saturated = False
        cmd = []
        for i in range(self._n):
            row = self._pinv[i]
            w2 = row[0] * b[0] + row[1] * b[1] + row[2] * b[2] + row[3] * b[3]
            if w2 < 0.0:
                w2 = 0.0
                saturated = True
            w = math.sqrt(w2)
            if w > self._omega_max[i]:
                w = self._omega_max[i]
                saturated = True
            cmd.append(w)
        return MotorCommand(tuple(cmd)), saturated


def mix(thrust: float, moments: Vec3, layout: list[RotorDef]) -> MotorCommand:
    """One-shot allocation for a given layout (builds a Mixer internally)."""
    return Mixer(layout).solve(thrust, moments)[0]


def hover_speed(mass: float, rotors: list[RotorDef], g: float) -> float:
    """Equal rotor speed that balances weight for a uniform layout."""
    c_t = rotors[0].coeffs.C_T
    return math.sqrt(mass * g / (len(rotors) * c_t))


def _attitude_from_accel(f_des: Vec3, yaw: float) -> Quat:
    """Desired attitude whose body z axis carries f_des at the given heading."""
    n = math.sqrt(f_des[0] ** 2 + f_des[1] ** 2 + f_des[2] ** 2)
    zb = (f_des[0] / n, f_des[1] / n, f_des[2] / n)
    xc = (math.cos(yaw), math.sin(yaw), 0.0)
    yb = (
        zb[1] * xc[2] - zb[2] * xc[1],
        zb[2] * xc[0] - zb[0] * xc[2],
        zb[0] * xc[1] - zb[1] * xc[0],
    )
    ny = math.sqrt(yb[0] ** 2 + yb[1] ** 2 + yb[2] ** 2)
    yb = (yb[0] / ny, yb[1] / ny, yb[2] / ny)
    xb = (
        yb[1] * zb[2] - yb[2] * zb[1],
        yb[2] * zb[0] - yb[0] * zb[2],
        yb[0] * zb[1] - yb[1] * zb[0],
    )
    # columns of R are the body axes in world coordinates
    r = (
        (xb[0], yb[0], zb[0]),
        (xb[1], yb[1], zb[1]),
        (xb[2], yb[2], zb[2]),
    )
    return quat_from_matrix(r)


class CascadedController:
    """Per-vehicle controller; owns integrators, mode latches and the mixer."""

    def __init__(
        self,
        mass_props: MassProperties,
        rotors: list[RotorDef],
        gains: ControllerGains = ControllerGains(),
        g: float = 9.81,
        outer_every: int = 4,
    ):
        if outer_every < 1:
            raise ValueError("outer_every must be >= 1")
        self.mp = mass_props
        self.gains = gains
        self.g = g
        self.mixer = Mixer(rotors)
        self.outer_every = outer_every
        self._tick = 0
        self._sp: Setpoint | None = None
        self._vel_i = [0.0, 0.0, 0.0]
        self._rate_i = [0.0, 0.0, 0.0]
        self._prev_v_err = (0.0, 0.0, 0.0)
        self._prev_rate_err = (0.0, 0.0, 0.0)
        self._saturated = False
        self._yaw_ref = 0.0
        self._thrust_cmd = 0.0
        self._rate_ref = (0.0, 0.0, 0.0)
        self._takeoff_target: float | None = None
        self.last_v_ref: Vec3 = (0.0, 0.0, 0.0)
        self.motors_off = False

    def command(self, sp: Setpoint, state: RigidBodyState) -> None:
        """Engage a new setpoint; latches yaw/hold references as needed."""
        if sp.mode is Mode.TAKEOFF:
            self._takeoff_target = state.p[2] + self.gains.takeoff_alt
        if sp.yaw_ref is not None:
            self._yaw_ref = sp.yaw_ref
        elif sp.mode in (Mode.POSITION_HOLD, Mode.TAKEOFF, Mode.LAND):
            self._yaw_ref = yaw_of(state.q)
        self._sp = sp
        self.motors_off = False

    @property
    def setpoint(self) -> Setpoint | None:
        return self._sp

    def step(self, state: RigidBodyState, dt: float) -> MotorCommand:
        """One physics-tick update; outer loops refresh every outer_every ticks."""
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        if self._sp is None or self.motors_off:
            self._tick += 1
            return MotorCommand(tuple(0.0 for _ in range(self.mixer._n)))
        if self._tick % self.outer_every == 0:
            self._outer(state, dt * self.outer_every)
        self._tick += 1
        if self.motors_off:  # touchdown detected by the outer loop just now
            return MotorCommand(tuple(0.0 for _ in range(self.mixer._n)))
        return self._inner(state, dt)

    # outer loops: mode logic, position P, velocity PID, attitude P
    def _outer(self, state: RigidBodyState, dt: float) -> None:
        sp = self._sp
        gains = self.gains
        assert sp is not None

        if sp.mode is Mode.TAKEOFF:
            assert self._takeoff_target is not None
            if state.p[2] >= self._takeoff_target:
                hold = (state.p[0], state.p[1], self._takeoff_target)
                sp = Setpoint(Mode.POSITION_HOLD, p_ref=hold, yaw_ref=self._yaw_ref)
                self._sp = sp
            else:
                v_ref = (0.0, 0.0, gains.takeoff_speed)
        if sp.mode is Mode.LAND:
            v_ref = (0.0, 0.0, -gains.land_speed)
            if state.p[2] <= 0.0 and state.v == (0.0, 0.0, 0.0):
                self.motors_off = True
                return
        if sp.mode is Mode.POSITION_HOLD:
            err = (
                sp.p_ref[0] - state.p[0],
                sp.p_ref[1] - state.p[1],
                sp.p_ref[2] - state.p[2],
            )
            v_ref = vclamp_norm(
                (gains.pos.kp[0] * err[0], gains.pos.kp[1] * err[1], gains.pos.kp[2] * err[2]),
                gains.pos.output_limit,
            )
        elif sp.mode is Mode.VELOCITY_YAW:
            v_ref = sp.v_ref
            self._yaw_ref += sp.yaw_rate_ref * dt

        self.last_v_ref = v_ref

        # velocity PID -> world acceleration setpoint
        v_err = (v_ref[0] - state.v[0], v_ref[1] - state.v[1], v_ref[2] - state.v[2])
        g_vel = gains.vel
        if not self._saturated:
            for i in range(3):
                self._vel_i[i] = _clamp(
                    self._vel_i[i] + g_vel.ki[i] * v_err[i] * dt, g_vel.i_limit
                )
        d_err = (
            (v_err[0] - self._prev_v_err[0]) / dt,
            (v_err[1] - self._prev_v_err[1]) / dt,
            (v_err[2] - self._prev_v_err[2]) / dt,
        )
        self._prev_v_err = v_err
        a_ref = vclamp_norm(
            (
                g_vel.kp[0] * v_err[0] + self._vel_i[0] + g_vel.kd[0] * d_err[0],
                g_vel.kp[1] * v_err[1] + self._vel_i[1] + g_vel.kd[1] * d_err[1],
                g_vel.kp[2] * v_err[2] + self._vel_i[2] + g_vel.kd[2] * d_err[2],
            ),
            g_vel.output_limit,
        )

        # gravity-compensated thrust vector, tilt-limited
        f_des = (
            self.mp.mass * a_ref[0],
            self.mp.mass * a_ref[1],
            self.mp.mass * (a_ref[2] + self.g),
        )
        min_fz = 0.05 * self.mp.mass * self.g
        if f_des[2] < min_fz:
            f_des = (f_des[0], f_des[1], min_fz)
        max_xy = f_des[2] * math.tan(self.gains.tilt_max)
        fxy = math.hypot(f_des[0], f_des[1])
        if fxy > max_xy:
            scale = max_xy / fxy
            f_des = (f_des[0] * scale, f_des[1] * scale, f_des[2])

        q_des = _attitude_from_accel(f_des, self._yaw_ref)
        z_b = rotate(state.q, (0.0, 0.0, 1.0))
        self._thrust_cmd = max(0.0, f_des[0] * z_b[0] + f_des[1] * z_b[1] + f_des[2] * z_b[2])

        # attitude error quaternion -> body rate setpoint
        q_err = quat_mul(quat_conj(state.q), q_des)
        sign = 1.0 if q_err[0] >= 0.0 else -1.0
        g_att = gains.att
        self._rate_ref = vclamp_norm(
            (
                g_att.kp[0] * 2.0 * sign * q_err[1],
                g_att.kp[1] * 2.0 * sign * q_err[2],
                g_att.kp[2] * 2.0 * sign * q_err[3],
            ),
            g_att.output_limit,
        )

    # inner loop: body-rate PID with gyroscopic feedforward, then allocation
    def _inner(self, state: RigidBodyState, dt: float) -> MotorCommand:
        g_rate = self.gains.rate
        err = (
            self._rate_ref[0] - state.Omega[0],
            self._rate_ref[1] - state.Omega[1],
            self._rate_ref[2] - state.Omega[2],
        )
        if not self._saturated:
            for i in range(3):
                self._rate_i[i] = _clamp(
                    self._rate_i[i] + g_rate.ki[i] * err[i] * dt, g_rate.i_limit
                )
        d_err = (
            (err[0] - self._prev_rate_err[0]) / dt,
            (err[1] - self._prev_rate_err[1]) / dt,
            (err[2] - self._prev_rate_err[2]) / dt,
        )
        self._prev_rate_err = err
        ang_acc = (
            g_rate.kp[0] * err[0] + self._rate_i[0] + g_rate.kd[0] * d_err[0],
            g_rate.kp[1] * err[1] + self._rate_i[1] + g_rate.kd[1] * d_err[1],
            g_rate.kp[2] * err[2] + self._rate_i[2] + g_rate.kd[2] * d_err[2],
        )
        ang_acc = vclamp_norm(ang_acc, g_rate.output_limit)
        jw = _matvec(self.mp.J, state.Omega)
        gyro = (
            state.Omega[1] * jw[2] - state.Omega[2] * jw[1],
            state.Omega[2] * jw[0] - state.Omega[0] * jw[2],
            state.Omega[0] * jw[1] - state.Omega[1] * jw[0],
        )
        m_cmd = _matvec(self.mp.J, ang_acc)
        moments = (m_cmd[0] + gyro[0], m_cmd[1] + gyro[1], m_cmd[2] + gyro[2])
        cmd, self._saturated = self.mixer.solve(self._thrust_cmd, moments)
        return cmd


def _clamp(x: float, limit: float) -> float:
    if x > limit:
        return limit
    if x < -limit:
        return -limit
    return x


def control_step(
    state: RigidBodyState,
    sp: Setpoint,
    controller: CascadedController,
    dt: float,
) -> MotorCommand:
    """Single composite update: engage ``sp`` if new, then run one tick."""
    if controller.setpoint is not sp:
        controller.command(sp, state)
    return controller.step(state, dt)
