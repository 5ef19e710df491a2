"""Lockstep simulation engine, log recording, and the pacing runner.

The engine is single-threaded and authoritative. One tick is, in order:
scheduled formation-shape switching, then per vehicle controller -> rotor
lag -> rotor wrench -> rigid-body step, then sensors / formation messages /
log rows / telemetry frames as each comes due, then the clock advances.
Time is always step_index * dt, never accumulated.

Commands mutate state only between ticks and are written to a transcript
(tick index + payload), so replaying a transcript against the same config
and seed reproduces every log file byte for byte. The realtime factor is
applied by SimRunner as wall-clock pacing and never touches logged values.

Determinism notes: all hot-loop arithmetic is plain CPython float math
(strict IEEE-754 double, no fused multiply-add), file output uses repr()
floats, and every random draw comes from a per-(vehicle, sensor) Philox
stream keyed by the config seed.
"""

from __future__ import annotations

import json
import math
import os
import queue
import threading
import time

from . import rigidbody
from .camera import camera_world_pose, generate_landmarks, load_landmarks, stereo_observe
from .config import ConfigError, SimConfig, VehicleConfig, config_to_dict
from .control import CascadedController, Mode, MotorCommand, Setpoint, hover_speed
from .formation import (
    BUILTIN_SHAPES,
    FormationShape,
    FollowerLaw,
    leader_broadcast,
    load_shape,
    reconfigure,
    follower_velocity_ref,
)
from .geometry import (
    Pose,
    SimClock,
    UNBOUNDED,
    quat_from_yaw,
    quat_integrate,
    quat_normalize,
    rotate,
    rotate_inv,
    yaw_of,
)
from .rigidbody import MassProperties, RigidBodyState
from .rotor import RotorDef, RotorLag, derive_coeffs, total_rotor_wrench
from .rng import sensor_stream
from .sensors import SensorRig

PROTO_VERSION = 1


class CommandError(ValueError):
    """Inbound command failed validation; reported, never fatal."""


class IoError(RuntimeError):
    """Log bundle could not be written."""


RUNNER_COMMANDS = frozenset({"pause", "step", "set_rtf"})
SIM_COMMANDS = frozenset({"velocity", "set_shape", "takeoff", "land"})


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise CommandError(msg)


def validate_command(doc: object, sim: "Simulation") -> dict:
    """Check an inbound command payload against the wire schema.

    Returns the payload unchanged on success; raises CommandError with a
    human-readable message otherwise. Safe to call from any thread (reads
    only immutable sim attributes).
    """
    _require(isinstance(doc, dict), "command must be a JSON object")
    ctype = doc.get("type")
    _require(isinstance(ctype, str), "command needs a string 'type'")
    if ctype in ("velocity", "takeoff", "land"):
        vid = doc.get("id")
        _require(isinstance(vid, int) and not isinstance(vid, bool), f"{ctype}: integer 'id' required")
        _require(vid in sim.vehicle_ids, f"{ctype}: unknown vehicle id {vid}")
        if ctype == "velocity":
            _require(
                not (sim.formation_enabled and vid in sim.follower_ids),
                f"velocity: vehicle {vid} is formation-controlled",
            )
            v = doc.get("v")
            _require(
                isinstance(v, (list, tuple)) and len(v) == 3
                and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v)
                and all(math.isfinite(float(x)) for x in v),
                "velocity: 'v' must be 3 finite numbers",
            )
            yr = doc.get("yaw_rate", 0.0)
            _require(
                isinstance(yr, (int, float)) and not isinstance(yr, bool) and math.isfinite(float(yr)),
                "velocity: 'yaw_rate' must be a finite number",
            )
    elif ctype == "set_shape":
        _require(sim.formation_enabled, "set_shape: formation is not enabled")
        name = doc.get("name")
        _require(isinstance(name, str), "set_shape: string 'name' required")
        _require(name in sim.shape_library, f"set_shape: unknown shape {name!r}")
    elif ctype == "pause":
        val = doc.get("value", True)
        _require(isinstance(val, bool), "pause: 'value' must be a boolean")
    elif ctype == "step":
        n = doc.get("n", 1)
        _require(isinstance(n, int) and not isinstance(n, bool) and n >= 1, "step: 'n' must be an integer >= 1")
        _require(n <= 10_000_000, "step: 'n' too large")
    elif ctype == "set_rtf":
        f = doc.get("factor")
        ok = f == UNBOUNDED or (
            isinstance(f, (int, float)) and not isinstance(f, bool)
            and math.isfinite(float(f)) and f > 0
        )
        _require(ok, f"set_rtf: 'factor' must be > 0 or \"{UNBOUNDED}\"")
    else:
        raise CommandError(f"unknown command type {ctype!r}")
    return doc


# ---------------------------------------------------------------------------


def build_rotors(vc: VehicleConfig) -> list[RotorDef]:
    """Symmetric X layout: two CCW rotors on one diagonal, two CW on the other."""
    coeffs = derive_coeffs(vc.blade)
    arm = vc.arm_length * math.sqrt(0.5)
    layout = (
        ((arm, arm, 0.0), 1),
        ((-arm, -arm, 0.0), 1),
        ((arm, -arm, 0.0), -1),
        ((-arm, arm, 0.0), -1),
    )
    return [RotorDef(r=r, zeta=z, coeffs=coeffs, omega_max=vc.omega_max) for r, z in layout]


class ImuGpsEstimator:
    """Dead-reckoning pose estimator: gyro/accel integration, GPS resets.

    Deliberately simple; it exists to exercise the estimated-trajectory log
    path and give the evaluation tools realistic input, not to be a good
    filter.
    """

    __slots__ = ("p", "v", "q", "g", "dt")

    def __init__(self, p0, yaw0: float, g: float, imu_dt: float):
        self.p = tuple(p0)
        self.v = (0.0, 0.0, 0.0)
        self.q = quat_from_yaw(yaw0)
        self.g = g
        self.dt = imu_dt

    def on_imu(self, accel_meas, gyro_meas) -> None:
        self.q = quat_integrate(self.q, tuple(gyro_meas), self.dt)
        aw = rotate(self.q, tuple(accel_meas))
        dt = self.dt
        v = (
            self.v[0] + aw[0] * dt,
            self.v[1] + aw[1] * dt,
            self.v[2] + (aw[2] - self.g) * dt,
        )
        self.p = (self.p[0] + v[0] * dt, self.p[1] + v[1] * dt, self.p[2] + v[2] * dt)
        self.v = v

    def on_gps(self, p_meas, v_meas) -> None:
        self.p = tuple(p_meas)
        self.v = tuple(v_meas)

    def pose(self, t: float) -> Pose:
        return Pose(t=t, p=self.p, q=quat_normalize(self.q))


class Vehicle:
    """Runtime state of one simulated vehicle."""

    __slots__ = (
        "id", "role", "cfg", "mp", "rotors", "lag", "omegas", "controller",
        "rig", "camera", "cam_rng", "estimator", "state", "teleop",
    )

    def __init__(self, vc: VehicleConfig, cfg: SimConfig):
        self.id = vc.id
        self.role = vc.role
        self.cfg = vc
        self.mp = MassProperties.diagonal(vc.mass, *vc.inertia)
        self.rotors = build_rotors(vc)
        self.lag = RotorLag(tau=vc.rotor_lag_tau)
        self.controller = CascadedController(
            self.mp, self.rotors, vc.gains, g=cfg.gravity,
            outer_every=cfg.every("control"),
        )
        streams = {
            name: sensor_stream(cfg.seed, vc.id, name)
            for name in ("accel", "gyro", "mag", "baro", "gps_pos", "gps_vel")
        }
        self.rig = SensorRig.create(
            vc.sensors, streams,
            imu_rate=cfg.rates.imu, mag_rate=cfg.rates.mag,
            baro_rate=cfg.rates.baro, gps_rate=cfg.rates.gps,
            p0=vc.start,
        )
        self.camera = vc.camera
        self.cam_rng = sensor_stream(cfg.seed, vc.id, "camera") if vc.camera else None
        imu_dt = 1.0 / cfg.rates.imu
        self.estimator = (
            ImuGpsEstimator(vc.start, vc.yaw, cfg.gravity, imu_dt)
            if vc.estimator == "imu_gps" else None
        )
        self.state = RigidBodyState(
            p=vc.start, v=(0.0, 0.0, 0.0), q=quat_from_yaw(vc.yaw), Omega=(0.0, 0.0, 0.0)
        )
        self.teleop: tuple[tuple[float, float, float], float] | None = None
        if vc.start[2] > 0.0:
            # airborne spawn: rotors pre-spun at hover, controller holding the spot
            w_h = hover_speed(vc.mass, self.rotors, cfg.gravity)
            self.omegas = [w_h, w_h, w_h, w_h]
            self.controller.command(
                Setpoint(Mode.POSITION_HOLD, p_ref=vc.start, yaw_ref=vc.yaw), self.state
            )
        else:
            self.omegas = [0.0, 0.0, 0.0, 0.0]


class LogBundle:
    """All per-run output files; text mode, repr() floats, deterministic."""

    def __init__(self, log_dir: str, cfg: SimConfig):
        self.dir = log_dir
        self._files: dict[str, object] = {}
        try:
            os.makedirs(log_dir, exist_ok=True)
            echo = config_to_dict(cfg)
            # environment-only fields; excluded so identical scenarios produce
            # byte-identical bundles regardless of where they are written
            echo["log_dir"] = None
            echo["serve"] = None
            with open(os.path.join(log_dir, "config.json"), "w") as fh:
                json.dump(echo, fh, indent=2, sort_keys=True)
                fh.write("\n")
            self.transcript = self._open("commands.jsonl", "")
            for v in cfg.vehicles:
                vid = v.id
                self._open(f"veh{vid}_gt.tum", "# timestamp tx ty tz qx qy qz qw\n")
                if v.estimator != "none":
                    self._open(f"veh{vid}_est.tum", "# timestamp tx ty tz qx qy qz qw\n")
                self._open(
                    f"veh{vid}_imu.csv",
                    "t,ax_true,ay_true,az_true,gx_true,gy_true,gz_true,"
                    "ax,ay,az,gx,gy,gz\n",
                )
                self._open(
                    f"veh{vid}_gps.csv",
                    "t,px_true,py_true,pz_true,vx_true,vy_true,vz_true,"
                    "px,py,pz,vx,vy,vz\n",
                )
                self._open(f"veh{vid}_baro.csv", "t,alt_true,alt\n")
                self._open(
                    f"veh{vid}_mag.csv",
                    "t,mx_true,my_true,mz_true,mx,my,mz\n",
                )
                self._open(
                    f"veh{vid}_vel_tracking.csv",
                    "t,vx_ref,vy_ref,vz_ref,vx,vy,vz\n",
                )
                if v.camera is not None:
                    self._open(f"veh{vid}_camera.csv", "t,landmark_id,uL,vL,uR,vR\n")
        except OSError as exc:
            raise IoError(f"cannot create log bundle in {log_dir}: {exc}") from exc

    def _open(self, name: str, header: str):
        fh = open(os.path.join(self.dir, name), "w", newline="\n")
        if header:
            fh.write(header)
        self._files[name] = fh
        return fh

    def row(self, name: str, values) -> None:
        self._files[name].write(",".join(repr(x) for x in values) + "\n")

    def tum_row(self, name: str, t: float, p, q) -> None:
        w, x, y, z = q
        self._files[name].write(
            f"{t!r} {p[0]!r} {p[1]!r} {p[2]!r} {x!r} {y!r} {z!r} {w!r}\n"
        )

    def command_row(self, tick: int, doc: dict) -> None:
        rec = json.dumps({"tick": tick, "cmd": doc}, sort_keys=True, separators=(",", ":"))
        self.transcript.write(rec + "\n")

    def close(self) -> None:
        for fh in self._files.values():
            fh.close()
        self._files.clear()


class Simulation:
    """Deterministic lockstep world: vehicles, sensors, formation, logs."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.clock = SimClock(dt=cfg.dt_physics, realtime_factor=cfg.realtime_factor)
        self.vehicles = [Vehicle(vc, cfg) for vc in cfg.vehicles]
        self.by_id = {v.id: v for v in self.vehicles}
        self.vehicle_ids = frozenset(self.by_id)

        # world landmarks for the stereo cameras
        w = cfg.world
        if w.landmark_file:
            self.landmarks = load_landmarks(w.landmark_file)
        elif w.generate_n > 0:
            self.landmarks = generate_landmarks(w.generate_n, w.box_min, w.box_max, cfg.seed)
        else:
            self.landmarks = []

        # formation bookkeeping
        fc = cfg.formation
        self.formation_enabled = fc.enabled
        self.follower_ids: tuple[int, ...] = ()
        self.shape_library: dict[str, FormationShape] = dict(BUILTIN_SHAPES)
        self._offsets: list = []
        if fc.enabled:
            for name, path in fc.shape_files.items():
                self.shape_library[name] = load_shape(path, name=name)
            self.follower_ids = tuple(
                sorted(v.id for v in self.vehicles if v.role == "follower")
            )
            first = self.shape_library[fc.shapes[0]]
            if len(self.follower_ids) != len(first.offsets):
                raise ConfigError(
                    f"shape {fc.shapes[0]!r} has {len(first.offsets)} slots but "
                    f"{len(self.follower_ids)} followers are configured"
                )
            self._shape = first
            self._shape_idx = 0
            self._offsets = list(first.offsets)
            self._law: FollowerLaw = fc.law
            se = fc.switch_every
            self._switch_ticks = round(se / cfg.dt_physics) if se > 0 else 0
            self._schedule_on = self._switch_ticks > 0 and len(fc.shapes) > 1

        # integer schedules (ticks between firings)
        self._ctrl_every = cfg.every("control")
        self._imu_every = cfg.every("imu")
        self._mag_every = cfg.every("mag")
        self._baro_every = cfg.every("baro")
        self._gps_every = cfg.every("gps")
        self._cam_every = cfg.every("camera")
        self._form_every = cfg.every("formation")
        self._log_every = cfg.every("log")
        self._tele_every = cfg.every("telemetry")

        self.log = LogBundle(cfg.log_dir, cfg) if cfg.log_dir else None
        self._sinks: list = []  # telemetry frame callbacks

    # -- commands ----------------------------------------------------------

    def apply_command(self, doc: dict) -> None:
        """Apply a state-affecting command at the current tick boundary."""
        doc = validate_command(doc, self)
        ctype = doc["type"]
        if ctype in RUNNER_COMMANDS:
            raise CommandError(f"{ctype} is a runner command, not a simulation command")
        if self.log:
            self.log.command_row(self.clock.step_index, doc)
        if ctype == "velocity":
            veh = self.by_id[doc["id"]]
            v = doc["v"]
            veh.teleop = ((float(v[0]), float(v[1]), float(v[2])), float(doc.get("yaw_rate", 0.0)))
        elif ctype == "takeoff":
            veh = self.by_id[doc["id"]]
            veh.teleop = None
            veh.controller.command(Setpoint(Mode.TAKEOFF), veh.state)
        elif ctype == "land":
            veh = self.by_id[doc["id"]]
            veh.teleop = None
            veh.controller.command(Setpoint(Mode.LAND), veh.state)
        elif ctype == "set_shape":
            self._switch_shape(self.shape_library[doc["name"]])
            self._schedule_on = False  # manual control takes over the sequence

    def _switch_shape(self, shape: FormationShape) -> None:
        pairs = reconfigure(self._shape, shape, self.cfg.formation.assignment)
        for idx, off in pairs:
            self._offsets[idx] = off
        self._shape = shape

    # -- stepping ------------------------------------------------------------

    def add_sink(self, cb) -> None:
        self._sinks.append(cb)

    def frame(self) -> dict:
        """Current state snapshot in wire format."""
        return {
            "proto": PROTO_VERSION,
            "type": "state",
            "t": self.clock.t,
            "tick": self.clock.step_index,
            "shape": self._shape.name if self.formation_enabled else None,
            "uavs": [
                {
                    "id": v.id,
                    "p": list(v.state.p),
                    "v": list(v.state.v),
                    "q": list(v.state.q),
                    "role": v.role,
                }
                for v in self.vehicles
            ],
        }

    def step(self, n: int = 1) -> None:
        """Advance n ticks. n sequential calls of step(1) are bit-identical
        to one step(n)."""
        if n < 0:
            raise ValueError("step count must be >= 0")
        for _ in range(n):
            self._tick()

    def _tick(self) -> None:
        cfg = self.cfg
        dt = cfg.dt_physics
        g = cfg.gravity
        k = self.clock.step_index

        # scheduled shape sequence (pure function of config and tick index)
        if self.formation_enabled and self._schedule_on:
            idx = min(k // self._switch_ticks, len(cfg.formation.shapes) - 1)
            if idx != self._shape_idx:
                self._shape_idx = idx
                self._switch_shape(self.shape_library[cfg.formation.shapes[idx]])

        ctrl_due = k % self._ctrl_every == 0
        for veh in self.vehicles:
            st = veh.state
            if ctrl_due and veh.teleop is not None:
                (vbx, vby, vbz), yr = veh.teleop
                yaw = yaw_of(st.q)
                c, s = math.cos(yaw), math.sin(yaw)
                sp = Setpoint(
                    Mode.VELOCITY_YAW,
                    v_ref=(c * vbx - s * vby, s * vbx + c * vby, vbz),
                    yaw_rate_ref=yr,
                )
                veh.controller.command(sp, st)
            cmd: MotorCommand = veh.controller.step(st, dt)
            veh.omegas = veh.lag.advance(veh.omegas, cmd.omega_cmd, dt)
            v_body = rotate_inv(st.q, st.v)
            f_body, m_body = total_rotor_wrench(veh.omegas, veh.rotors, v_body)
            f_world, m = rigidbody.net_wrench(st, f_body, m_body, veh.mp, veh.cfg.drag, g)
            veh.state = rigidbody.step(st, f_world, m, veh.mp, dt)

        k1 = k + 1
        t1 = k1 * dt
        log = self.log

        if k1 % self._imu_every == 0:
            for veh in self.vehicles:
                st = veh.state
                # world acceleration reconstructed from the wrench the body just felt
                a_world = self._accel_world(veh)
                at, gt, am, gm = veh.rig.measure_imu(st.q, st.Omega, a_world, g)
                if veh.estimator:
                    veh.estimator.on_imu(am, gm)
                if log:
                    log.row(f"veh{veh.id}_imu.csv", (t1, *at, *gt, *am, *gm))

        if k1 % self._baro_every == 0:
            for veh in self.vehicles:
                truth, meas = veh.rig.measure_baro(veh.state.p)
                if log:
                    log.row(f"veh{veh.id}_baro.csv", (t1, truth, meas))

        if k1 % self._mag_every == 0:
            for veh in self.vehicles:
                truth, meas = veh.rig.measure_mag(veh.state.q)
                if log:
                    log.row(f"veh{veh.id}_mag.csv", (t1, *truth, *meas))

        if k1 % self._gps_every == 0:
            for veh in self.vehicles:
                st = veh.state
                pt, vt, pm, vm = veh.rig.measure_gps(st.p, st.v)
                if veh.estimator:
                    veh.estimator.on_gps(pm, vm)
                if log:
                    log.row(f"veh{veh.id}_gps.csv", (t1, *pt, *vt, *pm, *vm))

        if self.landmarks and k1 % self._cam_every == 0:
            for veh in self.vehicles:
                if veh.camera is None:
                    continue
                pose = camera_world_pose(t1, veh.state.p, veh.state.q)
                for ob in stereo_observe(self.landmarks, pose, veh.camera, veh.cam_rng):
                    if log:
                        log.row(
                            f"veh{veh.id}_camera.csv",
                            (t1, ob.landmark_id, ob.uL, ob.vL, ob.uR, ob.vR),
                        )

        if self.formation_enabled and k1 % self._form_every == 0:
            leader = self.by_id[cfg.formation.leader_id]
            msg = leader_broadcast(leader.state)
            for i, fid in enumerate(self.follower_ids):
                veh = self.by_id[fid]
                v_ref = follower_velocity_ref(
                    veh.state.p, veh.state.v, msg, self._offsets[i], self._law
                )
                veh.controller.command(
                    Setpoint(Mode.VELOCITY_YAW, v_ref=v_ref), veh.state
                )

        if log and k1 % self._log_every == 0:
            for veh in self.vehicles:
                st = veh.state
                log.tum_row(f"veh{veh.id}_gt.tum", t1, st.p, st.q)
                if veh.estimator:
                    ep = veh.estimator.pose(t1)
                    log.tum_row(f"veh{veh.id}_est.tum", t1, ep.p, ep.q)
                vr = veh.controller.last_v_ref
                log.row(
                    f"veh{veh.id}_vel_tracking.csv",
                    (t1, vr[0], vr[1], vr[2], st.v[0], st.v[1], st.v[2]),
                )

        self.clock.step_index = k1

        if self._sinks and k1 % self._tele_every == 0:
            frame = self.frame()
            for cb in self._sinks:
                cb(frame)

    def _accel_world(self, veh: Vehicle) -> tuple[float, float, float]:
        """World acceleration implied by the current rotor speeds and state.

        Recomputed from the same wrench model the integrator used this tick,
        so the accelerometer is consistent with the motion to first order.
        A parked vehicle reports zero.
        """
        st = veh.state
        if st.p[2] <= 0.0 and st.v == (0.0, 0.0, 0.0):
            return (0.0, 0.0, 0.0)
        v_body = rotate_inv(st.q, st.v)
        f_body, _ = total_rotor_wrench(veh.omegas, veh.rotors, v_body)
        f_world, _ = rigidbody.net_wrench(
            st, f_body, (0.0, 0.0, 0.0), veh.mp, veh.cfg.drag, self.cfg.gravity
        )
        inv_m = 1.0 / veh.mp.mass
        return (f_world[0] * inv_m, f_world[1] * inv_m, f_world[2] * inv_m)

    def close(self) -> None:
        if self.log:
            self.log.close()
            self.log = None


# ---------------------------------------------------------------------------


def run(cfg: SimConfig, steps: int | None = None) -> Simulation:
    """Headless run: build the world, advance, close logs. Returns the sim."""
    if steps is None:
        if cfg.duration_s is None:
            raise ConfigError("specify either steps or config duration_s")
        steps = round(cfg.duration_s / cfg.dt_physics)
    sim = Simulation(cfg)
    try:
        sim.step(steps)
    finally:
        sim.close()
    return sim


def replay_transcript(cfg: SimConfig, transcript_path: str, steps: int | None = None) -> Simulation:
    """Re-run a recorded session: apply each transcript command at its tick."""
    entries = []
    with open(transcript_path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if "tick" not in rec or "cmd" not in rec:
                raise ValueError(f"{transcript_path}:{line_no}: need 'tick' and 'cmd'")
            entries.append((int(rec["tick"]), rec["cmd"]))
    entries.sort(key=lambda e: e[0])
    if steps is None:
        if cfg.duration_s is not None:
            steps = round(cfg.duration_s / cfg.dt_physics)
        else:
            steps = (entries[-1][0] + 1) if entries else 0
    sim = Simulation(cfg)
    try:
        i = 0
        for k in range(steps):
            while i < len(entries) and entries[i][0] == k:
                sim.apply_command(entries[i][1])
                i += 1
            sim.step(1)
    finally:
        sim.close()
    return sim


class SimRunner:
    """Threaded pacing wrapper: command queue, pause/step, realtime factor.

    The simulation thread is the only one touching the Simulation; the
    network layer talks to it exclusively through `submit` (ordered queue)
    and the frame callback (immutable snapshots).
    """

    def __init__(self, sim: Simulation, on_frame=None, start_paused: bool = False):
        self.sim = sim
        self.paused = start_paused
        self.rtf = sim.cfg.realtime_factor
        self._steps_pending = 0
        self._queue: queue.SimpleQueue = queue.SimpleQueue()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._on_frame = on_frame
        self._tele_dt = 1.0 / sim.cfg.rates.telemetry
        sim.add_sink(self._emit_live)

    # called from any thread
    def submit(self, doc: dict) -> None:
        self._queue.put(doc)

    def stop(self) -> None:
        self._stop.set()
        if self._thread:
            self._thread.join(timeout=5.0)

    def start(self, total_steps: int | None = None) -> None:
        self._thread = threading.Thread(
            target=self._run, args=(total_steps,), name="sim-loop", daemon=True
        )
        self._thread.start()

    def _emit_live(self, frame: dict) -> None:
        if self._on_frame:
            frame = dict(frame)
            frame["paused"] = False
            frame["rtf"] = self.rtf
            self._on_frame(frame)

    def _emit_snapshot(self) -> None:
        if self._on_frame:
            frame = self.sim.frame()
            frame["paused"] = True
            frame["rtf"] = self.rtf
            self._on_frame(frame)

    def _drain(self) -> None:
        while True:
            try:
                doc = self._queue.get_nowait()
            except queue.Empty:
                return
            try:
                doc = validate_command(doc, self.sim)
            except CommandError:
                continue  # handlers validate before submitting; never fatal here
            ctype = doc["type"]
            if ctype == "pause":
                self.paused = bool(doc.get("value", True))
                if not self.paused:
                    self._steps_pending = 0
            elif ctype == "step":
                self._steps_pending += int(doc.get("n", 1))
            elif ctype == "set_rtf":
                f = doc["factor"]
                self.rtf = f if f == UNBOUNDED else float(f)
            else:
                self.sim.apply_command(doc)

    def _run(self, total_steps: int | None) -> None:
        done = 0
        wall_anchor = time.monotonic()
        sim_anchor = self.sim.clock.t
        while not self._stop.is_set():
            if total_steps is not None and done >= total_steps:
                break
            self._drain()
            if self.paused and self._steps_pending == 0:
                self._emit_snapshot()
                self._stop.wait(self._tele_dt)
                wall_anchor = time.monotonic()
                sim_anchor = self.sim.clock.t
                continue
            self.sim.step(1)
            done += 1
            if self._steps_pending > 0:
                self._steps_pending -= 1
            if self.rtf != UNBOUNDED:
                target = wall_anchor + (self.sim.clock.t - sim_anchor) / self.rtf
                lag = target - time.monotonic()
                if lag > 0.002:
                    time.sleep(lag)
