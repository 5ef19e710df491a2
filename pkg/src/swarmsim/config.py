"""Simulation configuration: schema, validation, JSON round-trip, presets.

A config is plain JSON whose keys mirror the dataclass fields below. Unknown
keys are rejected so typos fail loudly before a run starts. Every subsystem
rate must divide the physics rate so scheduling stays integer-exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any

from .camera import CameraIntrinsics
from .control import ControllerGains, PidGains
from .formation import BUILTIN_SHAPES, FollowerLaw
from .geometry import UNBOUNDED
from .rigidbody import DragModel
from .rotor import BladeGeometry
from .sensors import AxisNoiseSpec, SensorSpec


class ConfigError(ValueError):
    pass


# datasheet-typical placeholder noise, not vendor numbers
DEFAULT_SENSORS = SensorSpec(
    accel=AxisNoiseSpec(noise_density=0.004, random_walk=4e-4, bias_corr_time=300.0,
                        turn_on_bias_sigma=0.02),
    gyro=AxisNoiseSpec(noise_density=3e-4, random_walk=3e-5, bias_corr_time=1000.0,
                       turn_on_bias_sigma=0.002),
    mag=AxisNoiseSpec(noise_density=5e-4),
    baro=AxisNoiseSpec(noise_density=0.05, random_walk=0.002),
    gps_pos=AxisNoiseSpec(noise_density=0.01),
    gps_vel=AxisNoiseSpec(noise_density=0.003),
)

DEFAULT_BLADE = BladeGeometry(
    rho=1.225, Ct0=0.1, Cd0=0.05, Cm0=0.003, theta0=0.25, theta1=-0.05,
    k_lift=5.7, d=0.254, n_blades=2, c_chord=0.02,
)

DEFAULT_CAMERA = CameraIntrinsics(
    width=640, height=480, fx=320.0, fy=320.0, cx=320.0, cy=240.0,
    k1=0.0, k2=0.0, k3=0.0, p1=0.0, p2=0.0,
    noise_mean=0.0, noise_stddev=0.0, near=0.1, far=100.0, baseline=0.12,
)


@dataclass(frozen=True)
class Rates:
    """Subsystem rates in Hz; each must divide 1/dt_physics."""

    control: float = 250.0
    imu: float = 250.0
    mag: float = 50.0
    baro: float = 50.0
    gps: float = 10.0
    camera: float = 20.0
    formation: float = 50.0
    log: float = 100.0
    telemetry: float = 25.0  # nearest 1 kHz divisor to the 30 Hz target


@dataclass(frozen=True)
class VehicleConfig:
    id: int
    role: str = "solo"                      # leader | follower | solo
    start: tuple[float, float, float] = (0.0, 0.0, 0.0)
    yaw: float = 0.0
    mass: float = 1.5
    inertia: tuple[float, float, float] = (0.029, 0.029, 0.055)
    arm_length: float = 0.25
    omega_max: float = 900.0
    rotor_lag_tau: float = 0.02
    blade: BladeGeometry = DEFAULT_BLADE
    drag: DragModel = DragModel()
    sensors: SensorSpec = DEFAULT_SENSORS
    gains: ControllerGains = ControllerGains()
    camera: CameraIntrinsics | None = None
    estimator: str = "none"                 # none | imu_gps

    def __post_init__(self) -> None:
        if self.role not in ("leader", "follower", "solo"):
            raise ConfigError(f"vehicle {self.id}: unknown role {self.role!r}")
        if self.estimator not in ("none", "imu_gps"):
            raise ConfigError(f"vehicle {self.id}: unknown estimator {self.estimator!r}")
        if self.arm_length <= 0.0:
            raise ConfigError(f"vehicle {self.id}: arm_length must be positive")


@dataclass(frozen=True)
class FormationConfig:
    enabled: bool = False
    leader_id: int = 0
    shapes: tuple[str, ...] = ("cube",)
    switch_every: float = 20.0   # s between shape switches (0 = never)
    assignment: str = "identity"
    law: FollowerLaw = FollowerLaw()
    shape_files: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.assignment not in ("identity", "min_distance"):
            raise ConfigError(f"unknown assignment policy {self.assignment!r}")
        for name in self.shapes:
            if name not in BUILTIN_SHAPES and name not in self.shape_files:
                raise ConfigError(f"shape {name!r} is neither built in nor a shape file")


@dataclass(frozen=True)
class WorldConfig:
    landmark_file: str | None = None
    generate_n: int = 0
    box_min: tuple[float, float, float] = (-20.0, -20.0, 0.0)
    box_max: tuple[float, float, float] = (20.0, 20.0, 10.0)


@dataclass(frozen=True)
class SimConfig:
    dt_physics: float = 0.001
    seed: int = 0
    realtime_factor: float | str = UNBOUNDED
    gravity: float = 9.81
    duration_s: float | None = None
    rates: Rates = Rates()
    vehicles: tuple[VehicleConfig, ...] = ()
    world: WorldConfig = WorldConfig()
    formation: FormationConfig = FormationConfig()
    log_dir: str | None = None
    serve: int | None = None

    def __post_init__(self) -> None:
        if self.dt_physics <= 0.0:
            raise ConfigError("dt_physics must be positive")
        if not self.vehicles:
            raise ConfigError("need at least one vehicle")
        ids = [v.id for v in self.vehicles]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"vehicle ids must be unique, got {ids}")
        if self.realtime_factor != UNBOUNDED:
            if not isinstance(self.realtime_factor, (int, float)) or self.realtime_factor <= 0:
                raise ConfigError(f"realtime_factor must be > 0 or {UNBOUNDED!r}")
        physics_hz = 1.0 / self.dt_physics
        for f in fields(self.rates):
            rate = getattr(self.rates, f.name)
            if rate <= 0:
                raise ConfigError(f"rates.{f.name} must be positive")
            every = physics_hz / rate
            if abs(every - round(every)) > 1e-9 or round(every) < 1:
                raise ConfigError(
                    f"rates.{f.name}={rate} Hz does not divide physics rate {physics_hz} Hz"
                )
        if self.formation.enabled:
            if self.formation.leader_id not in ids:
                raise ConfigError(f"formation leader id {self.formation.leader_id} unknown")
            roles = {v.id: v.role for v in self.vehicles}
            if roles[self.formation.leader_id] != "leader":
                raise ConfigError("formation leader vehicle must have role 'leader'")

    def every(self, rate_name: str) -> int:
        """Physics ticks between firings of the named subsystem."""
        rate = getattr(self.rates, rate_name)
        return round(1.0 / self.dt_physics / rate)


# --- JSON (de)serialization --------------------------------------------------

def _take(d: dict, ctx: str, allowed: set[str]) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"{ctx}: unknown keys {sorted(unknown)}")


def _axis_spec(d: dict | None, ctx: str) -> AxisNoiseSpec:
    if d is None:
        return AxisNoiseSpec()
    _take(d, ctx, {"noise_density", "random_walk", "bias_corr_time", "turn_on_bias_sigma"})
    kw = dict(d)
    if isinstance(kw.get("bias_corr_time"), str):
        if kw["bias_corr_time"] != "inf":
            raise ConfigError(f"{ctx}: bias_corr_time must be a number or \"inf\"")
        kw["bias_corr_time"] = math.inf
    return AxisNoiseSpec(**kw)


def _sensors(d: dict | None, ctx: str) -> SensorSpec:
    if d is None:
        return DEFAULT_SENSORS
    names = {"accel", "gyro", "mag", "baro", "gps_pos", "gps_vel"}
    _take(d, ctx, names)
    return SensorSpec(**{n: _axis_spec(d.get(n), f"{ctx}.{n}") for n in names if n in d})


def _pid(d: dict | None, base: PidGains, ctx: str) -> PidGains:
    if d is None:
        return base
    _take(d, ctx, {"kp", "ki", "kd", "i_limit", "output_limit"})
    kw: dict[str, Any] = {}
    for k in ("kp", "ki", "kd"):
        if k in d:
            v = d[k]
            kw[k] = tuple(float(x) for x in (v if isinstance(v, (list, tuple)) else (v, v, v)))
    for k in ("i_limit", "output_limit"):
        if k in d:
            kw[k] = float(d[k])
    return replace(base, **kw)


def _gains(d: dict | None, ctx: str) -> ControllerGains:
    if d is None:
        return ControllerGains()
    _take(d, ctx, {"pos", "vel", "att", "rate", "tilt_max", "takeoff_speed",
                   "land_speed", "takeoff_alt"})
    base = ControllerGains()
    kw: dict[str, Any] = {}
    for loop in ("pos", "vel", "att", "rate"):
        if loop in d:
            kw[loop] = _pid(d[loop], getattr(base, loop), f"{ctx}.{loop}")
    for k in ("tilt_max", "takeoff_speed", "land_speed", "takeoff_alt"):
        if k in d:
            kw[k] = float(d[k])
    return replace(base, **kw)


def _camera(d: dict | None, ctx: str) -> CameraIntrinsics | None:
    if d is None:
        return None
    allowed = {f.name for f in fields(CameraIntrinsics)}
    _take(d, ctx, allowed)
    base = asdict(DEFAULT_CAMERA)
    base.update(d)
    return CameraIntrinsics(**base)


def _vehicle(d: dict, ctx: str) -> VehicleConfig:
    allowed = {f.name for f in fields(VehicleConfig)}
    _take(d, ctx, allowed)
    if "id" not in d:
        raise ConfigError(f"{ctx}: vehicle needs an id")
    kw: dict[str, Any] = {"id": int(d["id"])}
    for k in ("role", "estimator"):
        if k in d:
            kw[k] = d[k]
    for k in ("yaw", "mass", "arm_length", "omega_max", "rotor_lag_tau"):
        if k in d:
            kw[k] = float(d[k])
    if "start" in d:
        kw["start"] = tuple(float(x) for x in d["start"])
    if "inertia" in d:
        kw["inertia"] = tuple(float(x) for x in d["inertia"])
    if "blade" in d:
        allowed_b = {f.name for f in fields(BladeGeometry)}
        _take(d["blade"], f"{ctx}.blade", allowed_b)
        bkw = asdict(DEFAULT_BLADE)
        bkw.update(d["blade"])
        kw["blade"] = BladeGeometry(**bkw)
    if "drag" in d:
        _take(d["drag"], f"{ctx}.drag", {"enabled", "Cd_body", "area", "rho"})
        kw["drag"] = DragModel(**d["drag"])
    if "sensors" in d:
        kw["sensors"] = _sensors(d["sensors"], f"{ctx}.sensors")
    if "gains" in d:
        kw["gains"] = _gains(d["gains"], f"{ctx}.gains")
    if "camera" in d:
        kw["camera"] = _camera(d["camera"], f"{ctx}.camera")
    return VehicleConfig(**kw)


def config_from_dict(d: dict) -> SimConfig:
    allowed = {f.name for f in fields(SimConfig)}
    _take(d, "config", allowed)
    kw: dict[str, Any] = {}
    for k in ("dt_physics", "gravity"):
        if k in d:
            kw[k] = float(d[k])
    if "seed" in d:
        kw["seed"] = int(d["seed"])
    if "duration_s" in d and d["duration_s"] is not None:
        kw["duration_s"] = float(d["duration_s"])
    if "realtime_factor" in d:
        v = d["realtime_factor"]
        kw["realtime_factor"] = v if v == UNBOUNDED else float(v)
    if "rates" in d:
        _take(d["rates"], "rates", {f.name for f in fields(Rates)})
        kw["rates"] = Rates(**{k: float(v) for k, v in d["rates"].items()})
    if "vehicles" in d:
        kw["vehicles"] = tuple(
            _vehicle(v, f"vehicles[{i}]") for i, v in enumerate(d["vehicles"])
        )
    if "world" in d:
        _take(d["world"], "world", {"landmark_file", "generate_n", "box_min", "box_max"})
        w = dict(d["world"])
        for k in ("box_min", "box_max"):
            if k in w:
                w[k] = tuple(float(x) for x in w[k])
        kw["world"] = WorldConfig(**w)
    if "formation" in d:
        _take(d["formation"], "formation",
              {"enabled", "leader_id", "shapes", "switch_every", "assignment",
               "law", "shape_files"})
        fkw = dict(d["formation"])
        if "shapes" in fkw:
            fkw["shapes"] = tuple(fkw["shapes"])
        if "law" in fkw:
            _take(fkw["law"], "formation.law", {"kp", "kd", "a_max", "v_max"})
            fkw["law"] = FollowerLaw(**fkw["law"])
        kw["formation"] = FormationConfig(**fkw)
    if "log_dir" in d:
        kw["log_dir"] = d["log_dir"]
    if "serve" in d and d["serve"] is not None:
        kw["serve"] = int(d["serve"])
    return SimConfig(**kw)


def config_to_dict(cfg: SimConfig) -> dict:
    d = asdict(cfg)
    # tuples -> lists happen in json.dumps; inf needs a string spelling
    for v in d["vehicles"]:
        for s in v["sensors"].values():
            if math.isinf(s["bias_corr_time"]):
                s["bias_corr_time"] = "inf"
    return d


def load_config(path: str) -> SimConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return config_from_dict(doc)


def save_config(path: str, cfg: SimConfig) -> None:
    with open(path, "w") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")


# --- presets -----------------------------------------------------------------

def hover_config(seed: int = 1, duration_s: float = 10.0, with_camera: bool = False) -> SimConfig:
    """Single vehicle parked in PositionHold above the origin."""
    cam = DEFAULT_CAMERA if with_camera else None
    veh = VehicleConfig(id=0, role="solo", start=(0.0, 0.0, 2.0), camera=cam)
    world = WorldConfig(generate_n=200 if with_camera else 0)
    return SimConfig(seed=seed, duration_s=duration_s, vehicles=(veh,), world=world)


def formation9_config(seed: int = 7, duration_s: float = 60.0) -> SimConfig:
    """One leader and eight followers stepping through the three built-in shapes.

    Followers spawn displaced from their initial slots so the convergence
    transient is visible; all vehicles start airborne.
    """
    leader = VehicleConfig(id=0, role="leader", start=(0.0, 0.0, 5.0))
    cube = BUILTIN_SHAPES["cube"]
    vehicles = [leader]
    for i, off in enumerate(cube.offsets):
        start = (off[0] * 1.6, off[1] * 1.6, 5.0 + off[2] * 1.6)
        vehicles.append(VehicleConfig(id=i + 1, role="follower", start=start))
    formation = FormationConfig(
        enabled=True, leader_id=0, shapes=("cube", "pyramid", "triangle"),
        switch_every=20.0,
    )
    return SimConfig(seed=seed, duration_s=duration_s, vehicles=tuple(vehicles),
                     formation=formation)
