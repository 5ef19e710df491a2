"""Bias-plus-white-noise sensor models for IMU, magnetometer, barometer, GPS.

Every axis of every sensor shares one measurement model:

    measured = truth + b' + (noise_density / sqrt(dt)) * w1
    b'       = exp(-dt / bias_corr_time) * b + random_walk * sqrt(dt) * w2

with w1, w2 independent standard normal draws. The bias is a first-order
Gauss-Markov process; with bias_corr_time = inf the decay factor is 1 and the
bias degenerates to a pure random walk. Dividing noise_density by sqrt(dt)
gives the continuous-density semantics real datasheets use, so datasheet
numbers transfer directly.

Parameter values shipped in the example configs are artifact-chosen
placeholders in datasheet-typical ranges, not vendor numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Quat, Vec3, rotate_inv


@dataclass(frozen=True)
class AxisNoiseSpec:
    """Noise parameters for one measurement axis (all default to noiseless)."""

    noise_density: float = 0.0        # unit/sqrt(Hz), stddev of the white term
    random_walk: float = 0.0          # unit/s/sqrt(Hz), stddev of the bias drive
    bias_corr_time: float = math.inf  # s; inf = pure random walk
    turn_on_bias_sigma: float = 0.0   # unit, stddev of the initial bias

    def __post_init__(self) -> None:
        if self.noise_density < 0 or self.random_walk < 0 or self.turn_on_bias_sigma < 0:
            raise ValueError("noise parameters must be >= 0")
        if not self.bias_corr_time > 0:
            raise ValueError("bias correlation time must be > 0 (inf allowed)")


@dataclass
class BiasState:
    b: float = 0.0


def init_bias(spec: AxisNoiseSpec, rng: np.random.Generator) -> BiasState:
    """Draw the turn-on bias: b ~ N(0, turn_on_bias_sigma^2)."""
    if spec.turn_on_bias_sigma == 0.0:
        return BiasState(0.0)
    return BiasState(spec.turn_on_bias_sigma * float(rng.standard_normal()))


def sample(
    truth: float, bias: BiasState, spec: AxisNoiseSpec, dt: float, rng: np.random.Generator
) -> tuple[float, BiasState]:
    """One measurement of ``truth``; returns (measured, updated bias).

    Always consumes exactly two normal draws so the stream stays aligned
    regardless of which parameters happen to be zero.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    w1 = float(rng.standard_normal())
    w2 = float(rng.standard_normal())
    if math.isinf(spec.bias_corr_time):
        decay = 1.0
    else:
        decay = math.exp(-dt / spec.bias_corr_time)
    b_new = decay * bias.b + spec.random_walk * math.sqrt(dt) * w2
    noise = (spec.noise_density / math.sqrt(dt)) * w1
    return truth + b_new + noise, BiasState(b_new)


# --- truth models -----------------------------------------------------------


def imu_truth(q: Quat, omega_body: Vec3, a_world: Vec3, g: float) -> tuple[Vec3, Vec3]:
    """Ideal IMU outputs: body-frame specific force and angular velocity.

    The accelerometer measures specific force (acceleration minus gravity),
    so a vehicle at rest reads +g along body z and a free-falling one reads
    zero.
    """
    accel_body = rotate_inv(q, (a_world[0], a_world[1], a_world[2] + g))
    return accel_body, omega_body


def mag_truth(q: Quat, field_world: Vec3) -> Vec3:
    """World magnetic field expressed in the body frame."""
    return rotate_inv(q, field_world)


def baro_truth(p: Vec3, p0: Vec3) -> float:
    """Altitude above the reference point."""
    return p[2] - p0[2]


def magnetic_field(declination: float = 0.0, inclination: float = 0.0) -> Vec3:
    """Unit field vector pointing (magnetic) north in the ENU world frame.

    Declination rotates east of true north, inclination dips below the
    horizontal. Defaults give (0, 1, 0).
    """
    ch = math.cos(inclination)
    return (ch * math.sin(declination), ch * math.cos(declination), -math.sin(inclination))


# --- per-vehicle rig ---------------------------------------------------------


@dataclass(frozen=True)
class SensorSpec:
    """Noise specs per sensor; one spec shared by all axes of that sensor."""

    accel: AxisNoiseSpec = AxisNoiseSpec()
    gyro: AxisNoiseSpec = AxisNoiseSpec()
    mag: AxisNoiseSpec = AxisNoiseSpec()
    baro: AxisNoiseSpec = AxisNoiseSpec()
    gps_pos: AxisNoiseSpec = AxisNoiseSpec()
    gps_vel: AxisNoiseSpec = AxisNoiseSpec()


class _Channel:
    """Bias states plus a dedicated RNG stream for one n-axis sensor."""

    __slots__ = ("spec", "rng", "biases", "dt")

    def __init__(self, spec: AxisNoiseSpec, rng: np.random.Generator, axes: int, rate: float):
        self.spec = spec
        self.rng = rng
        self.dt = 1.0 / rate
        self.biases = [init_bias(spec, rng) for _ in range(axes)]

    def measure(self, truth: tuple[float, ...]) -> list[float]:
        out = []
        for i, x in enumerate(truth):
            m, self.biases[i] = sample(x, self.biases[i], self.spec, self.dt, self.rng)
            out.append(m)
        return out


@dataclass
class SensorRig:
    """All noisy sensors of one vehicle, each on its own seeded stream.

    Rates must divide the physics rate evenly; the simulation loop enforces
    that and calls each measure_* exactly rate*T times in T sim-seconds.
    """

    imu_rate: float
    mag_rate: float
    baro_rate: float
    gps_rate: float
    accel: _Channel = field(repr=False)
    gyro: _Channel = field(repr=False)
    mag: _Channel = field(repr=False)
    baro: _Channel = field(repr=False)
    gps_pos: _Channel = field(repr=False)
    gps_vel: _Channel = field(repr=False)
    field_world: Vec3 = (0.0, 1.0, 0.0)
    p0: Vec3 = (0.0, 0.0, 0.0)

    @staticmethod
    def create(
        spec: SensorSpec,
        streams: dict[str, np.random.Generator],
        imu_rate: float = 250.0,
        mag_rate: float = 50.0,
        baro_rate: float = 50.0,
        gps_rate: float = 10.0,
        field_world: Vec3 = (0.0, 1.0, 0.0),
        p0: Vec3 = (0.0, 0.0, 0.0),
    ) -> "SensorRig":
        return SensorRig(
            imu_rate=imu_rate,
            mag_rate=mag_rate,
            baro_rate=baro_rate,
            gps_rate=gps_rate,
            accel=_Channel(spec.accel, streams["accel"], 3, imu_rate),
            gyro=_Channel(spec.gyro, streams["gyro"], 3, imu_rate),
            mag=_Channel(spec.mag, streams["mag"], 3, mag_rate),
            baro=_Channel(spec.baro, streams["baro"], 1, baro_rate),
            gps_pos=_Channel(spec.gps_pos, streams["gps_pos"], 3, gps_rate),
            gps_vel=_Channel(spec.gps_vel, streams["gps_vel"], 3, gps_rate),
            field_world=field_world,
            p0=p0,
        )

    def measure_imu(self, q: Quat, omega: Vec3, a_world: Vec3, g: float):
        accel_t, gyro_t = imu_truth(q, omega, a_world, g)
        return accel_t, gyro_t, self.accel.measure(accel_t), self.gyro.measure(gyro_t)

    def measure_mag(self, q: Quat):
        truth = mag_truth(q, self.field_world)
        return truth, self.mag.measure(truth)

    def measure_baro(self, p: Vec3):
        truth = baro_truth(p, self.p0)
        return truth, self.baro.measure((truth,))[0]

    def measure_gps(self, p: Vec3, v: Vec3):
        return p, v, self.gps_pos.measure(p), self.gps_vel.measure(v)
