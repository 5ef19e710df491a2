"""Deterministic lockstep multirotor swarm simulator.

Subpackages by responsibility: geometry (frames, quaternions, clock),
rotor (per-rotor aerodynamics), rigidbody (6-DoF integration), sensors
(IMU/mag/baro/GPS noise models), camera (stereo pinhole projection),
control (cascaded flight controller + mixer), formation (leader-follower),
evaluation (TUM I/O, APE/RPE), config/sim/service/cli (engine and plumbing).
"""

from .config import SimConfig, VehicleConfig, load_config, save_config
from .geometry import Pose, SimClock
from .sim import Simulation, SimRunner, replay_transcript, run

__version__ = "0.1.0"

__all__ = [
    "Pose",
    "SimClock",
    "SimConfig",
    "SimRunner",
    "Simulation",
    "VehicleConfig",
    "load_config",
    "replay_transcript",
    "run",
    "save_config",
    "__version__",
]
