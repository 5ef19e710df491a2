"""Seeded counter-based random streams.

Every consumer of randomness gets its own Philox4x64-10 stream (the
counter-based generator of Salmon et al. 2011, as shipped by numpy), keyed by
(master seed, stream id). Stream ids are assigned by a fixed scheme:

    stream id = vehicle_id * 64 + slot

where slots 0..63 are reserved per vehicle (see SENSOR_SLOTS) and negative
vehicle ids are reserved for global streams (world generation uses
GLOBAL_WORLDGEN). Because streams are keyed rather than split sequentially,
adding or removing one sensor never perturbs any other sensor's draws.

Test vectors pinning the algorithm are in docs/protocol.md and
tests/test_sensors.py.
"""

from __future__ import annotations

import numpy as np

# per-vehicle slot assignments (one stream per sensor axis group)
SENSOR_SLOTS = {
    "accel": 0,
    "gyro": 1,
    "mag": 2,
    "baro": 3,
    "gps_pos": 4,
    "gps_vel": 5,
    "camera": 6,
}

GLOBAL_WORLDGEN = -1  # landmark generation
_STREAMS_PER_VEHICLE = 64
_MASK64 = (1 << 64) - 1


def stream_id(vehicle_id: int, slot: int) -> int:
    if not 0 <= slot < _STREAMS_PER_VEHICLE:
        raise ValueError(f"slot must be in [0, {_STREAMS_PER_VEHICLE}), got {slot}")
    return vehicle_id * _STREAMS_PER_VEHICLE + slot


def make_stream(seed: int, stream: int) -> np.random.Generator:
    """Independent generator for (seed, stream); same pair always replays."""
    # explicit uint64 array: values above 2^63-1 (e.g. masked negative stream
    # ids) would otherwise go through a lossy int64 cast
    key = np.array([int(seed) & _MASK64, int(stream) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sensor_stream(seed: int, vehicle_id: int, sensor: str) -> np.random.Generator:
    return make_stream(seed, stream_id(vehicle_id, SENSOR_SLOTS[sensor]))
