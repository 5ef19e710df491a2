"""Parametric stereo camera as a feature-level observation model.

No images are rendered: the camera projects known world landmarks into noisy
pixel coordinates for both eyes of a rectified stereo pair. Projection is the
standard pinhole map with Brown-Conrady distortion (k1, k2, k3 radial, p1, p2
tangential); the distortion center coincides with the principal point.

Camera frame follows the usual computer-vision convention: +z along the
optical axis, +x right, +y down. The right eye is the left eye translated by
`baseline` along camera +x with identical intrinsics.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import Pose, Vec3, quat_conj, quat_mul, rotate, vsub
from .rng import GLOBAL_WORLDGEN, make_stream

# body-to-camera rotation for a forward-looking camera on an FLU body:
# camera x = -body y (right), camera y = -body z (down), camera z = body x
FORWARD_CAMERA_QUAT = (0.5, -0.5, 0.5, -0.5)


@dataclass(frozen=True)
class CameraIntrinsics:
    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    skew: float = 0.0
    k1: float = 0.0
    k2: float = 0.0
    k3: float = 0.0
    p1: float = 0.0
    p2: float = 0.0
    noise_mean: float = 0.0
    noise_stddev: float = 0.0
    near: float = 0.1
    far: float = 100.0
    baseline: float = 0.06

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not 0 < self.near < self.far:
            raise ValueError("need 0 < near < far")
        if self.baseline <= 0:
            raise ValueError("baseline must be positive")
        if self.noise_stddev < 0:
            raise ValueError("noise stddev must be >= 0")


class NotVisible:
    """Reasons a projected point yields no observation (values, not errors)."""

    CLIP_PLANE = "clip_plane"
    OUT_OF_FRAME = "out_of_frame"


def project(point_cam: Vec3, intr: CameraIntrinsics) -> tuple[float, float] | str:
    """Project a camera-frame point to pixel coordinates.

    Returns (u, v), or a NotVisible reason when the point lies outside the
    clip planes or the image bounds. Bounds are half-open: 0 <= u < width.
    """
    x3, y3, z = point_cam
    if not intr.near <= z <= intr.far:
        return NotVisible.CLIP_PLANE
    x = x3 / z
    y = y3 / z
    r2 = x * x + y * y
    radial = 1.0 + r2 * (intr.k1 + r2 * (intr.k2 + r2 * intr.k3))
    xd = x * radial + 2.0 * intr.p1 * x * y + intr.p2 * (r2 + 2.0 * x * x)
    yd = y * radial + 2.0 * intr.p2 * x * y + intr.p1 * (r2 + 2.0 * y * y)
    u = intr.fx * xd + intr.skew * yd + intr.cx
    v = intr.fy * yd + intr.cy
    if not (0.0 <= u < intr.width and 0.0 <= v < intr.height):
        return NotVisible.OUT_OF_FRAME
    return u, v


@dataclass(frozen=True)
class StereoObservation:
    landmark_id: int
    uL: float
    vL: float
    uR: float
    vR: float


def stereo_observe(
    landmarks: list[tuple[int, Vec3]],
    cam_pose: Pose,
    intr: CameraIntrinsics,
    rng: np.random.Generator | None = None,
) -> list[StereoObservation]:
    """Observe landmarks with both eyes; drop any landmark either eye misses.

    Pixel noise N(noise_mean, noise_stddev^2) is added independently per
    coordinate; four draws are consumed per emitted observation.
    """
    q_inv = quat_conj(cam_pose.q)
    out = []
    for lid, p_world in landmarks:
        rel = vsub(p_world, cam_pose.p)
        p_cam = rotate(q_inv, rel)
        left = project(p_cam, intr)
        if isinstance(left, str):
            continue
        right = project((p_cam[0] - intr.baseline, p_cam[1], p_cam[2]), intr)
        if isinstance(right, str):
            continue
        ul, vl = left
        ur, vr = right
        if rng is not None and (intr.noise_stddev > 0.0 or intr.noise_mean != 0.0):
            n = intr.noise_mean + intr.noise_stddev * rng.standard_normal(4)
            ul += float(n[0])
            vl += float(n[1])
            ur += float(n[2])
            vr += float(n[3])
        out.append(StereoObservation(lid, ul, vl, ur, vr))
    return out


def camera_world_pose(t: float, body_p: Vec3, body_q, mount_q=FORWARD_CAMERA_QUAT) -> Pose:
    """World pose of a camera rigidly mounted at the body origin."""
    return Pose(t=t, p=body_p, q=quat_mul(body_q, mount_q))


# --- landmark worlds ---------------------------------------------------------


def generate_landmarks(
    n: int, box_min: Vec3, box_max: Vec3, seed: int
) -> list[tuple[int, Vec3]]:
    """Uniform-random landmarks in an axis-aligned box, reproducible by seed."""
    if n < 0:
        raise ValueError("landmark count must be >= 0")
    rng = make_stream(seed, GLOBAL_WORLDGEN)
    lo = np.asarray(box_min, dtype=np.float64)
    hi = np.asarray(box_max, dtype=np.float64)
    pts = lo + (hi - lo) * rng.random((n, 3))
    return [(i, (float(p[0]), float(p[1]), float(p[2]))) for i, p in enumerate(pts)]


def load_landmarks(path: str | Path) -> list[tuple[int, Vec3]]:
    """Read a landmark world file: CSV with header id,x,y,z."""
    out = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        for row in reader:
            out.append((int(row["id"]), (float(row["x"]), float(row["y"]), float(row["z"]))))
    return out


def save_landmarks(landmarks: list[tuple[int, Vec3]], path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["id", "x", "y", "z"])
        for lid, p in landmarks:
            writer.writerow([lid, repr(p[0]), repr(p[1]), repr(p[2])])
