"""Trajectory accuracy metrics: TUM file I/O, association, APE and RPE.

APE compares absolute poses after optional rigid alignment; RPE compares
pose increments over a fixed reference arc length (default half a meter),
which makes it immune to global offsets and sensitive to local drift.
Rotation errors are reported in degrees, translation in meters.

On-disk format is the TUM line "timestamp tx ty tz qx qy qz qw" with the
quaternion scalar-last; internally quaternions are scalar-first.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    Pose,
    Quat,
    Vec3,
    quat_angle,
    quat_conj,
    quat_from_matrix,
    quat_mul,
    quat_normalize,
    rotate,
)


class NoOverlap(ValueError):
    """Association produced zero pairs."""


class DegenerateAlignment(ValueError):
    """Rigid alignment needs at least 3 non-collinear points."""


class PathTooShort(ValueError):
    """Reference path is shorter than the RPE window."""


class ParseError(ValueError):
    def __init__(self, path: str, line_no: int, msg: str):
        super().__init__(f"{path}:{line_no}: {msg}")
        self.line_no = line_no


class NonMonotonicTime(ValueError):
    pass


@dataclass(frozen=True)
class Trajectory:
    samples: tuple[Pose, ...]

    def __post_init__(self) -> None:
        ts = [s.t for s in self.samples]
        for a, b in zip(ts, ts[1:]):
            if b <= a:
                raise NonMonotonicTime(f"timestamps not strictly increasing at t={b}")

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class MetricReport:
    rmse: float
    mean: float
    median: float
    std: float
    min: float
    max: float
    unit: str
    n_pairs: int

    @staticmethod
    def from_errors(errors: np.ndarray, unit: str) -> "MetricReport":
        e = np.asarray(errors, dtype=np.float64)
        if e.size < 1:
            raise ValueError("need at least one error sample")
        return MetricReport(
            rmse=float(np.sqrt(np.mean(e * e))),
            mean=float(np.mean(e)),
            median=float(np.median(e)),
            std=float(np.std(e)),
            min=float(np.min(e)),
            max=float(np.max(e)),
            unit=unit,
            n_pairs=int(e.size),
        )

    def to_dict(self) -> dict:
        return {
            "rmse": self.rmse, "mean": self.mean, "median": self.median,
            "std": self.std, "min": self.min, "max": self.max,
            "unit": self.unit, "n_pairs": self.n_pairs,
        }


def associate(ref: Trajectory, est: Trajectory, max_dt: float = 0.02) -> list[tuple[Pose, Pose]]:
    """Greedy nearest-timestamp matching, each sample used at most once.

    Candidates are the bracketing reference samples of each estimate sample;
    they are consumed in order of increasing |dt| (ties broken on timestamps
    for determinism). Pairs farther apart than max_dt are dropped.
    """
    if max_dt <= 0.0:
        raise ValueError("max_dt must be positive")
    ref_t = [s.t for s in ref.samples]
    cands = []
    for j, e in enumerate(est.samples):
        k = bisect.bisect_left(ref_t, e.t)
        for i in (k - 1, k):
            if 0 <= i < len(ref_t):
                dt = abs(ref_t[i] - e.t)
                if dt <= max_dt:
                    cands.append((dt, ref_t[i], e.t, i, j))
    cands.sort()
    used_r: set[int] = set()
    used_e: set[int] = set()
    pairs = []
    for _, _, _, i, j in cands:
        if i in used_r or j in used_e:
            continue
        used_r.add(i)
        used_e.add(j)
        pairs.append((ref.samples[i], est.samples[j]))
    if not pairs:
        raise NoOverlap(f"no sample pairs within max_dt={max_dt}")
    pairs.sort(key=lambda pr: pr[0].t)
    return pairs


def umeyama_se3(ref_pts: np.ndarray, est_pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form least-squares rigid transform (R, t), no scale, mapping
    est onto ref: minimizes sum ||ref_i - (R est_i + t)||^2."""
    if ref_pts.shape[0] < 3:
        raise DegenerateAlignment("need at least 3 point pairs")
    mu_r = ref_pts.mean(axis=0)
    mu_e = est_pts.mean(axis=0)
    ec = est_pts - mu_e
    sv = np.linalg.svd(ec, compute_uv=False)
    if sv[1] <= 1e-9 * max(sv[0], 1e-30):
        raise DegenerateAlignment("points are collinear")
    h = ec.T @ (ref_pts - mu_r)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    s = np.diag([1.0, 1.0, d])
    r = vt.T @ s @ u.T
    t = mu_r - r @ mu_e
    return r, t


def ape(
    pairs: list[tuple[Pose, Pose]], align: str = "none"
) -> tuple[MetricReport, MetricReport]:
    """Absolute pose error over associated pairs.

    align="se3" first rigidly aligns the estimate onto the reference
    (closed-form, no scale). Returns (translation report m, rotation report deg).
    """
    if len(pairs) < 1:
        raise ValueError("need at least one pair")
    if align not in ("none", "se3"):
        raise ValueError(f"unknown align mode {align!r}")
    ref_p = np.asarray([pr[0].p for pr in pairs])
    est_p = np.asarray([pr[1].p for pr in pairs])
    est_q = [pr[1].q for pr in pairs]
    if align == "se3":
        r, t = umeyama_se3(ref_p, est_p)
        est_p = est_p @ r.T + t
        q_align = quat_from_matrix(tuple(tuple(float(x) for x in row) for row in r))
        est_q = [quat_normalize(quat_mul(q_align, q)) for q in est_q]
    d = ref_p - est_p
    trans_err = np.sqrt(np.sum(d * d, axis=1))
    rot_err = np.empty(len(pairs))
    for k, (pr, _) in enumerate(pairs):
        q_rel = quat_mul(quat_conj(pr.q), est_q[k])
        rot_err[k] = math.degrees(quat_angle(q_rel))
    return MetricReport.from_errors(trans_err, "m"), MetricReport.from_errors(rot_err, "deg")


def _pose_inv(p: Vec3, q: Quat) -> tuple[Vec3, Quat]:
    qi = quat_conj(q)
    pi = rotate(qi, p)
    return ((-pi[0], -pi[1], -pi[2]), qi)


def _pose_mul(pa: Vec3, qa: Quat, pb: Vec3, qb: Quat) -> tuple[Vec3, Quat]:
    rb = rotate(qa, pb)
    return ((pa[0] + rb[0], pa[1] + rb[1], pa[2] + rb[2]), quat_mul(qa, qb))


def _relative(p1: Vec3, q1: Quat, p2: Vec3, q2: Quat) -> tuple[Vec3, Quat]:
    """P1^-1 P2."""
    pi, qi = _pose_inv(p1, q1)
    return _pose_mul(pi, qi, p2, q2)


def rpe(
    pairs: list[tuple[Pose, Pose]], delta: float = 0.5
) -> tuple[MetricReport, MetricReport]:
    """Relative pose error per `delta` meters of reference path.

    For each start index i, the end index j is the first sample where the
    reference arc length from i reaches delta. The error transform is
    E = (Pref_i^-1 Pref_j)^-1 (Pest_i^-1 Pest_j); translation/rotation of E
    are aggregated. Windows overlap (every i gets its own j).
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    n = len(pairs)
    ref_p = [pr[0].p for pr in pairs]
    # cumulative reference arc length
    arc = [0.0]
    for a, b in zip(ref_p, ref_p[1:]):
        arc.append(arc[-1] + math.dist(a, b))
    trans_err = []
    rot_err = []
    j = 0
    for i in range(n):
        target = arc[i] + delta
        if j < i + 1:
            j = i + 1
        while j < n and arc[j] < target:
            j += 1
        if j >= n:
            break
        r_i, e_i = pairs[i]
        r_j, e_j = pairs[j]
        dp_r, dq_r = _relative(r_i.p, r_i.q, r_j.p, r_j.q)
        dp_e, dq_e = _relative(e_i.p, e_i.q, e_j.p, e_j.q)
        pe, qe = _relative(dp_r, dq_r, dp_e, dq_e)
        trans_err.append(math.sqrt(pe[0] ** 2 + pe[1] ** 2 + pe[2] ** 2))
        rot_err.append(math.degrees(quat_angle(qe)))
    if not trans_err:
        raise PathTooShort(
            f"reference path {arc[-1]:.3f} m never spans delta={delta} m"
        )
    return (
        MetricReport.from_errors(np.asarray(trans_err), "m"),
        MetricReport.from_errors(np.asarray(rot_err), "deg"),
    )


def read_tum(path: str) -> Trajectory:
    """Parse a TUM trajectory file (scalar-last quaternions on disk)."""
    samples = []
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) != 8:
                raise ParseError(path, line_no, f"expected 8 fields, got {len(fields)}")
            try:
                vals = [float(f) for f in fields]
            except ValueError as exc:
                raise ParseError(path, line_no, str(exc)) from None
            t, tx, ty, tz, qx, qy, qz, qw = vals
            if samples and t <= samples[-1].t:
                raise NonMonotonicTime(f"{path}:{line_no}: t={t} not increasing")
            samples.append(Pose(t=t, p=(tx, ty, tz), q=quat_normalize((qw, qx, qy, qz))))
    return Trajectory(samples=tuple(samples))


def write_tum(path: str, traj: Trajectory) -> None:
    """Write TUM format with repr floats so a round-trip is exact."""
    with open(path, "w") as fh:
        fh.write("# timestamp tx ty tz qx qy qz qw\n")
        for s in traj.samples:
            # float() casts: numpy scalars would repr as np.float64(...)
            w, x, y, z = (float(c) for c in s.q)
            px, py, pz = (float(c) for c in s.p)
            fh.write(
                f"{float(s.t)!r} {px!r} {py!r} {pz!r} {x!r} {y!r} {z!r} {w!r}\n"
            )


def report_json(
    mode: str,
    trans: MetricReport,
    rot: MetricReport,
    extra: dict | None = None,
) -> str:
    doc = {"mode": mode, "translation": trans.to_dict(), "rotation": rot.to_dict()}
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True)
