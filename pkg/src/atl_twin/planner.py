"""Mold surfaces, tape tracks, and the inverted trajectory planner.

The taper is stationary; the planner moves the robot-held mold so the
active track slides through the fixed nip point with the surface normal
against the compaction axis and the track tangent along the feed direction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np

from .geometry import (
    DegenerateFrame,
    Pose,
    frame_from_tangent_normal,
    quat_from_matrix,
    quat_to_matrix,
)
from .kinematics import KinematicError, KinematicParams, inverse_kinematics

MAX_TAPE_WIDTH = 0.051  # m, spool hardware bound


class WidthOutOfRange(ValueError):
    """Tape width outside the spool hardware range (0, 51 mm]."""


class TrackOffSurface(ValueError):
    """Track polyline leaves the extents of its mold surface."""


class TrajectoryError(Exception):
    """IK failure while planning, tagged with the sample it occurred at."""

    def __init__(self, message: str, t: float, s: float):
        super().__init__(f"{message} (t={t:.4f} s, s={s:.4f} m)")
        self.t = t
        self.s = s


@dataclass(frozen=True)
class Plane:
    """Rectangular plane patch; frame z is the outward normal (toward taper)."""

    frame: Pose
    extent_x: float
    extent_y: float

    def __post_init__(self):
        if self.extent_x <= 0 or self.extent_y <= 0:
            raise ValueError("plane extents must be strictly positive")

    def point(self, uv: np.ndarray) -> np.ndarray:
        return self.frame.apply(np.array([uv[0], uv[1], 0.0]))

    def tangent(self, uv: np.ndarray, duv: np.ndarray) -> np.ndarray:
        return self.frame.rotate(np.array([duv[0], duv[1], 0.0]))

    def normal(self, uv: np.ndarray) -> np.ndarray:
        return self.frame.rotate(np.array([0.0, 0.0, 1.0]))

    def contains(self, uv: np.ndarray) -> bool:
        return abs(uv[0]) <= self.extent_x / 2 + 1e-9 and abs(uv[1]) <= self.extent_y / 2 + 1e-9


@dataclass(frozen=True)
class Cylinder:
    """Cylinder patch; u is circumferential arc length, v axial position."""

    frame: Pose
    radius: float
    length: float

    def __post_init__(self):
        if self.radius <= 0 or self.length <= 0:
            raise ValueError("cylinder radius and length must be strictly positive")

    def point(self, uv: np.ndarray) -> np.ndarray:
        a = uv[0] / self.radius
        return self.frame.apply(
            np.array([self.radius * np.cos(a), self.radius * np.sin(a), uv[1]])
        )

    def tangent(self, uv: np.ndarray, duv: np.ndarray) -> np.ndarray:
        a = uv[0] / self.radius
        circ = np.array([-np.sin(a), np.cos(a), 0.0])
        axial = np.array([0.0, 0.0, 1.0])
        return self.frame.rotate(duv[0] * circ + duv[1] * axial)

    def normal(self, uv: np.ndarray) -> np.ndarray:
        a = uv[0] / self.radius
        return self.frame.rotate(np.array([np.cos(a), np.sin(a), 0.0]))

    def contains(self, uv: np.ndarray) -> bool:
        return 0.0 - 1e-9 <= uv[1] <= self.length + 1e-9


MoldSurface = Union[Plane, Cylinder]


@dataclass(frozen=True)
class TapeTrack:
    """Arc-length parameterized polyline in surface coordinates."""

    surface: MoldSurface
    points: np.ndarray  # (N, 2) surface coordinates; both charts are isometric
    width: float
    index: int = 0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise ValueError("track polyline needs at least two 2D points")
        object.__setattr__(self, "points", pts)
        if not 0.0 < self.width <= MAX_TAPE_WIDTH:
            raise WidthOutOfRange(f"tape width must be in (0, {MAX_TAPE_WIDTH}] m")
        seg = np.diff(pts, axis=0)
        lens = np.linalg.norm(seg, axis=1)
        if np.any(lens < 1e-12):
            raise ValueError("degenerate zero-length polyline segment")
        object.__setattr__(self, "_cum", np.concatenate([[0.0], np.cumsum(lens)]))

    @property
    def length(self) -> float:
        return float(self._cum[-1])

    def _locate(self, s: float):
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self._cum, s, side="right") - 1)
        i = min(i, len(self.points) - 2)
        seg = self.points[i + 1] - self.points[i]
        seg_len = self._cum[i + 1] - self._cum[i]
        frac = (s - self._cum[i]) / seg_len
        return self.points[i] + frac * seg, seg / seg_len

    def point(self, s: float) -> np.ndarray:
        uv, _ = self._locate(s)
        return self.surface.point(uv)

    def tangent(self, s: float) -> np.ndarray:
        uv, duv = self._locate(s)
        return self.surface.tangent(uv, duv)

    def normal(self, s: float) -> np.ndarray:
        uv, _ = self._locate(s)
        return self.surface.normal(uv)

    def on_surface(self, samples: int = 20) -> bool:
        for s in np.linspace(0.0, self.length, samples):
            uv, _ = self._locate(s)
            if not self.surface.contains(uv):
                return False
        return True


@dataclass(frozen=True)
class NipFrame:
    """World pose of the stationary nip point with its process axes."""

    position: np.ndarray
    compaction_axis: np.ndarray  # unit, pointing from taper into the mold
    feed_direction: np.ndarray  # unit, direction laid tape leaves the nip

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float)
        c = np.asarray(self.compaction_axis, dtype=float)
        f = np.asarray(self.feed_direction, dtype=float)
        if abs(np.linalg.norm(c) - 1.0) > 1e-9 or abs(np.linalg.norm(f) - 1.0) > 1e-9:
            raise ValueError("nip axes must be unit vectors")
        if abs(np.dot(c, f)) > 1e-9:
            raise ValueError("compaction axis and feed direction must be orthogonal")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "compaction_axis", c)
        object.__setattr__(self, "feed_direction", f)


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    mold_pose: Pose
    joints: np.ndarray
    s: float


@dataclass(frozen=True)
class MoldTrajectory:
    samples: List[TrajectorySample]

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)


def mold_pose_for_arclength(track: TapeTrack, nip: NipFrame, s: float) -> Pose:
    """World pose of the mold that puts track point s at the nip point."""
    tan = track.tangent(s)
    nor = track.normal(s)
    if abs(np.dot(tan, nor)) > 1e-6:
        raise DegenerateFrame(f"tangent and normal not orthogonal at s={s:.4f}")
    # Mold orientation R maps the local (tangent, normal) pair onto the
    # world (feed, -compaction) pair.
    local = quat_to_matrix(frame_from_tangent_normal(tan, nor))
    world = quat_to_matrix(frame_from_tangent_normal(nip.feed_direction, -nip.compaction_axis))
    rot = world @ local.T
    q = quat_from_matrix(rot)
    p = track.point(s)
    pos = nip.position - quat_to_matrix(q) @ p
    return Pose(pos, q)


def plan_mold_trajectory(
    track: TapeTrack,
    nip: NipFrame,
    feed_speed: float,
    dt: float,
    k: KinematicParams,
    seed: Optional[np.ndarray] = None,
) -> MoldTrajectory:
    """Sample the mold motion at the control period and solve joints per sample."""
    if feed_speed <= 0:
        raise ValueError("feed_speed must be positive")
    if dt <= 0:
        raise ValueError("dt must be positive")
    q_seed = np.zeros(6) if seed is None else np.asarray(seed, dtype=float)
    mold_inv = k.flange_to_mold.inverse()
    samples = []
    i = 0
    while True:
        t = i * dt
        s = feed_speed * t
        if s > track.length + 1e-12:
            break
        s = min(s, track.length)
        mold_pose = mold_pose_for_arclength(track, nip, s)
        flange = mold_pose.compose(mold_inv)
        try:
            q = inverse_kinematics(flange, q_seed, k)
        except KinematicError as e:
            raise TrajectoryError(str(e), t, s) from e
        samples.append(TrajectorySample(t, mold_pose, q, s))
        q_seed = q
        i += 1
    return MoldTrajectory(samples)
