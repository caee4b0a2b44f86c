"""Rigid-body transforms on unit quaternions.

Quaternions are stored as (w, x, y, z) numpy arrays and renormalized after
every operation so long chains of compositions do not drift.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DegenerateFrame(ValueError):
    """Raised when a frame cannot be built from near-parallel axes."""


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n == 0.0:
        raise ValueError("zero quaternion")
    return q / n


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector v by unit quaternion q."""
    w, x, y, z = q
    u = np.array([x, y, z])
    v = np.asarray(v, dtype=float)
    return v + 2.0 * np.cross(u, np.cross(u, v) + w * v)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_matrix(m: np.ndarray) -> np.ndarray:
    """Rotation matrix to quaternion, Shepperd's method."""
    m = np.asarray(m, dtype=float)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = np.array(
            [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        )
    elif m[1, 1] > m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        q = np.array(
            [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        )
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        q = np.array(
            [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
        )
    if q[0] < 0:
        q = -q
    return quat_normalize(q)


def rotation_error(q_target: np.ndarray, q_actual: np.ndarray) -> np.ndarray:
    """Axis-angle vector taking q_actual to q_target (world frame)."""
    dq = quat_mul(q_target, quat_conj(q_actual))
    dq = quat_normalize(dq)
    if dq[0] < 0:
        dq = -dq
    w = min(1.0, dq[0])
    angle = 2.0 * np.arccos(w)
    axis = dq[1:]
    n = np.linalg.norm(axis)
    if n < 1e-12:
        return np.zeros(3)
    return axis / n * angle


@dataclass(frozen=True)
class Pose:
    """Rigid transform: position in meters plus unit quaternion orientation."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "orientation", quat_normalize(self.orientation))

    @staticmethod
    def identity() -> "Pose":
        return Pose()

    @staticmethod
    def from_matrix(m: np.ndarray) -> "Pose":
        m = np.asarray(m, dtype=float)
        return Pose(m[:3, 3], quat_from_matrix(m[:3, :3]))

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = quat_to_matrix(self.orientation)
        m[:3, 3] = self.position
        return m

    def compose(self, other: "Pose") -> "Pose":
        return Pose(
            self.position + quat_rotate(self.orientation, other.position),
            quat_mul(self.orientation, other.orientation),
        )

    def inverse(self) -> "Pose":
        qi = quat_conj(self.orientation)
        return Pose(-quat_rotate(qi, self.position), qi)

    def apply(self, point: np.ndarray) -> np.ndarray:
        return self.position + quat_rotate(self.orientation, point)

    def rotate(self, vec: np.ndarray) -> np.ndarray:
        return quat_rotate(self.orientation, vec)

    def almost_equal(self, other: "Pose", tol: float = 1e-9) -> bool:
        if np.linalg.norm(self.position - other.position) > tol:
            return False
        return np.linalg.norm(rotation_error(other.orientation, self.orientation)) <= tol


def frame_from_tangent_normal(tangent: np.ndarray, normal: np.ndarray) -> np.ndarray:
    """Right-handed orthonormal frame as a quaternion.

    Frame x axis is the (normalized) tangent, z axis is the normal after
    Gram-Schmidt correction against the tangent, y completes the triad.
    """
    t = np.asarray(tangent, dtype=float)
    n = np.asarray(normal, dtype=float)
    tn = np.linalg.norm(t)
    nn = np.linalg.norm(n)
    if tn < 1e-12 or nn < 1e-12:
        raise DegenerateFrame("zero-length axis")
    t = t / tn
    n = n / nn
    if np.linalg.norm(np.cross(t, n)) < 1e-9:
        raise DegenerateFrame("tangent and normal are parallel")
    z = n - np.dot(n, t) * t
    z = z / np.linalg.norm(z)
    y = np.cross(z, t)
    m = np.column_stack([t, y, z])
    return quat_from_matrix(m)
