"""6R forward and inverse kinematics over a Denavit-Hartenberg table.

The DH table, joint limits and mounting poses come from the run config; a
nominal 6R table ships as a default. IK is damped least squares seeded from
the previous solution, which keeps branch choice continuous along a
trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose, rotation_error


class KinematicError(Exception):
    pass


class NoConvergence(KinematicError):
    """Iteration cap reached before the residual dropped below tolerance."""


class OutOfReach(KinematicError):
    """Residual stagnated above tolerance; target outside the workspace."""


class JointLimit(KinematicError):
    """Converged solution violates the configured joint limits."""


@dataclass(frozen=True)
class DhRow:
    a: float  # link length, m
    alpha: float  # link twist, rad
    d: float  # link offset, m
    theta_offset: float  # joint angle offset, rad


# Nominal 6R table in the style of a small industrial arm. Validated only by
# internal consistency; real cells must load measured parameters from config.
DEFAULT_DH = (
    DhRow(0.150, -np.pi / 2, 0.4865, 0.0),
    DhRow(0.475, 0.0, 0.0, -np.pi / 2),
    DhRow(0.0, -np.pi / 2, 0.0, 0.0),
    DhRow(0.0, np.pi / 2, 0.600, 0.0),
    DhRow(0.0, -np.pi / 2, 0.0, 0.0),
    DhRow(0.0, 0.0, 0.065, np.pi),
)

DEFAULT_JOINT_LIMITS = (
    (-np.pi, np.pi),
    (-np.pi / 2, 2.374),
    (-np.pi, 1.134),
    (-np.pi, np.pi),
    (-2.007, 2.007),
    (-np.pi, np.pi),
)


@dataclass(frozen=True)
class KinematicParams:
    dh: tuple = DEFAULT_DH
    joint_limits: tuple = DEFAULT_JOINT_LIMITS
    base: Pose = field(default_factory=Pose.identity)
    flange_to_mold: Pose = field(default_factory=Pose.identity)

    def __post_init__(self):
        if len(self.dh) != 6:
            raise ValueError("exactly 6 DH rows required")
        if len(self.joint_limits) != 6:
            raise ValueError("exactly 6 joint limit pairs required")
        for lo, hi in self.joint_limits:
            if not lo < hi:
                raise ValueError("joint limit lower bound must be below upper bound")

    def within_limits(self, q: np.ndarray) -> bool:
        return all(lo <= qi <= hi for qi, (lo, hi) in zip(q, self.joint_limits))

    def clamp(self, q: np.ndarray) -> np.ndarray:
        return np.array([min(max(qi, lo), hi) for qi, (lo, hi) in zip(q, self.joint_limits)])

    def max_reach(self) -> float:
        return sum(abs(r.a) + abs(r.d) for r in self.dh)


def dh_matrix(row: DhRow, theta: float) -> np.ndarray:
    """Homogeneous transform for one DH row at joint angle theta."""
    th = theta + row.theta_offset
    ct, st = np.cos(th), np.sin(th)
    ca, sa = np.cos(row.alpha), np.sin(row.alpha)
    return np.array(
        [
            [ct, -st * ca, st * sa, row.a * ct],
            [st, ct * ca, -ct * sa, row.a * st],
            [0.0, sa, ca, row.d],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def _chain(q: np.ndarray, k: KinematicParams) -> list:
    """World-frame transforms after the base and after each joint."""
    frames = [k.base.matrix()]
    for row, theta in zip(k.dh, q):
        frames.append(frames[-1] @ dh_matrix(row, theta))
    return frames


def forward_kinematics(q: np.ndarray, k: KinematicParams) -> Pose:
    """World pose of the flange for a 6-entry joint vector."""
    q = np.asarray(q, dtype=float)
    if q.shape != (6,):
        raise ValueError("joint vector must have 6 entries")
    return Pose.from_matrix(_chain(q, k)[-1])


def jacobian(q: np.ndarray, k: KinematicParams) -> np.ndarray:
    """Geometric Jacobian (linear over angular) of the flange, world frame."""
    frames = _chain(q, k)
    p_end = frames[-1][:3, 3]
    cols = []
    for i in range(6):
        z = frames[i][:3, 2]
        p = frames[i][:3, 3]
        cols.append(np.concatenate([np.cross(z, p_end - p), z]))
    return np.column_stack(cols)


def inverse_kinematics(
    target: Pose,
    seed: np.ndarray,
    k: KinematicParams,
    damping: float = 1e-3,
    max_iter: int = 200,
    tol: float = 1e-8,
) -> np.ndarray:
    """Damped-least-squares IK from a seed configuration.

    Raises OutOfReach when the residual stagnates above tolerance,
    NoConvergence at the iteration cap, JointLimit when the converged
    solution leaves the configured limits.
    """
    q = np.asarray(seed, dtype=float).copy()
    if q.shape != (6,):
        raise ValueError("seed must have 6 entries")
    best = np.inf
    stall = 0
    for _ in range(max_iter):
        pose = forward_kinematics(q, k)
        err = np.concatenate(
            [
                target.position - pose.position,
                rotation_error(target.orientation, pose.orientation),
            ]
        )
        res = np.linalg.norm(err)
        if res < tol:
            if not k.within_limits(q):
                raise JointLimit(f"converged configuration violates joint limits: {q}")
            return q
        if res < best - 1e-12:
            best = res
            stall = 0
        else:
            stall += 1
            if stall >= 15:
                raise OutOfReach(f"residual stagnated at {res:.3e}")
        j = jacobian(q, k)
        jjt = j @ j.T + (damping**2) * np.eye(6)
        q = q + j.T @ np.linalg.solve(jjt, err)
    raise NoConvergence(f"no convergence after {max_iter} iterations (residual {best:.3e})")
