"""Rigid-body poses and quaternion utilities.

Quaternions are stored scalar-first (w, x, y, z), unit-norm, and
sign-canonicalized so that equal rotations have identical components:
w >= 0, and if w == 0 the first nonzero component is >= 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_EPS = 1e-12


def quat_canonical(q: np.ndarray) -> np.ndarray:
    """Normalize a quaternion and fix its sign to the canonical half-sphere."""
    q = np.array(q, dtype=float).reshape(4)
    norm = np.linalg.norm(q)
    if norm < _EPS:
        raise ValueError("zero-norm quaternion")
    if abs(norm - 1.0) > 1e-12:  # keep already-unit quaternions byte-stable
        q = q / norm
    if q[0] < 0.0:
        q = -q
    elif q[0] == 0.0:
        for c in q[1:]:
            if c != 0.0:
                if c < 0.0:
                    q = -q
                break
    return q


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a*b, both scalar-first."""
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


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrix for a unit quaternion."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(rot: np.ndarray) -> np.ndarray:
    """Unit quaternion for a rotation matrix (Shepperd's method)."""
    m = np.asarray(rot, dtype=float)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0.0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = np.array(
            [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        )
    elif m[1, 1] >= m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        q = np.array(
            [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        )
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        q = np.array(
            [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
        )
    return quat_canonical(q)


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(axis)
    if norm < _EPS:
        raise ValueError("zero-norm rotation axis")
    half = 0.5 * angle
    q = np.empty(4)
    q[0] = np.cos(half)
    q[1:] = np.sin(half) * axis / norm
    return quat_canonical(q)


def quat_to_rotvec(q: np.ndarray) -> np.ndarray:
    """Rotation vector (axis * angle, angle in [0, pi]) of a canonical quaternion."""
    q = quat_canonical(q)
    sin_half = np.linalg.norm(q[1:])
    if sin_half < _EPS:
        return 2.0 * q[1:]  # small-angle: sin(a/2) ~ a/2
    angle = 2.0 * np.arctan2(sin_half, q[0])
    return angle * q[1:] / sin_half


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector(s) v by unit quaternion q. v may be (3,) or (n, 3)."""
    return np.asarray(v, dtype=float) @ quat_to_matrix(q).T


def quat_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Geodesic angle in radians between two unit quaternions, in [0, pi].

    Computed as 4*asin(chord/2) from the shorter chord min(|a-b|, |a+b|),
    which equals 2*acos(|<a, b>|) but stays exact for identical inputs and
    keeps full precision near zero, where the acos form bottoms out around
    1e-8.
    """
    chord = min(float(np.linalg.norm(a - b)), float(np.linalg.norm(a + b)))
    return 4.0 * np.arcsin(min(0.5 * chord, 1.0))


def quat_mean(quats: np.ndarray) -> np.ndarray:
    """Chordal mean: sign-align to the first sample, average, renormalize."""
    quats = np.asarray(quats, dtype=float)
    if quats.ndim != 2 or quats.shape[1] != 4 or quats.shape[0] == 0:
        raise ValueError("expected a nonempty (n, 4) array of quaternions")
    ref = quats[0]
    signs = np.where(quats @ ref < 0.0, -1.0, 1.0)
    return quat_canonical((quats * signs[:, None]).mean(axis=0))


@dataclass(frozen=True, eq=False)
class Pose:
    """A rigid transform: rotate by ``orientation``, then translate by ``position``."""

    position: np.ndarray
    orientation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self) -> None:
        pos = np.array(self.position, dtype=float).reshape(3)
        quat = quat_canonical(self.orientation)
        pos.flags.writeable = False
        quat.flags.writeable = False
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", quat)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Pose):
            return NotImplemented
        return np.array_equal(self.position, other.position) and np.array_equal(
            self.orientation, other.orientation
        )

    def __repr__(self) -> str:
        p = ", ".join(f"{v:.6g}" for v in self.position)
        q = ", ".join(f"{v:.6g}" for v in self.orientation)
        return f"Pose(p=[{p}], q=[{q}])"

    @property
    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)

    def transform_point(self, point: np.ndarray) -> np.ndarray:
        return quat_rotate(self.orientation, point) + self.position


def identity() -> Pose:
    return Pose(np.zeros(3))


def from_translation(xyz) -> Pose:
    return Pose(np.asarray(xyz, dtype=float))


def from_axis_angle(axis, angle: float, point=None) -> Pose:
    """Rotation by ``angle`` about ``axis``; if ``point`` is given, about the
    spatial line through that point (x -> point + R (x - point))."""
    q = quat_from_axis_angle(axis, angle)
    if point is None:
        return Pose(np.zeros(3), q)
    point = np.asarray(point, dtype=float)
    return Pose(point - quat_rotate(q, point), q)


def compose(a: Pose, b: Pose) -> Pose:
    """a o b: apply b, then a."""
    return Pose(
        a.position + quat_rotate(a.orientation, b.position),
        quat_multiply(a.orientation, b.orientation),
    )


def inverse(a: Pose) -> Pose:
    q_inv = quat_conjugate(a.orientation)
    return Pose(-quat_rotate(q_inv, a.position), q_inv)


def relative(a: Pose, b: Pose) -> Pose:
    """Pose of b expressed in a's frame: inverse(a) o b."""
    return compose(inverse(a), b)


def pose_error(a: Pose, b: Pose) -> tuple[float, float]:
    """(translation distance in meters, geodesic rotation angle in radians)."""
    trans = float(np.linalg.norm(a.position - b.position))
    rot = quat_angle(a.orientation, b.orientation)
    return trans, rot


@dataclass(frozen=True, eq=False)
class PoseTrajectory:
    """Timestamped pose samples of one tracked cluster (rigid part candidate)."""

    cluster_id: str
    times: np.ndarray
    poses: tuple[Pose, ...]
    background: bool = False

    def __post_init__(self) -> None:
        times = np.array(self.times, dtype=float).reshape(-1)
        poses = tuple(self.poses)
        if len(times) != len(poses):
            raise ValueError("times and poses must have equal length")
        if len(times) == 0:
            raise ValueError("empty trajectory")
        if np.any(np.diff(times) <= 0.0):
            raise ValueError(f"timestamps of {self.cluster_id!r} must be strictly increasing")
        times.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "poses", poses)

    def __len__(self) -> int:
        return len(self.poses)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PoseTrajectory):
            return NotImplemented
        return (
            self.cluster_id == other.cluster_id
            and self.background == other.background
            and np.array_equal(self.times, other.times)
            and self.poses == other.poses
        )

    def positions(self) -> np.ndarray:
        return np.stack([p.position for p in self.poses])

    def quaternions(self) -> np.ndarray:
        return np.stack([p.orientation for p in self.poses])

    def total_motion(self) -> float:
        """Path length in meters plus accumulated rotation in radians.

        Used to pick the most stationary cluster; the unit mix is harmless
        because only the ordering matters.
        """
        motion = 0.0
        for prev, cur in zip(self.poses, self.poses[1:]):
            trans, rot = pose_error(prev, cur)
            motion += trans + rot
        return motion
