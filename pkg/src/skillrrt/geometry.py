"""Rigid-body poses, the task-space distance metric, keypoints, and
SE(2)-constrained stable-pose regions.

Poses store a unit quaternion in (w, x, y, z) order, canonicalized to the
w >= 0 hemisphere so that the double cover never leaks into comparisons.
Regions are axis-aligned boxes in a region frame: free x/y/yaw, a fixed z,
and a finite set of admissible (roll, pitch) pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument

_QUAT_NORM_TOL = 1e-9
TWO_PI = 2.0 * math.pi


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise InvalidArgument(f"non-finite values in {what}: {arr!r}")


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product of two (w,x,y,z) quaternions."""
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


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    half = 0.5 * angle
    return np.concatenate([[math.cos(half)], math.sin(half) * axis])


def quat_from_rpy(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Rotation Rz(yaw) @ Ry(pitch) @ Rx(roll) as a quaternion."""
    qz = quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), yaw)
    qy = quat_from_axis_angle(np.array([0.0, 1.0, 0.0]), pitch)
    qx = quat_from_axis_angle(np.array([1.0, 0.0, 0.0]), roll)
    return quat_mul(qz, quat_mul(qy, qx))


def quat_angle(q1: np.ndarray, q2: np.ndarray) -> float:
    """Geodesic angle in radians between two unit quaternions, sign-free.

    Equal to 2*arccos(|<q1, q2>|), evaluated in the atan2 form, which stays
    well-conditioned near zero angle."""
    if q1 is q2 or bool(np.all(q1 == q2)):
        return 0.0
    r = quat_mul(quat_conj(q1), q2)
    return 2.0 * math.atan2(float(np.linalg.norm(r[1:])), abs(float(r[0])))


def quat_angle_from_identity(q: np.ndarray) -> float:
    """Rotation angle of q, computed via asin for conditioning near zero."""
    v = float(np.linalg.norm(q[1:]))
    return 2.0 * math.asin(min(v, 1.0))


@dataclass(frozen=True)
class Pose:
    """Rigid-body pose: position in meters, unit quaternion (w,x,y,z)."""

    position: np.ndarray
    quaternion: np.ndarray

    def __init__(self, position, quaternion):
        position = np.asarray(position, dtype=float).reshape(3).copy()
        quaternion = np.asarray(quaternion, dtype=float).reshape(4).copy()
        _check_finite(position, "pose position")
        _check_finite(quaternion, "pose quaternion")
        norm = float(np.linalg.norm(quaternion))
        if abs(norm - 1.0) > 1e-6:
            raise InvalidArgument(f"quaternion norm {norm} too far from 1")
        quaternion = quaternion / norm
        if quaternion[0] < 0.0:
            quaternion = -quaternion
        position.setflags(write=False)
        quaternion.setflags(write=False)
        object.__setattr__(self, "position", position)
        object.__setattr__(self, "quaternion", quaternion)
        assert abs(float(np.linalg.norm(self.quaternion)) - 1.0) <= _QUAT_NORM_TOL

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]))

    @staticmethod
    def from_rpy(position, roll: float, pitch: float, yaw: float) -> "Pose":
        return Pose(position, quat_from_rpy(roll, pitch, yaw))

    def rotation_matrix(self) -> np.ndarray:
        R = self.__dict__.get("_rot")
        if R is None:
            R = quat_to_matrix(self.quaternion)
            R.setflags(write=False)
            self.__dict__["_rot"] = R
        return R

    def compose(self, other: "Pose") -> "Pose":
        """self ∘ other: apply other in self's frame."""
        return Pose(
            self.position + self.rotation_matrix() @ other.position,
            quat_mul(self.quaternion, other.quaternion),
        )

    def inverse(self) -> "Pose":
        qc = quat_conj(self.quaternion)
        return Pose(-(quat_to_matrix(qc) @ self.position), qc)

    def transform_point(self, p: np.ndarray) -> np.ndarray:
        return self.rotation_matrix() @ np.asarray(p, dtype=float) + self.position

    def transform_points(self, pts: np.ndarray) -> np.ndarray:
        return np.asarray(pts, dtype=float) @ self.rotation_matrix().T + self.position

    def approx_equal(self, other: "Pose", tol: float = 1e-9) -> bool:
        return (
            float(np.max(np.abs(self.position - other.position))) <= tol
            and quat_angle(self.quaternion, other.quaternion) <= tol
        )

    def to_json(self) -> dict:
        return {
            "position": [float(v) for v in self.position],
            "quaternion": [float(v) for v in self.quaternion],
        }

    @staticmethod
    def from_json(obj: dict) -> "Pose":
        return Pose(obj["position"], obj["quaternion"])


def se3_distance(q1: Pose, q2: Pose, alpha: float) -> float:
    """Translation distance plus alpha times the geodesic rotation angle.

    Zero iff the poses coincide up to quaternion sign; symmetric; a metric
    on the pose set for any alpha >= 0.
    """
    if not math.isfinite(alpha) or alpha < 0.0:
        raise InvalidArgument(f"alpha must be finite and >= 0, got {alpha}")
    dt = float(np.linalg.norm(q1.position - q2.position))
    return dt + alpha * quat_angle(q1.quaternion, q2.quaternion)


@dataclass(frozen=True)
class KeypointTemplate:
    """Exactly eight body-frame keypoints (e.g. cuboid vertices), meters."""

    points: np.ndarray

    def __init__(self, points):
        points = np.asarray(points, dtype=float)
        if points.shape != (8, 3):
            raise InvalidArgument(f"expected 8 keypoints of dim 3, got shape {points.shape}")
        _check_finite(points, "keypoint template")
        points = points.copy()
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    @staticmethod
    def cuboid(size_x: float, size_y: float, size_z: float) -> "KeypointTemplate":
        hx, hy, hz = 0.5 * size_x, 0.5 * size_y, 0.5 * size_z
        pts = [
            (sx * hx, sy * hy, sz * hz)
            for sx in (-1.0, 1.0)
            for sy in (-1.0, 1.0)
            for sz in (-1.0, 1.0)
        ]
        return KeypointTemplate(np.array(pts))


def keypoints_of(pose: Pose, template: KeypointTemplate) -> np.ndarray:
    """World-frame keypoints R @ p + t, order preserved. Shape (8, 3)."""
    return pose.transform_points(template.points)


def wrap_angle(a: float) -> float:
    """Wrap to [0, 2*pi)."""
    return a % TWO_PI


@dataclass(frozen=True)
class Region:
    """SE(2)-constrained stable-pose region.

    Poses in the region have, expressed in `frame`: x/y inside closed
    intervals, z fixed, yaw inside a wrap-aware interval (start, width),
    and (roll, pitch) drawn from a finite admissible set.

    `blocked_below`, when set, declares the solid under the support
    surface: points whose local x/y fall inside `collision_bounds` and
    whose local z is below `blocked_below` are in collision (used by the
    grasp feasibility proxy).
    """

    id: str
    frame: Pose
    x_bounds: tuple[float, float]
    y_bounds: tuple[float, float]
    yaw_start: float
    yaw_width: float
    fixed_z: float
    roll_pitch: tuple[tuple[float, float], ...]
    blocked_below: float | None = None
    collision_bounds: tuple[tuple[float, float], tuple[float, float]] | None = None

    def __post_init__(self):
        if self.x_bounds[0] > self.x_bounds[1] or self.y_bounds[0] > self.y_bounds[1]:
            raise InvalidArgument(f"region {self.id}: interval lower bound > upper bound")
        if not 0.0 <= self.yaw_width <= TWO_PI:
            raise InvalidArgument(f"region {self.id}: yaw width must be in [0, 2*pi]")
        if not self.roll_pitch:
            raise InvalidArgument(f"region {self.id}: empty roll/pitch set")

    def _collision_xy(self):
        return self.collision_bounds or (self.x_bounds, self.y_bounds)

    @property
    def _frame_inverse(self) -> Pose:
        inv = self.__dict__.get("_finv")
        if inv is None:
            inv = self.frame.inverse()
            self.__dict__["_finv"] = inv
        return inv

    @property
    def _rp_quats(self) -> tuple[np.ndarray, ...]:
        quats = self.__dict__.get("_rpq")
        if quats is None:
            quats = tuple(quat_from_rpy(r, p, 0.0) for r, p in self.roll_pitch)
            self.__dict__["_rpq"] = quats
        return quats

    def yaw_contains(self, yaw: float, tol: float) -> bool:
        rel = wrap_angle(yaw - self.yaw_start)
        if rel <= self.yaw_width + tol:
            return True
        # the wrap seam: just below yaw_start counts when within tol
        return TWO_PI - rel <= tol

    def decompose(self, pose: Pose, tol: float):
        """Local (x, y, z, rp_index, yaw) of pose, or None if outside.

        rp_index indexes the admissible (roll, pitch) pair the orientation
        matches; yaw is the residual rotation about local z.
        """
        inv = self._frame_inverse
        p = inv.rotation_matrix() @ pose.position + inv.position
        x, y, z = float(p[0]), float(p[1]), float(p[2])
        if not (
            self.x_bounds[0] - tol <= x <= self.x_bounds[1] + tol
            and self.y_bounds[0] - tol <= y <= self.y_bounds[1] + tol
            and abs(z - self.fixed_z) <= tol
        ):
            return None
        local_quat = quat_mul(inv.quaternion, pose.quaternion)
        for idx, q_rp in enumerate(self._rp_quats):
            # residual should be a pure z rotation: local = Rz(yaw) * q_rp
            resid = quat_mul(local_quat, quat_conj(q_rp))
            yaw = 2.0 * math.atan2(resid[3], resid[0])
            err = quat_mul(quat_conj(quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), yaw)), resid)
            if err[0] < 0:
                err = -err
            if quat_angle_from_identity(err) <= tol and self.yaw_contains(yaw, tol):
                return float(x), float(y), float(z), idx, wrap_angle(yaw - self.yaw_start) % TWO_PI + self.yaw_start
        return None

    def point_blocked(self, p_world: np.ndarray) -> bool:
        """True when a world point collides with the solid under the surface."""
        if self.blocked_below is None:
            return False
        p = self._frame_inverse.transform_point(p_world)
        (xb, yb) = self._collision_xy()
        return (
            xb[0] <= p[0] <= xb[1]
            and yb[0] <= p[1] <= yb[1]
            and p[2] < self.blocked_below
        )


def region_contains(region: Region, pose: Pose, tol: float) -> bool:
    """True iff pose lies in the region within tol (meters and radians)."""
    if tol < 0.0:
        raise InvalidArgument(f"tol must be >= 0, got {tol}")
    return region.decompose(pose, tol) is not None


def sample_pose(region: Region, rng: np.random.Generator) -> Pose:
    """Uniform pose over the region: x, y, yaw uniform over their
    intervals, (roll, pitch) uniform over the admissible finite set."""
    x = rng.uniform(region.x_bounds[0], region.x_bounds[1])
    y = rng.uniform(region.y_bounds[0], region.y_bounds[1])
    yaw = region.yaw_start + rng.uniform(0.0, region.yaw_width)
    roll, pitch = region.roll_pitch[rng.integers(len(region.roll_pitch))]
    local = Pose.from_rpy(np.array([x, y, region.fixed_z]), roll, pitch, yaw)
    return region.frame.compose(local)
