"""World state, the abstract simulator, skill definitions, and the grasp
model.

Skills are scripted stochastic kinematic maps: an applicability checker
(region membership plus locked axes) and a post-contact outcome that
reaches the desired object pose with probability (1 - failure_prob),
perturbed by success noise. The applicability checker is deliberately
weaker than success; success is decided inside `simulate`.

Kinematics are a fixed linear proxy from the 7 arm joints to end-effector
position, which makes reachability and grasp feasibility analytic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, InvalidArgument, NoPreContactError
from .geometry import (
    KeypointTemplate,
    Pose,
    Region,
    quat_from_axis_angle,
    keypoints_of,
)

NP_KIND = "non-prehensile"
P_KIND = "prehensile"

# Linear end-effector map: ee position = EE_MAP @ q_r[:7].
EE_MAP = np.array(
    [
        [1.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0, 0.5, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0, 0.0, 0.5, 0.0],
    ]
)
_EE_PINV = np.linalg.pinv(EE_MAP)

# Body-frame offsets of the eight end-effector keypoints and the tip drop.
EE_KEYPOINT_OFFSETS = KeypointTemplate.cuboid(0.04, 0.04, 0.04).points
TIP_DROP = 0.03


def ee_position(q_r: np.ndarray) -> np.ndarray:
    return EE_MAP @ np.asarray(q_r, dtype=float)[:7]


def arm_for_ee_position(p: np.ndarray) -> np.ndarray:
    """Minimal-norm arm configuration whose proxy FK reaches p exactly."""
    return _EE_PINV @ np.asarray(p, dtype=float)


def ee_keypoints(q_r: np.ndarray) -> np.ndarray:
    return EE_KEYPOINT_OFFSETS + ee_position(q_r)


def gripper_width_of(q_r: np.ndarray) -> float:
    return float(q_r[7] + q_r[8])


def tip_positions(q_r: np.ndarray) -> np.ndarray:
    p = ee_position(q_r)
    half = 0.5 * gripper_width_of(q_r)
    return np.array(
        [
            [p[0], p[1] + half, p[2] - TIP_DROP],
            [p[0], p[1] - half, p[2] - TIP_DROP],
        ]
    )


@dataclass(frozen=True)
class State:
    """Full world state. Velocities are zeroed by every simulated outcome."""

    q_obj: Pose
    dq_obj: np.ndarray
    q_r: np.ndarray
    dq_r: np.ndarray
    gripper_width: float

    def __init__(self, q_obj, dq_obj, q_r, dq_r, gripper_width):
        dq_obj = np.asarray(dq_obj, dtype=float).reshape(6).copy()
        q_r = np.asarray(q_r, dtype=float).reshape(9).copy()
        dq_r = np.asarray(dq_r, dtype=float).reshape(9).copy()
        for arr, what in ((dq_obj, "dq_obj"), (q_r, "q_r"), (dq_r, "dq_r")):
            if not np.all(np.isfinite(arr)):
                raise InvalidArgument(f"non-finite {what}")
            arr.setflags(write=False)
        if not math.isfinite(gripper_width) or gripper_width < 0.0:
            raise InvalidArgument(f"bad gripper width {gripper_width}")
        object.__setattr__(self, "q_obj", q_obj)
        object.__setattr__(self, "dq_obj", dq_obj)
        object.__setattr__(self, "q_r", q_r)
        object.__setattr__(self, "dq_r", dq_r)
        object.__setattr__(self, "gripper_width", float(gripper_width))

    @staticmethod
    def stationary(q_obj: Pose, q_r: np.ndarray) -> "State":
        q_r = np.asarray(q_r, dtype=float)
        return State(q_obj, np.zeros(6), q_r, np.zeros(9), gripper_width_of(q_r))

    def with_object(self, q_obj: Pose) -> "State":
        return State(q_obj, np.zeros(6), self.q_r, np.zeros(9), self.gripper_width)

    def with_robot(self, q_r: np.ndarray) -> "State":
        return State(self.q_obj, np.zeros(6), q_r, np.zeros(9), gripper_width_of(q_r))

    def teleported(self, q_r: np.ndarray) -> "State":
        """Robot configuration overwritten; every other field preserved
        bit-identically (the lazy-mode teleport contract)."""
        return State(self.q_obj, self.dq_obj, q_r, self.dq_r, self.gripper_width)

    def at_rest(self) -> "State":
        return State(self.q_obj, np.zeros(6), self.q_r, np.zeros(9), self.gripper_width)

    def to_json(self) -> dict:
        return {
            "q_obj": self.q_obj.to_json(),
            "dq_obj": [float(v) for v in self.dq_obj],
            "q_r": [float(v) for v in self.q_r],
            "dq_r": [float(v) for v in self.dq_r],
            "gripper_width": self.gripper_width,
        }

    @staticmethod
    def from_json(obj: dict) -> "State":
        return State(
            Pose.from_json(obj["q_obj"]),
            obj["dq_obj"],
            obj["q_r"],
            obj["dq_r"],
            obj["gripper_width"],
        )


@dataclass(frozen=True)
class SkillSpec:
    """Parametric scripted skill: applicability regions, locked axes, and
    a stochastic outcome model."""

    id: str
    kind: str
    region_ids: tuple[str, ...]
    locked_axes: tuple[str, ...] = ()
    success_pos_noise: float = 0.002
    success_rot_noise: float = 0.02
    failure_prob: float = 0.05
    n_sim: int = 100
    approach_offset: tuple[float, float, float] = (0.0, 0.0, 0.02)

    def __post_init__(self):
        if self.kind not in (NP_KIND, P_KIND):
            raise ConfigError(f"skill {self.id}: unknown kind {self.kind!r}")
        if not self.region_ids:
            raise ConfigError(f"skill {self.id}: empty region set")
        if not 0.0 <= self.failure_prob <= 1.0:
            raise ConfigError(f"skill {self.id}: failure_prob outside [0, 1]")
        if self.n_sim < 1:
            raise ConfigError(f"skill {self.id}: n_sim must be >= 1")


@dataclass(frozen=True)
class GraspModel:
    """Predefined grasp poses in the object frame plus an analytic IK
    proxy: a reachability ball and the regions' blocked solids."""

    grasp_templates: tuple[Pose, ...]
    reach_center: tuple[float, float, float]
    reach_radius: float
    grasp_width: float = 0.01

    def __post_init__(self):
        if self.reach_radius <= 0.0:
            raise ConfigError("grasp model: reach_radius must be > 0")
        if not self.grasp_templates:
            raise ConfigError("grasp model: at least one grasp template required")


@dataclass(frozen=True)
class ConnectorModel:
    """Scripted connector parameters: joint interpolation resolution and
    the object disturbance model k * max(0, 1 - d/r) distributed over the
    interpolation steps."""

    disturbance_gain: float = 0.05
    disturbance_radius: float = 0.05
    resolution: int = 10


@dataclass(frozen=True)
class Domain:
    name: str
    regions: tuple[Region, ...]
    skills: tuple[SkillSpec, ...]
    connector_skill_map: dict
    grasp_model: GraspModel
    keypoint_template: KeypointTemplate
    joint_limits: np.ndarray = field(
        default_factory=lambda: np.array([[-3.0, 3.0]] * 7 + [[0.0, 0.02]] * 2)
    )
    connector: ConnectorModel = ConnectorModel()
    # Applicability tolerance: wide enough to absorb skill success noise,
    # far tighter than a knocked-over object's orientation error.
    tol: float = 0.05
    torque_pos_gain: float = 0.01
    torque_rot_gain: float = 0.1
    open_width: float = 0.02

    def __post_init__(self):
        region_ids = {r.id for r in self.regions}
        for skill in self.skills:
            missing = set(skill.region_ids) - region_ids
            if missing:
                raise ConfigError(f"skill {skill.id}: unknown regions {sorted(missing)}")
            if skill.id not in self.connector_skill_map:
                raise ConfigError(f"skill {skill.id}: no connector mapping")
        n_p = sum(1 for s in self.skills if s.kind == P_KIND)
        if n_p != 1:
            raise ConfigError(f"domain {self.name}: expected exactly 1 prehensile skill, got {n_p}")

    # -- lookups ----------------------------------------------------------

    def skill(self, skill_id: str) -> SkillSpec:
        for s in self.skills:
            if s.id == skill_id:
                return s
        raise ConfigError(f"unknown skill {skill_id!r} in domain {self.name}")

    def region(self, region_id: str) -> Region:
        for r in self.regions:
            if r.id == region_id:
                return r
        raise ConfigError(f"unknown region {region_id!r} in domain {self.name}")

    @property
    def connector_ids(self) -> frozenset:
        return frozenset(self.connector_skill_map.values())

    def connector_for_skill(self, skill_id: str) -> str:
        try:
            return self.connector_skill_map[skill_id]
        except KeyError:
            raise ConfigError(f"no connector registered for skill {skill_id!r}") from None

    def locate(self, pose: Pose, region_ids=None):
        """(region, decomposition) of the first region containing pose."""
        regions = self.regions if region_ids is None else [self.region(i) for i in region_ids]
        for region in regions:
            dec = region.decompose(pose, self.tol)
            if dec is not None:
                return region, dec
        return None

    def in_object_regions(self, pose: Pose) -> bool:
        return self.locate(pose) is not None

    def within_joint_limits(self, q_r: np.ndarray) -> bool:
        q_r = np.asarray(q_r, dtype=float)
        return bool(
            np.all(q_r >= self.joint_limits[:, 0] - 1e-12)
            and np.all(q_r <= self.joint_limits[:, 1] + 1e-12)
        )

    # -- applicability checkers -------------------------------------------

    def phi_np(self, skill: SkillSpec, state: State, q_target: Pose) -> bool:
        """Non-prehensile applicability: both poses in the same declared
        region and every locked axis matching. Never checks success."""
        if skill.kind != NP_KIND:
            raise InvalidArgument(f"phi_np called with {skill.kind} skill {skill.id}")
        cur = self.locate(state.q_obj, skill.region_ids)
        tgt = self.locate(q_target, skill.region_ids)
        if cur is None or tgt is None or cur[0].id != tgt[0].id:
            return False
        return self._locked_axes_match(skill, cur[1], tgt[1])

    def _locked_axes_match(self, skill: SkillSpec, dec_a, dec_b) -> bool:
        xa, ya, za, rpa, yawa = dec_a
        xb, yb, zb, rpb, yawb = dec_b
        for axis in skill.locked_axes:
            if axis in ("roll", "pitch"):
                if rpa != rpb:
                    return False
            elif axis == "yaw":
                d = abs(yawa - yawb) % (2.0 * math.pi)
                if min(d, 2.0 * math.pi - d) > self.tol:
                    return False
            elif axis == "x":
                if abs(xa - xb) > self.tol:
                    return False
            elif axis == "y":
                if abs(ya - yb) > self.tol:
                    return False
            elif axis == "z":
                if abs(za - zb) > self.tol:
                    return False
            else:
                raise ConfigError(f"skill {skill.id}: unknown locked axis {axis!r}")
        return True

    @property
    def _grasp_offsets(self) -> np.ndarray:
        offsets = self.__dict__.get("_grasp_off")
        if offsets is None:
            offsets = np.array([t.position for t in self.grasp_model.grasp_templates])
            offsets.setflags(write=False)
            self.__dict__["_grasp_off"] = offsets
        return offsets

    def feasible_grasps(self, q: Pose) -> frozenset:
        """Indices of grasp templates whose world pose is inside the reach
        ball and clear of every region's blocked solid."""
        gm = self.grasp_model
        center = np.asarray(gm.reach_center, dtype=float)
        pts = q.transform_points(self._grasp_offsets)
        ok = np.linalg.norm(pts - center, axis=1) <= gm.reach_radius
        for region in self.regions:
            if region.blocked_below is None or not ok.any():
                continue
            local = region._frame_inverse.transform_points(pts)
            (xb, yb) = region._collision_xy()
            blocked = (
                (local[:, 0] >= xb[0])
                & (local[:, 0] <= xb[1])
                & (local[:, 1] >= yb[0])
                & (local[:, 1] <= yb[1])
                & (local[:, 2] < region.blocked_below)
            )
            ok &= ~blocked
        return frozenset(int(i) for i in np.flatnonzero(ok))

    def phi_p(self, state: State, q_target: Pose) -> bool:
        """Prehensile applicability: both poses in the object regions and
        a common feasible grasp exists."""
        if not (self.in_object_regions(state.q_obj) and self.in_object_regions(q_target)):
            return False
        return bool(self.feasible_grasps(state.q_obj) & self.feasible_grasps(q_target))

    # -- pre-contact ------------------------------------------------------

    def pre_contact_config(
        self, skill: SkillSpec, q_obj: Pose, q_target: Pose, rng: np.random.Generator
    ) -> np.ndarray:
        """Robot configuration from which the skill's manipulation phase
        starts: the canonical approach offset for NP skills, a uniformly
        chosen common grasp for the prehensile skill."""
        if skill.kind == NP_KIND:
            p = q_obj.transform_point(np.asarray(skill.approach_offset))
            width = self.open_width
        else:
            common = sorted(self.feasible_grasps(q_obj) & self.feasible_grasps(q_target))
            if not common:
                raise NoPreContactError(
                    f"skill {skill.id}: no common feasible grasp between poses"
                )
            grasp = self.grasp_model.grasp_templates[common[rng.integers(len(common))]]
            p = q_obj.compose(grasp).position
            width = self.grasp_model.grasp_width
        q_r = np.zeros(9)
        q_r[:7] = arm_for_ee_position(p)
        q_r[7] = q_r[8] = 0.5 * width
        return q_r

    # -- simulator --------------------------------------------------------

    def connector_rollout(self, state: State, goal_config: np.ndarray, model=None) -> list:
        """Joint-space interpolation to goal_config with the per-step
        object disturbance model. Deterministic; returns the state at
        every interpolation step (length 1 when the path is empty)."""
        goal_config = np.asarray(goal_config, dtype=float).reshape(9)
        model = model or self.connector
        steps = model.resolution
        k = model.disturbance_gain
        r = model.disturbance_radius
        traj = [state.at_rest()]
        if np.array_equal(goal_config, state.q_r):
            return traj
        q_obj = state.q_obj
        for i in range(1, steps + 1):
            q_r = state.q_r + (goal_config - state.q_r) * (i / steps)
            ee = ee_position(q_r)
            d = float(np.linalg.norm(ee - q_obj.position))
            mag = (k / steps) * max(0.0, 1.0 - d / r)
            if mag > 0.0:
                away = q_obj.position - ee
                n = float(np.linalg.norm(away))
                direction = away / n if n > 1e-12 else np.array([0.0, 0.0, 1.0])
                q_obj = Pose(q_obj.position + mag * direction, q_obj.quaternion)
            traj.append(State.stationary(q_obj, q_r))
        return traj

    def _perturbed_pose(
        self, goal: Pose, pos_sigma: float, rot_sigma: float, rng: np.random.Generator
    ) -> Pose:
        pos = goal.position + rng.normal(0.0, 1.0, 3) * pos_sigma
        angle = rng.normal(0.0, 1.0) * rot_sigma
        axis = rng.normal(0.0, 1.0, 3)
        if angle == 0.0 or float(np.linalg.norm(axis)) < 1e-12:
            return Pose(pos, goal.quaternion)
        dq = quat_from_axis_angle(axis, angle)
        return Pose(pos, Pose(np.zeros(3), dq).compose(Pose(np.zeros(3), goal.quaternion)).quaternion)

    def _knocked_over(self, base: Pose, rng: np.random.Generator) -> Pose:
        """Object disturbed off its stable pose: a 0.2-0.5 rad tip about a
        horizontal axis, which no region's admissible roll/pitch absorbs."""
        angle = rng.uniform(0.2, 0.5) * (1.0 if rng.random() < 0.5 else -1.0)
        axis = np.array([math.cos(rng.uniform(0, 2 * math.pi)), math.sin(rng.uniform(0, 2 * math.pi)), 0.0])
        dq = quat_from_axis_angle(axis, angle)
        quat = Pose(np.zeros(3), dq).compose(Pose(np.zeros(3), base.quaternion)).quaternion
        return Pose(base.position + rng.normal(0.0, 0.005, 3), quat)

    def _noise_modulation(self, skill: SkillSpec, noise, rng: np.random.Generator):
        fp = skill.failure_prob
        pos_sig = skill.success_pos_noise
        rot_sig = skill.success_rot_noise
        if noise is not None:
            friction = rng.uniform(*noise.friction_scale_range)
            mass = rng.uniform(*noise.mass_scale_range)
            fp = min(1.0, max(0.0, fp * friction * mass))
            pos_sig += noise.torque_sigma * self.torque_pos_gain
            rot_sig += noise.torque_sigma * self.torque_rot_gain
        return fp, pos_sig, rot_sig

    def simulate(
        self,
        state: State,
        policy_tag: str,
        goal,
        noise=None,
        rng: np.random.Generator | None = None,
    ) -> State:
        """Scripted kinematic outcome of one policy invocation.

        policy_tag is a skill id (goal: desired object Pose) or a
        connector id (goal: desired robot configuration). Velocities are
        zeroed in the returned state. Domain-randomization `noise`
        modulates the dynamics (friction/mass scale failure_prob, torque
        widens success noise); observation noise is applied separately by
        the dataset recorder, never to the latent state returned here.
        """
        if rng is None:
            raise InvalidArgument("simulate requires an explicit rng")
        if policy_tag in self.connector_ids:
            return self.connector_rollout(state, goal)[-1]
        skill = self.skill(policy_tag)
        fp, pos_sig, rot_sig = self._noise_modulation(skill, noise, rng)
        if skill.kind == NP_KIND:
            if not self.phi_np(skill, state, goal):
                return state.at_rest()
            if rng.random() < fp:
                u = rng.uniform(0.2, 0.8)
                partway = Pose(
                    state.q_obj.position + u * (goal.position - state.q_obj.position),
                    state.q_obj.quaternion,
                )
                return state.with_object(self._knocked_over(partway, rng))
            q_obj = self._perturbed_pose(goal, pos_sig, rot_sig, rng)
            q_r = state.q_r.copy()
            q_r[:7] = arm_for_ee_position(q_obj.transform_point(np.asarray(skill.approach_offset)))
            return State.stationary(q_obj, q_r)
        # prehensile: object rigidly follows the end-effector to the goal grasp
        if not self.phi_p(state, goal):
            return state.at_rest()
        if rng.random() < fp:
            u = rng.uniform(0.2, 0.8)
            drop = Pose(
                state.q_obj.position + u * (goal.position - state.q_obj.position),
                state.q_obj.quaternion,
            )
            return state.with_object(self._knocked_over(drop, rng))
        q_obj = self._perturbed_pose(goal, pos_sig, rot_sig, rng)
        rel = ee_position(state.q_r) - state.q_obj.position
        rel_goal = q_obj.rotation_matrix() @ (state.q_obj.rotation_matrix().T @ rel)
        q_r = state.q_r.copy()
        q_r[:7] = arm_for_ee_position(q_obj.position + rel_goal)
        return State.stationary(q_obj, q_r)
