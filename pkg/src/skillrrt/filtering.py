"""Noisy-replay evaluation of skill plans, threshold filtering, and
state-action dataset export.

Replays execute a plan's step sequence open-loop through the simulator
under domain randomization. Dynamics noise (friction/mass scaling, torque)
perturbs the latent rollout; observation noise is applied only to the
recorded observations, never to the latent state, so replay success is
judged on simulator ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domain import (
    Domain,
    EE_KEYPOINT_OFFSETS,
    TIP_DROP,
    State,
    ee_position,
)
from .errors import InvalidArgument
from .geometry import Pose, keypoints_of, quat_from_axis_angle, quat_mul, se3_distance
from .planner import SkillPlan

SCHEMA_VERSION = 1
EXPORT_ATTEMPT_CAP = 50  # multiplier on trajectories_per_plan


@dataclass(frozen=True)
class NoiseConfig:
    """Domain-randomization ranges. Defaults follow the card-flip column:
    Gaussian sigmas for observation noise, multiplicative uniform ranges
    for friction and mass, additive Gaussian torque noise."""

    obj_pos_sigma: float = 0.003
    obj_rot_sigma: float = 0.03
    joint_pos_sigma: float = 0.005
    ee_pos_sigma: float = 0.001
    ee_rot_sigma: float = 0.01
    friction_scale_range: tuple[float, float] = (0.8, 1.2)
    mass_scale_range: tuple[float, float] = (0.8, 1.2)
    torque_sigma: float = 0.03

    def __post_init__(self):
        sigmas = (
            self.obj_pos_sigma,
            self.obj_rot_sigma,
            self.joint_pos_sigma,
            self.ee_pos_sigma,
            self.ee_rot_sigma,
            self.torque_sigma,
        )
        if any(not math.isfinite(s) or s < 0.0 for s in sigmas):
            raise InvalidArgument("noise sigmas must be finite and >= 0")
        for lo, hi in (self.friction_scale_range, self.mass_scale_range):
            if lo > hi:
                raise InvalidArgument("scale range must satisfy lo <= hi")

    @staticmethod
    def zero() -> "NoiseConfig":
        return NoiseConfig(0.0, 0.0, 0.0, 0.0, 0.0, (1.0, 1.0), (1.0, 1.0), 0.0)

    def to_json(self) -> dict:
        return {
            "obj_pos_sigma": self.obj_pos_sigma,
            "obj_rot_sigma": self.obj_rot_sigma,
            "joint_pos_sigma": self.joint_pos_sigma,
            "ee_pos_sigma": self.ee_pos_sigma,
            "ee_rot_sigma": self.ee_rot_sigma,
            "friction_scale_range": list(self.friction_scale_range),
            "mass_scale_range": list(self.mass_scale_range),
            "torque_sigma": self.torque_sigma,
        }

    @staticmethod
    def from_json(obj: dict) -> "NoiseConfig":
        kwargs = dict(obj)
        for key in ("friction_scale_range", "mass_scale_range"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return NoiseConfig(**kwargs)


@dataclass(frozen=True)
class ReplayOutcome:
    replay_index: int
    success: bool
    final_q_obj: Pose

    def to_json(self) -> dict:
        return {
            "replay_index": self.replay_index,
            "success": self.success,
            "final_q_obj": self.final_q_obj.to_json(),
        }


@dataclass(frozen=True)
class ReplayReport:
    plan_id: str
    n_replays: int
    n_success: int
    seed: int
    outcomes: tuple[ReplayOutcome, ...]

    @property
    def success_rate(self) -> float:
        return self.n_success / self.n_replays

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "plan_id": self.plan_id,
            "n_replays": self.n_replays,
            "n_success": self.n_success,
            "success_rate": self.success_rate,
            "seed": self.seed,
            "outcomes": [o.to_json() for o in self.outcomes],
        }


def execute_plan(
    plan: SkillPlan, domain: Domain, noise: NoiseConfig | None, rng: np.random.Generator
) -> list[State]:
    """Open-loop execution of the plan's steps. Returns the latent state
    after every step (index 0 is the initial state)."""
    state = plan.initial_state
    states = [state]
    for step in plan.steps:
        if step.policy_tag is None:  # lazy-mode teleport
            state = state.teleported(np.asarray(step.goal, dtype=float))
        else:
            state = domain.simulate(state, step.policy_tag, step.goal, noise=noise, rng=rng)
        states.append(state)
    return states


def plan_succeeded(plan: SkillPlan, final: State) -> bool:
    d = se3_distance(final.q_obj, plan.goal_pose, plan.params.alpha)
    return d < plan.params.delta_goal


def replay_plan(
    plan: SkillPlan,
    domain: Domain,
    noise: NoiseConfig,
    n: int,
    seed: int,
    plan_id: str = "plan",
) -> ReplayReport:
    """Replay the plan n times under independent seeded streams; success
    per replay is the final task-space distance to the goal pose being
    strictly under delta_goal."""
    if n < 1:
        raise InvalidArgument("n must be >= 1")
    streams = np.random.SeedSequence(seed).spawn(n)
    outcomes = []
    n_success = 0
    for i in range(n):
        rng = np.random.default_rng(streams[i])
        final = execute_plan(plan, domain, noise, rng)[-1]
        ok = plan_succeeded(plan, final)
        n_success += ok
        outcomes.append(ReplayOutcome(i, bool(ok), final.q_obj))
    return ReplayReport(plan_id, n, n_success, seed, tuple(outcomes))


def filter_plans(reports: list[ReplayReport], m: float) -> list[str]:
    """Plan ids whose replay success rate strictly exceeds m, order-stable."""
    if not 0.0 <= m <= 1.0:
        raise InvalidArgument(f"m must be in [0, 1], got {m}")
    return [r.plan_id for r in reports if r.success_rate > m]


# -- dataset export ---------------------------------------------------------


def _perturb_quat(quat: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    angle = rng.normal(0.0, 1.0) * sigma
    axis = rng.normal(0.0, 1.0, 3)
    if angle == 0.0 or float(np.linalg.norm(axis)) < 1e-12:
        return quat
    return quat_mul(quat_from_axis_angle(axis, angle), quat)


def observe(
    state: State, domain: Domain, noise: NoiseConfig | None, rng: np.random.Generator
):
    """Observation snapshot: (q_obj_obs, q_r_obs, ee_kp, tips), with the
    configured perception noise applied. The relative keypoints a policy
    would see are derived downstream from these observed quantities."""
    if noise is None:
        noise = NoiseConfig.zero()
    q_obj_obs = Pose(
        state.q_obj.position + rng.normal(0.0, 1.0, 3) * noise.obj_pos_sigma,
        _perturb_quat(state.q_obj.quaternion, noise.obj_rot_sigma, rng),
    )
    q_r_obs = state.q_r + rng.normal(0.0, 1.0, 9) * noise.joint_pos_sigma
    ee_center = ee_position(state.q_r) + rng.normal(0.0, 1.0, 3) * noise.ee_pos_sigma
    ee_quat = _perturb_quat(np.array([1.0, 0.0, 0.0, 0.0]), noise.ee_rot_sigma, rng)
    ee_frame = Pose(ee_center, ee_quat)
    ee_kp = ee_frame.transform_points(EE_KEYPOINT_OFFSETS)
    half = 0.5 * state.gripper_width
    tips = ee_frame.transform_points(
        np.array([[0.0, half, -TIP_DROP], [0.0, -half, -TIP_DROP]])
    )
    return q_obj_obs, q_r_obs, ee_kp, tips


@dataclass(frozen=True)
class DatasetRecord:
    """One imitation-learning (state, action) sample: the observation
    before a plan step, and that step as the action."""

    plan_id: str
    trajectory: int
    step: int
    q_r: np.ndarray
    q_r_prev: np.ndarray
    q_obj: Pose
    ee_keypoints: np.ndarray  # (8, 3) absolute
    ee_keypoints_rel: np.ndarray  # (8, 3) in observed object frame
    tip_positions: np.ndarray  # (2, 3) absolute
    tip_positions_rel: np.ndarray  # (2, 3)
    obj_keypoints: np.ndarray  # (8, 3)
    goal_keypoints: np.ndarray  # (8, 3)
    gripper_width: float
    action_tag: str | None
    action_goal: object

    def to_json(self) -> dict:
        from .planner import PlanStep

        return {
            "schema_version": SCHEMA_VERSION,
            "plan_id": self.plan_id,
            "trajectory": self.trajectory,
            "step": self.step,
            "q_r": [float(v) for v in self.q_r],
            "q_r_prev": [float(v) for v in self.q_r_prev],
            "q_obj": self.q_obj.to_json(),
            "ee_keypoints": self.ee_keypoints.tolist(),
            "ee_keypoints_rel": self.ee_keypoints_rel.tolist(),
            "tip_positions": self.tip_positions.tolist(),
            "tip_positions_rel": self.tip_positions_rel.tolist(),
            "obj_keypoints": self.obj_keypoints.tolist(),
            "goal_keypoints": self.goal_keypoints.tolist(),
            "gripper_width": self.gripper_width,
            "action": PlanStep(self.action_tag, self.action_goal).to_json(),
        }


@dataclass
class PlanExportSummary:
    plan_id: str
    n_steps: int
    trajectories: int
    shortfall: int
    attempts: int


@dataclass
class ExportResult:
    records: list[DatasetRecord] = field(default_factory=list)
    summaries: list[PlanExportSummary] = field(default_factory=list)

    @property
    def total_shortfall(self) -> int:
        return sum(s.shortfall for s in self.summaries)


def _record_trajectory(
    plan: SkillPlan,
    plan_id: str,
    traj_index: int,
    domain: Domain,
    noise: NoiseConfig,
    rng: np.random.Generator,
):
    """One noisy rollout; returns (records, success flag)."""
    goal_kp = keypoints_of(plan.goal_pose, domain.keypoint_template)
    state = plan.initial_state
    prev_q_r_obs = None
    records = []
    for step_index, step in enumerate(plan.steps):
        q_obj_obs, q_r_obs, ee_kp, tips = observe(state, domain, noise, rng)
        if prev_q_r_obs is None:
            prev_q_r_obs = q_r_obs
        inv = q_obj_obs.inverse()
        records.append(
            DatasetRecord(
                plan_id,
                traj_index,
                step_index,
                q_r_obs,
                prev_q_r_obs,
                q_obj_obs,
                ee_kp,
                inv.transform_points(ee_kp),
                tips,
                inv.transform_points(tips),
                keypoints_of(q_obj_obs, domain.keypoint_template),
                goal_kp,
                state.gripper_width,
                step.policy_tag,
                step.goal,
            )
        )
        prev_q_r_obs = q_r_obs
        if step.policy_tag is None:
            state = state.teleported(np.asarray(step.goal, dtype=float))
        else:
            state = domain.simulate(state, step.policy_tag, step.goal, noise=noise, rng=rng)
    return records, plan_succeeded(plan, state)


def export_dataset(
    plans: list[tuple[str, SkillPlan]],
    domain: Domain,
    noise: NoiseConfig,
    trajectories_per_plan: int,
    seed: int,
) -> ExportResult:
    """Replay each kept plan under noise until trajectories_per_plan
    successful trajectories are recorded (attempt cap 50x, shortfall
    reported, never padded). One record per plan step per trajectory."""
    if trajectories_per_plan < 1:
        raise InvalidArgument("trajectories_per_plan must be >= 1")
    result = ExportResult()
    for plan_index, (plan_id, plan) in enumerate(plans):
        streams = np.random.SeedSequence((seed, plan_index)).spawn(
            EXPORT_ATTEMPT_CAP * trajectories_per_plan
        )
        kept = 0
        attempts = 0
        for stream in streams:
            if kept >= trajectories_per_plan:
                break
            attempts += 1
            rng = np.random.default_rng(stream)
            records, ok = _record_trajectory(plan, plan_id, kept, domain, noise, rng)
            if ok:
                result.records.extend(records)
                kept += 1
        result.summaries.append(
            PlanExportSummary(
                plan_id, len(plan.steps), kept, trajectories_per_plan - kept, attempts
            )
        )
    return result
