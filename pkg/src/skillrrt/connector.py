"""Connector-problem mining, the scripted connector, and pure reward
evaluators for connector / non-prehensile / prehensile invocations.

The reward evaluators reproduce the potential-shaped formulas used to
train the original policies and exist for fidelity checks and dataset
scoring; no learning loop consumes them here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domain import (
    ConnectorModel,
    Domain,
    State,
    ee_keypoints,
    gripper_width_of,
    tip_positions,
)
from .errors import InvalidArgument
from .geometry import Pose, keypoints_of, quat_angle, se3_distance
from .planner import PlannerParams, retrace, run_skill_rrt


@dataclass(frozen=True)
class ConnectorProblem:
    """A (parent state, target robot configuration, skill) triplet mined
    from a lazy-mode teleport."""

    start_state: State
    target_robot_config: np.ndarray
    skill_id: str

    def to_json(self) -> dict:
        return {
            "start_state": self.start_state.to_json(),
            "target_robot_config": [float(v) for v in self.target_robot_config],
            "skill_id": self.skill_id,
        }

    @staticmethod
    def from_json(obj: dict) -> "ConnectorProblem":
        return ConnectorProblem(
            State.from_json(obj["start_state"]),
            np.asarray(obj["target_robot_config"], dtype=float),
            obj["skill_id"],
        )


class ConnectorSet:
    """Scripted connector parameters per skill. Must cover every skill of
    the domain it is paired with."""

    def __init__(self, models: dict[str, ConnectorModel]):
        self._models = dict(models)

    @staticmethod
    def default_for(domain: Domain) -> "ConnectorSet":
        return ConnectorSet({s.id: domain.connector for s in domain.skills})

    def for_skill(self, skill_id: str) -> ConnectorModel:
        return self._models[skill_id]

    def covers(self, domain: Domain) -> bool:
        return all(s.id in self._models for s in domain.skills)

    def __bool__(self) -> bool:
        return bool(self._models)


@dataclass(frozen=True)
class RewardParams:
    """Reward hyperparameters. Defaults are the card-flip column of the
    published tables; w_move is stored as a magnitude and negated once
    inside the movement penalty."""

    # connector
    eps_ee_0: float = 40.0
    eps_ee_1: float = 0.9
    eps_tip_0: float = 40.0
    eps_tip_1: float = 1.0
    w_move: float = 0.3
    r_succ: float = 1000.0
    delta_ee: float = 0.01
    delta_tip: float = 0.003
    # non-prehensile
    eps_obj_0: float = 0.02
    eps_obj_1: float = 0.02
    eps_tipobj_0: float = 0.0
    eps_tipobj_1: float = 0.0
    # prehensile
    eps_rot_0: float = 0.0
    eps_rot_1: float = 0.0
    w_grasp: float = 0.0
    delta_obj: float = 0.005
    alpha: float = 0.1

    def __post_init__(self):
        vals = [getattr(self, f.name) for f in self.__dataclass_fields__.values()]
        if not all(math.isfinite(v) for v in vals):
            raise InvalidArgument("reward params must be finite")


def _check_states(*states: State) -> None:
    for s in states:
        if not (np.all(np.isfinite(s.q_r)) and np.all(np.isfinite(s.q_obj.position))):
            raise InvalidArgument("non-finite state")


def _rational_potential(eps0: float, eps1: float, dist: float) -> float:
    # a zero eps pair disables the term (e.g. the slide skill's tip reward)
    if eps0 == 0.0:
        return 0.0
    return eps0 / (dist + eps1)


def _obj_keypoints(domain: Domain, q_obj: Pose) -> np.ndarray:
    return keypoints_of(q_obj, domain.keypoint_template)


def connector_reward(
    prev: State,
    curr: State,
    goal_config: np.ndarray,
    params: RewardParams,
    domain: Domain,
) -> tuple[float, float, float, float, float]:
    """(r_ee, r_tip, r_obj_move, r_success, total) for one connector step.

    r_ee and r_tip are exponential potential differences toward the goal
    keypoints, r_obj_move penalizes any object keypoint motion, and the
    success bonus fires only when end-effector and tip errors are both
    under their thresholds (and the gripper width matches the target).
    """
    _check_states(prev, curr)
    goal_config = np.asarray(goal_config, dtype=float).reshape(9)
    if not np.all(np.isfinite(goal_config)):
        raise InvalidArgument("non-finite goal configuration")

    ee_g = ee_keypoints(goal_config).ravel()
    tip_g = tip_positions(goal_config).ravel()
    ee_t = ee_keypoints(curr.q_r).ravel()
    ee_p = ee_keypoints(prev.q_r).ravel()
    tip_t = tip_positions(curr.q_r).ravel()
    tip_p = tip_positions(prev.q_r).ravel()

    ee_err_t = float(np.linalg.norm(ee_t - ee_g))
    ee_err_p = float(np.linalg.norm(ee_p - ee_g))
    tip_err_t = float(np.linalg.norm(tip_t - tip_g))
    tip_err_p = float(np.linalg.norm(tip_p - tip_g))

    r_ee = params.eps_ee_0 * (
        math.exp(-params.eps_ee_1 * ee_err_t) - math.exp(-params.eps_ee_1 * ee_err_p)
    )
    r_tip = params.eps_tip_0 * (
        math.exp(-params.eps_tip_1 * tip_err_t) - math.exp(-params.eps_tip_1 * tip_err_p)
    )
    obj_move = float(np.linalg.norm(curr.q_obj.position - prev.q_obj.position))
    r_obj_move = -abs(params.w_move) * obj_move
    width_ok = abs(curr.gripper_width - gripper_width_of(goal_config)) < 1e-6
    success = ee_err_t < params.delta_ee and tip_err_t < params.delta_tip and width_ok
    r_success = params.r_succ if success else 0.0
    total = r_ee + r_tip + r_obj_move + r_success
    return r_ee, r_tip, r_obj_move, r_success, total


def np_reward(
    prev: State,
    curr: State,
    q_target: Pose,
    params: RewardParams,
    domain: Domain,
) -> tuple[float, float, float, float]:
    """(r_obj, r_tip_contact, r_success, total) for a non-prehensile step."""
    _check_states(prev, curr)
    goal_kp = _obj_keypoints(domain, q_target).ravel()
    d_t = float(np.linalg.norm(_obj_keypoints(domain, curr.q_obj).ravel() - goal_kp))
    d_p = float(np.linalg.norm(_obj_keypoints(domain, prev.q_obj).ravel() - goal_kp))
    r_obj = _rational_potential(params.eps_obj_0, params.eps_obj_1, d_t) - _rational_potential(
        params.eps_obj_0, params.eps_obj_1, d_p
    )
    tip_d_t = float(np.linalg.norm(tip_positions(curr.q_r).ravel() - np.tile(curr.q_obj.position, 2)))
    tip_d_p = float(np.linalg.norm(tip_positions(prev.q_r).ravel() - np.tile(prev.q_obj.position, 2)))
    r_tip = _rational_potential(params.eps_tipobj_0, params.eps_tipobj_1, tip_d_t) - _rational_potential(
        params.eps_tipobj_0, params.eps_tipobj_1, tip_d_p
    )
    success = se3_distance(curr.q_obj, q_target, params.alpha) < params.delta_obj
    r_success = params.r_succ if success else 0.0
    return r_obj, r_tip, r_success, r_obj + r_tip + r_success


def relative_ee_keypoints(q_r: np.ndarray, q_obj: Pose) -> np.ndarray:
    """End-effector keypoints expressed in the object frame."""
    return q_obj.inverse().transform_points(ee_keypoints(q_r))


def p_reward(
    prev: State,
    curr: State,
    q_target: Pose,
    params: RewardParams,
    domain: Domain,
) -> tuple[float, float, float, float, float]:
    """(r_obj, r_rot, r_grasp, r_success, total) for a prehensile step.

    r_grasp penalizes relative end-effector motion in the object frame,
    which a rigid grasp keeps at exactly zero.
    """
    _check_states(prev, curr)
    goal_kp = _obj_keypoints(domain, q_target).ravel()
    d_t = float(np.linalg.norm(_obj_keypoints(domain, curr.q_obj).ravel() - goal_kp))
    d_p = float(np.linalg.norm(_obj_keypoints(domain, prev.q_obj).ravel() - goal_kp))
    r_obj = _rational_potential(params.eps_obj_0, params.eps_obj_1, d_t) - _rational_potential(
        params.eps_obj_0, params.eps_obj_1, d_p
    )
    rot_t = quat_angle(curr.q_obj.quaternion, q_target.quaternion)
    rot_p = quat_angle(prev.q_obj.quaternion, q_target.quaternion)
    r_rot = _rational_potential(params.eps_rot_0, params.eps_rot_1, rot_t) - _rational_potential(
        params.eps_rot_0, params.eps_rot_1, rot_p
    )
    rel_t = relative_ee_keypoints(curr.q_r, curr.q_obj).ravel()
    rel_p = relative_ee_keypoints(prev.q_r, prev.q_obj).ravel()
    r_grasp = -abs(params.w_grasp) * float(np.linalg.norm(rel_t - rel_p))
    success = se3_distance(curr.q_obj, q_target, params.alpha) < params.delta_obj
    r_success = params.r_succ if success else 0.0
    return r_obj, r_rot, r_grasp, r_success, r_obj + r_rot + r_grasp + r_success


def scripted_connector(
    domain: Domain,
    state: State,
    goal_config: np.ndarray,
    conn_params: ConnectorModel | None = None,
    rng: np.random.Generator | None = None,
) -> list[State]:
    """Joint-space interpolation to goal_config at the configured
    resolution, applying the domain disturbance model per step. The rng is
    accepted for interface symmetry; the rollout itself is deterministic.
    """
    goal_config = np.asarray(goal_config, dtype=float).reshape(9)
    if not domain.within_joint_limits(goal_config):
        raise InvalidArgument("connector goal configuration outside joint limits")
    return domain.connector_rollout(state, goal_config, model=conn_params)


@dataclass
class MiningSummary:
    n_problems: int = 0
    n_solved: int = 0
    triplets: list = field(default_factory=list)


def mine_connector_problems(
    problems: list[tuple[State, Pose]],
    domain: Domain,
    params: PlannerParams,
) -> MiningSummary:
    """Run the lazy planner per problem and emit one ConnectorProblem per
    teleport node in each solution: (parent state, teleported robot
    configuration, the skill applied from the teleport)."""
    summary = MiningSummary(n_problems=len(problems))
    for index, (s0, q_goal) in enumerate(problems):
        result = run_skill_rrt(
            s0,
            q_goal,
            domain,
            connectors=None,
            params=PlannerParams(**{**params.to_json(), "seed": params.seed + index}),
        )
        if result.plan is None:
            continue
        summary.n_solved += 1
        seq = retrace(result.tree, result.tree.nodes[result.goal_node_id])
        for i in range(1, len(seq) - 1):
            if seq[i].policy_tag is None:  # teleport
                summary.triplets.append(
                    ConnectorProblem(seq[i - 1].state, seq[i].state.q_r, seq[i + 1].policy_tag)
                )
    return summary
