"""Reward evaluators, scripted connector rollouts, and connector-problem
mining tests with hand-computed expected values."""

import math

import numpy as np
import pytest

from conftest import flat_card, noiseless, robot_at_ee, state_at, with_failure_prob
from skillrrt.connector import (
    ConnectorProblem,
    ConnectorSet,
    RewardParams,
    connector_reward,
    mine_connector_problems,
    np_reward,
    p_reward,
    relative_ee_keypoints,
    scripted_connector,
)
from skillrrt.domain import (
    ConnectorModel,
    State,
    ee_position,
    gripper_width_of,
)
from skillrrt.domains import cardflip2d, generate_problems
from skillrrt.errors import InvalidArgument
from skillrrt.geometry import Pose
from skillrrt.planner import PlannerParams

SQRT8 = math.sqrt(8.0)  # stacked-keypoint norm factor for a pure translation
CARD = flat_card(0.0, 0.0)


def _state_ee(p, width=0.02, q_obj=CARD) -> State:
    return state_at(q_obj, ee_p=p, width=width)


# -- params ---------------------------------------------------------------------


def test_reward_params_reject_non_finite():
    with pytest.raises(InvalidArgument):
        RewardParams(eps_ee_0=float("nan"))
    with pytest.raises(InvalidArgument):
        RewardParams(w_move=float("inf"))


# -- connector reward -------------------------------------------------------------


def test_connector_reward_worked_example(card_domain):
    """ee error 0.2 -> 0.1 with eps = (40, 0.9):
    40 * (exp(-0.09) - exp(-0.18)) = 3.1464389543982474."""
    goal = robot_at_ee((0.0, 0.0, 0.3))
    prev = _state_ee((0.2 / SQRT8, 0.0, 0.3))
    curr = _state_ee((0.1 / SQRT8, 0.0, 0.3))
    r_ee, _, r_obj_move, r_success, _ = connector_reward(
        prev, curr, goal, RewardParams(), card_domain
    )
    assert abs(r_ee - 3.1464389543982474) < 1e-12
    assert r_obj_move == 0.0 and r_success == 0.0


def test_connector_reward_obj_move_example(card_domain):
    """0.01 m of object motion with w_move = 0.3 costs exactly 0.003."""
    goal = robot_at_ee((0.0, 0.0, 0.3))
    prev = _state_ee((0.1, 0.0, 0.3), q_obj=flat_card(0.0, 0.0))
    curr = _state_ee((0.1, 0.0, 0.3), q_obj=flat_card(0.01, 0.0))
    _, _, r_obj_move, _, _ = connector_reward(prev, curr, goal, RewardParams(), card_domain)
    assert abs(r_obj_move - (-0.003)) < 1e-12


def test_connector_reward_signs(card_domain):
    goal = robot_at_ee((0.0, 0.0, 0.3))
    far = _state_ee((0.2, 0.0, 0.3))
    near = _state_ee((0.05, 0.0, 0.3))
    toward = connector_reward(far, near, goal, RewardParams(), card_domain)
    away = connector_reward(near, far, goal, RewardParams(), card_domain)
    assert toward[0] > 0.0 and toward[1] > 0.0
    assert away[0] < 0.0 and away[1] < 0.0
    assert abs(toward[0] + away[0]) < 1e-12  # antisymmetric potentials


def test_connector_reward_success_bonus(card_domain):
    goal = robot_at_ee((0.1, -0.05, 0.25), width=0.02)
    prev = _state_ee((0.2, 0.0, 0.3))
    curr = State.stationary(CARD, goal.copy())
    *_, r_success, total = connector_reward(prev, curr, goal, RewardParams(), card_domain)
    assert r_success == 1000.0
    assert total > 1000.0  # plus the positive approach shaping


def test_connector_reward_width_mismatch_blocks_success(card_domain):
    goal = robot_at_ee((0.1, -0.05, 0.25), width=0.02)
    prev = _state_ee((0.2, 0.0, 0.3))
    curr = _state_ee((0.1, -0.05, 0.25), width=0.021)
    *_, r_success, _ = connector_reward(prev, curr, goal, RewardParams(), card_domain)
    assert r_success == 0.0


def test_connector_reward_no_motion_all_zero(card_domain):
    goal = robot_at_ee((0.0, 0.0, 0.3))
    s = _state_ee((0.2, 0.0, 0.3))
    out = connector_reward(s, s, goal, RewardParams(), card_domain)
    assert out == (0.0, 0.0, 0.0, 0.0, 0.0)


def test_connector_reward_telescopes(card_domain):
    """Summed shaping over a trajectory equals the endpoint potential
    difference, independent of the path."""
    params = RewardParams()
    goal = robot_at_ee((0.0, 0.0, 0.3))
    rng = np.random.default_rng(7)

    def potential(state):
        r, _, _, _, _ = connector_reward(
            State.stationary(CARD, goal.copy()), state, goal, params, card_domain
        )
        t = connector_reward(State.stationary(CARD, goal.copy()), state, goal, params, card_domain)
        return t[0] + t[1]

    for _ in range(200):
        states = [
            _state_ee(rng.uniform(-0.3, 0.3, 3) + np.array([0.0, 0.0, 0.3]))
            for _ in range(rng.integers(2, 8))
        ]
        total = 0.0
        for prev, curr in zip(states, states[1:]):
            r_ee, r_tip, _, _, _ = connector_reward(prev, curr, goal, params, card_domain)
            total += r_ee + r_tip
        expected = potential(states[-1]) - potential(states[0])
        assert abs(total - expected) < 1e-9


def test_connector_reward_rejects_bad_goal(card_domain):
    s = _state_ee((0.0, 0.0, 0.3))
    with pytest.raises(InvalidArgument):
        connector_reward(s, s, np.full(9, np.nan), RewardParams(), card_domain)


# -- non-prehensile reward ----------------------------------------------------------


def test_np_reward_worked_example(card_domain):
    """Object keypoint distance 0.10 -> 0.06 with eps = (0.02, 0.02):
    0.02/0.08 - 0.02/0.12 = 0.08333333333333331."""
    target = flat_card(0.0, 0.0)
    prev = state_at(flat_card(0.10 / SQRT8, 0.0))
    curr = state_at(flat_card(0.06 / SQRT8, 0.0))
    r_obj, r_tip, r_success, total = np_reward(prev, curr, target, RewardParams(), card_domain)
    assert abs(r_obj - 0.08333333333333331) < 1e-12
    assert r_tip == 0.0  # tip-contact term disabled by the zero eps pair
    assert r_success == 0.0
    assert abs(total - r_obj) < 1e-15


def test_np_reward_success_at_goal(card_domain):
    target = flat_card(0.1, 0.0)
    prev = state_at(flat_card(0.2, 0.0))
    curr = state_at(target)
    _, _, r_success, _ = np_reward(prev, curr, target, RewardParams(), card_domain)
    assert r_success == 1000.0


def test_np_reward_tip_term_enabled(card_domain):
    params = RewardParams(eps_tipobj_0=0.01, eps_tipobj_1=0.05)
    target = flat_card(0.0, 0.0)
    prev = _state_ee((0.3, 0.0, 0.3))
    curr = _state_ee((0.05, 0.0, 0.1))
    _, r_tip, _, _ = np_reward(prev, curr, target, params, card_domain)
    assert r_tip > 0.0  # tips approached the object


# -- prehensile reward -----------------------------------------------------------------


def _card_yaw(yaw: float) -> Pose:
    return Pose.from_rpy((0.0, 0.0, 0.002), 0.0, 0.0, yaw)


def test_p_reward_rotation_worked_example(card_domain):
    """Rotation error 0.5 -> 0.25 rad with eps_rot = (0.15, 0.1):
    0.15/0.35 - 0.15/0.6 = 0.1785714285714286."""
    params = RewardParams(eps_obj_0=0.0, eps_rot_0=0.15, eps_rot_1=0.1)
    target = _card_yaw(0.0)
    prev = state_at(_card_yaw(0.5))
    curr = state_at(_card_yaw(0.25))
    r_obj, r_rot, r_grasp, _, _ = p_reward(prev, curr, target, params, card_domain)
    assert r_obj == 0.0
    assert abs(r_rot - 0.1785714285714286) < 1e-12
    assert r_grasp == 0.0


def test_p_reward_rigid_grasp_zero_penalty(card_domain):
    """Object and end-effector translating together keep the object-frame
    keypoints fixed, so the grasp-slip penalty vanishes up to rounding."""
    params = RewardParams(w_grasp=5.0)
    target = flat_card(0.2, 0.0)
    prev = state_at(flat_card(0.0, 0.0), ee_p=(0.0, 0.0, 0.1))
    curr = state_at(flat_card(0.1, 0.0), ee_p=(0.1, 0.0, 0.1))
    *_, r_grasp, _, _ = p_reward(prev, curr, target, params, card_domain)
    assert abs(r_grasp) < 1e-12


def test_p_reward_slipping_grasp_penalized(card_domain):
    params = RewardParams(w_grasp=5.0)
    target = flat_card(0.2, 0.0)
    prev = state_at(flat_card(0.0, 0.0), ee_p=(0.0, 0.0, 0.1))
    curr = state_at(flat_card(0.1, 0.0), ee_p=(0.0, 0.0, 0.1))  # ee stayed put
    *_, r_grasp, _, _ = p_reward(prev, curr, target, params, card_domain)
    assert r_grasp < 0.0


def test_relative_keypoints_invariant_under_common_motion():
    q_r = robot_at_ee((0.05, 0.0, 0.1))
    rel = relative_ee_keypoints(q_r, flat_card(0.0, 0.0))
    shift = np.array([0.07, -0.02, 0.0])
    q_r2 = robot_at_ee(np.array([0.05, 0.0, 0.1]) + shift)
    rel2 = relative_ee_keypoints(q_r2, flat_card(0.07, -0.02))
    np.testing.assert_allclose(rel, rel2, atol=1e-12)


# -- scripted connector -----------------------------------------------------------------


def test_connector_rollout_noop_length_one(card_domain):
    s = _state_ee((0.1, 0.1, 0.3))
    traj = scripted_connector(card_domain, s, s.q_r)
    assert len(traj) == 1
    np.testing.assert_array_equal(traj[0].q_r, s.q_r)


def test_connector_rollout_far_path_leaves_object(card_domain):
    s = _state_ee((0.2, 0.2, 0.4), q_obj=flat_card(-0.2, -0.2))
    goal = robot_at_ee((0.1, 0.2, 0.4))
    traj = scripted_connector(card_domain, s, goal)
    model = card_domain.connector
    assert len(traj) == model.resolution + 1
    for st in traj:
        np.testing.assert_array_equal(st.q_obj.position, s.q_obj.position)
    np.testing.assert_allclose(ee_position(traj[-1].q_r), (0.1, 0.2, 0.4), atol=1e-12)
    np.testing.assert_array_equal(traj[-1].q_r, goal)


def test_connector_rollout_grazing_matches_step_oracle(card_domain):
    """Recompute the per-step proximity pushes with an explicit loop over
    the interpolated configurations."""
    model = ConnectorModel(disturbance_gain=0.05, disturbance_radius=0.05, resolution=10)
    obj0 = flat_card(0.03, 0.0)
    s = _state_ee((0.0, 0.0, 0.01), q_obj=obj0)
    goal = robot_at_ee((0.06, 0.0, 0.01))
    traj = scripted_connector(card_domain, s, goal, conn_params=model)

    p_obj = obj0.position.copy()
    for i in range(1, model.resolution + 1):
        q_r = s.q_r + (goal - s.q_r) * (i / model.resolution)
        ee = q_r[:7] @ np.array(
            [[1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0], [0.5, 0, 0], [0, 0.5, 0], [0, 0, 0.5], [0, 0, 0]]
        )
        d = float(np.linalg.norm(ee - p_obj))
        mag = (model.disturbance_gain / model.resolution) * max(0.0, 1.0 - d / model.disturbance_radius)
        if mag > 0.0:
            away = p_obj - ee
            p_obj = p_obj + mag * away / np.linalg.norm(away)
        np.testing.assert_allclose(traj[i].q_obj.position, p_obj, atol=1e-12)
    assert float(np.linalg.norm(traj[-1].q_obj.position - obj0.position)) > 0.0


def test_connector_rollout_rejects_out_of_limits(card_domain):
    s = _state_ee((0.0, 0.0, 0.3))
    with pytest.raises(InvalidArgument):
        scripted_connector(card_domain, s, np.full(9, 1e6))


# -- connector sets and mining ----------------------------------------------------------


def test_connector_set_covers(card_domain):
    assert ConnectorSet.default_for(card_domain).covers(card_domain)
    assert not ConnectorSet({"slide": card_domain.connector}).covers(card_domain)
    assert not ConnectorSet({})


def test_mining_emits_valid_triplets(card_domain):
    dom = noiseless(card_domain)
    rng = np.random.default_rng(3)
    problems = generate_problems(dom, 20, rng)
    summary = mine_connector_problems(problems, dom, PlannerParams(n_max=3000, seed=0))
    assert summary.n_problems == 20
    assert summary.n_solved >= 18
    assert len(summary.triplets) > 0
    skill_ids = {s.id for s in dom.skills}
    for trip in summary.triplets:
        assert trip.skill_id in skill_ids
        assert trip.target_robot_config.shape == (9,)
        assert dom.within_joint_limits(trip.target_robot_config)
        # teleport changes only the robot: the start state keeps its own
        # configuration while the target is generally different
        assert gripper_width_of(trip.target_robot_config) >= 0.0


def test_mining_unsolvable_yields_nothing(card_domain):
    dom = with_failure_prob(card_domain, 1.0)
    rng = np.random.default_rng(0)
    problems = generate_problems(dom, 3, rng)
    summary = mine_connector_problems(problems, dom, PlannerParams(n_max=20, seed=0))
    assert summary.n_solved == 0
    assert summary.triplets == []


def test_connector_problem_json_roundtrip():
    trip = ConnectorProblem(
        state_at(flat_card(0.1, -0.05, 0.3)), robot_at_ee((0.0, 0.1, 0.2)), "flip"
    )
    back = ConnectorProblem.from_json(trip.to_json())
    assert back.skill_id == trip.skill_id
    np.testing.assert_array_equal(back.target_robot_config, trip.target_robot_config)
    np.testing.assert_array_equal(back.start_state.q_r, trip.start_state.q_r)
    np.testing.assert_array_equal(
        back.start_state.q_obj.position, trip.start_state.q_obj.position
    )
