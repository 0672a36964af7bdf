"""Shared test helpers: noiseless domain variants and state builders."""

import dataclasses

import numpy as np
import pytest

from skillrrt.domain import Domain, State, arm_for_ee_position
from skillrrt.domains import cardflip2d, twoshelf
from skillrrt.geometry import Pose


def noiseless(domain: Domain) -> Domain:
    """Domain variant with deterministic skill outcomes."""
    skills = tuple(
        dataclasses.replace(
            s, failure_prob=0.0, success_pos_noise=0.0, success_rot_noise=0.0
        )
        for s in domain.skills
    )
    return dataclasses.replace(domain, skills=skills)


def with_failure_prob(domain: Domain, fp: float) -> Domain:
    skills = tuple(
        dataclasses.replace(
            s, failure_prob=fp, success_pos_noise=0.0, success_rot_noise=0.0
        )
        for s in domain.skills
    )
    return dataclasses.replace(domain, skills=skills)


def robot_at_ee(p, width: float = 0.02) -> np.ndarray:
    """9-vector whose FK proxy places the end-effector at p."""
    q_r = np.zeros(9)
    q_r[:7] = arm_for_ee_position(np.asarray(p, dtype=float))
    q_r[7] = q_r[8] = 0.5 * width
    return q_r


def state_at(q_obj: Pose, ee_p=(0.0, 0.0, 0.3), width: float = 0.02) -> State:
    return State.stationary(q_obj, robot_at_ee(ee_p, width))


def flat_card(x: float, y: float, yaw: float = 0.0) -> Pose:
    return Pose.from_rpy((x, y, 0.002), 0.0, 0.0, yaw)


def flipped_card(x: float, y: float, yaw: float = 0.0) -> Pose:
    return Pose.from_rpy((x, y, 0.002), np.pi, 0.0, yaw)


@pytest.fixture
def card_domain() -> Domain:
    return cardflip2d()


@pytest.fixture
def shelf_domain() -> Domain:
    return twoshelf()
