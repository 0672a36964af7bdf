"""Built-in toy domains with narrow passages, and seeded problem
generation.

cardflip2d: a thin card on a single table. Side grasps reach under the
card, so the prehensile flip is only applicable in a narrow band where an
edge overhangs the table boundary; everywhere else the tabletop solid
blocks every grasp.

twoshelf: two support surfaces at different heights, a non-prehensile push
per surface, and one prehensile transfer between them.
"""

from __future__ import annotations

import math

import numpy as np

from .domain import (
    ConnectorModel,
    Domain,
    GraspModel,
    NP_KIND,
    P_KIND,
    SkillSpec,
    State,
    arm_for_ee_position,
)
from .errors import ConfigError
from .geometry import KeypointTemplate, Pose, Region, sample_pose

PI = math.pi


def cardflip2d() -> Domain:
    table = Region(
        id="table",
        frame=Pose.identity(),
        x_bounds=(-0.25, 0.25),
        y_bounds=(-0.25, 0.25),
        yaw_start=-PI,
        yaw_width=2 * PI,
        fixed_z=0.002,
        roll_pitch=((0.0, 0.0), (PI, 0.0)),
        blocked_below=0.0,
    )
    # side grasps reach 0.004 under the card's mid-plane: below the
    # tabletop for a flat card, above it for a flipped one
    grasps = tuple(
        Pose(p, np.array([1.0, 0.0, 0.0, 0.0]))
        for p in (
            (0.045, 0.0, -0.004),
            (-0.045, 0.0, -0.004),
            (0.0, 0.03, -0.004),
            (0.0, -0.03, -0.004),
        )
    )
    return Domain(
        name="cardflip2d",
        regions=(table,),
        skills=(
            SkillSpec(
                id="slide",
                kind=NP_KIND,
                region_ids=("table",),
                locked_axes=("roll", "pitch"),
            ),
            SkillSpec(id="flip", kind=P_KIND, region_ids=("table",)),
        ),
        connector_skill_map={"slide": "connector_slide", "flip": "connector_flip"},
        grasp_model=GraspModel(grasps, reach_center=(0.0, 0.0, 0.3), reach_radius=1.0),
        keypoint_template=KeypointTemplate.cuboid(0.08, 0.05, 0.004),
    )


def twoshelf() -> Domain:
    lower = Region(
        id="lower",
        frame=Pose.identity(),
        x_bounds=(-0.45, -0.05),
        y_bounds=(-0.2, 0.2),
        yaw_start=-PI,
        yaw_width=2 * PI,
        fixed_z=0.01,
        roll_pitch=((0.0, 0.0),),
        blocked_below=0.0,
    )
    upper = Region(
        id="upper",
        frame=Pose.identity(),
        x_bounds=(0.05, 0.45),
        y_bounds=(-0.2, 0.2),
        yaw_start=-PI,
        yaw_width=2 * PI,
        fixed_z=0.31,
        roll_pitch=((0.0, 0.0),),
        blocked_below=0.30,
    )
    grasps = (
        Pose((0.0, 0.0, 0.03), np.array([1.0, 0.0, 0.0, 0.0])),
        Pose((0.0, 0.0, 0.05), np.array([1.0, 0.0, 0.0, 0.0])),
    )
    return Domain(
        name="twoshelf",
        regions=(lower, upper),
        skills=(
            SkillSpec(
                id="push_low",
                kind=NP_KIND,
                region_ids=("lower",),
                locked_axes=("roll", "pitch"),
            ),
            SkillSpec(
                id="push_high",
                kind=NP_KIND,
                region_ids=("upper",),
                locked_axes=("roll", "pitch"),
            ),
            SkillSpec(id="transfer", kind=P_KIND, region_ids=("lower", "upper")),
        ),
        connector_skill_map={
            "push_low": "connector_push_low",
            "push_high": "connector_push_high",
            "transfer": "connector_transfer",
        },
        grasp_model=GraspModel(grasps, reach_center=(0.0, 0.0, 0.3), reach_radius=1.2),
        keypoint_template=KeypointTemplate.cuboid(0.06, 0.06, 0.02),
    )


_BUILTINS = {"cardflip2d": cardflip2d, "twoshelf": twoshelf}


def builtin(name: str) -> Domain:
    try:
        return _BUILTINS[name]()
    except KeyError:
        raise ConfigError(
            f"unknown builtin domain {name!r}; available: {sorted(_BUILTINS)}"
        ) from None


def builtin_names() -> list[str]:
    return sorted(_BUILTINS)


def _sample_pose_with_rp(region: Region, rp_index: int, rng: np.random.Generator) -> Pose:
    x = rng.uniform(*region.x_bounds)
    y = rng.uniform(*region.y_bounds)
    yaw = region.yaw_start + rng.uniform(0.0, region.yaw_width)
    roll, pitch = region.roll_pitch[rp_index]
    local = Pose.from_rpy(np.array([x, y, region.fixed_z]), roll, pitch, yaw)
    return region.frame.compose(local)


def home_config(domain: Domain, rng: np.random.Generator) -> np.ndarray:
    """Collision-free initial robot configuration by rejection sampling
    end-effector positions against the reach proxy."""
    center = np.asarray(domain.grasp_model.reach_center, dtype=float)
    for _ in range(1000):
        p = center + rng.uniform(-0.15, 0.15, 3)
        p[2] = abs(p[2]) + 0.05
        if float(np.linalg.norm(p - center)) > domain.grasp_model.reach_radius:
            continue
        if any(region.point_blocked(p) for region in domain.regions):
            continue
        q_r = np.zeros(9)
        q_r[:7] = arm_for_ee_position(p)
        q_r[7] = q_r[8] = 0.5 * domain.open_width
        if domain.within_joint_limits(q_r):
            return q_r
    raise ConfigError(f"domain {domain.name}: could not sample a home configuration")


def generate_problems(
    domain: Domain, count: int, rng: np.random.Generator
) -> list[tuple[State, Pose]]:
    """Seeded problems with stationary initial states. Start and goal come
    from distinct regions, or from opposite stable orientations when the
    domain has a single region (the flip case)."""
    problems = []
    for _ in range(count):
        if len(domain.regions) >= 2:
            idx = rng.permutation(len(domain.regions))[:2]
            start_pose = sample_pose(domain.regions[int(idx[0])], rng)
            goal_pose = sample_pose(domain.regions[int(idx[1])], rng)
        else:
            region = domain.regions[0]
            n_rp = len(region.roll_pitch)
            if n_rp < 2:
                raise ConfigError(
                    f"domain {domain.name}: single region needs >= 2 stable orientations"
                )
            start_rp = int(rng.integers(n_rp))
            goal_rp = (start_rp + 1) % n_rp
            start_pose = _sample_pose_with_rp(region, start_rp, rng)
            goal_pose = _sample_pose_with_rp(region, goal_rp, rng)
        problems.append((State.stationary(start_pose, home_config(domain, rng)), goal_pose))
    return problems
