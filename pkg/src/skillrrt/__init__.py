"""skillrrt: skill-chaining RRT planning over parameterized manipulation
skills, with connector-problem mining, noisy-replay plan filtering, and
state-action dataset export."""

__version__ = "0.1.0"

from .connector import (
    ConnectorProblem,
    ConnectorSet,
    MiningSummary,
    RewardParams,
    connector_reward,
    mine_connector_problems,
    np_reward,
    p_reward,
    scripted_connector,
)
from .domain import ConnectorModel, Domain, GraspModel, SkillSpec, State
from .domains import builtin, builtin_names, cardflip2d, generate_problems, twoshelf
from .errors import ConfigError, InvalidArgument, NoPreContactError, SkillRRTError
from .filtering import (
    NoiseConfig,
    ReplayReport,
    export_dataset,
    filter_plans,
    replay_plan,
)
from .geometry import KeypointTemplate, Pose, Region, keypoints_of, sample_pose, se3_distance
from .planner import (
    NO_TELEPORT,
    PlannerParams,
    PlanResult,
    PlanStep,
    SkillPlan,
    run_skill_rrt,
    run_skill_rrt_batch,
    skill_rrt,
    skill_rrt_batch,
)

__all__ = [
    "__version__",
    "ConnectorProblem",
    "ConnectorSet",
    "MiningSummary",
    "RewardParams",
    "connector_reward",
    "mine_connector_problems",
    "np_reward",
    "p_reward",
    "scripted_connector",
    "ConnectorModel",
    "Domain",
    "GraspModel",
    "SkillSpec",
    "State",
    "builtin",
    "builtin_names",
    "cardflip2d",
    "generate_problems",
    "twoshelf",
    "ConfigError",
    "InvalidArgument",
    "NoPreContactError",
    "SkillRRTError",
    "NoiseConfig",
    "ReplayReport",
    "export_dataset",
    "filter_plans",
    "replay_plan",
    "KeypointTemplate",
    "Pose",
    "Region",
    "keypoints_of",
    "sample_pose",
    "se3_distance",
    "NO_TELEPORT",
    "PlannerParams",
    "PlanResult",
    "PlanStep",
    "SkillPlan",
    "run_skill_rrt",
    "run_skill_rrt_batch",
    "skill_rrt",
    "skill_rrt_batch",
]
