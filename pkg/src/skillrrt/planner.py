"""Skill-chaining RRT over parameterized skills.

The tree alternates connecting nodes (a connector rollout, or a teleport
when the connector set is empty, which is the lazy mode used for mining
connector problems) and skill-outcome nodes. Nearest-node queries are
applicability-filtered and vectorized over cached per-node arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import Domain, NP_KIND, SkillSpec, State
from .errors import InvalidArgument, NoPreContactError
from .geometry import Pose, sample_pose


@dataclass(frozen=True)
class PlannerParams:
    n_max: int = 10_000
    p_g: float = 0.2
    delta_obj: float = 0.005
    delta_goal: float = 0.005
    alpha: float = 0.1
    batch_size: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_g <= 1.0:
            raise InvalidArgument(f"p_g must be in [0, 1], got {self.p_g}")
        if self.delta_obj <= 0.0 or self.delta_goal <= 0.0:
            raise InvalidArgument("thresholds must be > 0")
        if self.batch_size < 1:
            raise InvalidArgument("batch_size must be >= 1")

    def to_json(self) -> dict:
        return {
            "n_max": self.n_max,
            "p_g": self.p_g,
            "delta_obj": self.delta_obj,
            "delta_goal": self.delta_goal,
            "alpha": self.alpha,
            "batch_size": self.batch_size,
            "seed": self.seed,
        }

    @staticmethod
    def from_json(obj: dict) -> "PlannerParams":
        return PlannerParams(**obj)


@dataclass(frozen=True)
class Node:
    id: int
    parent: int | None
    policy_tag: str | None  # skill id, connector id, or None (root / teleport)
    goal: object  # Pose for skill nodes, 9-vector for connector/teleport, None for root
    state: State


class PlanTree:
    """Append-only search tree with cached arrays for vectorized
    applicability-filtered nearest-node queries."""

    def __init__(self, domain: Domain):
        self._domain = domain
        self.nodes: list[Node] = []
        self.children: dict[int, list[int]] = {}
        self._pos: list[np.ndarray] = []
        self._quat: list[np.ndarray] = []
        self._region_idx: list[int] = []
        self._rp_idx: list[int] = []
        self._coords: list[tuple[float, float, float, float]] = []  # x, y, z, yaw
        self._region_order = {r.id: i for i, r in enumerate(domain.regions)}

    def __len__(self) -> int:
        return len(self.nodes)

    def add(self, parent: int | None, policy_tag: str | None, goal, state: State) -> Node:
        node = Node(len(self.nodes), parent, policy_tag, goal, state)
        self.nodes.append(node)
        if parent is not None:
            self.children.setdefault(parent, []).append(node.id)
        loc = self._domain.locate(state.q_obj)
        if loc is None:
            self._region_idx.append(-1)
            self._rp_idx.append(-1)
            self._coords.append((0.0, 0.0, 0.0, 0.0))
        else:
            region, (x, y, z, rp, yaw) = loc
            self._region_idx.append(self._region_order[region.id])
            self._rp_idx.append(rp)
            self._coords.append((x, y, z, yaw))
        self._pos.append(state.q_obj.position)
        self._quat.append(state.q_obj.quaternion)
        return node

    def distances_to(self, q_target: Pose, alpha: float, limit: int) -> np.ndarray:
        pos = np.asarray(self._pos[:limit])
        quat = np.asarray(self._quat[:limit])
        dt = np.linalg.norm(pos - q_target.position, axis=1)
        dots = np.clip(np.abs(quat @ q_target.quaternion), 0.0, 1.0)
        return dt + alpha * 2.0 * np.arccos(dots)

    def applicability_mask(self, skill: SkillSpec, q_target: Pose, limit: int) -> np.ndarray:
        """Vectorized phi for a non-prehensile skill over nodes [0, limit)."""
        tgt = self._domain.locate(q_target, skill.region_ids)
        if tgt is None:
            return np.zeros(limit, dtype=bool)
        region, (tx, ty, tz, trp, tyaw) = tgt
        region_idx = np.asarray(self._region_idx[:limit])
        mask = region_idx == self._region_order[region.id]
        if not mask.any():
            return mask
        coords = np.asarray(self._coords[:limit])
        rp_idx = np.asarray(self._rp_idx[:limit])
        tol = self._domain.tol
        for axis in skill.locked_axes:
            if axis in ("roll", "pitch"):
                mask &= rp_idx == trp
            elif axis == "x":
                mask &= np.abs(coords[:, 0] - tx) <= tol
            elif axis == "y":
                mask &= np.abs(coords[:, 1] - ty) <= tol
            elif axis == "z":
                mask &= np.abs(coords[:, 2] - tz) <= tol
            elif axis == "yaw":
                d = np.abs(coords[:, 3] - tyaw) % (2.0 * math.pi)
                mask &= np.minimum(d, 2.0 * math.pi - d) <= tol
        return mask


@dataclass(frozen=True)
class PlanStep:
    policy_tag: str | None
    goal: object  # Pose, 9-vector robot configuration, or None

    def to_json(self) -> dict:
        if isinstance(self.goal, Pose):
            goal = {"type": "pose", **self.goal.to_json()}
        elif self.goal is None:
            goal = None
        else:
            goal = {"type": "config", "values": [float(v) for v in np.asarray(self.goal)]}
        return {"policy_tag": self.policy_tag, "goal": goal}

    @staticmethod
    def from_json(obj: dict) -> "PlanStep":
        goal = obj["goal"]
        if goal is None:
            parsed = None
        elif goal["type"] == "pose":
            parsed = Pose.from_json(goal)
        else:
            parsed = np.asarray(goal["values"], dtype=float)
        return PlanStep(obj["policy_tag"], parsed)


@dataclass(frozen=True)
class SkillPlan:
    steps: tuple[PlanStep, ...]
    initial_state: State
    goal_pose: Pose
    seed: int
    params: PlannerParams

    def skill_steps(self) -> list[PlanStep]:
        return [s for s in self.steps if isinstance(s.goal, Pose)]

    def to_json(self) -> dict:
        return {
            "schema_version": 1,
            "seed": self.seed,
            "params": self.params.to_json(),
            "initial_state": self.initial_state.to_json(),
            "goal_pose": self.goal_pose.to_json(),
            "steps": [s.to_json() for s in self.steps],
        }

    @staticmethod
    def from_json(obj: dict) -> "SkillPlan":
        return SkillPlan(
            tuple(PlanStep.from_json(s) for s in obj["steps"]),
            State.from_json(obj["initial_state"]),
            Pose.from_json(obj["goal_pose"]),
            obj["seed"],
            PlannerParams.from_json(obj["params"]),
        )


@dataclass
class PlanResult:
    plan: SkillPlan | None
    tree: PlanTree
    iterations: int
    goal_node_id: int | None = None

    @property
    def solved(self) -> bool:
        return self.plan is not None


def failed(state: State, q_target: Pose, params: PlannerParams) -> bool:
    """Skill failure check: success only when the object landed strictly
    within delta_obj of its desired pose."""
    from .geometry import se3_distance

    return not se3_distance(state.q_obj, q_target, params.alpha) < params.delta_obj


def unif_sample_skill_and_subgoal(
    domain: Domain, q_goal: Pose, params: PlannerParams, rng: np.random.Generator
):
    """Uniform skill; the goal pose with probability p_g, else a uniform
    pose from a uniformly chosen region of the skill."""
    skill = domain.skills[rng.integers(len(domain.skills))]
    if rng.random() < params.p_g:
        return skill, q_goal
    region_id = skill.region_ids[rng.integers(len(skill.region_ids))]
    return skill, sample_pose(domain.region(region_id), rng)


def get_applicable_nearest_node(
    tree: PlanTree,
    skill: SkillSpec,
    q_target: Pose,
    domain: Domain,
    params: PlannerParams,
    limit: int | None = None,
) -> Node | None:
    """NP: nearest among applicable nodes. P: globally nearest first, kept
    only if applicable there (the expensive check runs once)."""
    n = len(tree) if limit is None else limit
    if n == 0:
        return None
    dists = tree.distances_to(q_target, params.alpha, n)
    if skill.kind == NP_KIND:
        mask = tree.applicability_mask(skill, q_target, n)
        if not mask.any():
            return None
        idx = np.flatnonzero(mask)
        return tree.nodes[int(idx[np.argmin(dists[idx])])]
    v_close = tree.nodes[int(np.argmin(dists))]
    if domain.phi_p(v_close.state, q_target):
        return v_close
    return None


class _NoTeleport:
    """Ablation marker: connections are forbidden entirely. An extension can
    only proceed when the parent's robot configuration already matches the
    required pre-contact configuration."""

    def __bool__(self) -> bool:
        return True


NO_TELEPORT = _NoTeleport()


def compute_connecting_node(
    q_r_target: np.ndarray,
    skill: SkillSpec,
    connectors,
    v: Node,
    domain: Domain,
    rng: np.random.Generator,
) -> tuple[str | None, object, State] | None:
    """(policy_tag, goal, state) of the connecting node, or None when no
    connection is possible. Lazy mode (empty connector set) teleports the
    robot configuration and leaves every other state field untouched."""
    if connectors is NO_TELEPORT:
        if float(np.max(np.abs(v.state.q_r - np.asarray(q_r_target)))) > domain.tol:
            return None
        return None, q_r_target, v.state.teleported(q_r_target)
    if not connectors:
        return None, q_r_target, v.state.teleported(q_r_target)
    connector_id = domain.connector_for_skill(skill.id)
    model = connectors.for_skill(skill.id)
    state = domain.connector_rollout(v.state, q_r_target, model=model)[-1]
    return connector_id, q_r_target, state


def _attempt_extension(
    tree: PlanTree,
    skill: SkillSpec,
    v_near: Node,
    q_target: Pose,
    connectors,
    domain: Domain,
    params: PlannerParams,
    rng: np.random.Generator,
):
    """Simulate one extension without mutating the tree. Returns the
    (connect, outcome) node payloads, or None on failure."""
    try:
        q_r_prime = domain.pre_contact_config(skill, v_near.state.q_obj, q_target, rng)
    except NoPreContactError:
        return None
    connect = compute_connecting_node(q_r_prime, skill, connectors, v_near, domain, rng)
    if connect is None:
        return None
    tag, goal, connect_state = connect
    outcome = domain.simulate(connect_state, skill.id, q_target, noise=None, rng=rng)
    if failed(outcome, q_target, params):
        return None
    return (v_near.id, tag, goal, connect_state), (skill.id, q_target, outcome)


def extend(
    tree: PlanTree,
    skill: SkillSpec,
    v_near: Node,
    q_target: Pose,
    connectors,
    domain: Domain,
    params: PlannerParams,
    rng: np.random.Generator,
) -> tuple[Node, Node] | None:
    """Append the connecting node and the skill-outcome node, in that
    order, or leave the tree unchanged on failure."""
    result = _attempt_extension(tree, skill, v_near, q_target, connectors, domain, params, rng)
    if result is None:
        return None
    return _commit(tree, result)


def _commit(tree: PlanTree, result) -> tuple[Node, Node]:
    (parent, tag, goal, connect_state), (skill_id, q_target, outcome) = result
    v_connect = tree.add(parent, tag, goal, connect_state)
    v_prime = tree.add(v_connect.id, skill_id, q_target, outcome)
    return v_connect, v_prime


def retrace(tree: PlanTree, goal_node: Node) -> list[Node]:
    """Root-first node sequence following parent links."""
    seq = [goal_node]
    while seq[-1].parent is not None:
        seq.append(tree.nodes[seq[-1].parent])
    seq.reverse()
    return seq


def _plan_from(tree: PlanTree, goal_node: Node, s0: State, q_goal: Pose, params: PlannerParams) -> SkillPlan:
    seq = retrace(tree, goal_node)
    steps = tuple(PlanStep(n.policy_tag, n.goal) for n in seq[1:])
    return SkillPlan(steps, s0, q_goal, params.seed, params)


def run_skill_rrt(
    s0: State,
    q_goal: Pose,
    domain: Domain,
    connectors=None,
    params: PlannerParams = PlannerParams(),
) -> PlanResult:
    """Sequential planner. Deterministic given params.seed."""
    _check_goal(domain, q_goal)
    rng = np.random.default_rng(params.seed)
    tree = PlanTree(domain)
    root = tree.add(None, None, None, s0.at_rest())
    goal_node = _goal_reached(tree, [root], q_goal, params)
    if goal_node is not None:
        return PlanResult(_plan_from(tree, goal_node, s0, q_goal, params), tree, 0, goal_node.id)
    for it in range(1, params.n_max + 1):
        skill, q_target = unif_sample_skill_and_subgoal(domain, q_goal, params, rng)
        v_near = get_applicable_nearest_node(tree, skill, q_target, domain, params)
        appended = ()
        if v_near is not None:
            appended = extend(tree, skill, v_near, q_target, connectors, domain, params, rng) or ()
        goal_node = _goal_reached(tree, appended, q_goal, params)
        if goal_node is not None:
            return PlanResult(_plan_from(tree, goal_node, s0, q_goal, params), tree, it, goal_node.id)
    return PlanResult(None, tree, params.n_max)


def run_skill_rrt_batch(
    s0: State,
    q_goal: Pose,
    domain: Domain,
    connectors=None,
    params: PlannerParams = PlannerParams(),
) -> PlanResult:
    """Batched planner: each iteration draws batch_size samples, resolves
    nearest nodes against the pre-iteration snapshot, runs the extensions
    independently, then commits successes in sample order."""
    _check_goal(domain, q_goal)
    rng = np.random.default_rng(params.seed)
    tree = PlanTree(domain)
    root = tree.add(None, None, None, s0.at_rest())
    goal_node = _goal_reached(tree, [root], q_goal, params)
    if goal_node is not None:
        return PlanResult(_plan_from(tree, goal_node, s0, q_goal, params), tree, 0, goal_node.id)
    for it in range(1, params.n_max + 1):
        snapshot = len(tree)
        pending = []
        for _ in range(params.batch_size):
            skill, q_target = unif_sample_skill_and_subgoal(domain, q_goal, params, rng)
            v_near = get_applicable_nearest_node(
                tree, skill, q_target, domain, params, limit=snapshot
            )
            if v_near is None:
                continue
            result = _attempt_extension(
                tree, skill, v_near, q_target, connectors, domain, params, rng
            )
            if result is not None:
                pending.append(result)
        appended = []
        for result in pending:
            appended.extend(_commit(tree, result))
        goal_node = _goal_reached(tree, appended, q_goal, params)
        if goal_node is not None:
            return PlanResult(_plan_from(tree, goal_node, s0, q_goal, params), tree, it, goal_node.id)
    return PlanResult(None, tree, params.n_max)


def skill_rrt(s0, q_goal, domain, connectors=None, params=PlannerParams()) -> SkillPlan | None:
    return run_skill_rrt(s0, q_goal, domain, connectors, params).plan


def skill_rrt_batch(s0, q_goal, domain, connectors=None, params=PlannerParams()) -> SkillPlan | None:
    return run_skill_rrt_batch(s0, q_goal, domain, connectors, params).plan


def _check_goal(domain: Domain, q_goal: Pose) -> None:
    if not domain.in_object_regions(q_goal):
        raise InvalidArgument("goal pose lies outside every object region")


def _goal_reached(tree: PlanTree, new_nodes, q_goal: Pose, params: PlannerParams) -> Node | None:
    from .geometry import se3_distance

    for node in new_nodes:
        if se3_distance(node.state.q_obj, q_goal, params.alpha) < params.delta_goal:
            return node
    return None
