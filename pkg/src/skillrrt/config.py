"""TOML configuration loading: domain definition files and pipeline run
configs. Parse errors report the file line; schema errors report the full
key path.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib as tomli
except ImportError:  # Python < 3.11
    import tomli

from .connector import RewardParams
from .domain import ConnectorModel, Domain, GraspModel, SkillSpec
from .domains import builtin, builtin_names
from .errors import ConfigError
from .filtering import NoiseConfig
from .geometry import KeypointTemplate, Pose, Region
from .planner import PlannerParams

TWO_PI = 2.0 * math.pi


def _read_toml(path: Path) -> dict:
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        return tomli.loads(raw.decode("utf-8"))
    except tomli.TOMLDecodeError as exc:
        # tomli messages carry "at line N, column M"
        raise ConfigError(f"{path}: TOML parse error: {exc}") from exc


def _get(table: dict, key: str, path: str, kind=None, default=...):
    if key not in table:
        if default is ...:
            raise ConfigError(f"{path}.{key}: missing required key")
        return default
    value = table[key]
    if kind is not None:
        ok = isinstance(value, kind) and not (kind is not bool and isinstance(value, bool))
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            value, ok = float(value), True
        if not ok:
            raise ConfigError(f"{path}.{key}: expected {getattr(kind, '__name__', kind)}, got {type(value).__name__}")
    return value


def _vec(table: dict, key: str, path: str, length: int, default=...):
    value = _get(table, key, path, list, default)
    if value is default and default is not ...:
        return default
    if len(value) != length or not all(isinstance(v, (int, float)) for v in value):
        raise ConfigError(f"{path}.{key}: expected {length} numbers")
    return [float(v) for v in value]


def _pair(table: dict, key: str, path: str, default=...):
    v = _vec(table, key, path, 2, default)
    return v if v is default else tuple(v)


def _parse_region(table: dict, path: str) -> Region:
    frame_pos = _vec(table, "frame_position", path, 3, [0.0, 0.0, 0.0])
    frame_rpy = _vec(table, "frame_rpy", path, 3, [0.0, 0.0, 0.0])
    yaw = _pair(table, "yaw", path, (-math.pi, TWO_PI))
    rp_raw = _get(table, "roll_pitch", path, list)
    roll_pitch = []
    for i, pair in enumerate(rp_raw):
        if not (isinstance(pair, list) and len(pair) == 2):
            raise ConfigError(f"{path}.roll_pitch[{i}]: expected [roll, pitch]")
        roll_pitch.append((float(pair[0]), float(pair[1])))
    collision = None
    if "collision_x" in table or "collision_y" in table:
        collision = (
            _pair(table, "collision_x", path),
            _pair(table, "collision_y", path),
        )
    return Region(
        id=_get(table, "id", path, str),
        frame=Pose.from_rpy(frame_pos, *frame_rpy),
        x_bounds=_pair(table, "x", path),
        y_bounds=_pair(table, "y", path),
        yaw_start=yaw[0],
        yaw_width=yaw[1],
        fixed_z=_get(table, "fixed_z", path, float),
        roll_pitch=tuple(roll_pitch),
        blocked_below=_get(table, "blocked_below", path, float, None),
        collision_bounds=collision,
    )


def _parse_skill(table: dict, path: str) -> tuple[SkillSpec, str]:
    spec = SkillSpec(
        id=_get(table, "id", path, str),
        kind=_get(table, "kind", path, str),
        region_ids=tuple(_get(table, "regions", path, list)),
        locked_axes=tuple(_get(table, "locked_axes", path, list, [])),
        success_pos_noise=_get(table, "success_pos_noise", path, float, 0.002),
        success_rot_noise=_get(table, "success_rot_noise", path, float, 0.02),
        failure_prob=_get(table, "failure_prob", path, float, 0.05),
        n_sim=_get(table, "n_sim", path, int, 100),
        approach_offset=tuple(_vec(table, "approach_offset", path, 3, [0.0, 0.0, 0.02])),
    )
    return spec, _get(table, "connector", path, str)


def _dataclass_from_table(cls, table: dict, path: str):
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in table.items():
        if key not in names:
            raise ConfigError(f"{path}.{key}: unknown key for {cls.__name__}")
        if isinstance(value, list):
            value = tuple(float(v) for v in value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except Exception as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_domain_file(path: Path) -> tuple[Domain, NoiseConfig, RewardParams]:
    data = _read_toml(path)
    dom = _get(data, "domain", str(path), dict)
    name = _get(dom, "name", "domain", str)

    obj = _get(data, "object", str(path), dict)
    if "cuboid" in obj:
        template = KeypointTemplate.cuboid(*_vec(obj, "cuboid", "object", 3))
    else:
        pts = _get(obj, "keypoints", "object", list)
        template = KeypointTemplate(np.asarray(pts, dtype=float))

    regions = tuple(
        _parse_region(t, f"regions[{i}]") for i, t in enumerate(_get(data, "regions", str(path), list))
    )
    skills, connector_map = [], {}
    for i, t in enumerate(_get(data, "skills", str(path), list)):
        spec, connector_id = _parse_skill(t, f"skills[{i}]")
        skills.append(spec)
        connector_map[spec.id] = connector_id

    grasp = _get(data, "grasp", str(path), dict)
    templates = tuple(
        Pose(_vec({"p": p}, "p", f"grasp.templates[{i}]", 3), [1.0, 0.0, 0.0, 0.0])
        for i, p in enumerate(_get(grasp, "templates", "grasp", list))
    )
    grasp_model = GraspModel(
        grasp_templates=templates,
        reach_center=tuple(_vec(grasp, "reach_center", "grasp", 3)),
        reach_radius=_get(grasp, "reach_radius", "grasp", float),
        grasp_width=_get(grasp, "width", "grasp", float, 0.01),
    )

    connector = _dataclass_from_table(
        ConnectorModel, _get(data, "connector", str(path), dict, {}), "connector"
    )

    limits_table = _get(data, "limits", str(path), dict, {})
    arm = _pair(limits_table, "arm", "limits", (-3.0, 3.0))
    gripper = _pair(limits_table, "gripper", "limits", (0.0, 0.02))
    joint_limits = np.array([list(arm)] * 7 + [list(gripper)] * 2)

    try:
        domain = Domain(
            name=name,
            regions=regions,
            skills=tuple(skills),
            connector_skill_map=connector_map,
            grasp_model=grasp_model,
            keypoint_template=template,
            joint_limits=joint_limits,
            connector=connector,
            tol=_get(dom, "tol", "domain", float, 0.05),
            torque_pos_gain=_get(dom, "torque_pos_gain", "domain", float, 0.01),
            torque_rot_gain=_get(dom, "torque_rot_gain", "domain", float, 0.1),
            open_width=_get(dom, "open_width", "domain", float, 0.02),
        )
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    noise = _dataclass_from_table(NoiseConfig, _get(data, "noise", str(path), dict, {}), "noise")
    rewards = _dataclass_from_table(
        RewardParams, _get(data, "rewards", str(path), dict, {}), "rewards"
    )
    return domain, noise, rewards


@dataclass
class RunConfig:
    """Resolved pipeline configuration for one CLI command."""

    domain: Domain
    noise: NoiseConfig
    rewards: RewardParams
    planner: PlannerParams
    problems_count: int
    replays: int
    m: float
    trajectories_per_plan: int
    seed: int
    out_dir: Path
    config_hash: str
    config_path: Path


def _resolve_domain(name: str, base: Path) -> tuple[Domain, NoiseConfig, RewardParams]:
    if name in builtin_names():
        return builtin(name), NoiseConfig(), RewardParams()
    path = (base / name).resolve() if not Path(name).is_absolute() else Path(name)
    if not path.exists():
        raise ConfigError(f"run.domain: no builtin or file named {name!r} (looked at {path})")
    return load_domain_file(path)


def load_run_config(path, overrides: dict | None = None) -> RunConfig:
    """Load a pipeline run config. `overrides` (from CLI flags) may set
    seed, out, n_max, batch_size, m, replays."""
    path = Path(path)
    data = _read_toml(path)
    overrides = overrides or {}

    run = _get(data, "run", str(path), dict)
    domain, noise, rewards = _resolve_domain(_get(run, "domain", "run", str), path.parent)

    skill_overrides = _get(data, "skill_overrides", str(path), dict, {})
    if skill_overrides:
        patched = []
        for skill in domain.skills:
            patch = skill_overrides.get(skill.id, {})
            bad = set(patch) - {
                "failure_prob",
                "success_pos_noise",
                "success_rot_noise",
                "n_sim",
                "approach_offset",
            }
            if bad:
                raise ConfigError(f"skill_overrides.{skill.id}: unknown keys {sorted(bad)}")
            if "approach_offset" in patch:
                patch = {**patch, "approach_offset": tuple(patch["approach_offset"])}
            patched.append(dataclasses.replace(skill, **patch))
        domain = dataclasses.replace(domain, skills=tuple(patched))

    noise_table = _get(data, "noise", str(path), dict, {})
    if noise_table:
        noise = _dataclass_from_table(
            NoiseConfig, {**noise.to_json(), **noise_table}, "noise"
        )

    planner_table = dict(_get(data, "planner", str(path), dict, {}))
    seed = int(overrides.get("seed", _get(run, "seed", "run", int, 0)))
    planner_table.setdefault("seed", seed)
    for key in ("n_max", "batch_size"):
        if key in overrides:
            planner_table[key] = overrides[key]
    try:
        planner = PlannerParams(**planner_table)
    except TypeError as exc:
        raise ConfigError(f"planner: {exc}") from exc

    problems = _get(data, "problems", str(path), dict, {})
    filt = _get(data, "filter", str(path), dict, {})
    export = _get(data, "export", str(path), dict, {})

    out_dir = Path(overrides.get("out", _get(run, "out", "run", str, "out")))
    if not out_dir.is_absolute():
        out_dir = path.parent / out_dir

    return RunConfig(
        domain=domain,
        noise=noise,
        rewards=rewards,
        planner=planner,
        problems_count=_get(problems, "count", "problems", int, 50),
        replays=int(overrides.get("replays", _get(filt, "replays", "filter", int, 400))),
        m=float(overrides.get("m", _get(filt, "m", "filter", float, 0.9))),
        trajectories_per_plan=_get(export, "trajectories_per_plan", "export", int, 30),
        seed=seed,
        out_dir=out_dir,
        config_hash=hashlib.sha256(path.read_bytes()).hexdigest()[:16],
        config_path=path,
    )
