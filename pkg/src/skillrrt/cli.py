"""Command-line pipeline: plan, mine, filter, export, bench.

All commands are seeded and idempotent: rerunning with the same seed and
output directory rewrites identical artifacts (wall-time columns aside).
Exit codes: 0 success, 2 configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_run_config
from .connector import ConnectorSet, mine_connector_problems
from .domain import Domain, State
from .domains import generate_problems
from .errors import ConfigError, SkillRRTError
from .filtering import NoiseConfig, export_dataset, filter_plans, replay_plan
from .geometry import Pose, sample_pose, se3_distance
from .planner import (
    NO_TELEPORT,
    PlannerParams,
    SkillPlan,
    run_skill_rrt,
    run_skill_rrt_batch,
)

log = logging.getLogger("skillrrt")


def _meta(cfg: RunConfig) -> dict:
    return {"seed": cfg.seed, "config_hash": cfg.config_hash, "version": __version__}


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_jsonl(path: Path, rows) -> int:
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with path.open("w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
            n += 1
    return n


def _write_csv(path: Path, cfg: RunConfig, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# seed={cfg.seed} config_hash={cfg.config_hash} version={__version__}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _problem_params(cfg: RunConfig, index: int) -> PlannerParams:
    return dataclasses.replace(cfg.planner, seed=cfg.planner.seed + 1000 * (index + 1))


def _plan_problem(cfg: RunConfig, index: int, s0: State, q_goal: Pose, connectors):
    params = _problem_params(cfg, index)
    runner = run_skill_rrt_batch if params.batch_size > 1 else run_skill_rrt
    t0 = time.perf_counter()
    result = runner(s0, q_goal, cfg.domain, connectors, params)
    return result, time.perf_counter() - t0


def cmd_plan(cfg: RunConfig) -> int:
    rng = np.random.default_rng(cfg.seed)
    problems = generate_problems(cfg.domain, cfg.problems_count, rng)
    connectors = ConnectorSet.default_for(cfg.domain)
    plans_dir = cfg.out_dir / "plans"
    rows = []
    n_solved = 0
    for i, (s0, q_goal) in enumerate(problems):
        result, wall = _plan_problem(cfg, i, s0, q_goal, connectors)
        plan_id = f"plan_{i:03d}"
        if result.plan is not None:
            n_solved += 1
            _write_json(
                plans_dir / f"{plan_id}.json",
                {"meta": _meta(cfg), "plan_id": plan_id, **result.plan.to_json()},
            )
        rows.append(
            [plan_id, int(result.solved), result.iterations, f"{wall:.3f}", len(result.tree)]
        )
        log.info("%s: solved=%s iterations=%d", plan_id, result.solved, result.iterations)
    _write_csv(
        cfg.out_dir / "plan_summary.csv",
        cfg,
        ["plan_id", "solved", "iterations", "wall_time_s", "tree_size"],
        rows,
    )
    log.info("solved %d/%d problems", n_solved, len(problems))
    return 0


def cmd_mine(cfg: RunConfig) -> int:
    rng = np.random.default_rng(cfg.seed)
    problems = generate_problems(cfg.domain, cfg.problems_count, rng)
    summary = mine_connector_problems(problems, cfg.domain, cfg.planner)
    n = _write_jsonl(
        cfg.out_dir / "connector_problems.jsonl",
        (t.to_json() for t in summary.triplets),
    )
    _write_json(
        cfg.out_dir / "mine_summary.json",
        {
            "meta": _meta(cfg),
            "n_problems": summary.n_problems,
            "n_solved": summary.n_solved,
            "n_triplets": n,
        },
    )
    log.info("mined %d triplets from %d/%d solved problems", n, summary.n_solved, summary.n_problems)
    return 0


def _load_plans(plans_dir: Path) -> list[tuple[str, SkillPlan]]:
    if not plans_dir.is_dir():
        raise ConfigError(f"plan directory {plans_dir} does not exist (run `skillrrt plan` first)")
    plans = []
    for path in sorted(plans_dir.glob("*.json")):
        obj = json.loads(path.read_text())
        plans.append((obj.get("plan_id", path.stem), SkillPlan.from_json(obj)))
    return plans


def cmd_filter(cfg: RunConfig) -> int:
    plans = _load_plans(cfg.out_dir / "plans")
    reports = []
    rows = []
    for index, (plan_id, plan) in enumerate(plans):
        report = replay_plan(
            plan,
            cfg.domain,
            cfg.noise,
            cfg.replays,
            seed=cfg.seed * 1_000_003 + index,
            plan_id=plan_id,
        )
        reports.append(report)
        _write_json(
            cfg.out_dir / "reports" / f"{plan_id}.json",
            {"meta": _meta(cfg), **report.to_json()},
        )
        rows.append([plan_id, report.n_replays, report.n_success, f"{report.success_rate:.6f}"])
        log.info("%s: %d/%d replays succeeded", plan_id, report.n_success, report.n_replays)
    kept = set(filter_plans(reports, cfg.m))
    by_id = dict(plans)
    manifest = {
        "meta": _meta(cfg),
        "m": cfg.m,
        "replays": cfg.replays,
        "kept": [
            {
                "plan_id": r.plan_id,
                "success_rate": r.success_rate,
                "steps": len(by_id[r.plan_id].steps),
            }
            for r in reports
            if r.plan_id in kept
        ],
    }
    _write_json(cfg.out_dir / "kept_manifest.json", manifest)
    _write_csv(
        cfg.out_dir / "filter_summary.csv",
        cfg,
        ["plan_id", "n_replays", "n_success", "success_rate"],
        rows,
    )
    log.info("kept %d/%d plans at m=%s", len(manifest["kept"]), len(plans), cfg.m)
    return 0


def cmd_export(cfg: RunConfig) -> int:
    manifest_path = cfg.out_dir / "kept_manifest.json"
    if not manifest_path.exists():
        raise ConfigError(f"{manifest_path} not found (run `skillrrt filter` first)")
    manifest = json.loads(manifest_path.read_text())
    by_id = dict(_load_plans(cfg.out_dir / "plans"))
    kept = [(entry["plan_id"], by_id[entry["plan_id"]]) for entry in manifest["kept"]]
    result = export_dataset(kept, cfg.domain, cfg.noise, cfg.trajectories_per_plan, cfg.seed)
    _write_jsonl(cfg.out_dir / "dataset.jsonl", (r.to_json() for r in result.records))
    rates = {entry["plan_id"]: entry["success_rate"] for entry in manifest["kept"]}
    _write_csv(
        cfg.out_dir / "export_summary.csv",
        cfg,
        ["plan_id", "success_rate", "steps", "trajectories", "shortfall"],
        [
            [s.plan_id, f"{rates.get(s.plan_id, ''):.6f}", s.n_steps, s.trajectories, s.shortfall]
            for s in result.summaries
        ],
    )
    _write_json(
        cfg.out_dir / "dataset_meta.json",
        {
            "meta": _meta(cfg),
            "records": len(result.records),
            "plans": len(kept),
            "trajectories_per_plan": cfg.trajectories_per_plan,
            "total_shortfall": result.total_shortfall,
        },
    )
    log.info(
        "exported %d records from %d plans (shortfall %d)",
        len(result.records),
        len(kept),
        result.total_shortfall,
    )
    return 0


def flat_random_rollout(
    s0: State, q_goal: Pose, domain: Domain, params: PlannerParams
) -> bool:
    """Uniform-random flat baseline: execute uniformly sampled skills and
    subgoals from the current state with no tree and no goal bias."""
    rng = np.random.default_rng(params.seed)
    state = s0
    for _ in range(params.n_max):
        skill = domain.skills[rng.integers(len(domain.skills))]
        region_id = skill.region_ids[rng.integers(len(skill.region_ids))]
        q_target = sample_pose(domain.region(region_id), rng)
        state = domain.simulate(state, skill.id, q_target, noise=None, rng=rng)
        if se3_distance(state.q_obj, q_goal, params.alpha) < params.delta_goal:
            return True
    return False


def run_bench(cfg: RunConfig):
    """Success rate and mean wall time per method on one seeded suite."""
    rng = np.random.default_rng(cfg.seed)
    problems = generate_problems(cfg.domain, cfg.problems_count, rng)
    connectors = ConnectorSet.default_for(cfg.domain)
    methods = [
        ("skill_rrt", lambda s0, qg, p: run_skill_rrt(s0, qg, cfg.domain, connectors, p).solved),
        (
            "skill_rrt_batch",
            lambda s0, qg, p: run_skill_rrt_batch(
                s0, qg, cfg.domain, connectors, dataclasses.replace(p, batch_size=max(p.batch_size, 2))
            ).solved,
        ),
        (
            "no_connector",
            lambda s0, qg, p: run_skill_rrt(s0, qg, cfg.domain, NO_TELEPORT, p).solved,
        ),
        ("flat_random", lambda s0, qg, p: flat_random_rollout(s0, qg, cfg.domain, p)),
    ]
    rows = []
    for name, runner in methods:
        solved = 0
        t0 = time.perf_counter()
        for i, (s0, q_goal) in enumerate(problems):
            solved += bool(runner(s0, q_goal, _problem_params(cfg, i)))
        mean_wall = (time.perf_counter() - t0) / max(len(problems), 1)
        rows.append([name, solved, len(problems), f"{solved / len(problems):.4f}", f"{mean_wall:.3f}"])
        log.info("bench %s: %d/%d", name, solved, len(problems))
    return rows


def cmd_bench(cfg: RunConfig) -> int:
    rows = run_bench(cfg)
    _write_csv(
        cfg.out_dir / "bench.csv",
        cfg,
        ["method", "solved", "total", "success_rate", "mean_wall_time_s"],
        rows,
    )
    return 0


_COMMANDS = {
    "plan": cmd_plan,
    "mine": cmd_mine,
    "filter": cmd_filter,
    "export": cmd_export,
    "bench": cmd_bench,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skillrrt",
        description="Skill-chaining RRT planning, connector mining, replay filtering, and dataset export.",
    )
    parser.add_argument("--version", action="version", version=f"skillrrt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="run configuration TOML file")
        p.add_argument("--seed", type=int, help="override run seed")
        p.add_argument("--out", help="override output directory")
        p.add_argument("--batch-size", type=int, dest="batch_size")
        p.add_argument("--n-max", type=int, dest="n_max")
        p.add_argument("--m", type=float, help="replay success threshold")
        p.add_argument("--replays", type=int, help="replays per plan")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("SKILLRRT_LOG", "INFO").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    overrides = {
        key: getattr(args, key)
        for key in ("seed", "out", "batch_size", "n_max", "m", "replays")
        if getattr(args, key, None) is not None
    }
    try:
        cfg = load_run_config(args.config, overrides)
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except SkillRRTError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
