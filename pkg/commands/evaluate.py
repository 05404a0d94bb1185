"""Deterministic policy evaluation from a checkpoint."""
import json
from pathlib import Path
from typing import Any, Callable

import numpy as np

from config.logging_config import METRICS_FILE, MetricsLog, get_logger, print_clean_message
from config.run_config import RunConfig
from core.errors import DreamerError
from envs.base import Environment, Observation
from envs.registry import make_env
from runtime.actor import PolicyRunner
from runtime.checkpoint import read_manifest, restore_agent
from runtime.filters import LowPassFilter

DEFAULT_MAX_STEPS = 1000
EVAL_FILE = "eval.json"

Policy = Callable[[Observation, np.ndarray, bool], np.ndarray]


def runner_policy(runner: PolicyRunner) -> Policy:
    """Follow the mode of the actor on the runner's belief."""
    def policy(observation: Observation, prev_action: np.ndarray, is_first: bool) -> np.ndarray:
        runner.observe(observation, prev_action, is_first)
        return runner.act(deterministic=True)
    return policy


def evaluate_policy(
    env: Environment,
    policy: Policy,
    episodes: int,
    max_steps: int = DEFAULT_MAX_STEPS,
    action_filter: LowPassFilter | None = None,
) -> list[dict[str, Any]]:
    """Run ``episodes`` episodes and return one record per episode.

    Boolean ``info`` entries are counted, numeric ones averaged over the
    episode. Episodes of reset-free environments are cut at ``max_steps``.
    """
    space = env.spec.action
    records = []
    for episode in range(episodes):
        obs = env.reset()
        if action_filter is not None:
            action_filter.reset()
        prev_action, is_first = space.null(), True
        total, steps = 0.0, 0
        counts: dict[str, float] = {}
        sums: dict[str, float] = {}
        while steps < max_steps:
            action = policy(obs, prev_action, is_first)
            command = action_filter.apply(action) if action_filter is not None else action
            obs, reward, is_last = env.step(space.to_env(command))
            prev_action, is_first = action, False
            total += float(reward)
            steps += 1
            for key, value in env.info.items():
                if isinstance(value, (bool, np.bool_)):
                    counts[key] = counts.get(key, 0.0) + float(value)
                elif isinstance(value, (int, float, np.number)):
                    sums[key] = sums.get(key, 0.0) + float(value)
            if is_last:
                break
        record = {"episode": episode, "return": total, "length": steps, **counts}
        record.update({f"mean_{key}": value / steps for key, value in sums.items()})
        records.append(record)
    return records


def summarize(records: list[dict[str, Any]], control_rate_hz: float) -> dict[str, Any]:
    """Aggregate episode records; pick rate is placements per minute of robot time."""
    returns = np.array([r["return"] for r in records], dtype=np.float64)
    total_steps = int(sum(r["length"] for r in records))
    summary: dict[str, Any] = {
        "episodes": len(records),
        "mean_return": float(returns.mean()) if len(records) else 0.0,
        "std_return": float(returns.std()) if len(records) else 0.0,
        "total_steps": total_steps,
    }
    if records and "place" in records[0]:
        placements = float(sum(r["place"] for r in records))
        minutes = total_steps / control_rate_hz / 60.0
        summary["placements"] = placements
        summary["pick_rate_per_minute"] = placements / minutes if minutes else 0.0
    if records and "mean_distance" in records[0]:
        summary["mean_distance"] = float(np.mean([r["mean_distance"] for r in records]))
    return summary


def run_evaluation(checkpoint: str | Path, episodes: int, seed: int = 0, device: str = "cpu") -> dict[str, Any]:
    """Evaluate the checkpoint's policy on a freshly seeded environment."""
    manifest = read_manifest(checkpoint)
    config = RunConfig.from_dict(manifest["config"])
    env = make_env(config.env.name, config.env.params, seed, config.world_model.image_size,
                   config.env.upright_unit_range)
    agent = restore_agent(checkpoint, env.spec, device=device)
    runner = PolicyRunner(env.spec, config, seed=seed, device=device)
    runner.sync(agent.snapshot())
    rate = config.runtime.control_rate_hz or env.control_rate_hz
    action_filter = None
    if not env.spec.action.is_discrete:
        action_filter = LowPassFilter.for_rate(
            env.spec.action.dim, rate, config.runtime.cutoff_hz, config.runtime.filter_order
        )
    records = evaluate_policy(env, runner_policy(runner), episodes, action_filter=action_filter)
    env.close()
    return {
        "checkpoint": str(checkpoint),
        "env": config.env.name,
        "seed": seed,
        "learner_steps": manifest["counters"]["learner_steps"],
        "summary": summarize(records, rate),
        "episodes": records,
    }


def cmd_eval(checkpoint: str, episodes: int = 10, seed: int = 0, logdir: str | None = None) -> int:
    """Evaluate a checkpoint, print the summary and save it next to the run.

    Returns:
        int: Process exit code.
    """
    logger = get_logger()
    logger.info("=" * 70)
    logger.info(f"EVALUATION: checkpoint={checkpoint} episodes={episodes} seed={seed}")
    logger.info("=" * 70)
    try:
        result = run_evaluation(checkpoint, episodes, seed)
        out_dir = Path(logdir) if logdir else Path(checkpoint).parent.parent
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / EVAL_FILE).write_text(json.dumps(result, indent=2, sort_keys=True), encoding="utf-8")
        MetricsLog(out_dir / METRICS_FILE).log("eval", {"seed": seed, **result["summary"]})
    except DreamerError as e:
        print_clean_message(f"❌ Error: {e}")
        logger.error(f"Evaluation failed: {e}", exc_info=True)
        return 1

    for record in result["episodes"]:
        print_clean_message(f"Episode {record['episode']}: return {record['return']:.3f} over {record['length']} steps")
    for key, value in result["summary"].items():
        print_clean_message(f"{key}: {value:.4f}" if isinstance(value, float) else f"{key}: {value}")
    print_clean_message(f"✅ Saved evaluation to {out_dir / EVAL_FILE}")
    return 0
