"""Self-describing checkpoints: named tensors in safetensors plus a JSON manifest."""
import json
import os
from pathlib import Path
from typing import Any

import torch
from safetensors import SafetensorError, safe_open
from safetensors.torch import load_file, save_file

from agent import DreamerAgent
from config.logging_config import get_logger
from config.run_config import RunConfig
from core.errors import CheckpointError, ConfigError, SpecMismatchError
from core.spaces import SpaceSpec
from replay.buffer import ReplayStats

CHECKPOINT_FORMAT_VERSION = 1
CHECKPOINT_DIR = "checkpoints"
LATEST_CHECKPOINT = "latest.safetensors"
REPLAY_DIR = "replay"


def build_manifest(
    agent: DreamerAgent,
    replay_stats: ReplayStats | None = None,
    actor_state: dict[str, Any] | None = None,
) -> dict[str, Any]:
    manifest = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "spec": agent.spec.to_dict(),
        "config": agent.config.to_dict(),
        "counters": agent.counters(),
        "sample_rng": agent.sample_rng.bit_generator.state,
    }
    if replay_stats is not None:
        manifest["replay"] = replay_stats._asdict()
    if actor_state is not None:
        manifest["actor_stream"] = actor_state
    return manifest


def save_checkpoint(
    path: str | Path,
    agent: DreamerAgent,
    replay_stats: ReplayStats | None = None,
    actor_state: dict[str, Any] | None = None,
) -> Path:
    """Write every learner tensor and the manifest; the file is replaced atomically.

    Saving the same agent state twice produces byte-identical files.
    ``actor_state`` is the JSON-safe actor-stream state from
    :meth:`runtime.actor.ActorWorker.get_state`.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    manifest = build_manifest(agent, replay_stats, actor_state)
    tmp = path.with_suffix(path.suffix + ".tmp")
    try:
        save_file(agent.state_tensors(), str(tmp), metadata={"manifest": json.dumps(manifest, sort_keys=True)})
        os.replace(tmp, path)
    except OSError as e:
        raise CheckpointError(f"cannot write checkpoint {path}: {e}") from e
    get_logger().info(f"✅ Saved checkpoint at learner step {agent.learner_steps} to {path}")
    return path


def read_manifest(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        with safe_open(str(path), framework="pt") as handle:
            metadata = handle.metadata() or {}
    except (SafetensorError, OSError, ValueError) as e:
        raise CheckpointError(f"unreadable checkpoint {path}: {e}") from e
    if "manifest" not in metadata:
        raise CheckpointError(f"checkpoint {path} has no manifest")
    manifest = json.loads(metadata["manifest"])
    if manifest.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format {manifest.get('format_version')!r} in {path}")
    return manifest


def load_checkpoint(path: str | Path, spec: SpaceSpec | None = None) -> tuple[dict[str, torch.Tensor], dict[str, Any]]:
    """Read tensors and manifest.

    Raises:
        CheckpointError: If the file is missing, unreadable or of another format.
        SpecMismatchError: If ``spec`` is given and differs from the embedded one.
    """
    manifest = read_manifest(path)
    if spec is not None and SpaceSpec.from_dict(manifest["spec"]) != spec:
        raise SpecMismatchError(
            f"checkpoint {path} was written for {manifest['spec']}, environment provides {spec.to_dict()}"
        )
    try:
        tensors = load_file(str(path))
    except (SafetensorError, OSError) as e:
        raise CheckpointError(f"unreadable checkpoint {path}: {e}") from e
    return tensors, manifest


def restore_agent(
    path: str | Path,
    spec: SpaceSpec | None = None,
    config: RunConfig | None = None,
    device: str | torch.device = "cpu",
) -> DreamerAgent:
    """Rebuild the agent a checkpoint was written from, including optimizer moments and RNG state.

    ``config`` replaces the embedded config (a resumed run may change budgets
    or environment parameters); network sizes must still match.
    """
    tensors, manifest = load_checkpoint(path, spec)
    saved_spec = SpaceSpec.from_dict(manifest["spec"])
    try:
        run_config = config or RunConfig.from_dict(manifest["config"])
    except ConfigError as e:
        raise CheckpointError(f"checkpoint {path} embeds an invalid config: {e}") from e
    agent = DreamerAgent(run_config, saved_spec, device)
    try:
        agent.load_state_tensors(tensors, manifest["counters"])
    except (KeyError, RuntimeError) as e:
        raise CheckpointError(f"checkpoint {path} does not match the agent: {e}") from e
    agent.sample_rng.bit_generator.state = manifest["sample_rng"]
    return agent


def checkpoint_save(path: str | Path, agent: DreamerAgent, replay_stats: ReplayStats | None = None) -> Path:
    return save_checkpoint(path, agent, replay_stats)


def checkpoint_load(path: str | Path, spec: SpaceSpec | None = None, device: str | torch.device = "cpu") -> DreamerAgent:
    return restore_agent(path, spec, device=device)


def replay_dir_for(checkpoint_path: str | Path) -> Path:
    """Replay spill directory of the run a checkpoint belongs to."""
    return Path(checkpoint_path).parent.parent / REPLAY_DIR
