"""Concurrent training session: actor and learner loops plus checkpoint flushes."""
import asyncio
import signal
from dataclasses import dataclass
from pathlib import Path

from agent import DreamerAgent, create_dreamer_agent
from config.logging_config import METRICS_FILE, MetricsLog, get_logger
from config.run_config import RunConfig, get_device
from core.errors import CheckpointError
from envs.registry import make_env
from replay.buffer import ReplayBuffer
from runtime.actor import ActorWorker, PolicyRunner, actor_loop
from runtime.checkpoint import CHECKPOINT_DIR, LATEST_CHECKPOINT, REPLAY_DIR, replay_dir_for, restore_agent, save_checkpoint
from runtime.learner import Learner, learner_loop
from runtime.snapshot import SnapshotBoard

CONFIG_FILE = "config.yaml"


@dataclass
class TrainingSummary:
    env_steps: int
    learner_steps: int
    episodes: int
    checkpoint: Path


class CheckpointingLearner(Learner):
    """Learner that flushes a checkpoint every ``checkpoint_every`` iterations from its own stream."""

    def __init__(self, *args, checkpoint_path: Path, checkpoint_every: int, **kwargs):
        super().__init__(*args, **kwargs)
        self.checkpoint_path = checkpoint_path
        self.checkpoint_every = checkpoint_every

    def step(self):
        metrics = super().step()
        if metrics is not None and self.steps % self.checkpoint_every == 0:
            save_checkpoint(self.checkpoint_path, self.agent, self.replay.stats())
        return metrics


def _install_signal_handlers(stop: asyncio.Event) -> list[signal.Signals]:
    loop = asyncio.get_running_loop()
    installed = []
    for sig in (signal.SIGINT, signal.SIGTERM):
        try:
            loop.add_signal_handler(sig, stop.set)
            installed.append(sig)
        except (NotImplementedError, RuntimeError, ValueError):
            get_logger().debug(f"Signal handler for {sig.name} unavailable")
    return installed


async def run_training_async(
    config: RunConfig,
    logdir: str | Path,
    resume: str | Path | None = None,
    stop: asyncio.Event | None = None,
    device: str | None = None,
) -> TrainingSummary:
    """Train until the env-step budget, the learner-step budget or ``stop``.

    The run directory receives ``config.yaml``, ``metrics.jsonl``,
    ``checkpoints/latest.safetensors`` and, if enabled, the replay spill.
    """
    logger = get_logger()
    config.validate()
    logdir = Path(logdir)
    logdir.mkdir(parents=True, exist_ok=True)
    config.to_yaml(logdir / CONFIG_FILE)
    device = device or get_device()
    seed = config.runtime.seed

    env = make_env(config.env.name, config.env.params, seed, config.world_model.image_size,
                   config.env.upright_unit_range)
    replay: ReplayBuffer | None = None
    if resume is not None:
        agent: DreamerAgent = restore_agent(resume, env.spec, config, device)
        previous_replay = replay_dir_for(resume)
        if previous_replay.exists():
            try:
                replay = ReplayBuffer.load(previous_replay, env.spec.action)
            except CheckpointError as e:
                logger.warning(f"Could not reload replay from {previous_replay}: {e}", exc_info=True)
        logger.info(f"Resuming from {resume} at learner step {agent.learner_steps}")
    else:
        agent = create_dreamer_agent(config, env.spec, device)
    if replay is None:
        replay = ReplayBuffer(config.general.replay_capacity, env.spec.action)

    metrics = MetricsLog(logdir / METRICS_FILE)
    board = SnapshotBoard(agent.snapshot())
    runner = PolicyRunner(env.spec, config, seed=seed + 2, device=device)
    worker = ActorWorker(env, replay, board, runner, config, metrics, seed=seed + 1)
    checkpoint_path = logdir / CHECKPOINT_DIR / LATEST_CHECKPOINT
    learner = CheckpointingLearner(
        agent, replay, board, config, metrics,
        checkpoint_path=checkpoint_path, checkpoint_every=config.runtime.checkpoint_every,
    )

    stop = stop or asyncio.Event()
    installed = _install_signal_handlers(stop)
    learner_budget = None
    if config.runtime.learner_steps is not None:
        learner_budget = agent.learner_steps + config.runtime.learner_steps

    logger.info("=" * 70)
    logger.info(f"TRAINING STARTED: env={config.env.name} seed={seed} device={device} logdir={logdir}")
    logger.info("=" * 70)
    tasks = [
        asyncio.create_task(actor_loop(worker, stop, config.runtime.env_steps)),
        asyncio.create_task(learner_loop(learner, stop, learner_budget)),
    ]
    try:
        await asyncio.wait(tasks, return_when=asyncio.FIRST_COMPLETED)
    finally:
        stop.set()
        for sig in installed:
            asyncio.get_running_loop().remove_signal_handler(sig)
        await asyncio.gather(*tasks, return_exceptions=True)
        for task in tasks:
            if task.done() and not task.cancelled() and task.exception() is not None:
                logger.error("Training stream failed", exc_info=task.exception())
        env.close()
        save_checkpoint(checkpoint_path, agent, replay.stats())
        if config.runtime.save_replay:
            replay.save(logdir / REPLAY_DIR)

    for task in tasks:
        if task.exception() is not None:
            raise task.exception()
    logger.info("=" * 70)
    logger.info(f"TRAINING FINISHED: {worker.steps} env steps, {agent.learner_steps} learner steps")
    logger.info("=" * 70)
    return TrainingSummary(worker.steps, agent.learner_steps, worker.episodes, checkpoint_path)


def run_training(config: RunConfig, logdir: str | Path, resume: str | Path | None = None) -> TrainingSummary:
    return asyncio.run(run_training_async(config, logdir, resume))
