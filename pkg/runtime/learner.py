"""Learner stream: sample replay, update the world model and behavior, publish snapshots."""
import asyncio

from agent import DreamerAgent
from config.logging_config import MetricsLog, get_logger
from config.run_config import RunConfig
from core.errors import InsufficientDataError, NonFiniteGradientError
from replay.buffer import ReplayBuffer
from runtime.snapshot import SnapshotBoard


class Learner:
    """One learner iteration per :meth:`step`, with no coupling to the environment rate.

    Nothing is updated before replay has received ``start_learning``
    transitions and holds at least one full training window.
    """

    def __init__(
        self,
        agent: DreamerAgent,
        replay: ReplayBuffer,
        board: SnapshotBoard,
        config: RunConfig,
        metrics: MetricsLog | None = None,
    ):
        self.agent = agent
        self.replay = replay
        self.board = board
        self.metrics = metrics
        self.batch_size = config.general.batch_size
        self.batch_length = config.general.batch_length
        self.start_learning = config.general.start_learning
        self.skipped = 0
        self.logger = get_logger()

    @property
    def steps(self) -> int:
        return self.agent.learner_steps

    def ready(self) -> bool:
        stats = self.replay.stats()
        return stats.total_appended >= self.start_learning and stats.length >= self.batch_length

    def step(self) -> dict[str, float] | None:
        """Run one iteration; returns its metrics, or ``None`` if not ready or skipped."""
        if not self.ready():
            return None
        try:
            batch = self.replay.sample(self.batch_size, self.batch_length, self.agent.sample_rng)
        except InsufficientDataError:
            return None
        try:
            metrics = self.agent.train(batch)
        except NonFiniteGradientError as e:
            self.skipped += 1
            self.logger.warning(f"Skipped update with non-finite gradients in {e.param_set}", exc_info=True)
            return None
        self.board.publish(self.agent.snapshot())
        metrics["env_total"] = self.replay.stats().total_appended
        if self.metrics is not None:
            self.metrics.log("train", metrics)
        return metrics


async def learner_loop(
    learner: Learner,
    stop: asyncio.Event,
    max_learner_steps: int | None = None,
    idle_wait: float = 0.01,
) -> int:
    """Iterate the learner off the event loop until ``stop`` is set or the budget is spent.

    Any exception from an iteration is logged and the loop carries on with the next batch.
    """
    logger = get_logger()
    logger.info("Learner loop started")
    while not stop.is_set():
        if max_learner_steps is not None and learner.steps >= max_learner_steps:
            break
        try:
            metrics = await asyncio.to_thread(learner.step)
        except Exception as e:
            logger.error(f"Learner step failed: {e}", exc_info=True)
            metrics = None
        if metrics is None:
            await asyncio.sleep(idle_wait)
    logger.info(f"Learner loop stopped after {learner.steps} iterations")
    return learner.steps
