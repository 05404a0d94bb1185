"""Deterministic single-stream schedule of actor and learner work."""
from pathlib import Path

from agent import DreamerAgent
from config.logging_config import METRICS_FILE, MetricsLog, get_logger
from config.run_config import RunConfig
from envs.base import Environment
from replay.buffer import ReplayBuffer
from runtime.actor import ActorWorker, PolicyRunner
from runtime.checkpoint import read_manifest, restore_agent, save_checkpoint
from runtime.learner import Learner
from runtime.snapshot import SnapshotBoard


class LockstepHarness:
    """Actor and learner interleaved by an explicit schedule on one thread.

    Each cycle runs ``env_steps`` actor steps and then ``learner_steps``
    learner iterations. Metrics are stamped with the actor's step count
    instead of wall time, so two runs with the same seed write identical
    logs.
    """

    def __init__(
        self,
        config: RunConfig,
        env: Environment,
        agent: DreamerAgent | None = None,
        replay: ReplayBuffer | None = None,
        logdir: str | Path | None = None,
        device: str = "cpu",
    ):
        seed = config.runtime.seed
        self.config = config
        self.env = env
        self.agent = agent or DreamerAgent(config, env.spec, device)
        self.replay = replay or ReplayBuffer(config.general.replay_capacity, env.spec.action)
        self.metrics = None
        if logdir is not None:
            self.metrics = MetricsLog(Path(logdir) / METRICS_FILE, clock=self._step_clock)
        self.board = SnapshotBoard(self.agent.snapshot())
        self.worker = ActorWorker(
            env, self.replay, self.board, PolicyRunner(env.spec, config, seed=seed + 2, device=device),
            config, self.metrics, seed=seed + 1, timer=self._step_clock,
        )
        self.learner = Learner(self.agent, self.replay, self.board, config, self.metrics)

    def _step_clock(self) -> float:
        worker = getattr(self, "worker", None)
        return float(worker.steps) if worker is not None else 0.0

    def collect(self, steps: int) -> None:
        for _ in range(steps):
            self.worker.step()

    def train(self, steps: int) -> list[dict[str, float]]:
        results = []
        for _ in range(steps):
            metrics = self.learner.step()
            if metrics is not None:
                results.append(metrics)
        return results

    def run(self, cycles: int, env_steps: int, learner_steps: int) -> list[dict[str, float]]:
        """Run ``cycles`` rounds of the schedule; returns every learner record."""
        records = []
        for _ in range(cycles):
            self.collect(env_steps)
            records.extend(self.train(learner_steps))
        return records

    def checkpoint(self, path: str | Path, replay_dir: str | Path) -> Path:
        """Save the agent, the actor stream and the replay spill so :meth:`resume` continues exactly."""
        self.replay.save(replay_dir)
        return save_checkpoint(path, self.agent, self.replay.stats(), actor_state=self.worker.get_state())

    @classmethod
    def resume(
        cls,
        config: RunConfig,
        env: Environment,
        checkpoint_path: str | Path,
        replay_dir: str | Path,
        logdir: str | Path | None = None,
        device: str = "cpu",
    ) -> "LockstepHarness":
        agent = restore_agent(checkpoint_path, env.spec, config, device)
        replay = ReplayBuffer.load(replay_dir, env.spec.action)
        harness = cls(config, env, agent=agent, replay=replay, logdir=logdir, device=device)
        actor_state = read_manifest(checkpoint_path).get("actor_stream")
        if actor_state is None:
            get_logger().warning(f"Checkpoint {checkpoint_path} has no actor stream state; the actor starts fresh")
        else:
            harness.worker.set_state(actor_state)
        get_logger().info(
            f"Resumed lockstep harness at learner step {agent.learner_steps}, env step {harness.worker.steps}"
        )
        return harness
