"""Actor stream: belief updates, action selection, filtering and replay appends."""
import asyncio
import time
from collections import defaultdict
from typing import Any, Callable

import numpy as np
import torch

from behavior.actor_critic import Actor
from config.logging_config import MetricsLog, get_logger
from config.run_config import RunConfig
from core.codec import decode_state, encode_state
from core.spaces import SpaceSpec
from core.types import LatentState, Transition, validate_transition
from envs.base import Environment, Observation
from networks.layers import MlpSpec
from replay.buffer import ReplayBuffer
from runtime.filters import LowPassFilter
from runtime.snapshot import ACTOR_PREFIX, WORLD_PREFIX, PolicySnapshot, SnapshotBoard
from worldmodel.model import WorldModel


class PolicyRunner:
    """Actor-side copy of the encoder, dynamics and policy head.

    Parameters only change through :meth:`sync`, which loads one published
    snapshot in full. Everything runs under ``torch.inference_mode`` so no
    autograd state is ever built on the actor stream.
    """

    def __init__(self, spec: SpaceSpec, config: RunConfig, seed: int = 0, device: str | torch.device = "cpu"):
        self.spec = spec
        self.device = torch.device(device)
        general, ac = config.general, config.actor_critic
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            self.world = WorldModel(spec, config).to(self.device)
            self.actor = Actor(
                self.world.rssm.feature_dim, spec.action,
                MlpSpec(general.mlp_layers, general.mlp_units), ac.min_log_std, ac.max_log_std,
            ).to(self.device)
        self.world.requires_grad_(False)
        self.actor.requires_grad_(False)
        self.generator = torch.Generator(device="cpu").manual_seed(seed)
        self.version: int | None = None
        self.state: LatentState | None = None

    def sync(self, snapshot: PolicySnapshot) -> bool:
        """Load ``snapshot`` unless it is already loaded; returns whether parameters changed."""
        if snapshot.version == self.version:
            return False
        self.world.load_state_dict(snapshot.part(WORLD_PREFIX), strict=False)
        self.actor.load_state_dict(snapshot.part(ACTOR_PREFIX))
        self.version = snapshot.version
        return True

    def reset(self) -> None:
        self.state = None

    def get_state(self) -> dict[str, Any]:
        """Sampling generator and current belief."""
        state = {"generator": encode_state(self.generator.get_state().numpy())}
        if self.state is not None:
            state["h"] = encode_state(self.state.h.cpu().numpy())
            state["z"] = encode_state(self.state.z.cpu().numpy())
        return state

    def set_state(self, state: dict[str, Any]) -> None:
        self.generator.set_state(torch.from_numpy(decode_state(state["generator"])))
        self.state = None
        if "h" in state:
            self.state = LatentState(
                torch.from_numpy(decode_state(state["h"])).to(self.device),
                torch.from_numpy(decode_state(state["z"])).to(self.device),
            )

    def observe(self, observation: Observation, prev_action: np.ndarray, is_first: bool) -> LatentState:
        """Fold one observation into the belief with a posterior step."""
        with torch.inference_mode():
            obs = {name: torch.as_tensor(np.asarray(value), device=self.device)[None]
                   for name, value in observation.items()}
            embed = self.world.encode(obs)
            first = is_first or self.state is None
            prev = self.state if self.state is not None else self.world.rssm.initial(1, self.generator)
            action = torch.as_tensor(np.asarray(prev_action, dtype=np.float32), device=self.device)[None]
            self.state, _ = self.world.rssm.posterior_step(
                prev, action, embed, torch.tensor([first], device=self.device), self.generator
            )
        return self.state

    def act(self, deterministic: bool = False) -> np.ndarray:
        """Normalized action for the current belief: the mode if ``deterministic``, else a sample."""
        with torch.inference_mode():
            dist = self.actor(self.state.features())
            action = dist.mode() if deterministic else dist.sample(self.generator)
        return np.clip(action[0].cpu().numpy().astype(np.float32), -1.0, 1.0)


class ActorWorker:
    """Runs the environment one transition at a time and appends to replay.

    The first transition of every episode is synthesized from ``reset()``
    with the null action and zero reward. Until replay holds
    ``start_learning`` transitions actions are uniform; afterwards they are
    sampled from the latest snapshot. Continuous commands pass through a
    low-pass filter on their way to the motors, while replay keeps the
    action the policy chose. ``timer`` measures action latency.
    """

    def __init__(
        self,
        env: Environment,
        replay: ReplayBuffer,
        board: SnapshotBoard,
        runner: PolicyRunner,
        config: RunConfig,
        metrics: MetricsLog | None = None,
        seed: int = 0,
        timer: Callable[[], float] = time.perf_counter,
    ):
        self.env = env
        self.timer = timer
        self.spec = env.spec
        self.replay = replay
        self.board = board
        self.runner = runner
        self.metrics = metrics
        self.start_learning = config.general.start_learning
        self.report_every = config.runtime.report_every
        self.rng = np.random.default_rng(seed)
        self.logger = get_logger()

        self.rate_hz = config.runtime.control_rate_hz or env.control_rate_hz
        self.filter: LowPassFilter | None = None
        if not self.spec.action.is_discrete:
            self.filter = LowPassFilter.for_rate(
                self.spec.action.dim, self.rate_hz, config.runtime.cutoff_hz, config.runtime.filter_order
            )

        self.steps = 0
        self.episodes = 0
        self.last_action_latency = 0.0
        self._obs: Observation | None = None
        self._first_pending = True
        self._prev_action = self.spec.action.null()
        self._episode_return = 0.0
        self._episode_length = 0
        self._events: dict[str, float] = defaultdict(float)
        self._event_counts: dict[str, int] = defaultdict(int)
        self._segment_rewards: list[float] = []

    @property
    def prefilling(self) -> bool:
        return self.replay.stats().total_appended < self.start_learning

    def get_state(self) -> dict[str, Any]:
        """Everything the next :meth:`step` depends on apart from replay and the snapshot board.

        Restoring it into a worker built on the same config, after replay and
        the learner have been restored, continues the transition stream exactly.
        """
        return {
            "steps": self.steps,
            "episodes": self.episodes,
            "last_action_latency": self.last_action_latency,
            "rng": encode_state(self.rng),
            "obs": encode_state(self._obs),
            "first_pending": self._first_pending,
            "prev_action": encode_state(self._prev_action),
            "episode_return": encode_state(self._episode_return),
            "episode_length": self._episode_length,
            "events": encode_state(dict(self._events)),
            "event_counts": encode_state(dict(self._event_counts)),
            "segment_rewards": encode_state(list(self._segment_rewards)),
            "filter": encode_state(self.filter.get_state()) if self.filter is not None else None,
            "runner": self.runner.get_state(),
            "env": self.env.get_state(),
        }

    def set_state(self, state: dict[str, Any]) -> None:
        self.steps = state["steps"]
        self.episodes = state["episodes"]
        self.last_action_latency = state["last_action_latency"]
        self.rng = decode_state(state["rng"])
        self._obs = decode_state(state["obs"])
        self._first_pending = state["first_pending"]
        self._prev_action = decode_state(state["prev_action"])
        self._episode_return = state["episode_return"]
        self._episode_length = state["episode_length"]
        self._events = defaultdict(float, decode_state(state["events"]))
        self._event_counts = defaultdict(int, decode_state(state["event_counts"]))
        self._segment_rewards = decode_state(state["segment_rewards"])
        if self.filter is not None:
            self.filter.set_state(decode_state(state["filter"]))
        self.runner.set_state(state["runner"])
        self.env.set_state(state["env"])

    def _select_action(self, is_first: bool) -> np.ndarray:
        started = self.timer()
        if self.prefilling:
            action = self.spec.action.sample_uniform(self.rng)
        else:
            self.runner.sync(self.board.fetch_latest())
            self.runner.observe(self._obs, self._prev_action, is_first)
            action = self.runner.act()
        self.last_action_latency = self.timer() - started
        return action

    def _begin_episode(self) -> Transition:
        self._obs = self.env.reset()
        self._prev_action = self.spec.action.null()
        self.runner.reset()
        if self.filter is not None:
            self.filter.reset()
        self._episode_return = 0.0
        self._episode_length = 0
        self._events = defaultdict(float)
        self._event_counts = defaultdict(int)
        self._first_pending = True
        return Transition(self._obs, self._prev_action, 0.0, is_first=True)

    def _record_info(self) -> None:
        for key, value in self.env.info.items():
            if isinstance(value, (bool, np.bool_)):
                self._events[key] += float(value)
            elif isinstance(value, (int, float, np.number)):
                self._events[key] += float(value)
                self._event_counts[key] += 1

    def _end_episode(self, aborted: bool = False) -> None:
        self.episodes += 1
        record = {
            "episode": self.episodes,
            "env_step": self.steps,
            "return": self._episode_return,
            "length": self._episode_length,
            "aborted": aborted,
        }
        for key, total in self._events.items():
            count = self._event_counts.get(key)
            record[f"mean_{key}" if count else key] = total / count if count else total
        self.logger.info(
            f"Episode {self.episodes} finished: return {self._episode_return:.3f} over {self._episode_length} steps"
        )
        if self.metrics is not None:
            self.metrics.log("episode", record)
        self._obs = None

    def _report_segment(self) -> None:
        rewards = self._segment_rewards
        if self.metrics is not None and rewards:
            self.metrics.log("segment", {
                "env_step": self.steps,
                "reward_sum": float(np.sum(rewards)),
                "reward_mean": float(np.mean(rewards)),
                "action_latency": self.last_action_latency,
            })
        self._segment_rewards = []

    def step(self) -> Transition:
        """Produce, validate and append exactly one transition."""
        if self._obs is None:
            transition = self._begin_episode()
        else:
            is_first, self._first_pending = self._first_pending, False
            action = self._select_action(is_first)
            command = self.filter.apply(action) if self.filter is not None else action
            try:
                obs, reward, is_last = self.env.step(self.spec.action.to_env(command))
            except Exception as e:
                self.logger.error(f"Environment fault, aborting episode: {e}", exc_info=True)
                transition = Transition(self._obs, action, 0.0, is_last=True)
                validate_transition(transition, self.spec)
                self.replay.append(transition)
                self.steps += 1
                self._episode_length += 1
                self._end_episode(aborted=True)
                return transition
            transition = Transition(obs, action, reward, is_last=is_last)
            self._obs = obs
            self._prev_action = action
            self._episode_return += float(reward)
            self._episode_length += 1
            self._segment_rewards.append(float(reward))
            self._record_info()

        validate_transition(transition, self.spec)
        self.replay.append(transition)
        self.steps += 1
        if transition.is_last:
            self._end_episode()
        if self.report_every and self.steps % self.report_every == 0:
            self._report_segment()
        return transition


async def actor_loop(worker: ActorWorker, stop: asyncio.Event, max_env_steps: int | None = None) -> int:
    """Step the worker off the event loop until ``stop`` is set or the budget is spent."""
    logger = get_logger()
    logger.info("Actor loop started")
    while not stop.is_set():
        if max_env_steps is not None and worker.steps >= max_env_steps:
            break
        await asyncio.to_thread(worker.step)
    logger.info(f"Actor loop stopped after {worker.steps} environment steps")
    return worker.steps
