"""Tests for snapshots, action filtering, the actor and learner streams and the training session."""
import asyncio
import threading
import time
from types import MappingProxyType
from unittest.mock import patch

import numpy as np
import pytest
import torch

from agent import DreamerAgent
from config.logging_config import METRICS_FILE, MetricsLog, read_metrics
from core.errors import ConfigError, EnvironmentFaultError, InvalidStateError, NonFiniteGradientError
from envs.quadruped import ToyQuadruped
from envs.toggle import ToggleEnv
from replay.buffer import ReplayBuffer
from runtime.actor import ActorWorker, PolicyRunner, actor_loop
from runtime.checkpoint import read_manifest
from runtime.filters import LowPassFilter
from runtime.learner import Learner, learner_loop
from runtime.session import CONFIG_FILE, run_training_async
from runtime.snapshot import PolicySnapshot, SnapshotBoard


def snapshot(version: int) -> PolicySnapshot:
    tensors = {"a": torch.full((64,), float(version)), "b": torch.full((64,), float(version))}
    return PolicySnapshot(version, MappingProxyType(tensors))


def make_worker(config, env, metrics=None, seed=1):
    agent = DreamerAgent(config, env.spec)
    replay = ReplayBuffer(config.general.replay_capacity, env.spec.action)
    board = SnapshotBoard(agent.snapshot())
    runner = PolicyRunner(env.spec, config, seed=seed + 1)
    return ActorWorker(env, replay, board, runner, config, metrics, seed=seed), agent


class FaultyToggle(ToggleEnv):
    """Toggle environment whose ``step`` raises on a chosen call."""

    def __init__(self, fail_on: int):
        super().__init__(episode_length=1000)
        self.fail_on = fail_on
        self.calls = 0

    def step(self, action):
        self.calls += 1
        if self.calls == self.fail_on:
            raise EnvironmentFaultError("motor bus timeout")
        return super().step(action)


class RecordingQuadruped(ToyQuadruped):
    """Quadruped that remembers every command it receives."""

    def __init__(self, **kwargs):
        super().__init__(**kwargs)
        self.commands = []

    def step(self, action):
        self.commands.append(np.array(action, dtype=np.float64))
        return super().step(action)


class SlowToggle(ToggleEnv):
    def __init__(self, delay: float):
        super().__init__(episode_length=1000)
        self.delay = delay

    def step(self, action):
        time.sleep(self.delay)
        return super().step(action)


class CountingLearner:
    """Stand-in learner whose iterations cost a fixed amount of time."""

    def __init__(self, cost: float):
        self.cost = cost
        self.steps = 0

    def step(self):
        time.sleep(self.cost)
        self.steps += 1
        return {}


class TestSnapshotBoard:
    """Tests for the latest-wins snapshot handoff."""

    def test_latest_published_snapshot_wins(self):
        """Test that fetch returns the most recent publish."""
        board = SnapshotBoard(snapshot(0))
        board.publish(snapshot(1))
        board.publish(snapshot(2))
        assert board.fetch_latest().version == 2
        assert board.published == 2

    def test_older_version_is_rejected(self):
        """Test monotone publication."""
        board = SnapshotBoard(snapshot(5))
        with pytest.raises(InvalidStateError):
            board.publish(snapshot(4))
        assert board.fetch_latest().version == 5

    def test_snapshot_tensors_are_read_only(self):
        """Test that a published snapshot cannot be edited in place."""
        with pytest.raises(TypeError):
            snapshot(1).tensors["a"] = torch.zeros(1)

    def test_capture_keeps_only_policy_parameters(self, tiny_config):
        """Test that decoders and the critic are not shipped to the actor."""
        env = ToggleEnv()
        agent = DreamerAgent(tiny_config(), env.spec)
        snap = agent.snapshot()
        assert snap.version == 0
        assert any(k.startswith("world.rssm.") for k in snap.tensors)
        assert any(k.startswith("actor.") for k in snap.tensors)
        assert not any("decoders" in k or "reward_head" in k for k in snap.tensors)
        key = next(k for k in snap.tensors if k.startswith("actor."))
        before = snap.tensors[key].clone()
        with torch.no_grad():
            for p in agent.behavior.actor.parameters():
                p.add_(1.0)
        assert torch.equal(snap.tensors[key], before)

    def test_concurrent_reader_never_sees_torn_or_older_snapshots(self):
        """Test versions seen by a racing reader are monotone and internally consistent."""
        board = SnapshotBoard(snapshot(0))
        done = threading.Event()

        def writer():
            for v in range(1, 10_001):
                board.publish(snapshot(v))
            done.set()

        thread = threading.Thread(target=writer)
        thread.start()
        last, reads = -1, 0
        while not done.is_set() or reads == 0:
            snap = board.fetch_latest()
            assert snap.version >= last
            assert torch.all(snap.tensors["a"] == snap.version)
            assert torch.all(snap.tensors["b"] == snap.version)
            last = snap.version
            reads += 1
        thread.join()
        assert board.fetch_latest().version == 10_000


class TestLowPassFilter:
    """Tests for the Butterworth action filter."""

    def test_constant_input_settles_to_unit_gain(self):
        """Test DC gain after a step change."""
        f = LowPassFilter(1, cutoff_hz=2.0, rate_hz=10.0)
        f.apply(np.zeros(1))
        for _ in range(100):
            out = f.apply(np.array([0.5]))
        assert abs(out[0] - 0.5) < 1e-3

    def test_first_output_equals_first_input(self):
        """Test steady-state priming on the first sample."""
        f = LowPassFilter(3, cutoff_hz=2.0, rate_hz=10.0)
        raw = np.array([0.2, -0.7, 0.9])
        np.testing.assert_allclose(f.apply(raw), raw)

    def test_nyquist_input_is_attenuated(self):
        """Test that an alternating command is strongly damped."""
        f = LowPassFilter(1, cutoff_hz=2.0, rate_hz=10.0)
        outputs = [f.apply(np.array([0.5 * (-1) ** t]))[0] for t in range(200)]
        assert np.max(np.abs(outputs[-50:])) < 0.2 * 0.5

    def test_sinusoid_amplitude_matches_frequency_response(self):
        """Test measured steady-state gain against the analytic response."""
        rate, freq, amplitude = 10.0, 3.0, 0.5
        f = LowPassFilter(1, cutoff_hz=2.0, rate_hz=rate)
        t = np.arange(400)
        x = amplitude * np.sin(2 * np.pi * freq * t / rate)
        y = np.array([f.apply(np.array([v]))[0] for v in x])[-100:]
        phase = 2 * np.pi * freq * t[-100:] / rate
        measured = np.hypot(2 * np.mean(y * np.sin(phase)), 2 * np.mean(y * np.cos(phase))) / amplitude
        assert measured == pytest.approx(f.gain_at(freq), rel=0.05)

    def test_reset_forgets_history(self):
        """Test that nothing from before a reset leaks into the next output."""
        f = LowPassFilter(1, cutoff_hz=2.0, rate_hz=10.0)
        for _ in range(20):
            f.apply(np.array([1.0]))
        f.reset()
        assert f.apply(np.array([-0.4]))[0] == pytest.approx(-0.4)

    def test_outputs_are_clipped_to_bounds(self):
        """Test that overshoot never leaves [-1, 1]."""
        f = LowPassFilter(1, cutoff_hz=4.5, rate_hz=10.0, order=4)
        f.apply(np.array([-1.0]))
        outputs = [f.apply(np.array([1.0]))[0] for _ in range(30)]
        assert max(outputs) <= 1.0

    def test_default_cutoff_and_stability(self):
        """Test the default cutoff of a fifth of the rate."""
        f = LowPassFilter.for_rate(12, rate_hz=20.0)
        assert f.cutoff_hz == 4.0
        assert f.is_stable()
        assert f.gain_at(0.0) == pytest.approx(1.0)

    @pytest.mark.parametrize("cutoff", [0.0, -1.0, 5.0, 7.0])
    def test_cutoff_outside_band_is_rejected(self, cutoff):
        """Test the cutoff range."""
        with pytest.raises(ConfigError):
            LowPassFilter(1, cutoff_hz=cutoff, rate_hz=10.0)


class TestActorWorker:
    """Tests for transition production on the actor stream."""

    def test_prefill_uses_uniform_actions_without_policy(self, tiny_config):
        """Test that no snapshot is loaded before start_learning."""
        config = tiny_config(general={"start_learning": 1000})
        worker, _ = make_worker(config, ToggleEnv(episode_length=1000))
        actions = [worker.step().action for _ in range(400)]
        assert worker.prefilling
        assert worker.runner.version is None
        flips = np.mean([a[1] for a in actions[1:]])
        assert 0.4 < flips < 0.6

    def test_episode_starts_carry_null_action_and_zero_reward(self, tiny_config):
        """Test the synthesized first transition of every episode."""
        worker, _ = make_worker(tiny_config(), ToggleEnv(episode_length=10))
        transitions = [worker.step() for _ in range(35)]
        firsts = [i for i, t in enumerate(transitions) if t.is_first]
        assert firsts == [0, 11, 22, 33]
        for i in firsts:
            assert np.all(transitions[i].action == 0.0)
            assert transitions[i].reward == 0.0
            if i:
                assert transitions[i - 1].is_last
        assert worker.episodes == 3

    def test_policy_is_synced_after_prefill(self, tiny_config):
        """Test that actions come from the latest snapshot once learning starts."""
        worker, agent = make_worker(tiny_config(), ToggleEnv())
        worker.step()
        worker.step()
        assert worker.runner.version == agent.learner_steps == 0

    def test_environment_fault_aborts_episode(self, tiny_config, tmp_path):
        """Test that a raising env yields an is_last transition and an aborted episode record."""
        metrics = MetricsLog(tmp_path / METRICS_FILE)
        worker, _ = make_worker(tiny_config(), FaultyToggle(fail_on=3), metrics)
        transitions = [worker.step() for _ in range(6)]
        assert transitions[3].is_last
        assert transitions[3].reward == 0.0
        assert transitions[4].is_first
        episodes = read_metrics(tmp_path / METRICS_FILE, kind="episode")
        assert episodes[0]["aborted"] is True
        assert episodes[0]["length"] == 3
        assert worker.replay.stats().total_appended == 6

    def test_replay_stores_unfiltered_actions(self, tiny_config):
        """Test that the env sees filtered commands while replay keeps the policy's choice."""
        env = RecordingQuadruped(episode_length=1000)
        worker, _ = make_worker(tiny_config("quadruped"), env)
        transitions = [worker.step() for _ in range(40)]
        stored = np.stack([t.action for t in transitions[1:]])
        reference = LowPassFilter.for_rate(12, env.control_rate_hz)
        expected = np.stack([env.spec.action.to_env(reference.apply(a)) for a in stored])
        np.testing.assert_allclose(np.stack(env.commands), expected, atol=1e-6)
        assert not np.allclose(np.stack(env.commands), np.stack([env.spec.action.to_env(a) for a in stored]))

    def test_constant_command_settles(self, tiny_config):
        """Test that a held policy output reaches the motors after a switch."""
        env = RecordingQuadruped(episode_length=1000)
        worker, _ = make_worker(tiny_config("quadruped"), env)
        outputs = iter([np.full(12, 0.5, dtype=np.float32)] * 20 + [np.full(12, -0.25, dtype=np.float32)] * 40)
        with patch.object(worker.runner, "act", side_effect=lambda deterministic=False: next(outputs)):
            for _ in range(61):
                worker.step()
        np.testing.assert_allclose(env.commands[0], env.spec.action.to_env(np.full(12, 0.5)), atol=1e-9)
        np.testing.assert_allclose(env.commands[-1], env.spec.action.to_env(np.full(12, -0.25)), atol=1e-3)

    def test_action_latency_is_recorded(self, tiny_config, tmp_path):
        """Test segment reports carry reward sums and latency."""
        metrics = MetricsLog(tmp_path / METRICS_FILE)
        worker, _ = make_worker(tiny_config(runtime={"report_every": 5}), ToggleEnv(), metrics)
        for _ in range(10):
            worker.step()
        segments = read_metrics(tmp_path / METRICS_FILE, kind="segment")
        assert [s["env_step"] for s in segments] == [5, 10]
        assert all(s["action_latency"] >= 0.0 for s in segments)


class TestLearner:
    """Tests for learner iterations."""

    def _learner(self, config, env):
        worker, agent = make_worker(config, env)
        return worker, Learner(agent, worker.replay, worker.board, config)

    def test_no_update_before_start_learning(self, tiny_config):
        """Test prefill purity of parameters and snapshots."""
        worker, learner = self._learner(tiny_config(general={"start_learning": 100}), ToggleEnv())
        before = {k: v.clone() for k, v in learner.agent.world.state_dict().items()}
        for _ in range(99):
            worker.step()
            assert learner.step() is None
        for key, value in learner.agent.world.state_dict().items():
            assert torch.equal(before[key], value)
        assert learner.board.published == 0
        assert learner.agent.world_opt.version == 0

        worker.step()
        metrics = learner.step()
        assert metrics["learner_step"] == 1
        assert metrics["env_total"] == 100
        assert learner.board.fetch_latest().version == 1

    def test_non_finite_gradients_skip_the_iteration(self, tiny_config, mocker):
        """Test that a rejected update is counted and nothing is published."""
        worker, learner = self._learner(tiny_config(), ToggleEnv())
        for _ in range(10):
            worker.step()
        train = mocker.patch.object(learner.agent, "train", side_effect=NonFiniteGradientError("world_model"))
        assert learner.step() is None
        train.assert_called_once()
        assert learner.skipped == 1
        assert learner.board.published == 0

    @pytest.mark.asyncio
    async def test_loop_survives_unexpected_exceptions(self, mocker):
        """Test that an error outside the domain hierarchy is logged and the loop keeps iterating."""
        learner = CountingLearner(cost=0.0)
        real_step = learner.step
        failures = [RuntimeError("CUDA error: device-side assert triggered")]

        def flaky():
            if failures:
                raise failures.pop()
            return real_step()

        step = mocker.patch.object(learner, "step", side_effect=flaky)
        steps = await learner_loop(learner, asyncio.Event(), max_learner_steps=3, idle_wait=0.0)
        assert steps == 3
        assert step.call_count == 4

    @pytest.mark.asyncio
    async def test_learner_runs_many_iterations_per_slow_env_step(self, tiny_config):
        """Test that learner progress is not tied to the environment rate."""
        config = tiny_config(general={"start_learning": 10 ** 6})
        worker, _ = make_worker(config, SlowToggle(delay=0.2))
        learner = CountingLearner(cost=0.0005)
        stop = asyncio.Event()
        actor_task = asyncio.create_task(actor_loop(worker, stop, max_env_steps=4))
        learner_task = asyncio.create_task(learner_loop(learner, stop))
        await actor_task
        stop.set()
        await learner_task
        env_steps = worker.steps - 1
        assert learner.steps >= 50 * env_steps

    @pytest.mark.asyncio
    async def test_actor_does_not_wait_for_gradients(self, tiny_config):
        """Test that a slow learner iteration does not delay actions."""
        worker, _ = make_worker(tiny_config(), ToggleEnv(episode_length=1000))
        learner = CountingLearner(cost=1.0)
        stop = asyncio.Event()
        learner_task = asyncio.create_task(learner_loop(learner, stop, max_learner_steps=1))
        started = time.perf_counter()
        await actor_loop(worker, stop, max_env_steps=20)
        elapsed = time.perf_counter() - started
        assert learner.steps == 0
        assert elapsed < 1.0
        assert worker.last_action_latency < 0.5
        await learner_task


class TestSession:
    """Tests for the concurrent training session."""

    @pytest.mark.asyncio
    async def test_env_budget_stops_run_and_writes_artifacts(self, tiny_config, tmp_path):
        """Test a short budgeted run end to end."""
        config = tiny_config(runtime={"env_steps": 30})
        summary = await run_training_async(config, tmp_path / "run", device="cpu")
        assert summary.env_steps == 30
        assert summary.checkpoint.exists()
        assert (tmp_path / "run" / CONFIG_FILE).exists()
        assert (tmp_path / "run" / "replay").exists()
        manifest = read_manifest(summary.checkpoint)
        assert manifest["counters"]["learner_steps"] == summary.learner_steps
        assert manifest["replay"]["total_appended"] == 30

    @pytest.mark.asyncio
    async def test_stop_event_drains_and_flushes_checkpoint(self, tiny_config, tmp_path):
        """Test graceful shutdown on an external stop."""
        config = tiny_config()
        stop = asyncio.Event()
        asyncio.get_running_loop().call_later(1.5, stop.set)
        summary = await run_training_async(config, tmp_path / "run", stop=stop, device="cpu")
        assert summary.env_steps > 0
        assert read_manifest(summary.checkpoint)["counters"]["learner_steps"] == summary.learner_steps
        kinds = {record["kind"] for record in read_metrics(tmp_path / "run" / METRICS_FILE)}
        assert "episode" in kinds or "segment" in kinds
