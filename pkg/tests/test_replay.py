"""Tests for the FIFO replay buffer."""
import threading

import numpy as np
import pytest
from scipy import stats as scipy_stats

from core.errors import CheckpointError, InsufficientDataError
from core.spaces import ActionSpace
from core.types import Transition
from replay.buffer import ReplayBuffer, ReplayStats, SequenceBatch

SPACE = ActionSpace.discrete(3)


def make_transition(index: int, is_first: bool = False, is_last: bool = False) -> Transition:
    """Transition whose reward and observation encode its insertion index."""
    obs = {"x": np.array([float(index)], dtype=np.float32)}
    action = SPACE.null() if is_first else SPACE.encode(index % 3)
    return Transition(obs, action, 0.0 if is_first else float(index), is_first=is_first, is_last=is_last)


def fill(buffer: ReplayBuffer, count: int, start: int = 0) -> None:
    for i in range(start, start + count):
        buffer.append(make_transition(i))


class TestAppendAndStats:
    """Tests for FIFO appends and counters."""

    def test_fresh_buffer_stats(self):
        """Test that a new buffer reports zeros."""
        assert ReplayBuffer(10, SPACE).stats() == ReplayStats(0, 0, 0)

    def test_append_to_empty_buffer(self):
        """Test that one append gives length 1."""
        buffer = ReplayBuffer(10, SPACE)
        buffer.append(make_transition(0))
        assert len(buffer) == 1

    def test_capacity_three_keeps_last_three(self):
        """Test strict oldest-first eviction."""
        buffer = ReplayBuffer(3, SPACE)
        for i in range(1, 5):
            buffer.append(make_transition(i))
        assert [t.reward for t in buffer.items()] == [2.0, 3.0, 4.0]

    def test_total_appended_exceeds_length_after_eviction(self):
        """Test that total_appended is monotone past capacity."""
        buffer = ReplayBuffer(5, SPACE)
        fill(buffer, 12)
        stats = buffer.stats()
        assert stats.length == 5
        assert stats.total_appended == 12

    def test_one_episode_counts_once(self):
        """Test that a 100-step episode is one episode."""
        buffer = ReplayBuffer(1000, SPACE)
        buffer.append(make_transition(0, is_first=True))
        for i in range(1, 100):
            buffer.append(make_transition(i, is_last=i == 99))
        assert buffer.stats().episodes_seen == 1

    def test_invalid_capacity_is_rejected(self):
        """Test that capacity must be positive."""
        with pytest.raises(ValueError):
            ReplayBuffer(0)

    @pytest.mark.slow
    def test_default_capacity_bound(self):
        """Test 10^6 + 1 appends at default capacity."""
        buffer = ReplayBuffer(action_space=SPACE)
        shared = make_transition(1)
        for _ in range(10 ** 6 + 1):
            buffer.append(shared)
        assert buffer.stats().length == 10 ** 6
        assert buffer.stats().total_appended == 10 ** 6 + 1


class TestSample:
    """Tests for uniform window sampling."""

    def test_too_few_transitions_raise(self):
        """Test that sampling needs at least T transitions."""
        buffer = ReplayBuffer(10, SPACE)
        fill(buffer, 3)
        with pytest.raises(InsufficientDataError):
            buffer.sample(2, 4, np.random.default_rng(0))

    def test_exactly_t_items_gives_the_only_window(self):
        """Test that every row is the single valid window."""
        buffer = ReplayBuffer(10, SPACE)
        fill(buffer, 4)
        batch = buffer.sample(5, 4, np.random.default_rng(0))
        assert batch.reward.shape == (5, 4)
        for row in batch.reward:
            np.testing.assert_array_equal(row, [0.0, 1.0, 2.0, 3.0])

    def test_same_seed_gives_identical_batches(self):
        """Test sampling determinism."""
        buffer = ReplayBuffer(100, SPACE)
        fill(buffer, 60)
        a = buffer.sample(8, 5, np.random.default_rng(42))
        b = buffer.sample(8, 5, np.random.default_rng(42))
        np.testing.assert_array_equal(a.reward, b.reward)
        np.testing.assert_array_equal(a.action, b.action)
        np.testing.assert_array_equal(a.observation["x"], b.observation["x"])

    def test_windows_are_contiguous_and_respect_eviction(self):
        """Test that windows are consecutive insertions from stored data only."""
        buffer = ReplayBuffer(20, SPACE)
        fill(buffer, 50)
        batch = buffer.sample(64, 6, np.random.default_rng(1))
        starts = batch.reward[:, 0]
        assert starts.min() >= 30
        assert starts.max() <= 44
        np.testing.assert_array_equal(batch.reward - starts[:, None], np.tile(np.arange(6.0), (64, 1)))

    def test_is_first_flags_are_preserved_mid_window(self):
        """Test that windows may cross episode boundaries verbatim."""
        buffer = ReplayBuffer(10, SPACE)
        buffer.append(make_transition(0))
        buffer.append(make_transition(1, is_last=True))
        buffer.append(make_transition(2, is_first=True))
        buffer.append(make_transition(3))
        batch = buffer.sample(1, 4, np.random.default_rng(0))
        np.testing.assert_array_equal(batch.is_first[0], [False, False, True, False])
        np.testing.assert_array_equal(batch.is_last[0], [False, True, False, False])

    def test_index_actions_are_encoded(self):
        """Test that integer actions become one-hot vectors in the batch."""
        buffer = ReplayBuffer(10, SPACE)
        for i in range(3):
            buffer.append(Transition({"x": np.zeros(1, dtype=np.float32)}, i, 0.0))
        batch = buffer.sample(1, 3, np.random.default_rng(0))
        np.testing.assert_array_equal(batch.action[0], np.eye(3, dtype=np.float32))

    def test_to_torch_scales_images(self):
        """Test that 8-bit images become floats in [0, 1]."""
        t = Transition({"image": np.full((2, 2, 3), 255, dtype=np.uint8)}, SPACE.null(), 0.0)
        tensors = SequenceBatch.from_sequences([[t, t]], SPACE).to_torch()
        assert float(tensors.observation["image"].max()) == 1.0
        assert tensors.observation["image"].shape == (1, 2, 2, 2, 3)

    def test_window_starts_are_uniform(self):
        """Test chi-square uniformity of 10^5 draws over 1000 windows."""
        length = 4
        buffer = ReplayBuffer(2000, SPACE)
        fill(buffer, 1000 + length - 1)
        rng = np.random.default_rng(7)
        counts = np.zeros(1000)
        for _ in range(100):
            starts = buffer.sample(1000, length, rng).reward[:, 0].astype(int)
            counts += np.bincount(starts, minlength=1000)
        assert counts.sum() == 10 ** 5
        assert scipy_stats.chisquare(counts).pvalue > 0.001


def _stress(appends: int, capacity: int, length: int) -> tuple[int, int]:
    """One writer appending while one reader samples; returns (windows checked, torn windows)."""
    buffer = ReplayBuffer(capacity, SPACE)
    fill(buffer, capacity)
    shared = [make_transition(i) for i in range(capacity, capacity + appends)]
    done = threading.Event()

    def writer():
        for t in shared:
            buffer.append(t)
        done.set()

    thread = threading.Thread(target=writer)
    thread.start()
    rng = np.random.default_rng(0)
    checked = torn = 0
    expected = np.arange(length, dtype=np.float32)
    while not done.is_set() or checked == 0:
        batch = buffer.sample(8, length, rng)
        for row in batch.reward:
            checked += 1
            if not np.array_equal(row - row[0], expected):
                torn += 1
    thread.join()
    return checked, torn


class TestConcurrency:
    """Tests for the one-writer/one-reader contract."""

    def test_no_torn_windows_under_concurrent_appends(self):
        """Test that a reader racing a writer only sees intact windows."""
        checked, torn = _stress(appends=20_000, capacity=64, length=8)
        assert checked > 0
        assert torn == 0

    @pytest.mark.slow
    def test_no_torn_windows_at_full_scale(self):
        """Test the one-million-operation stress run."""
        checked, torn = _stress(appends=10 ** 6, capacity=256, length=16)
        assert checked > 0
        assert torn == 0


class TestSpill:
    """Tests for saving and reloading replay."""

    def test_save_and_load_preserve_contents_and_stats(self, tmp_path):
        """Test that a reloaded buffer samples identically."""
        buffer = ReplayBuffer(25, SPACE)
        buffer.append(make_transition(0, is_first=True))
        fill(buffer, 39, start=1)
        buffer.save(tmp_path / "replay", chunk_size=7)

        loaded = ReplayBuffer.load(tmp_path / "replay", SPACE)
        assert loaded.stats() == buffer.stats()
        assert loaded.items() == buffer.items()
        a = buffer.sample(4, 5, np.random.default_rng(3))
        b = loaded.sample(4, 5, np.random.default_rng(3))
        np.testing.assert_array_equal(a.reward, b.reward)

    def test_missing_manifest_raises(self, tmp_path):
        """Test that a directory without a manifest is rejected."""
        with pytest.raises(CheckpointError):
            ReplayBuffer.load(tmp_path)
