"""FIFO replay buffer with lock-light sequence sampling and an on-disk spill format."""
import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
import torch

from config.logging_config import get_logger
from core.codec import decode_transition, encode_transition
from core.errors import CheckpointError, InsufficientDataError
from core.spaces import ActionSpace
from core.types import Transition

DEFAULT_CAPACITY = 1_000_000
SPILL_FORMAT_VERSION = 1
_MAX_RESAMPLE_ROUNDS = 100


class ReplayStats(NamedTuple):
    length: int
    total_appended: int
    episodes_seen: int


@dataclass(frozen=True)
class TensorBatch:
    """Float tensors ready for the world model, shaped ``(B, T, ...)``."""

    observation: dict[str, torch.Tensor]
    action: torch.Tensor
    reward: torch.Tensor
    is_first: torch.Tensor
    is_last: torch.Tensor


@dataclass(frozen=True)
class SequenceBatch:
    """``B`` contiguous sequences of ``T`` transitions as stacked numpy arrays.

    Images keep their stored dtype (8-bit in practice) until :meth:`to_torch`.
    """

    observation: dict[str, np.ndarray]
    action: np.ndarray
    reward: np.ndarray
    is_first: np.ndarray
    is_last: np.ndarray

    @property
    def batch_size(self) -> int:
        return int(self.reward.shape[0])

    @property
    def length(self) -> int:
        return int(self.reward.shape[1])

    @classmethod
    def from_sequences(
        cls, sequences: list[list[Transition]], action_space: ActionSpace | None = None
    ) -> "SequenceBatch":
        def action_vector(t: Transition) -> np.ndarray:
            if isinstance(t.action, int):
                if action_space is None:
                    raise ValueError("index actions need an action space to encode")
                return action_space.encode(t.action)
            return np.asarray(t.action, dtype=np.float32)

        names = list(sequences[0][0].observation)
        observation = {
            name: np.stack([np.stack([t.observation[name] for t in seq]) for seq in sequences])
            for name in names
        }
        return cls(
            observation=observation,
            action=np.stack([np.stack([action_vector(t) for t in seq]) for seq in sequences]),
            reward=np.array([[t.reward for t in seq] for seq in sequences], dtype=np.float32),
            is_first=np.array([[t.is_first for t in seq] for seq in sequences], dtype=bool),
            is_last=np.array([[t.is_last for t in seq] for seq in sequences], dtype=bool),
        )

    def to_torch(self, device: str | torch.device = "cpu") -> TensorBatch:
        """Convert to float32 tensors, scaling 8-bit images into ``[0, 1]``."""
        observation = {}
        for name, value in self.observation.items():
            tensor = torch.as_tensor(value, device=device)
            if value.dtype == np.uint8:
                tensor = tensor.to(torch.float32) / 255.0
            observation[name] = tensor.to(torch.float32)
        return TensorBatch(
            observation=observation,
            action=torch.as_tensor(self.action, dtype=torch.float32, device=device),
            reward=torch.as_tensor(self.reward, dtype=torch.float32, device=device),
            is_first=torch.as_tensor(self.is_first, device=device),
            is_last=torch.as_tensor(self.is_last, device=device),
        )


class ReplayBuffer:
    """Fixed-capacity FIFO of transitions addressed by absolute insertion index.

    Transition ``i`` lives in slot ``i % capacity``. One writer and one reader
    may run concurrently: the writer holds the lock only while it stores a
    reference and bumps the counter, and the reader gathers references
    without the lock and then discards any window the writer overwrote in
    the meantime.
    """

    def __init__(self, capacity: int = DEFAULT_CAPACITY, action_space: ActionSpace | None = None):
        if capacity <= 0:
            raise ValueError(f"capacity must be positive, got {capacity}")
        self._capacity = int(capacity)
        self._action_space = action_space
        self._slots: list[Transition | None] = [None] * self._capacity
        self._total = 0
        self._episodes = 0
        self._lock = threading.Lock()

    @property
    def capacity(self) -> int:
        return self._capacity

    def __len__(self) -> int:
        return min(self._total, self._capacity)

    def append(self, t: Transition) -> None:
        with self._lock:
            self._slots[self._total % self._capacity] = t
            self._total += 1
            if t.is_first:
                self._episodes += 1

    def stats(self) -> ReplayStats:
        with self._lock:
            return ReplayStats(min(self._total, self._capacity), self._total, self._episodes)

    def items(self) -> list[Transition]:
        """Stored transitions, oldest first."""
        with self._lock:
            total = self._total
            start = max(0, total - self._capacity)
            return [self._slots[i % self._capacity] for i in range(start, total)]

    def sample(self, batch_size: int, length: int, rng: np.random.Generator) -> SequenceBatch:
        """Draw ``batch_size`` windows of ``length`` uniformly over valid start positions.

        Raises:
            InsufficientDataError: If fewer than ``length`` transitions are stored.
        """
        with self._lock:
            total = self._total
        stored = min(total, self._capacity)
        if length <= 0 or stored < length:
            raise InsufficientDataError(f"need {length} transitions to sample, buffer holds {stored}")

        starts = self._draw_starts(batch_size, length, total, rng)
        sequences = [self._gather(s, length) for s in starts]

        for _ in range(_MAX_RESAMPLE_ROUNDS):
            with self._lock:
                total_after = self._total
            oldest = total_after - self._capacity
            stale = [i for i, s in enumerate(starts) if s < oldest]
            if not stale:
                break
            fresh = self._draw_starts(len(stale), length, total_after, rng)
            for i, s in zip(stale, fresh):
                starts[i] = s
                sequences[i] = self._gather(s, length)
        else:
            raise InsufficientDataError("writer kept overwriting sampled windows")

        return SequenceBatch.from_sequences(sequences, self._action_space)

    def _draw_starts(self, count: int, length: int, total: int, rng: np.random.Generator) -> list[int]:
        stored = min(total, self._capacity)
        oldest = total - stored
        offsets = rng.integers(0, stored - length + 1, size=count)
        return [int(oldest + o) for o in offsets]

    def _gather(self, start: int, length: int) -> list[Transition]:
        return [self._slots[(start + k) % self._capacity] for k in range(length)]

    def save(self, directory: str | Path, chunk_size: int = 1000) -> Path:
        """Spill stored transitions to ``directory`` as chunked ``.npz`` files plus ``manifest.json``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        with self._lock:
            total, episodes = self._total, self._episodes
            first = max(0, total - self._capacity)
            items = [self._slots[i % self._capacity] for i in range(first, total)]

        chunks = []
        for n, offset in enumerate(range(0, len(items), chunk_size)):
            name = f"chunk_{n:05d}.npz"
            payload = {
                f"t{k:06d}": np.frombuffer(encode_transition(t), dtype=np.uint8)
                for k, t in enumerate(items[offset:offset + chunk_size])
            }
            np.savez(directory / name, **payload)
            chunks.append({"file": name, "count": len(payload)})

        manifest = {
            "format_version": SPILL_FORMAT_VERSION,
            "capacity": self._capacity,
            "total_appended": total,
            "episodes_seen": episodes,
            "first_index": first,
            "chunks": chunks,
        }
        (directory / "manifest.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")
        get_logger().info(f"Spilled {len(items)} transitions to {directory}")
        return directory

    @classmethod
    def load(cls, directory: str | Path, action_space: ActionSpace | None = None) -> "ReplayBuffer":
        """Rebuild a buffer from :meth:`save` output with identical stats and slot layout.

        Raises:
            CheckpointError: If the manifest is missing or unsupported.
        """
        directory = Path(directory)
        manifest_path = directory / "manifest.json"
        if not manifest_path.exists():
            raise CheckpointError(f"replay manifest not found: {manifest_path}")
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        if manifest.get("format_version") != SPILL_FORMAT_VERSION:
            raise CheckpointError(f"unsupported replay spill format {manifest.get('format_version')}")

        buffer = cls(manifest["capacity"], action_space=action_space)
        index = manifest["first_index"]
        for chunk in manifest["chunks"]:
            with np.load(directory / chunk["file"], allow_pickle=False) as archive:
                for k in range(chunk["count"]):
                    buffer._slots[index % buffer._capacity] = decode_transition(archive[f"t{k:06d}"].tobytes())
                    index += 1
        if index != manifest["total_appended"]:
            raise CheckpointError(f"replay spill holds {index} transitions, manifest says {manifest['total_appended']}")
        buffer._total = manifest["total_appended"]
        buffer._episodes = manifest["episodes_seen"]
        return buffer
