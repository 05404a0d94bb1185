"""Immutable policy snapshots and the latest-wins board that hands them to the actor."""
import threading
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

import torch
from torch import nn

from core.errors import InvalidStateError

WORLD_PREFIX = "world."
ACTOR_PREFIX = "actor."
POLICY_WORLD_PARTS = ("encoders.", "fuse.", "rssm.")


@dataclass(frozen=True)
class PolicySnapshot:
    """Versioned copy of the parameters the actor needs: encoder, dynamics, actor head."""

    version: int
    tensors: Mapping[str, torch.Tensor]

    @classmethod
    def capture(cls, version: int, world: nn.Module, actor: nn.Module) -> "PolicySnapshot":
        tensors = {}
        with torch.no_grad():
            for name, value in world.state_dict().items():
                if name.startswith(POLICY_WORLD_PARTS):
                    tensors[WORLD_PREFIX + name] = value.detach().cpu().clone()
            for name, value in actor.state_dict().items():
                tensors[ACTOR_PREFIX + name] = value.detach().cpu().clone()
        return cls(version=version, tensors=MappingProxyType(tensors))

    def part(self, prefix: str) -> dict[str, torch.Tensor]:
        return {name[len(prefix):]: value for name, value in self.tensors.items() if name.startswith(prefix)}


class SnapshotBoard:
    """Single-slot mailbox: ``publish`` swaps one reference, ``fetch_latest`` reads it.

    Reads never take the lock, so fetching is wait-free with respect to a
    concurrent publish.
    """

    def __init__(self, initial: PolicySnapshot):
        self._latest = initial
        self._publish_lock = threading.Lock()
        self.published = 0

    def publish(self, snapshot: PolicySnapshot) -> None:
        with self._publish_lock:
            if snapshot.version < self._latest.version:
                raise InvalidStateError(
                    f"snapshot version {snapshot.version} is older than published {self._latest.version}"
                )
            self._latest = snapshot
            self.published += 1

    def fetch_latest(self) -> PolicySnapshot:
        return self._latest
