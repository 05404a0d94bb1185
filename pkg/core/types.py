"""Immutable domain records: transitions and latent model states."""
from dataclasses import dataclass
from types import MappingProxyType
from typing import Any, Mapping

import numpy as np
import torch

from core.errors import (
    MissingModalityError,
    NonFiniteError,
    OutOfRangeError,
    ShapeMismatchError,
)
from core.spaces import IMAGE, SpaceSpec


def _frozen_array(value: Any) -> np.ndarray:
    array = np.array(value)
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class Transition:
    """One environment step.

    ``action`` is the action that led INTO ``observation``; on the first step
    of an episode it is the null action and ``reward`` is zero.
    """

    observation: Mapping[str, np.ndarray]
    action: np.ndarray | int
    reward: float
    is_first: bool = False
    is_last: bool = False

    def __post_init__(self):
        obs = {name: _frozen_array(value) for name, value in self.observation.items()}
        object.__setattr__(self, "observation", MappingProxyType(obs))
        if np.ndim(self.action) == 0 and np.issubdtype(np.asarray(self.action).dtype, np.integer):
            object.__setattr__(self, "action", int(self.action))
        else:
            object.__setattr__(self, "action", _frozen_array(np.asarray(self.action, dtype=np.float32)))
        object.__setattr__(self, "reward", float(self.reward))
        object.__setattr__(self, "is_first", bool(self.is_first))
        object.__setattr__(self, "is_last", bool(self.is_last))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Transition):
            return NotImplemented
        if set(self.observation) != set(other.observation):
            return False
        for name, value in self.observation.items():
            theirs = other.observation[name]
            if value.dtype != theirs.dtype or not np.array_equal(value, theirs):
                return False
        return (
            np.array_equal(np.asarray(self.action), np.asarray(other.action))
            and np.asarray(self.action).dtype == np.asarray(other.action).dtype
            and self.reward == other.reward
            and self.is_first == other.is_first
            and self.is_last == other.is_last
        )

    __hash__ = None


def validate_observation(observation: Mapping[str, Any], spec: SpaceSpec) -> None:
    """Check every declared modality for presence, shape, finiteness and range.

    Raises:
        MissingModalityError: A declared modality is absent.
        ShapeMismatchError: A modality has the wrong shape.
        NonFiniteError: A float modality contains NaN or infinity.
        OutOfRangeError: A float image has pixels outside ``[0, 1]``.
    """
    for modality in spec.modalities:
        if modality.name not in observation:
            raise MissingModalityError(modality.name, "missing from observation")
        value = np.asarray(observation[modality.name])
        if value.shape != modality.shape:
            raise ShapeMismatchError(modality.name, f"expected {modality.shape}, got {value.shape}")
        if modality.kind == IMAGE and value.dtype == np.uint8:
            continue
        if not np.issubdtype(value.dtype, np.number):
            raise ShapeMismatchError(modality.name, f"unsupported dtype {value.dtype}")
        if not np.all(np.isfinite(value)):
            raise NonFiniteError(modality.name, "contains NaN or infinity")
        if modality.kind == IMAGE and (value.min() < 0.0 or value.max() > 1.0):
            raise OutOfRangeError(modality.name, "float images must lie in [0, 1]")


def validate_transition(t: Transition, spec: SpaceSpec) -> None:
    """Return silently iff ``t`` conforms to ``spec``; raise naming the modality otherwise."""
    validate_observation(t.observation, spec)
    spec.action.check(t.action)
    if not np.isfinite(t.reward):
        raise NonFiniteError("reward", "reward must be finite")
    if t.is_first:
        if np.any(spec.action.encode(t.action) != 0.0):
            raise OutOfRangeError("action", "first step of an episode must carry the null action")
        if t.reward != 0.0:
            raise OutOfRangeError("reward", "first step of an episode must carry zero reward")


@dataclass(frozen=True)
class LatentState:
    """Model state ``(h, z)`` with arbitrary leading batch dimensions.

    ``h`` has shape ``(..., deter)`` and ``z`` has shape ``(..., latents, classes)``.
    """

    h: torch.Tensor
    z: torch.Tensor

    def features(self) -> torch.Tensor:
        return torch.cat([self.h, self.z.flatten(-2)], dim=-1)

    @property
    def batch_shape(self) -> torch.Size:
        return self.h.shape[:-1]

    def detach(self) -> "LatentState":
        return LatentState(self.h.detach(), self.z.detach())

    def flatten(self) -> "LatentState":
        """Collapse all leading dimensions into one."""
        return LatentState(self.h.reshape(-1, self.h.shape[-1]), self.z.reshape(-1, *self.z.shape[-2:]))

    def __getitem__(self, index) -> "LatentState":
        return LatentState(self.h[index], self.z[index])

    @staticmethod
    def stack(states: list["LatentState"], dim: int = 0) -> "LatentState":
        return LatentState(
            torch.stack([s.h for s in states], dim=dim),
            torch.stack([s.z for s in states], dim=dim),
        )
