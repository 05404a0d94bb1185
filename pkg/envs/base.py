"""Environment contract consumed by the actor."""
from abc import ABC, abstractmethod
from typing import Any

import numpy as np

from core.codec import decode_state, encode_state
from core.spaces import SpaceSpec

Observation = dict[str, np.ndarray]


class Environment(ABC):
    """``reset() -> obs`` and ``step(action) -> (obs, reward, is_last)``.

    ``step`` receives the action already converted by
    ``spec.action.to_env`` (an index for discrete spaces, a vector in
    ``[low, high]`` for continuous ones). Per-step task events are exposed in
    :attr:`info` after every ``step``.
    """

    name: str = "env"
    control_rate_hz: float = 10.0
    fixed_attributes: tuple[str, ...] = ("_spec",)

    def __init__(self):
        self.info: dict[str, Any] = {}

    @property
    @abstractmethod
    def spec(self) -> SpaceSpec:
        ...

    @abstractmethod
    def reset(self) -> Observation:
        ...

    @abstractmethod
    def step(self, action: Any) -> tuple[Observation, float, bool]:
        ...

    def get_state(self) -> dict[str, Any]:
        """Every mutable attribute, RNG included, in JSON-safe form."""
        return {
            name: encode_state(value)
            for name, value in vars(self).items() if name not in self.fixed_attributes
        }

    def set_state(self, state: dict[str, Any]) -> None:
        for name, value in state.items():
            setattr(self, name, decode_state(value))

    def close(self) -> None:
        pass
