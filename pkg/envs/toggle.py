"""Two-state environment with known dynamics: action 1 flips a bit, action 0 keeps it."""
import numpy as np

from core.spaces import VECTOR, ActionSpace, ModalitySpec, SpaceSpec
from envs.base import Environment, Observation


class ToggleEnv(Environment):
    name = "toggle"
    control_rate_hz = 10.0

    def __init__(self, seed: int = 0, episode_length: int = 50):
        super().__init__()
        self.rng = np.random.default_rng(seed)
        self.episode_length = episode_length
        self._spec = SpaceSpec(
            modalities=(ModalitySpec("bit", VECTOR, (1,)),),
            action=ActionSpace.discrete(2),
        )
        self.bit = 0
        self.steps = 0

    @property
    def spec(self) -> SpaceSpec:
        return self._spec

    def _observation(self) -> Observation:
        return {"bit": np.array([float(self.bit)], dtype=np.float32)}

    def reset(self) -> Observation:
        self.bit = int(self.rng.integers(2))
        self.steps = 0
        self.info = {}
        return self._observation()

    def step(self, action) -> tuple[Observation, float, bool]:
        self.bit ^= int(action) & 1
        self.steps += 1
        self.info = {"bit": self.bit}
        return self._observation(), float(self.bit), self.steps >= self.episode_length
