"""Observation and action space descriptors."""
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from core.errors import ConfigError, OutOfRangeError, ShapeMismatchError, NonFiniteError

IMAGE = "image"
VECTOR = "vector"
CONTINUOUS = "continuous"
DISCRETE = "discrete"


@dataclass(frozen=True)
class ModalitySpec:
    """One named observation modality.

    Images are ``(height, width, channels)``; vectors are flat ``(dim,)``.
    """

    name: str
    kind: str
    shape: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        if self.kind not in (IMAGE, VECTOR):
            raise ConfigError(f"spec.{self.name}.kind", f"expected image or vector, got {self.kind!r}")
        if not self.shape or any(s <= 0 for s in self.shape):
            raise ConfigError(f"spec.{self.name}.shape", f"shape must be strictly positive, got {self.shape}")
        if self.kind == IMAGE and len(self.shape) != 3:
            raise ConfigError(f"spec.{self.name}.shape", "images must be (height, width, channels)")
        if self.kind == VECTOR and len(self.shape) != 1:
            raise ConfigError(f"spec.{self.name}.shape", "vectors must be one-dimensional")

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "kind": self.kind, "shape": list(self.shape)}


@dataclass(frozen=True)
class ActionSpace:
    """Continuous box ``[low, high]^dim`` or discrete set ``{0..n-1}``.

    Policies always work in a normalized encoding: continuous actions live in
    ``[-1, 1]^dim`` and discrete actions are one-hot vectors of length ``n``.
    The all-zeros vector is the designated null action for both kinds.
    """

    kind: str
    dim: int = 0
    n: int = 0
    low: tuple[float, ...] = ()
    high: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == CONTINUOUS:
            if self.dim <= 0:
                raise ConfigError("spec.action.dim", f"must be positive, got {self.dim}")
            low = self.low or (-1.0,) * self.dim
            high = self.high or (1.0,) * self.dim
            low = tuple(float(v) for v in np.broadcast_to(np.asarray(low, dtype=np.float64), (self.dim,)))
            high = tuple(float(v) for v in np.broadcast_to(np.asarray(high, dtype=np.float64), (self.dim,)))
            if any(lo >= hi for lo, hi in zip(low, high)):
                raise ConfigError("spec.action.low", "low must be strictly below high in every dimension")
            object.__setattr__(self, "low", low)
            object.__setattr__(self, "high", high)
        elif self.kind == DISCRETE:
            if self.n < 2:
                raise ConfigError("spec.action.n", f"discrete spaces need n >= 2, got {self.n}")
        else:
            raise ConfigError("spec.action.kind", f"expected continuous or discrete, got {self.kind!r}")

    @classmethod
    def continuous(cls, dim: int, low: float | tuple = -1.0, high: float | tuple = 1.0) -> "ActionSpace":
        low = tuple(np.broadcast_to(np.asarray(low, dtype=np.float64), (dim,)).tolist())
        high = tuple(np.broadcast_to(np.asarray(high, dtype=np.float64), (dim,)).tolist())
        return cls(kind=CONTINUOUS, dim=dim, low=low, high=high)

    @classmethod
    def discrete(cls, n: int) -> "ActionSpace":
        return cls(kind=DISCRETE, n=n)

    @property
    def is_discrete(self) -> bool:
        return self.kind == DISCRETE

    @property
    def size(self) -> int:
        """Length of the normalized action vector."""
        return self.n if self.is_discrete else self.dim

    def null(self) -> np.ndarray:
        return np.zeros(self.size, dtype=np.float32)

    def encode(self, action: Any) -> np.ndarray:
        """Normalized float32 vector for an index or vector action.

        Raises:
            ShapeMismatchError: If a vector has the wrong length.
            OutOfRangeError: If a discrete index is outside ``[0, n)``.
        """
        if self.is_discrete and np.ndim(action) == 0:
            index = int(action)
            if not 0 <= index < self.n:
                raise OutOfRangeError("action", f"index {index} outside [0, {self.n})")
            vec = np.zeros(self.n, dtype=np.float32)
            vec[index] = 1.0
            return vec
        vec = np.asarray(action, dtype=np.float32).reshape(-1)
        if vec.shape != (self.size,):
            raise ShapeMismatchError("action", f"expected ({self.size},), got {vec.shape}")
        return vec

    def check(self, action: Any) -> None:
        """Raise unless ``action`` is a valid normalized action or the null action."""
        if self.is_discrete and np.ndim(action) == 0:
            self.encode(action)
            return
        vec = np.asarray(action, dtype=np.float64).reshape(-1)
        if vec.shape != (self.size,):
            raise ShapeMismatchError("action", f"expected ({self.size},), got {vec.shape}")
        if not np.all(np.isfinite(vec)):
            raise NonFiniteError("action", "contains NaN or infinity")
        if self.is_discrete:
            if not np.all((vec == 0.0) | (vec == 1.0)) or vec.sum() > 1.0:
                raise OutOfRangeError("action", "discrete actions must be one-hot or null")
        elif np.any(vec < -1.0) or np.any(vec > 1.0):
            raise OutOfRangeError("action", "continuous actions must lie in [-1, 1]")

    def sample_uniform(self, rng: np.random.Generator) -> np.ndarray:
        if self.is_discrete:
            return self.encode(rng.integers(self.n))
        return rng.uniform(-1.0, 1.0, size=self.dim).astype(np.float32)

    def to_env(self, action: np.ndarray) -> Any:
        """Convert a normalized action into what the environment consumes."""
        if self.is_discrete:
            return int(np.argmax(action))
        low = np.asarray(self.low, dtype=np.float64)
        high = np.asarray(self.high, dtype=np.float64)
        clipped = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
        return low + (clipped + 1.0) * 0.5 * (high - low)

    def to_dict(self) -> dict[str, Any]:
        if self.is_discrete:
            return {"kind": DISCRETE, "n": self.n}
        return {"kind": CONTINUOUS, "dim": self.dim, "low": list(self.low), "high": list(self.high)}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ActionSpace":
        if data.get("kind") == DISCRETE:
            return cls.discrete(int(data["n"]))
        return cls(kind=data.get("kind", ""), dim=int(data.get("dim", 0)),
                   low=tuple(data.get("low", ())), high=tuple(data.get("high", ())))


@dataclass(frozen=True)
class SpaceSpec:
    """Observation modalities plus the action space of one environment."""

    modalities: tuple[ModalitySpec, ...]
    action: ActionSpace
    _index: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "modalities", tuple(self.modalities))
        if not self.modalities:
            raise ConfigError("spec.modalities", "at least one modality is required")
        names = [m.name for m in self.modalities]
        if len(set(names)) != len(names):
            raise ConfigError("spec.modalities", f"duplicate modality names in {names}")
        object.__setattr__(self, "_index", {m.name: m for m in self.modalities})

    def __getitem__(self, name: str) -> ModalitySpec:
        return self._index[name]

    def __contains__(self, name: str) -> bool:
        return name in self._index

    @property
    def names(self) -> list[str]:
        return [m.name for m in self.modalities]

    @property
    def image_keys(self) -> list[str]:
        return [m.name for m in self.modalities if m.kind == IMAGE]

    @property
    def vector_keys(self) -> list[str]:
        return [m.name for m in self.modalities if m.kind == VECTOR]

    def to_dict(self) -> dict[str, Any]:
        return {
            "modalities": [m.to_dict() for m in self.modalities],
            "action": self.action.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SpaceSpec":
        modalities = tuple(
            ModalitySpec(name=m["name"], kind=m["kind"], shape=tuple(m["shape"]))
            for m in data["modalities"]
        )
        return cls(modalities=modalities, action=ActionSpace.from_dict(data["action"]))
