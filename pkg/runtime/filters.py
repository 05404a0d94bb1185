"""Butterworth low-pass filtering of continuous motor commands."""
import numpy as np
from scipy import signal

from core.errors import ConfigError


class LowPassFilter:
    """Per-dimension Butterworth low-pass with steady-state initialization.

    The first sample after construction or :meth:`reset` primes the delay
    line as if that input had been held forever, so the first output equals
    the first input and nothing from before the reset leaks through.
    """

    def __init__(
        self,
        dim: int,
        cutoff_hz: float,
        rate_hz: float,
        order: int = 2,
        low: float | np.ndarray = -1.0,
        high: float | np.ndarray = 1.0,
    ):
        if not 0.0 < cutoff_hz < rate_hz / 2.0:
            raise ConfigError("runtime.cutoff_hz", f"must lie in (0, {rate_hz / 2.0}), got {cutoff_hz}")
        self.dim = dim
        self.cutoff_hz = cutoff_hz
        self.rate_hz = rate_hz
        self.b, self.a = signal.butter(order, cutoff_hz, btype="low", fs=rate_hz)
        if not self.is_stable():
            raise ConfigError("runtime.cutoff_hz", "filter poles lie outside the unit circle")
        self._zi_unit = signal.lfilter_zi(self.b, self.a)
        self._zi: np.ndarray | None = None
        self.low = np.broadcast_to(np.asarray(low, dtype=np.float64), (dim,))
        self.high = np.broadcast_to(np.asarray(high, dtype=np.float64), (dim,))

    @classmethod
    def for_rate(cls, dim: int, rate_hz: float, cutoff_hz: float | None = None, order: int = 2) -> "LowPassFilter":
        """Default cutoff is a fifth of the control rate."""
        return cls(dim, cutoff_hz if cutoff_hz is not None else rate_hz / 5.0, rate_hz, order)

    def is_stable(self) -> bool:
        return bool(np.all(np.abs(np.roots(self.a)) < 1.0))

    def gain_at(self, frequency_hz: float) -> float:
        """Magnitude of the transfer function at ``frequency_hz``."""
        _, response = signal.freqz(self.b, self.a, worN=[frequency_hz], fs=self.rate_hz)
        return float(np.abs(response[0]))

    def reset(self) -> None:
        self._zi = None

    def get_state(self) -> np.ndarray | None:
        """Delay line, or ``None`` before the first sample."""
        return None if self._zi is None else self._zi.copy()

    def set_state(self, zi: np.ndarray | None) -> None:
        self._zi = None if zi is None else np.array(zi, dtype=np.float64).reshape(self.dim, -1)

    def apply(self, raw: np.ndarray) -> np.ndarray:
        x = np.asarray(raw, dtype=np.float64).reshape(self.dim, 1)
        if self._zi is None:
            self._zi = np.outer(x[:, 0], self._zi_unit)
        y, self._zi = signal.lfilter(self.b, self.a, x, axis=-1, zi=self._zi)
        return np.clip(y[:, 0], self.low, self.high)


def filter_apply(f: LowPassFilter, raw: np.ndarray) -> np.ndarray:
    return f.apply(raw)
