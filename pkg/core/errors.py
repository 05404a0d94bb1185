"""Error hierarchy shared by every package in the project."""


class DreamerError(Exception):
    """Base class for all errors raised by this project."""


class ConfigError(DreamerError):
    """Invalid, unknown or missing configuration field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class ValidationError(DreamerError):
    """A value does not conform to its declared space.

    Attributes:
        modality: Name of the offending modality (or ``"action"``/``"reward"``).
    """

    def __init__(self, modality: str, message: str):
        self.modality = modality
        super().__init__(f"{modality}: {message}")


class ShapeMismatchError(ValidationError):
    """Shape differs from the declared one."""


class OutOfRangeError(ValidationError):
    """Value lies outside its declared bounds."""


class NonFiniteError(ValidationError):
    """Value contains NaN or infinity."""


class MissingModalityError(ValidationError):
    """A declared modality is absent from an observation."""


class InsufficientDataError(DreamerError):
    """Replay holds fewer transitions than the requested sequence length."""


class NonFiniteGradientError(DreamerError):
    """Optimizer step skipped because a gradient was NaN or infinite."""

    def __init__(self, param_set: str):
        self.param_set = param_set
        super().__init__(f"non-finite gradient in '{param_set}', step skipped")


class NonFiniteLossError(DreamerError):
    """Loss evaluated to NaN or infinity.

    Attributes:
        components: Per-component loss values at the time of failure.
    """

    def __init__(self, components: dict[str, float]):
        self.components = dict(components)
        detail = ", ".join(f"{k}={v:.4g}" for k, v in sorted(self.components.items()))
        super().__init__(f"non-finite loss ({detail})")


class InvalidStateError(DreamerError):
    """An operation was called in a state that does not allow it."""


class SpecMismatchError(DreamerError):
    """A checkpoint or batch was produced for a different space spec."""


class CheckpointError(DreamerError):
    """Checkpoint is unreadable or has an unsupported format."""


class MetricsWriteError(DreamerError):
    """The metrics log could not be written."""


class EnvironmentFaultError(DreamerError):
    """An environment raised while stepping or resetting."""
