"""Run configuration: sectioned YAML file, key=value overrides and environment getters."""
import os
import types
import typing
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

from core.errors import ConfigError

DEFAULT_PRESET_DIR = Path(__file__).parent.parent / "presets"


@dataclass
class GeneralConfig:
    replay_capacity: int = 1_000_000
    start_learning: int = 10_000
    batch_size: int = 32
    batch_length: int = 32
    mlp_layers: int = 4
    mlp_units: int = 512


@dataclass
class WorldModelConfig:
    rssm_size: int = 512
    latents: int = 32
    classes: int = 32
    kl_balance: float = 0.8
    kl_scale: float = 1.0
    free_nats: float = 0.0
    image_size: int = 64
    cnn_depth: int = 32
    embed_size: int = 1024
    reward_from_successor: bool = True


@dataclass
class ActorCriticConfig:
    horizon: int = 15
    discount: float = 0.95
    return_lambda: float = 0.95
    target_interval: int = 100
    eta: float = 3e-4
    baseline: str = "target"
    gradient: str = "auto"
    min_log_std: float = -5.0
    max_log_std: float = 2.0


@dataclass
class OptimizerConfig:
    grad_clip: float = 100.0
    lr: float = 1e-4
    adam_eps: float = 1e-6


@dataclass
class RuntimeConfig:
    seed: int = 0
    control_rate_hz: float | None = None
    cutoff_hz: float | None = None
    filter_order: int = 2
    env_steps: int | None = None
    learner_steps: int | None = None
    checkpoint_every: int = 1000
    report_every: int = 1000
    save_replay: bool = True


@dataclass
class EnvConfig:
    name: str | None = None
    params: dict[str, Any] = field(default_factory=dict)
    upright_unit_range: bool = False


_SECTIONS: dict[str, type] = {
    "general": GeneralConfig,
    "world_model": WorldModelConfig,
    "actor_critic": ActorCriticConfig,
    "optimizer": OptimizerConfig,
    "runtime": RuntimeConfig,
    "env": EnvConfig,
}


def _coerce(value: Any, hint: Any, where: str) -> Any:
    """Check ``value`` against a field annotation, converting where YAML is lax."""
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(value, inner[0], where)
    if origin is dict or hint is dict:
        if not isinstance(value, dict):
            raise ConfigError(where, f"expected a mapping, got {value!r}")
        return dict(value)
    if hint is bool:
        if isinstance(value, bool):
            return value
        raise ConfigError(where, f"expected true/false, got {value!r}")
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            raise ConfigError(where, f"expected an integer, got {value!r}")
        try:
            number = float(value)
        except ValueError:
            raise ConfigError(where, f"expected an integer, got {value!r}")
        if not number.is_integer():
            raise ConfigError(where, f"expected an integer, got {value!r}")
        return int(number)
    if hint is float:
        if isinstance(value, bool):
            raise ConfigError(where, f"expected a number, got {value!r}")
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(where, f"expected a number, got {value!r}")
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(where, f"expected a string, got {value!r}")
        return value
    return value


def _build_section(name: str, data: Any) -> Any:
    cls = _SECTIONS[name]
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(name, f"section must be a mapping, got {data!r}")
    hints = typing.get_type_hints(cls)
    known = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"{name}.{key}", "unknown key")
        kwargs[key] = _coerce(value, hints[key], f"{name}.{key}")
    return cls(**kwargs)


@dataclass
class RunConfig:
    """Every hyperparameter of a run, grouped by concern."""

    general: GeneralConfig = field(default_factory=GeneralConfig)
    world_model: WorldModelConfig = field(default_factory=WorldModelConfig)
    actor_critic: ActorCriticConfig = field(default_factory=ActorCriticConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    runtime: RuntimeConfig = field(default_factory=RuntimeConfig)
    env: EnvConfig = field(default_factory=EnvConfig)

    @classmethod
    def from_dict(cls, data: dict[str, Any] | None) -> "RunConfig":
        """Build a config from nested mappings.

        Raises:
            ConfigError: On unknown sections, unknown keys or mistyped values.
        """
        data = data or {}
        if not isinstance(data, dict):
            raise ConfigError("config", "top level must be a mapping of sections")
        for section in data:
            if section not in _SECTIONS:
                raise ConfigError(str(section), "unknown section")
        return cls(**{name: _build_section(name, data.get(name)) for name in _SECTIONS})

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_yaml(cls, path: str | Path) -> "RunConfig":
        """Load a config file.

        Raises:
            FileNotFoundError: If the file doesn't exist.
            ConfigError: If the contents are invalid.
        """
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(
                f"Config file not found: {path}\n"
                f"Pass an existing file or a preset name from {get_preset_dir()}."
            )
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8"))
        except yaml.YAMLError as e:
            raise ConfigError(str(path), f"not valid YAML: {e}")
        return cls.from_dict(data)

    def to_yaml(self, path: str | Path | None = None) -> str:
        text = yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=False)
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    def with_overrides(self, overrides: list[str] | None) -> "RunConfig":
        """Return a copy with ``key=value`` overrides applied.

        ``key`` is dotted (``actor_critic.horizon``), a bare field name unique
        across sections (``horizon``), or ``env.params.<name>``.
        """
        data = self.to_dict()
        for item in overrides or []:
            if "=" not in item:
                raise ConfigError(item, "overrides must look like key=value")
            key, raw = item.split("=", 1)
            key = key.strip()
            value = yaml.safe_load(raw) if raw.strip() else None
            parts = key.split(".")
            if len(parts) == 1:
                owners = [s for s, cls in _SECTIONS.items() if key in {f.name for f in fields(cls)}]
                if not owners:
                    raise ConfigError(key, "unknown key")
                if len(owners) > 1:
                    raise ConfigError(key, f"ambiguous key, qualify it with one of {owners}")
                data[owners[0]][key] = value
            elif len(parts) == 2:
                section, name = parts
                if section not in data:
                    raise ConfigError(section, "unknown section")
                data[section][name] = value
            elif len(parts) == 3 and parts[0] == "env" and parts[1] == "params":
                data["env"]["params"][parts[2]] = value
            else:
                raise ConfigError(key, "unsupported override key")
        return RunConfig.from_dict(data)

    def validate(self) -> "RunConfig":
        """Check required fields and cross-field constraints.

        Raises:
            ConfigError: Naming the first offending field.
        """
        if not self.env.name:
            raise ConfigError("env.name", "required (e.g. point_nav, grid_pick_place, quadruped, toggle)")
        positive = {
            "general.replay_capacity": self.general.replay_capacity,
            "general.batch_size": self.general.batch_size,
            "general.batch_length": self.general.batch_length,
            "general.mlp_units": self.general.mlp_units,
            "world_model.rssm_size": self.world_model.rssm_size,
            "world_model.latents": self.world_model.latents,
            "world_model.classes": self.world_model.classes,
            "world_model.cnn_depth": self.world_model.cnn_depth,
            "world_model.embed_size": self.world_model.embed_size,
            "actor_critic.target_interval": self.actor_critic.target_interval,
            "optimizer.grad_clip": self.optimizer.grad_clip,
            "optimizer.adam_eps": self.optimizer.adam_eps,
            "runtime.checkpoint_every": self.runtime.checkpoint_every,
            "runtime.report_every": self.runtime.report_every,
        }
        for name, value in positive.items():
            if value <= 0:
                raise ConfigError(name, f"must be positive, got {value}")
        if self.general.mlp_layers < 0:
            raise ConfigError("general.mlp_layers", "must be non-negative")
        if self.general.start_learning < 0:
            raise ConfigError("general.start_learning", "must be non-negative")
        if self.world_model.image_size % 16 != 0 or self.world_model.image_size <= 0:
            raise ConfigError("world_model.image_size", "must be a positive multiple of 16")
        for name, value in {
            "world_model.kl_balance": self.world_model.kl_balance,
            "actor_critic.discount": self.actor_critic.discount,
            "actor_critic.return_lambda": self.actor_critic.return_lambda,
        }.items():
            if not 0.0 <= value <= 1.0:
                raise ConfigError(name, f"must lie in [0, 1], got {value}")
        if self.actor_critic.horizon < 0:
            raise ConfigError("actor_critic.horizon", "must be non-negative")
        if self.actor_critic.baseline not in ("target", "online"):
            raise ConfigError("actor_critic.baseline", "must be 'target' or 'online'")
        if self.actor_critic.gradient not in ("auto", "reinforce", "reparam"):
            raise ConfigError("actor_critic.gradient", "must be 'auto', 'reinforce' or 'reparam'")
        if self.actor_critic.min_log_std >= self.actor_critic.max_log_std:
            raise ConfigError("actor_critic.min_log_std", "must be below max_log_std")
        if self.optimizer.lr < 0:
            raise ConfigError("optimizer.lr", "must be non-negative")
        if self.runtime.filter_order < 1:
            raise ConfigError("runtime.filter_order", "must be at least 1")
        rate = self.runtime.control_rate_hz
        if rate is not None and rate <= 0:
            raise ConfigError("runtime.control_rate_hz", "must be positive")
        cutoff = self.runtime.cutoff_hz
        if cutoff is not None and (cutoff <= 0 or (rate is not None and cutoff >= rate / 2)):
            raise ConfigError("runtime.cutoff_hz", "must be positive and below half the control rate")
        return self


def get_device() -> str:
    """Get the torch device from environment variable.

    Returns:
        str: Device string. Defaults to "cpu".
    """
    return os.getenv("DREAMER_DEVICE", "cpu")


def get_num_threads() -> int | None:
    """Get torch intra-op thread count from environment variable.

    Returns:
        int | None: Thread count, or None to keep the torch default.
    """
    try:
        value = os.getenv("DREAMER_NUM_THREADS")
        if value is None:
            return None
        return max(1, int(value))
    except (ValueError, TypeError):
        return None


def get_preset_dir() -> Path:
    """Get the preset directory from environment variable.

    Returns:
        Path: Preset directory. Defaults to presets/ in the repository.
    """
    return Path(os.getenv("DREAMER_PRESET_DIR", str(DEFAULT_PRESET_DIR)))


def resolve_config_path(name_or_path: str | Path) -> Path:
    """Resolve an explicit file path or a preset name such as ``point_nav``.

    Raises:
        FileNotFoundError: If neither a file nor a preset matches.
    """
    path = Path(name_or_path)
    if path.exists():
        return path
    preset = get_preset_dir() / f"{path.stem}.yaml"
    if preset.exists():
        return preset
    raise FileNotFoundError(
        f"Config not found: {name_or_path}\n"
        f"Available presets: {', '.join(sorted(p.stem for p in get_preset_dir().glob('*.yaml')))}"
    )


def load_run_config(name_or_path: str | Path | None, overrides: list[str] | None = None) -> RunConfig:
    """Load a preset or file (or the defaults when ``None``) and apply overrides."""
    config = RunConfig() if name_or_path is None else RunConfig.from_yaml(resolve_config_path(name_or_path))
    return config.with_overrides(overrides)
