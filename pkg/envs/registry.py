"""Environment construction by registry name."""
from typing import Any, Callable

from config.logging_config import get_logger
from core.errors import ConfigError
from envs.base import Environment
from envs.pick_place import GridPickPlace
from envs.point_nav import PointNav
from envs.quadruped import ToyQuadruped
from envs.toggle import ToggleEnv

ENVIRONMENTS: dict[str, Callable[..., Environment]] = {
    "quadruped": ToyQuadruped,
    "grid_pick_place": GridPickPlace,
    "point_nav": PointNav,
    "toggle": ToggleEnv,
}

# Environments that render a camera take the world model's image size.
IMAGE_ENVIRONMENTS = {"grid_pick_place", "point_nav"}


def make_env(
    name: str | None,
    params: dict[str, Any] | None = None,
    seed: int = 0,
    image_size: int = 64,
    upright_unit_range: bool = False,
) -> Environment:
    """Construct a registered environment.

    Args:
        name: Registry name, see :data:`ENVIRONMENTS`.
        params: Constructor keyword arguments from the ``env.params`` config section.
        seed: Environment seed.
        image_size: Camera size for environments with image observations.
        upright_unit_range: Quadruped reward variant with the upright term in ``[0, 1]``.

    Raises:
        ConfigError: If the name is unknown or the parameters are rejected.
    """
    if name not in ENVIRONMENTS:
        raise ConfigError("env.name", f"unknown environment {name!r}, choose from {sorted(ENVIRONMENTS)}")
    kwargs = dict(params or {})
    kwargs["seed"] = seed
    if name in IMAGE_ENVIRONMENTS:
        kwargs.setdefault("image_size", image_size)
    if name == "quadruped":
        kwargs.setdefault("upright_unit_range", upright_unit_range)
    try:
        env = ENVIRONMENTS[name](**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError("env.params", f"{name}: {e}") from e
    get_logger().info(f"Created environment {name} with {kwargs}")
    return env
