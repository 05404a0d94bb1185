"""Repository-wide pytest options and fixtures."""
import copy

import pytest

import config.logging_config as logging_config
from config.run_config import RunConfig

TINY_CONFIG = {
    "general": {
        "replay_capacity": 10_000,
        "start_learning": 0,
        "batch_size": 2,
        "batch_length": 4,
        "mlp_layers": 1,
        "mlp_units": 16,
    },
    "world_model": {
        "rssm_size": 16,
        "latents": 4,
        "classes": 4,
        "image_size": 16,
        "cnn_depth": 2,
        "embed_size": 16,
    },
    "actor_critic": {"horizon": 3, "target_interval": 2},
    "runtime": {"checkpoint_every": 5, "report_every": 10},
    "env": {"name": "toggle"},
}


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow learning checks")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True, scope="session")
def isolated_log_dir(tmp_path_factory):
    """Send the application log of the whole test session to a temporary directory."""
    log_dir = tmp_path_factory.mktemp("logs")
    previous = logging_config.LOG_DIR
    logging_config.LOG_DIR = log_dir
    logging_config._is_setup = False
    yield log_dir
    logging_config.LOG_DIR = previous


@pytest.fixture
def tiny_config():
    """Factory for a small, fast run config; keyword arguments replace whole sections' keys."""
    def make(env_name: str = "toggle", **sections) -> RunConfig:
        data = copy.deepcopy(TINY_CONFIG)
        data["env"]["name"] = env_name
        for section, values in sections.items():
            data.setdefault(section, {}).update(values)
        return RunConfig.from_dict(data)
    return make
