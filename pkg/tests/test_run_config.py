"""Tests for run configuration loading, overrides and validation."""
import json
import os
from dataclasses import fields
from unittest.mock import patch

import pytest

from config.run_config import (
    RunConfig,
    get_device,
    get_num_threads,
    get_preset_dir,
    load_run_config,
)
from core.errors import ConfigError

SECTIONS = ("general", "world_model", "actor_critic", "optimizer", "runtime", "env")


class TestDefaults:
    """Tests that defaults match the published hyperparameter table."""

    def test_table_defaults(self):
        """Test every tabulated hyperparameter default."""
        config = RunConfig()
        assert config.general.replay_capacity == 10 ** 6
        assert config.general.start_learning == 10 ** 4
        assert config.general.batch_size == 32
        assert config.general.batch_length == 32
        assert config.general.mlp_layers == 4
        assert config.general.mlp_units == 512
        assert config.world_model.rssm_size == 512
        assert config.world_model.latents == 32
        assert config.world_model.classes == 32
        assert config.world_model.kl_balance == 0.8
        assert config.actor_critic.horizon == 15
        assert config.actor_critic.discount == 0.95
        assert config.actor_critic.return_lambda == 0.95
        assert config.actor_critic.target_interval == 100
        assert config.optimizer.grad_clip == 100.0
        assert config.optimizer.lr == 1e-4
        assert config.optimizer.adam_eps == 1e-6

    def test_decision_defaults(self):
        """Test defaults of keys the table leaves open."""
        config = RunConfig()
        assert config.actor_critic.eta == 3e-4
        assert config.world_model.image_size == 64
        assert config.world_model.kl_scale == 1.0
        assert config.runtime.filter_order == 2
        assert config.env.upright_unit_range is False
        assert config.actor_critic.baseline == "target"

    def test_no_train_ratio_key_exists(self):
        """Test that no knob ties learner updates to environment steps."""
        config = RunConfig()
        names = [f.name for section in SECTIONS for f in fields(getattr(config, section))]
        assert not [n for n in names if "ratio" in n or "train_every" in n]


class TestParsing:
    """Tests for parsing, serialization and overrides."""

    def test_yaml_round_trip_is_identity(self, tmp_path):
        """Test parse -> serialize -> parse."""
        config = RunConfig().with_overrides(["env.name=point_nav", "env.params.robot_radius=0.05", "cutoff_hz=3.0"])
        path = tmp_path / "config.yaml"
        config.to_yaml(path)
        assert RunConfig.from_yaml(path) == config

    def test_unknown_key_is_rejected(self):
        """Test that unknown keys name the offending field."""
        with pytest.raises(ConfigError) as exc:
            RunConfig.from_dict({"general": {"bogus": 1}})
        assert exc.value.field == "general.bogus"

    def test_unknown_section_is_rejected(self):
        """Test that unknown sections are rejected."""
        with pytest.raises(ConfigError) as exc:
            RunConfig.from_dict({"extras": {}})
        assert exc.value.field == "extras"

    def test_mistyped_value_is_rejected(self):
        """Test that a non-integer batch size is rejected."""
        with pytest.raises(ConfigError) as exc:
            RunConfig.from_dict({"general": {"batch_size": "many"}})
        assert exc.value.field == "general.batch_size"

    def test_bare_override_reaches_owning_section(self):
        """Test that horizon=16 sets the imagination horizon."""
        config = RunConfig().with_overrides(["horizon=16"])
        assert config.actor_critic.horizon == 16

    def test_dotted_and_env_param_overrides(self):
        """Test qualified keys and environment parameters."""
        config = RunConfig().with_overrides(["world_model.kl_balance=0.5", "env.params.num_objects=2"])
        assert config.world_model.kl_balance == 0.5
        assert config.env.params == {"num_objects": 2}

    def test_override_without_value_separator_is_rejected(self):
        """Test that overrides must look like key=value."""
        with pytest.raises(ConfigError):
            RunConfig().with_overrides(["horizon"])

    def test_unknown_override_key_is_rejected(self):
        """Test that overriding a missing key fails."""
        with pytest.raises(ConfigError):
            RunConfig().with_overrides(["learning_rate_schedule=cosine"])

    def test_every_key_is_overridable(self):
        """Test that each field accepts a section-qualified override of its own value."""
        base = RunConfig()
        for section in SECTIONS:
            for f in fields(getattr(base, section)):
                value = getattr(getattr(base, section), f.name)
                override = f"{section}.{f.name}={json.dumps(value)}"
                assert base.with_overrides([override]) == base, override


class TestValidation:
    """Tests for cross-field validation."""

    def test_missing_env_name_names_the_field(self):
        """Test that a run without an environment is rejected."""
        with pytest.raises(ConfigError) as exc:
            RunConfig().validate()
        assert exc.value.field == "env.name"

    def test_valid_config_passes(self):
        """Test that a complete config validates."""
        config = RunConfig().with_overrides(["env.name=toggle"])
        assert config.validate() is config

    def test_image_size_must_be_multiple_of_sixteen(self):
        """Test the encoder's resolution constraint."""
        config = RunConfig().with_overrides(["env.name=point_nav", "image_size=40"])
        with pytest.raises(ConfigError) as exc:
            config.validate()
        assert exc.value.field == "world_model.image_size"

    def test_cutoff_above_nyquist_is_rejected(self):
        """Test that the filter cutoff must stay below half the control rate."""
        config = RunConfig().with_overrides(["env.name=quadruped", "control_rate_hz=20", "cutoff_hz=10"])
        with pytest.raises(ConfigError) as exc:
            config.validate()
        assert exc.value.field == "runtime.cutoff_hz"

    def test_unknown_baseline_is_rejected(self):
        """Test that the advantage baseline switch is checked."""
        config = RunConfig().with_overrides(["env.name=toggle", "baseline=median"])
        with pytest.raises(ConfigError):
            config.validate()


class TestPresetsAndEnvironment:
    """Tests for presets and environment-variable getters."""

    def test_every_preset_validates(self):
        """Test that shipped presets are complete configs."""
        presets = sorted(get_preset_dir().glob("*.yaml"))
        assert presets
        for preset in presets:
            load_run_config(preset.stem).validate()

    def test_preset_name_resolves(self):
        """Test loading a preset by name with an override."""
        config = load_run_config("debug", ["env.name=toggle"])
        assert config.world_model.rssm_size == 64
        assert config.env.name == "toggle"

    def test_missing_config_raises_file_not_found(self, tmp_path):
        """Test that an unknown config path is reported."""
        with pytest.raises(FileNotFoundError):
            load_run_config(tmp_path / "nowhere.yaml")

    def test_none_loads_defaults(self):
        """Test that no config file means table defaults."""
        assert load_run_config(None) == RunConfig()

    def test_get_num_threads(self):
        """Test thread count parsing from the environment."""
        with patch.dict(os.environ, {"DREAMER_NUM_THREADS": "4"}):
            assert get_num_threads() == 4
        with patch.dict(os.environ, {"DREAMER_NUM_THREADS": "lots"}):
            assert get_num_threads() is None
        with patch.dict(os.environ, {}, clear=True):
            assert get_num_threads() is None

    def test_get_device_defaults_to_cpu(self):
        """Test the device getter default."""
        with patch.dict(os.environ, {}, clear=True):
            assert get_device() == "cpu"
        with patch.dict(os.environ, {"DREAMER_DEVICE": "cuda:1"}):
            assert get_device() == "cuda:1"

    def test_preset_dir_from_environment(self, tmp_path):
        """Test that DREAMER_PRESET_DIR redirects preset lookup."""
        (tmp_path / "mine.yaml").write_text("env:\n  name: toggle\n")
        with patch.dict(os.environ, {"DREAMER_PRESET_DIR": str(tmp_path)}):
            assert load_run_config("mine").env.name == "toggle"
