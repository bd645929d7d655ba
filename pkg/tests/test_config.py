"""Test cases for configuration loading."""

import pytest

from app.config import Settings, StudyConfig, load_config, settings
from app.errors import ConfigError


def _write(tmp_path, text, name="study.yaml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadConfig:
    """YAML files, overrides and error locations."""

    def test_default_config(self):
        """The shipped defaults validate and describe the two-mode benchmark."""
        config = load_config(settings.default_config)
        assert config.seed == 0
        assert config.target.separation == 8.0
        assert config.schedule.levels == 4
        assert config.experiment.levels == 8
        assert config.target.build().n_components == 2

    def test_no_file_gives_defaults(self):
        """Without a path every section takes its model default."""
        config = load_config()
        assert config.target is None
        assert config.sampler.steps == 1000
        assert config.verify.instances == 20

    def test_overrides(self, tmp_path):
        """--set values are parsed as YAML scalars and create missing sections."""
        path = _write(tmp_path, "seed: 1\nschedule:\n  levels: 3\n")
        config = load_config(path, ["schedule.levels=5", "seed=9", "target.separation=4", "sampler.lazy=true"])
        assert config.schedule.levels == 5
        assert config.seed == 9
        assert config.target.separation == 4.0
        assert config.sampler.lazy is True

    def test_error_carries_line(self, tmp_path):
        """Validation errors point at the offending key."""
        path = _write(tmp_path, "seed: 0\nschedule:\n  levels: 3\n  lam: 2.0\n")
        with pytest.raises(ConfigError) as info:
            load_config(path)
        assert info.value.line == 4
        assert str(info.value).startswith(f"{path}:4: schedule.lam")
        assert info.value.exit_code == 2

    def test_unknown_key(self, tmp_path):
        """Extra keys are rejected."""
        path = _write(tmp_path, "sampler:\n  steps: 10\n  stepz: 5\n")
        with pytest.raises(ConfigError) as info:
            load_config(path)
        assert info.value.line == 3

    def test_practical_mode_needs_levels(self, tmp_path):
        """A practical schedule without a level count is invalid."""
        path = _write(tmp_path, "seed: 0\nschedule:\n  mode: practical\n")
        with pytest.raises(ConfigError) as info:
            load_config(path)
        assert "levels is required" in str(info.value)
        assert info.value.line == 2

    def test_invalid_yaml(self, tmp_path):
        """Parser errors become ConfigError with a line number."""
        path = _write(tmp_path, "seed: 0\ntarget: [1, 2\n")
        with pytest.raises(ConfigError) as info:
            load_config(path)
        assert "invalid YAML" in str(info.value)
        assert info.value.line is not None

    def test_top_level_must_be_mapping(self, tmp_path):
        """A bare list is not a config."""
        with pytest.raises(ConfigError):
            load_config(_write(tmp_path, "- 1\n- 2\n"))

    def test_missing_file(self, tmp_path):
        """Unreadable paths are configuration errors."""
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.yaml")

    @pytest.mark.parametrize("override", ["schedule.levels", "=3", "seed.value=1"])
    def test_malformed_override(self, override):
        """Overrides need a dotted field, an equals sign and a section to land in."""
        with pytest.raises(ConfigError):
            load_config(None, ["seed=1", override])

    def test_target_needs_means_or_separation(self, tmp_path):
        """An empty target section is rejected."""
        with pytest.raises(ConfigError):
            load_config(_write(tmp_path, "target:\n  dim: 2\n"))

    def test_require(self):
        """Commands that need a section fail cleanly when it is missing."""
        with pytest.raises(ConfigError, match="section 'target'"):
            StudyConfig().require("target", source="x.yaml")


class TestSettings:
    """Environment-backed defaults."""

    def test_threads_precedence(self, monkeypatch):
        """Flag, then config, then STMH_THREADS, then cores."""
        monkeypatch.setenv("STMH_THREADS", "3")
        local = Settings()
        assert local.resolve_threads(5, StudyConfig(threads=2)) == 5
        assert local.resolve_threads(None, StudyConfig(threads=2)) == 2
        assert local.resolve_threads(None, StudyConfig()) == 3
        monkeypatch.delenv("STMH_THREADS")
        assert Settings().resolve_threads(None, StudyConfig()) >= 1

    def test_out_dir(self, tmp_path):
        """--out-dir wins over runs/<command>."""
        assert settings.resolve_out_dir(tmp_path, "verify") == tmp_path
        assert settings.resolve_out_dir(None, "verify").name == "verify"
