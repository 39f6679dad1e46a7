import pytest
from pydantic import ValidationError

from clifford_gluing.core.config import RunConfig, Settings, settings


class TestSettings:
    """Environment-driven settings."""

    def test_defaults(self):
        assert settings.PROJECT_NAME == "Clifford Gluing"
        assert settings.API_V1_STR == "/api/v1"
        assert settings.MESH_RESOLUTION >= 16

    def test_environment_override(self, monkeypatch):
        monkeypatch.setenv("HEMISPHERE_EPS", "0.01")
        assert Settings().HEMISPHERE_EPS == 0.01

    def test_rejects_nonpositive_tolerance(self, monkeypatch):
        monkeypatch.setenv("NEWTON_TOL", "0")
        with pytest.raises(ValidationError, match="NEWTON_TOL"):
            Settings()

    def test_rejects_non_unit_pole(self, monkeypatch):
        monkeypatch.setenv("STEREO_POLE", "[0, 0, 0, 2]")
        with pytest.raises(ValidationError, match="STEREO_POLE"):
            Settings()


class TestRunConfig:
    """key=value run configuration files."""

    def test_defaults_without_file(self):
        config = RunConfig.from_file(None)
        assert config == RunConfig()
        assert config.m_list == [4, 8, 16]

    def test_file_values_and_overrides(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# desk run\nseed=7\nresolution=24\nm_list=4, 8\neps=0.01\n")
        config = RunConfig.from_file(path, resolution=32, out_dir=None)
        assert config.seed == 7
        assert config.resolution == 32
        assert config.m_list == [4, 8]
        assert config.eps == 0.01
        assert config.out_dir == "out"

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("resolutoin=24\n")
        with pytest.raises(ValidationError):
            RunConfig.from_file(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            RunConfig.from_file(tmp_path / "absent.cfg")

    def test_value_ranges(self):
        with pytest.raises(ValidationError):
            RunConfig(eps=1.5)
        with pytest.raises(ValidationError):
            RunConfig(resolution=2)
        with pytest.raises(ValidationError):
            RunConfig(m_list="4 0")

    def test_resolution_floor_matches_assembly(self):
        with pytest.raises(ValidationError):
            RunConfig(resolution=8)

    def test_defaults_follow_settings(self, monkeypatch):
        monkeypatch.setattr(settings, "MESH_RESOLUTION", 24)
        monkeypatch.setattr(settings, "REGION_B", 3.0)
        config = RunConfig()
        assert config.resolution == 24
        assert config.region_b == 3.0
        assert config.eps == settings.HEMISPHERE_EPS

    def test_newton_tolerance_is_not_a_run_key(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("newton_tol=1e-10\n")
        with pytest.raises(ValidationError, match="newton_tol"):
            RunConfig.from_file(path)
