"""
Tests for the run configuration model and the key=value format
"""

import pytest

from config import settings
from config.run_config import (
    ConfigFileError,
    RunConfig,
    build_run_config,
    describe_keys,
    load_run_config,
    parse_config_text,
)


@pytest.mark.unit
class TestParseConfigText:
    """Test the flat key=value parser"""

    def test_comments_and_blanks(self):
        values = parse_config_text("# header\n\nalgorithm = dmgd\n  theta=0.6  \n")
        assert values == {"algorithm": "dmgd", "theta": "0.6"}

    def test_duplicate_key(self):
        with pytest.raises(ConfigFileError, match="duplicate key 'theta'"):
            parse_config_text("theta=0.6\ntheta=0.7\n")

    def test_missing_equals(self):
        with pytest.raises(ConfigFileError, match=":2: expected key=value"):
            parse_config_text("theta=0.6\nnonsense\n")

    def test_value_may_contain_equals(self):
        assert parse_config_text("chain_file=a=b.txt")["chain_file"] == "a=b.txt"


@pytest.mark.unit
class TestRunConfig:
    """Test validation rules"""

    def test_defaults(self):
        config = RunConfig()
        assert config.algorithm == "dmgd"
        assert config.theta == 0.51
        assert config.dsgd_T_values == (1, 2, 4, 8, 16)

    def test_theta_range(self):
        with pytest.raises(ConfigFileError, match=r"1/2 < theta < 1"):
            build_run_config({"theta": "0.4"})

    def test_constant_stepsize_ignores_theta(self):
        config = build_run_config({"stepsize": "constant", "theta": "0.4", "constant_gamma": "0.01"})
        assert config.stepsize == "constant"

    def test_zero_order_sum(self):
        with pytest.raises(ConfigFileError, match="theta \\+ rho"):
            build_run_config({"algorithm": "zo_dmgd", "theta": "0.6", "rho": "0.3"})

    def test_unknown_key(self):
        with pytest.raises(ConfigFileError, match="colour"):
            build_run_config({"colour": "blue"})

    def test_erdos_renyi_needs_edge_prob(self):
        with pytest.raises(ConfigFileError, match="edge_prob"):
            build_run_config({"topology": "erdos_renyi"})
        assert build_run_config({"topology": "erdos_renyi", "edge_prob": "0.4"}).edge_prob == 0.4

    def test_explicit_chain_needs_file(self):
        with pytest.raises(ConfigFileError, match="chain_file"):
            build_run_config({"chain": "explicit"})

    def test_initial_state_range(self):
        with pytest.raises(ConfigFileError, match="chain_initial_state"):
            build_run_config({"chain_states": "3", "chain_initial_state": "3"})

    def test_none_literal(self):
        assert build_run_config({"clip_radius": "none"}).clip_radius is None

    def test_t_values_list(self):
        assert build_run_config({"dsgd_T_values": "2, 8"}).dsgd_T_values == (2, 8)

    def test_T_at_least_one(self):
        with pytest.raises(ConfigFileError, match="T"):
            build_run_config({"algorithm": "dsgd_t", "T": "0"})

    def test_frozen(self):
        config = RunConfig()
        with pytest.raises(Exception):
            config.theta = 0.7


@pytest.mark.unit
class TestFingerprint:
    """Test canonical rendering and hashing"""

    def test_comments_do_not_matter(self, write_config):
        a = load_run_config(write_config("theta=0.6\n", "a.cfg"))
        b = load_run_config(write_config("# note\ntheta = 0.6\n\n", "b.cfg"))
        assert a.fingerprint() == b.fingerprint()

    def test_values_matter(self):
        assert RunConfig(seed=1).fingerprint() != RunConfig(seed=2).fingerprint()

    def test_canonical_text_sorted(self):
        lines = RunConfig().to_text().splitlines()
        assert lines == sorted(lines)
        assert "clip_radius=none" in lines
        assert "dsgd_T_values=1,2,4,8,16" in lines

    def test_text_reloads(self):
        config = RunConfig(algorithm="dsgd_t", T=4, include_zo=True)
        assert build_run_config(parse_config_text(config.to_text())) == config


@pytest.mark.unit
class TestLoadRunConfig:
    """Test file loading and overrides"""

    def test_overrides(self, write_config):
        config = load_run_config(write_config("seed=3\ncadence=5\n"), {"seed": 8, "cadence": None})
        assert config.seed == 8
        assert config.cadence == 5

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigFileError, match="Cannot read config"):
            load_run_config(tmp_path / "absent.cfg")

    def test_error_names_file(self, write_config):
        path = write_config("theta=0.4\n")
        with pytest.raises(ConfigFileError, match="run.cfg"):
            load_run_config(path)

    def test_env_seed_beats_file(self, write_config, monkeypatch):
        monkeypatch.setattr(settings, "SEED_FALLBACK", 21)
        assert load_run_config(write_config("seed=3\n")).seed == 21
        assert load_run_config(write_config("seed=3\n"), {"seed": 5}).seed == 5

    def test_file_seed_without_env(self, write_config, monkeypatch):
        monkeypatch.setattr(settings, "SEED_FALLBACK", None)
        assert load_run_config(write_config("seed=3\n")).seed == 3
        assert load_run_config(write_config("nodes=4\n")).seed == 0

    def test_non_integer_seed(self, write_config, monkeypatch):
        monkeypatch.setattr(settings, "SEED_FALLBACK", None)
        with pytest.raises(ConfigFileError, match="seed must be an integer"):
            load_run_config(write_config("seed=abc\n"))

    def test_scale_names(self):
        assert RunConfig(scale="paper").scale == "paper"
        assert settings.EXPERIMENT_SCALES["paper"] == [(10, 50), (20, 100)]
        assert settings.EXPERIMENT_SCALES["desk"] == [(5, 10)]


@pytest.mark.unit
class TestSettings:
    """Test environment-backed settings"""

    def test_seed_precedence(self, monkeypatch):
        monkeypatch.setattr(settings, "SEED_FALLBACK", 42)
        assert settings.resolve_seed(7, 3) == 7
        assert settings.resolve_seed(None, 3) == 42
        monkeypatch.setattr(settings, "SEED_FALLBACK", None)
        assert settings.resolve_seed(None, 3) == 3
        assert settings.resolve_seed() == 0

    def test_describe_keys_lists_every_field(self):
        text = describe_keys()
        for key in RunConfig.model_fields:
            assert f"  {key} (default" in text
