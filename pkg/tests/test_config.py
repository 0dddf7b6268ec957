import json

import pytest

from tutorgraph.config import (
    ENV_CONFIG,
    EngineConfig,
    config_from_dict,
    load_config,
    resolve_config,
)


class TestDefaults:
    def test_default_hyperparameters(self):
        cfg = EngineConfig()
        assert cfg.eps == 0.15
        assert cfg.min_samples == 2
        assert cfg.alpha == 0.95
        assert cfg.max_iters == 2
        assert cfg.hidden == 200
        assert cfg.epochs == 2

    def test_split_fractions_normalized_to_tuple(self):
        cfg = EngineConfig(split_fractions=[0.8, 0.1, 0.1])
        assert cfg.split_fractions == (0.8, 0.1, 0.1)


class TestValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"dim": 0},
            {"eps": 0.0},
            {"min_samples": 0},
            {"samples_per_exercise": 3},
            {"samples_per_exercise": -2},
            {"random_branch_rate": 1.5},
            {"split_fractions": (0.5, 0.5)},
            {"split_fractions": (0.5, 0.4, 0.2)},
            {"hidden": 0},
            {"epochs": 0},
            {"max_iters": 0},
            {"alpha": 0.0},
            {"alpha": 1.2},
        ],
    )
    def test_bad_values_rejected(self, kwargs):
        with pytest.raises(ValueError):
            EngineConfig(**kwargs)

    def test_unknown_keys_rejected(self):
        with pytest.raises(ValueError, match="unknown config keys: epss"):
            config_from_dict({"epss": 0.2})


class TestFileRoundTrip:
    def test_save_load(self, tmp_path):
        cfg = EngineConfig(dim=16, seed=7, corpus_path="c.tsv")
        path = tmp_path / "config.json"
        cfg.save(str(path))
        assert load_config(str(path)) == cfg

    def test_invalid_json_named(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text("{nope")
        with pytest.raises(ValueError, match="invalid JSON"):
            load_config(str(path))

    def test_bad_value_carries_path(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"eps": -1}))
        with pytest.raises(ValueError, match=r"config\.json"):
            load_config(str(path))


class TestResolution:
    def test_explicit_path_wins_over_env(self, tmp_path, monkeypatch):
        explicit = tmp_path / "explicit.json"
        explicit.write_text(json.dumps({"seed": 1}))
        via_env = tmp_path / "env.json"
        via_env.write_text(json.dumps({"seed": 2}))
        monkeypatch.setenv(ENV_CONFIG, str(via_env))
        assert resolve_config(str(explicit)).seed == 1

    def test_env_override_used_without_explicit_path(self, tmp_path, monkeypatch):
        via_env = tmp_path / "env.json"
        via_env.write_text(json.dumps({"seed": 2}))
        monkeypatch.setenv(ENV_CONFIG, str(via_env))
        assert resolve_config(None).seed == 2

    def test_defaults_when_nothing_configured(self, tmp_path, monkeypatch):
        monkeypatch.delenv(ENV_CONFIG, raising=False)
        monkeypatch.chdir(tmp_path)
        assert resolve_config(None) == EngineConfig()

    def test_default_file_in_cwd_picked_up(self, tmp_path, monkeypatch):
        monkeypatch.delenv(ENV_CONFIG, raising=False)
        monkeypatch.chdir(tmp_path)
        (tmp_path / "tutorgraph.json").write_text(json.dumps({"seed": 3}))
        assert resolve_config(None).seed == 3

    def test_missing_explicit_file_is_an_error(self, tmp_path):
        with pytest.raises(OSError):
            resolve_config(str(tmp_path / "absent.json"))
