import json

import pytest

from topowam.config import RunConfig, apply_overrides, load_config, override_keys, save_config
from topowam.errors import ConfigError


def test_round_trip_and_hash(tmp_path):
    cfg = apply_overrides(RunConfig(), {"preset": "slim", "learning-rate": "3e-4", "init-std": "0.3"})
    path = tmp_path / "c.json"
    save_config(cfg, path)
    back = load_config(path)
    assert back == cfg and back.hash == cfg.hash
    assert back.train.init_std == 0.3 and back.env.preset == "slim"


def test_hash_ignores_paths_but_not_numerics():
    base = RunConfig()
    assert apply_overrides(base, {"run-id": "other", "output-dir": "/tmp/x"}).hash == base.hash
    assert apply_overrides(base, {"episodes": 10}).hash != base.hash
    assert apply_overrides(base, {"noise-sigma": 0.1}).hash != base.hash


def test_seed_flags():
    keys = override_keys()
    assert keys["env-seed"] == ("env", "seed") and keys["train-seed"] == ("train", "seed")
    assert "seed" not in keys
    cfg = apply_overrides(RunConfig(), {"seed": 5})
    assert cfg.env.seed == 5 and cfg.train.seed == 5
    assert apply_overrides(RunConfig(), {"env-seed": 2}).train.seed == 0


def test_flag_values_are_coerced():
    cfg = apply_overrides(RunConfig(), {"normalize-obs": "true", "t-max": "5", "init-std": "none"})
    assert cfg.train.normalize_obs is True and cfg.env.t_max == 5 and cfg.train.init_std is None


@pytest.mark.parametrize("data", [
    {"env": {"scenario": "sideways"}},
    {"env": {"bogus": 1}},
    {"extra": {}},
    {"schema_version": 2},
    {"train": {"window": "many"}},
    {"env": {"t_max": 2.5}},
    {"run": {"eval_every": 0}},
    {"train": {"normalize_obs": "maybe"}},
    [],
])
def test_invalid_configs_raise(data):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(data)


def test_unreadable_config(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)
    with pytest.raises(ConfigError):
        apply_overrides(RunConfig(), {"no-such-flag": 1})


def test_partial_file_takes_defaults(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"env": {"preset": "stout"}}))
    cfg = load_config(p)
    assert cfg.env.preset == "stout" and cfg.train == RunConfig().train
