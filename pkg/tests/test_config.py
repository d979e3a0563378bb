import json

import pytest

from softsplit.config import from_dict, load_config
from softsplit.errors import SchemaError


class TestDefaults:
    def test_minimal_config_gets_paper_defaults(self):
        cfg = from_dict({})
        assert cfg.env.n_users == 50
        assert cfg.env.n_ecs == 2
        assert cfg.env.episode_len == 300
        assert cfg.env.service.delay_threshold_ms == 12.0
        assert cfg.env.service.outage_threshold == 1e-5
        assert cfg.env.g_th == 16000.0
        assert cfg.env.m_th == 60000.0  # 30000 per EC
        assert cfg.ppo_high.gamma == 0.99
        assert cfg.ppo_low.gamma == 0.80
        assert cfg.ppo_high.entropy_coef == 0.01
        assert cfg.ppo_low.entropy_coef == 0.01

    def test_obs_scales_derived_and_recorded(self):
        cfg = from_dict({})
        assert cfg.obs_scales.high.shape == (3,)
        assert cfg.obs_scales.low.shape == (7,)
        assert cfg.raw["obs_scales"]["low"][3] == 16000.0

    def test_env_config_overrides(self):
        cfg = from_dict({})
        env = cfg.env_config(seed=99, g_th=14000.0)
        assert env.seed == 99
        assert env.g_th == 14000.0
        assert cfg.env.g_th == 16000.0  # original untouched


class TestStrictness:
    def test_unknown_key_named(self):
        with pytest.raises(SchemaError, match="typo_key"):
            from_dict({"env": {"typo_key": 1}})

    def test_unknown_section_named(self):
        with pytest.raises(SchemaError, match="bogus"):
            from_dict({"bogus": {}})

    def test_bad_fs_table_cites_monotonicity(self):
        table = {str(i): dict(from_dict({}).raw["fs_table"][i]) for i in range(1, 8)}
        table["4"]["midhaul_mbps_per_ap"] = 99999.0
        with pytest.raises(SchemaError, match="non-increasing"):
            from_dict({"fs_table": table})

    def test_empty_seeds_rejected(self):
        with pytest.raises(SchemaError, match="seeds"):
            from_dict({"run": {"seeds": []}})

    def test_zero_episodes_rejected(self):
        with pytest.raises(SchemaError, match="episodes"):
            from_dict({"run": {"episodes": 0}})

    def test_bad_policy_names(self):
        with pytest.raises(SchemaError, match="policy"):
            from_dict({"run": {"policy": "greedy"}})
        with pytest.raises(SchemaError, match="static"):
            from_dict({"run": {"policy": "static:9"}})

    def test_missing_checkpoint_file(self):
        with pytest.raises(SchemaError, match="checkpoint"):
            from_dict({"run": {"policy": "hmarl", "checkpoint": "/nonexistent.bin"}})

    def test_unsupported_sweep_axis(self):
        with pytest.raises(SchemaError, match="axis"):
            from_dict({"sweep": {"axis": "n_users"}})


class TestLoad:
    def test_round_trip_file(self, tmp_path):
        path = tmp_path / "exp.json"
        path.write_text(json.dumps({"env": {"n_users": 7}, "run": {"policy": "static:4"}}))
        cfg = load_config(path)
        assert cfg.env.n_users == 7
        assert cfg.policy == "static:4"

    def test_missing_file(self, tmp_path):
        with pytest.raises(SchemaError, match="not found"):
            load_config(tmp_path / "nope.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{nope")
        with pytest.raises(SchemaError, match="JSON"):
            load_config(path)

    def test_hash_stable_and_sensitive(self):
        a = from_dict({})
        b = from_dict({})
        c = from_dict({"env": {"n_users": 49}})
        assert a.config_hash() == b.config_hash()
        assert a.config_hash() != c.config_hash()
