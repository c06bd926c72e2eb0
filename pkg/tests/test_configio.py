"""Config file parsing, flag/env overrides, and the provenance echo."""

from __future__ import annotations

from decimal import Decimal

from avcurate.configio import effective_config_dict, load_config, load_music_pool
from avcurate.costing import project_cost_per_million


CONFIG_TOML = """
[clients]
endpoint = "http://scores.internal:9000"
max_retries = 5
mock = true

[clients.overrides.av]
"v1|a1" = 0.42

[router]
tau_low = 0.15
tau_high = 0.40

[escalation]
tau_clap_general = 0.30

[filter]
tau_verify = 0.25
enforce_style = false

[natural_filter]
av_ratio_min = 0.30
max_labels = 4
exclude_flags = ["HasBGM"]

[synthetic_base]
ib_min = 0.45

[mix]
overlay_gain_db = -6.0

[pricing.junior_flash]
usd_per_1m_input_tokens = "0.50"
usd_per_1m_output_tokens = "4.00"

[bench]
caption_template = ", plus {caption}"

[review]
ttl_s = 120
"""


class TestLoadConfig:
    def test_sections_parsed(self, tmp_path):
        path = tmp_path / "cfg.toml"
        path.write_text(CONFIG_TOML)
        cfg = load_config(path)
        assert cfg.clients.endpoint == "http://scores.internal:9000"
        assert cfg.clients.max_retries == 5
        assert cfg.clients.overrides["av"]["v1|a1"] == 0.42
        assert cfg.mock is True
        assert cfg.pipeline.router.tau_low == 0.15
        assert cfg.pipeline.escalation.tau_clap_general == 0.30
        assert cfg.pipeline.filter.tau_verify == 0.25
        assert cfg.pipeline.filter.enforce_style is False
        assert cfg.natural.av_ratio_min == 0.30
        assert cfg.natural.max_labels == 4
        assert cfg.natural.exclude_flags == frozenset({"HasBGM"})
        assert cfg.synthetic.ib_min == 0.45
        assert cfg.mix.overlay_gain_db == -6.0
        assert cfg.caption_template == ", plus {caption}"
        assert cfg.review_ttl_s == 120

    def test_pricing_rates_applied(self, tmp_path):
        path = tmp_path / "cfg.toml"
        path.write_text(CONFIG_TOML)
        cfg = load_config(path)
        assert project_cost_per_million(1000, 100, cfg.pricing.junior_flash) == Decimal("900.00")
        # senior tier falls back to the default rates
        assert project_cost_per_million(1340, 160, cfg.pricing.senior_pro) == Decimal("3275.00")

    def test_defaults_without_file(self):
        cfg = load_config(None)
        assert cfg.pipeline.router.tau_low == 0.20
        assert cfg.pipeline.router.tau_high == 0.30
        assert cfg.pipeline.filter.tau_verify == 0.35
        assert cfg.mock is False

    def test_env_endpoint_override(self, tmp_path, monkeypatch):
        path = tmp_path / "cfg.toml"
        path.write_text(CONFIG_TOML)
        monkeypatch.setenv("AVCURATE_ENDPOINT", "http://elsewhere:1234")
        cfg = load_config(path)
        assert cfg.clients.endpoint == "http://elsewhere:1234"

    def test_flag_overrides_beat_file(self, tmp_path):
        path = tmp_path / "cfg.toml"
        path.write_text(CONFIG_TOML)
        cfg = load_config(path, overrides={"router.tau_low": 0.22})
        assert cfg.pipeline.router.tau_low == 0.22

    def test_effective_echo_contains_thresholds(self, tmp_path):
        path = tmp_path / "cfg.toml"
        path.write_text(CONFIG_TOML)
        echo = effective_config_dict(load_config(path))
        assert echo["router"] == {"tau_low": 0.15, "tau_high": 0.40}
        assert echo["filter"]["tau_verify"] == 0.25
        assert echo["pricing"]["junior_flash"]["usd_per_1m_input_tokens"] == 0.5


class TestMusicPool:
    def test_load(self, tmp_path):
        path = tmp_path / "pool.jsonl"
        path.write_text('{"id": "m0", "caption": "calm piano", "audio_path": "m0.wav"}\n')
        pool = load_music_pool(path)
        assert len(pool) == 1
        assert pool[0].id == "m0"
        assert pool[0].caption == "calm piano"


class TestCaptionerPrompt:
    def test_default_prompt_ships_the_output_contract(self):
        from avcurate.resources import default_captioner_prompt

        prompt = default_captioner_prompt()
        assert prompt
        assert "40 words" in prompt
        assert "no lists" in prompt.lower()
