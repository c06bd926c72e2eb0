"""TOML config loading shared by the CLI: file values first, flags override.

The effective configuration is kept as a plain dict alongside the typed
objects so every report can echo exactly what it ran with.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .audio import MixSpec
from .benchmark import MusicCandidate, NaturalFilterConfig, SyntheticBaseConfig
from .clients import ClientConfig
from .costing import PricingRates, TierRates
from .pipeline import EscalationConfig, FilterConfig, PipelineConfig, RouterConfig
from .resources import load_wordlist


ENDPOINT_ENV_VAR = "AVCURATE_ENDPOINT"


@dataclass
class AppConfig:
    clients: ClientConfig = field(default_factory=ClientConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    pricing: PricingRates = field(default_factory=PricingRates)
    natural: NaturalFilterConfig = field(default_factory=NaturalFilterConfig)
    synthetic: SyntheticBaseConfig = field(default_factory=SyntheticBaseConfig)
    mix: MixSpec = field(default_factory=MixSpec)
    caption_template: str = ", with {caption}"
    review_ttl_s: int = 30 * 60
    mock: bool = False
    raw: dict = field(default_factory=dict)


def _pick(raw: dict, section: str, cls, **renames):
    data = dict(raw.get(section, {}))
    for old, new in renames.items():
        if old in data:
            data[new] = data.pop(old)
    known = {f for f in cls.__dataclass_fields__}  # type: ignore[attr-defined]
    return cls(**{k: v for k, v in data.items() if k in known})


def load_config(path: Optional[str | Path] = None,
                overrides: Optional[dict[str, Any]] = None) -> AppConfig:
    raw: dict = {}
    if path:
        with Path(path).open("rb") as fh:
            raw = tomllib.load(fh)
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        cursor = raw
        *heads, leaf = dotted.split(".")
        for head in heads:
            cursor = cursor.setdefault(head, {})
        cursor[leaf] = value

    clients_raw = dict(raw.get("clients", {}))
    client_overrides = clients_raw.pop("overrides", {})
    mock = bool(clients_raw.pop("mock", False))
    clients = ClientConfig(**{
        k: v for k, v in clients_raw.items()
        if k in ClientConfig.__dataclass_fields__
    })
    clients.overrides = {op: dict(table) for op, table in client_overrides.items()}
    env_endpoint = os.environ.get(ENDPOINT_ENV_VAR)
    if env_endpoint:
        clients.endpoint = env_endpoint

    escalation_raw = dict(raw.get("escalation", {}))
    lexicon_path = escalation_raw.pop("hallucination_lexicon_path", None)
    sound_path = escalation_raw.pop("sound_lexicon_path", None)
    escalation = EscalationConfig(**{
        k: v for k, v in escalation_raw.items()
        if k in EscalationConfig.__dataclass_fields__
    })
    if lexicon_path:
        escalation.hallucination_lexicon = load_wordlist(lexicon_path, "hallucination_phrases.txt")
    if sound_path:
        escalation.sound_lexicon = load_wordlist(sound_path, "sound_lexicon.txt")

    pricing_raw = raw.get("pricing", {})

    def tier(section: str, default: TierRates) -> TierRates:
        data = pricing_raw.get(section)
        if not data:
            return default
        return TierRates.of(data["usd_per_1m_input_tokens"], data["usd_per_1m_output_tokens"])

    defaults = PricingRates()
    pricing = PricingRates(
        junior_flash=tier("junior_flash", defaults.junior_flash),
        senior_pro=tier("senior_pro", defaults.senior_pro),
    )

    natural_raw = dict(raw.get("natural_filter", {}))
    if "exclude_flags" in natural_raw:
        natural_raw["exclude_flags"] = frozenset(natural_raw["exclude_flags"])

    bench_raw = raw.get("bench", {})
    return AppConfig(
        clients=clients,
        pipeline=PipelineConfig(
            router=_pick(raw, "router", RouterConfig),
            escalation=escalation,
            filter=_pick(raw, "filter", FilterConfig),
        ),
        pricing=pricing,
        natural=NaturalFilterConfig(**{
            k: v for k, v in natural_raw.items()
            if k in NaturalFilterConfig.__dataclass_fields__
        }),
        synthetic=_pick(raw, "synthetic_base", SyntheticBaseConfig),
        mix=_pick(raw, "mix", MixSpec),
        caption_template=bench_raw.get("caption_template", ", with {caption}"),
        review_ttl_s=raw.get("review", {}).get("ttl_s", 30 * 60),
        mock=mock,
        raw=raw,
    )


def effective_config_dict(cfg: AppConfig) -> dict:
    """Flat echo of the thresholds a run actually used."""
    return {
        "router": {"tau_low": cfg.pipeline.router.tau_low,
                   "tau_high": cfg.pipeline.router.tau_high},
        "escalation": {
            "tau_clap_general": cfg.pipeline.escalation.tau_clap_general,
            "tau_clap_music": cfg.pipeline.escalation.tau_clap_music,
            "complexity_min_events": cfg.pipeline.escalation.complexity_min_events,
        },
        "filter": {"tau_verify": cfg.pipeline.filter.tau_verify,
                   "enforce_style": cfg.pipeline.filter.enforce_style},
        "natural_filter": {
            "av_ratio_min": cfg.natural.av_ratio_min,
            "av_ratio_max": cfg.natural.av_ratio_max,
            "max_labels": cfg.natural.max_labels,
            "speech_cap": cfg.natural.speech_cap,
            "exclude_flags": sorted(cfg.natural.exclude_flags),
        },
        "synthetic_base": {
            "ib_min": cfg.synthetic.ib_min,
            "desync_max": cfg.synthetic.desync_max,
            "candidate_batch": cfg.synthetic.candidate_batch,
        },
        "mix": {"overlay_gain_db": cfg.mix.overlay_gain_db,
                "peak_normalize": cfg.mix.peak_normalize},
        "pricing": {
            "junior_flash": {
                "usd_per_1m_input_tokens": float(cfg.pricing.junior_flash.usd_per_1m_input_tokens),
                "usd_per_1m_output_tokens": float(cfg.pricing.junior_flash.usd_per_1m_output_tokens),
            },
            "senior_pro": {
                "usd_per_1m_input_tokens": float(cfg.pricing.senior_pro.usd_per_1m_input_tokens),
                "usd_per_1m_output_tokens": float(cfg.pricing.senior_pro.usd_per_1m_output_tokens),
            },
        },
    }


def load_music_pool(path: str | Path) -> list[MusicCandidate]:
    """Music pool file: JSONL of {id, caption, audio_path}."""
    pool = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            raw = json.loads(line)
            pool.append(MusicCandidate(
                id=raw["id"],
                caption=raw.get("caption", ""),
                audio_path=raw.get("audio_path", ""),
            ))
    return pool
