"""Token-level cost ledger and per-million projections for the tiered agents.

All arithmetic is exact: token counts stay integral and rates are parsed into
rationals, so the projected dollar figures are reproduced digit-for-digit.
Rounding (half-even, cent precision) happens only when a report is rendered.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional, Union

from .core import Tier

RateLike = Union[str, float, int, Decimal]

# Per-call token profile (input, output) used for the per-million projections:
# a capped-reasoning captioning call costs 1,340 input and 160 output tokens
# at either tier.
CALL_PROFILE = (1340, 160)


def _as_fraction(rate: RateLike) -> Fraction:
    if isinstance(rate, Fraction):
        return rate
    return Fraction(Decimal(str(rate)))


@dataclass(frozen=True)
class TierRates:
    usd_per_1m_input_tokens: Fraction
    usd_per_1m_output_tokens: Fraction

    @classmethod
    def of(cls, usd_in: RateLike, usd_out: RateLike) -> "TierRates":
        rate_in, rate_out = _as_fraction(usd_in), _as_fraction(usd_out)
        if rate_in < 0 or rate_out < 0:
            raise ValueError("rates must be non-negative")
        return cls(rate_in, rate_out)


@dataclass(frozen=True)
class PricingRates:
    junior_flash: TierRates = field(default_factory=lambda: TierRates.of("0.30", "3.90"))
    senior_pro: TierRates = field(default_factory=lambda: TierRates.of("1.25", "10.00"))

    def for_tier(self, tier: Tier) -> TierRates:
        if tier == Tier.JUNIOR:
            return self.junior_flash
        if tier == Tier.SENIOR:
            return self.senior_pro
        return TierRates.of(0, 0)  # human corrections cost no API tokens


def _to_decimal(value: Fraction) -> Decimal:
    return Decimal(value.numerator) / Decimal(value.denominator)


def round_usd(value: Fraction | Decimal, places: int = 2) -> Decimal:
    dec = _to_decimal(value) if isinstance(value, Fraction) else value
    return dec.quantize(Decimal(10) ** -places, rounding=ROUND_HALF_EVEN)


def sample_cost(input_tokens: int, output_tokens: int, rates: TierRates) -> Decimal:
    """Exact USD cost of one call: tokens times the per-million rates."""
    if input_tokens < 0 or output_tokens < 0:
        raise ValueError("token counts must be non-negative")
    cost = (
        input_tokens * rates.usd_per_1m_input_tokens
        + output_tokens * rates.usd_per_1m_output_tokens
    ) / 1_000_000
    return _to_decimal(cost)


def project_cost_per_million(input_tokens: int, output_tokens: int,
                             rates: TierRates) -> Decimal:
    """USD to process one million samples with the given per-sample profile."""
    return sample_cost(input_tokens, output_tokens, rates) * 1_000_000


def blended_cost_per_million(escalation_rate: float,
                             rates: Optional[PricingRates] = None) -> Decimal:
    """Per-million cost of the handoff: every sample pays the junior call and
    an ``escalation_rate`` fraction additionally pays the senior call."""
    if not 0.0 <= escalation_rate <= 1.0:
        raise ValueError("escalation rate must be in [0, 1]")
    rates = rates or PricingRates()
    junior_row = project_cost_per_million(*CALL_PROFILE, rates.junior_flash)
    senior_row = project_cost_per_million(*CALL_PROFILE, rates.senior_pro)
    return junior_row + Decimal(str(escalation_rate)) * senior_row


# --- usage ledger ---------------------------------------------------------------

@dataclass
class UsageRecord:
    id: str
    tier: Tier
    input_tokens: int
    output_tokens: int

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "tier": self.tier.value,
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "UsageRecord":
        return cls(raw["id"], Tier(raw["tier"]),
                   int(raw["input_tokens"]), int(raw["output_tokens"]))


class UsageLedger:
    """Append-only per-call token usage; aggregates always equal the sum of
    the records. Appends are serialized for the worker pool."""

    def __init__(self, records: Optional[Iterable[UsageRecord]] = None):
        self._lock = threading.Lock()
        self.records: list[UsageRecord] = list(records or [])

    def record(self, entry_id: str, tier: Tier,
               input_tokens: int, output_tokens: int) -> None:
        if input_tokens < 0 or output_tokens < 0:
            raise ValueError("token counts must be non-negative")
        with self._lock:
            self.records.append(UsageRecord(entry_id, tier, input_tokens, output_tokens))

    def __len__(self) -> int:
        return len(self.records)

    def total_cost(self, rates: Optional[PricingRates] = None) -> Decimal:
        rates = rates or PricingRates()
        total = Fraction(0)
        for rec in self.records:
            tier_rates = rates.for_tier(rec.tier)
            total += (
                rec.input_tokens * tier_rates.usd_per_1m_input_tokens
                + rec.output_tokens * tier_rates.usd_per_1m_output_tokens
            ) / 1_000_000
        return _to_decimal(total)

    def tier_cost(self, tier: Tier, rates: Optional[PricingRates] = None) -> Decimal:
        subset = UsageLedger(r for r in self.records if r.tier == tier)
        return subset.total_cost(rates)

    def write_jsonl(self, path: str | Path) -> None:
        # canonical (id, tier) order keeps the file byte-identical across
        # runs regardless of worker interleaving
        tier_rank = {Tier.JUNIOR: 0, Tier.SENIOR: 1, Tier.HUMAN: 2}
        ordered = sorted(self.records, key=lambda r: (r.id, tier_rank[r.tier]))
        with Path(path).open("w", encoding="utf-8") as fh:
            for rec in ordered:
                fh.write(json.dumps(rec.to_dict()) + "\n")

    @classmethod
    def read_jsonl(cls, path: str | Path) -> "UsageLedger":
        records = []
        with Path(path).open("r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    records.append(UsageRecord.from_dict(json.loads(line)))
        return cls(records)


def ledger_report(ledger: UsageLedger, rates: Optional[PricingRates] = None) -> dict:
    """Totals, per-tier split, escalation rate, and mean token counts."""
    rates = rates or PricingRates()
    records = ledger.records
    ids = {r.id for r in records}
    escalated = {r.id for r in records if r.tier == Tier.SENIOR}
    n = len(records)
    report = {
        "records": n,
        "samples": len(ids),
        "total_usd": float(round_usd(ledger.total_cost(rates))),
        "per_tier_usd": {
            tier.value: float(round_usd(ledger.tier_cost(tier, rates)))
            for tier in (Tier.JUNIOR, Tier.SENIOR)
        },
        "escalation_rate": (len(escalated) / len(ids)) if ids else 0.0,
        "mean_tokens": {
            "input": (sum(r.input_tokens for r in records) / n) if n else 0.0,
            "output": (sum(r.output_tokens for r in records) / n) if n else 0.0,
        },
    }
    return report


def cost_table(rates: Optional[PricingRates] = None) -> list[dict]:
    """The four reference configurations of the captioning cost ablation."""
    rates = rates or PricingRates()
    rows = [
        ("senior full reasoning, raw video", rates.senior_pro, 3820, 550),
        ("senior full reasoning, compressed vision", rates.senior_pro, 1340, 550),
        ("senior capped reasoning", rates.senior_pro, 1340, 160),
        ("junior capped reasoning", rates.junior_flash, 1340, 160),
    ]
    return [
        {
            "configuration": name,
            "input_tokens": tokens_in,
            "output_tokens": tokens_out,
            "usd_per_1m_samples": float(round_usd(
                project_cost_per_million(tokens_in, tokens_out, tier))),
        }
        for name, tier, tokens_in, tokens_out in rows
    ]
