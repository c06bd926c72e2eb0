"""Exact cost arithmetic: per-sample, per-million, blended, and ledger totals."""

from __future__ import annotations

from decimal import Decimal

import pytest

from avcurate.core import Tier
from avcurate.costing import (
    PricingRates,
    TierRates,
    UsageLedger,
    UsageRecord,
    blended_cost_per_million,
    cost_table,
    ledger_report,
    project_cost_per_million,
    sample_cost,
)

PRO = TierRates.of("1.25", "10.00")
FLASH = TierRates.of("0.30", "3.90")


class TestSampleCost:
    def test_zero(self):
        assert sample_cost(0, 0, PRO) == Decimal("0")

    def test_full_reasoning_raw_video_sample(self):
        assert sample_cost(3820, 550, PRO) == Decimal("0.010275")

    def test_capped_reasoning_sample(self):
        assert sample_cost(1340, 160, PRO) == Decimal("0.003275")

    def test_negative_tokens_rejected(self):
        with pytest.raises(ValueError):
            sample_cost(-1, 0, PRO)


class TestProjection:
    @pytest.mark.parametrize("tokens_in,tokens_out,rates,expected", [
        (3820, 550, PRO, "10275.00"),
        (1340, 550, PRO, "7175.00"),
        (1340, 160, PRO, "3275.00"),
        (1340, 160, FLASH, "1026.00"),
    ])
    def test_reference_rows(self, tokens_in, tokens_out, rates, expected):
        assert project_cost_per_million(tokens_in, tokens_out, rates) == Decimal(expected)

    def test_cost_table_reproduces_all_rows(self):
        rows = [r["usd_per_1m_samples"] for r in cost_table()]
        assert rows == [10275.00, 7175.00, 3275.00, 1026.00]


class TestBlended:
    def test_no_escalation(self):
        assert blended_cost_per_million(0.0) == Decimal("1026.00")

    def test_full_escalation(self):
        assert blended_cost_per_million(1.0) == Decimal("4301.00")

    def test_observed_escalation_band(self):
        cost = blended_cost_per_million(0.297)
        assert cost == Decimal("1998.675")
        assert Decimal("1990") <= cost <= Decimal("2010")

    def test_monotone_in_rate(self):
        costs = [blended_cost_per_million(e / 10) for e in range(11)]
        assert costs == sorted(costs)


class TestLedger:
    def test_empty_report(self):
        report = ledger_report(UsageLedger())
        assert report["total_usd"] == 0.0
        assert report["escalation_rate"] == 0.0
        assert report["mean_tokens"] == {"input": 0.0, "output": 0.0}

    def test_single_escalated_sample(self):
        ledger = UsageLedger([
            UsageRecord("x", Tier.JUNIOR, 1340, 160),
            UsageRecord("x", Tier.SENIOR, 1340, 160),
        ])
        report = ledger_report(ledger)
        assert report["escalation_rate"] == 1.0
        assert report["samples"] == 1

    def test_thousand_records_match_brute_force(self):
        # Oracle: spreadsheet-style summation with exact decimals.
        records = []
        expected = Decimal("0")
        for i in range(1000):
            tier = Tier.SENIOR if i % 3 == 0 else Tier.JUNIOR
            tokens_in, tokens_out = 1000 + i, 50 + (i % 200)
            records.append(UsageRecord(f"id{i}", tier, tokens_in, tokens_out))
            rate_in, rate_out = (Decimal("1.25"), Decimal("10.00")) if tier == Tier.SENIOR \
                else (Decimal("0.30"), Decimal("3.90"))
            expected += (tokens_in * rate_in + tokens_out * rate_out) / Decimal(10**6)
        ledger = UsageLedger(records)
        assert ledger.total_cost() == expected

    def test_linearity_of_concatenation(self):
        part_a = UsageLedger([UsageRecord("a", Tier.JUNIOR, 1340, 160)])
        part_b = UsageLedger([UsageRecord("b", Tier.SENIOR, 3820, 550)])
        merged = UsageLedger(part_a.records + part_b.records)
        assert merged.total_cost() == part_a.total_cost() + part_b.total_cost()

    def test_jsonl_round_trip(self, tmp_path):
        ledger = UsageLedger([UsageRecord("a", Tier.JUNIOR, 10, 5)])
        path = tmp_path / "ledger.jsonl"
        ledger.write_jsonl(path)
        assert UsageLedger.read_jsonl(path).records == ledger.records
