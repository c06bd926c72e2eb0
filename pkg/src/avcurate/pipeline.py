"""Caption-curation pipeline: consistency routing, junior-senior handoff with
escalation, post-hoc filtering, and the caption style contract.

Routing happens before any captioning call so discard-routed noise never
spends tokens. Per-sample results depend only on the sample, so the worker
pool can process entries in any order and still produce the same output set.
"""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .clients import AgentTier, CoverageVerdict, JudgeKind
from .core import (
    CaptionFlag,
    CaptionRecord,
    ManifestEntry,
    ManifestStore,
    RouteClass,
    Status,
    Tier,
)
from .costing import UsageLedger
from .errors import ClientError, InvalidScore
from .resources import default_hallucination_phrases, default_sound_lexicon

logger = logging.getLogger(__name__)

MAX_CAPTION_WORDS = 40

DEFAULT_CONNECTIVES = ("followed by", "then", "while", "and", ",")


@dataclass
class RouterConfig:
    tau_low: float = 0.20
    tau_high: float = 0.30

    def __post_init__(self):
        if not 0.0 <= self.tau_low <= self.tau_high <= 1.0:
            raise ValueError("require 0 <= tau_low <= tau_high <= 1")


@dataclass
class EscalationConfig:
    tau_clap_general: float = 0.35
    tau_clap_music: float = 0.15
    hallucination_lexicon: list[str] = field(default_factory=default_hallucination_phrases)
    complexity_min_events: int = 3
    sound_lexicon: list[str] = field(default_factory=default_sound_lexicon)
    connectives: tuple[str, ...] = DEFAULT_CONNECTIVES


@dataclass
class FilterConfig:
    tau_verify: float = 0.35
    enforce_style: bool = True


@dataclass
class PipelineConfig:
    router: RouterConfig = field(default_factory=RouterConfig)
    escalation: EscalationConfig = field(default_factory=EscalationConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)


# --- routing -------------------------------------------------------------------

def route(s_ib: float, cfg: Optional[RouterConfig] = None) -> RouteClass:
    """Three-way consistency routing on the AV-alignment score."""
    cfg = cfg or RouterConfig()
    if not -1.0 <= s_ib <= 1.0:
        raise InvalidScore(f"alignment score {s_ib} outside [-1, 1]")
    if s_ib > cfg.tau_high:
        return RouteClass.ENHANCED
    if s_ib >= cfg.tau_low:
        return RouteClass.AUDIO_ONLY
    return RouteClass.DISCARD


# --- escalation heuristics -------------------------------------------------------

def _connective_pattern(connectives) -> re.Pattern:
    parts = []
    for conn in connectives:
        if conn.strip(" ,;").isalpha() or " " in conn:
            parts.append(r"\b" + r"\s+".join(map(re.escape, conn.split())) + r"\b")
        else:
            parts.append(re.escape(conn))
    return re.compile("|".join(parts), re.IGNORECASE)


def complexity_score(caption: str,
                     connectives=DEFAULT_CONNECTIVES,
                     sound_lexicon: Optional[list[str]] = None) -> int:
    """Count sound-event clauses: split on connectives, keep segments that
    mention at least one sound-lexicon term."""
    if not caption.strip():
        return 0
    lexicon = sound_lexicon if sound_lexicon is not None else default_sound_lexicon()
    segments = _connective_pattern(connectives).split(caption)
    count = 0
    for segment in segments:
        lowered = segment.lower()
        if lowered.strip() and any(term in lowered for term in lexicon):
            count += 1
    return count


def needs_escalation(caption: CaptionRecord, clap: float, is_music: bool,
                     cfg: Optional[EscalationConfig] = None) -> tuple[bool, list[CaptionFlag]]:
    """Flag a junior caption for senior review; any flag escalates."""
    cfg = cfg or EscalationConfig()
    if not -1.0 <= clap <= 1.0:
        raise InvalidScore(f"clap score {clap} outside [-1, 1]")
    flags: list[CaptionFlag] = []
    threshold = cfg.tau_clap_music if is_music else cfg.tau_clap_general
    if clap < threshold:
        flags.append(CaptionFlag.LOW_CLAP)
    lowered = caption.text.lower()
    if any(phrase.lower() in lowered for phrase in cfg.hallucination_lexicon):
        flags.append(CaptionFlag.HALLUCINATION_PHRASE)
    if complexity_score(caption.text, cfg.connectives, cfg.sound_lexicon) >= cfg.complexity_min_events:
        flags.append(CaptionFlag.COMPLEXITY)
    return bool(flags), flags


# --- style contract --------------------------------------------------------------

_LIST_LINE = re.compile(r"^\s*(?:[-*]|\d+\.)\s")


def validate_caption_style(caption: str) -> list[str]:
    """Check the caption output contract: prose only, at most 40 words."""
    violations: list[str] = []
    if not caption.strip():
        violations.append("Empty")
        return violations
    if len(caption.split()) > MAX_CAPTION_WORDS:
        violations.append("TooLong")
    if any(_LIST_LINE.match(line) for line in caption.splitlines()):
        violations.append("ListFormatting")
    return violations


# --- handoff and filtering --------------------------------------------------------

def verify_acoustic_inference(clients, caption: str, visual_context: str) -> bool:
    """Ask the judge whether the caption is a plausible inference from the
    visual context (coverage audit with the context as a single label)."""
    verdict: CoverageVerdict = clients.judge(
        JudgeKind.COVERAGE_AUDIT,
        {"caption": caption, "labels": [{"name": visual_context}]},
    )
    return verdict.covered


def run_handoff(entry: ManifestEntry, clients,
                cfg: Optional[EscalationConfig] = None,
                ledger: Optional[UsageLedger] = None) -> ManifestEntry:
    """Caption one routed entry through the junior agent, escalating to the
    senior agent when flagged. Returns the entry with the caption attached."""
    cfg = cfg or EscalationConfig()
    if entry.route not in (RouteClass.ENHANCED, RouteClass.AUDIO_ONLY):
        raise ValueError(f"{entry.id}: handoff needs an Enhanced or AudioOnly route")

    if entry.route == RouteClass.ENHANCED and not entry.visual_context:
        entry = replace(entry, visual_context=clients.compress_vision(entry.media.video_path))
    context = entry.visual_context if entry.route == RouteClass.ENHANCED else None

    audio_ref = entry.media.audio_path
    junior = clients.generate_caption(AgentTier.junior(), audio_ref, context)
    junior_clap = clients.score_text_audio(junior.text, audio_ref)
    if ledger is not None:
        ledger.record(entry.id, Tier.JUNIOR, junior.input_tokens, junior.output_tokens)

    is_music = any(label.is_music for label in entry.labels)
    junior_record = CaptionRecord(
        text=junior.text, agent_tier=Tier.JUNIOR,
        input_tokens=junior.input_tokens, output_tokens=junior.output_tokens,
        clap_score=junior_clap,
    )
    escalate, flags = needs_escalation(junior_record, junior_clap, is_music, cfg)
    if not escalate:
        return replace(entry, caption=junior_record)

    senior = clients.generate_caption(AgentTier.senior(), audio_ref, context)
    senior_clap = clients.score_text_audio(senior.text, audio_ref)
    if ledger is not None:
        ledger.record(entry.id, Tier.SENIOR, senior.input_tokens, senior.output_tokens)
    senior_record = CaptionRecord(
        text=senior.text, agent_tier=Tier.SENIOR,
        input_tokens=senior.input_tokens, output_tokens=senior.output_tokens,
        clap_score=senior_clap, flags=flags,
    )
    return replace(entry, caption=senior_record)


def posthoc_filter(entry: ManifestEntry, clients,
                   cfg: Optional[FilterConfig] = None) -> Status:
    """Final accept/discard/flag decision for a captioned entry.

    The caption must clear the text-audio faithfulness gate; Enhanced-path
    captions additionally need a pass from the acoustic-inference verifier.
    A judge failure flags the entry for manual review instead of discarding.
    """
    cfg = cfg or FilterConfig()
    if entry.caption is None or entry.caption.clap_score is None:
        raise ValueError(f"{entry.id}: post-hoc filter needs a scored caption")

    if entry.caption.clap_score < cfg.tau_verify:
        return Status.DISCARDED

    if entry.route == RouteClass.ENHANCED:
        try:
            passed = verify_acoustic_inference(clients, entry.caption.text, entry.visual_context or "")
        except ClientError as exc:
            logger.warning("verifier failed for %s: %s", entry.id, exc)
            entry.extra = dict(entry.extra) | {"error_note": f"verifier failure: {exc}"}
            return Status.FLAGGED
        entry.verifier_pass = passed
        if not passed:
            return Status.DISCARDED

    if cfg.enforce_style:
        violations = validate_caption_style(entry.caption.text)
        if violations:
            entry.extra = dict(entry.extra) | {"style_violations": violations}
            return Status.FLAGGED
    return Status.ACCEPTED


# --- full pipeline ---------------------------------------------------------------

@dataclass
class PipelineSummary:
    accepted: int = 0
    discarded: int = 0
    flagged: int = 0
    pending: list[str] = field(default_factory=list)
    captioned: int = 0
    escalated: int = 0

    @property
    def escalation_rate(self) -> float:
        return self.escalated / self.captioned if self.captioned else 0.0

    # no timestamps or wall-clock fields: identical runs must serialize
    # byte-identically
    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "discarded": self.discarded,
            "flagged": self.flagged,
            "pending": list(self.pending),
            "captioned": self.captioned,
            "escalated": self.escalated,
            "escalation_rate": self.escalation_rate,
        }


def _process_entry(entry: ManifestEntry, clients, cfg: PipelineConfig,
                   ledger: Optional[UsageLedger]) -> ManifestEntry:
    if entry.scores.ib_score is None:
        if not entry.media.video_path:
            raise ValueError(f"{entry.id}: no alignment score and no video to score")
        score = clients.score_av_alignment(entry.media.video_path, entry.media.audio_path)
        entry = replace(entry, scores=replace(entry.scores, ib_score=score))

    routed = route(entry.scores.ib_score, cfg.router)
    entry = replace(entry, route=routed)
    if routed == RouteClass.DISCARD:
        return replace(entry, status=Status.DISCARDED)

    entry = run_handoff(entry, clients, cfg.escalation, ledger)
    status = posthoc_filter(entry, clients, cfg.filter)
    return replace(entry, status=status)


def run_pipeline(manifest_path: str | Path, clients,
                 cfg: Optional[PipelineConfig] = None,
                 parallelism: int = 1,
                 ledger: Optional[UsageLedger] = None) -> PipelineSummary:
    """Drive every Pending manifest entry to Accepted/Discarded/Flagged.

    Already-resolved entries are skipped, so rerunning on a completed
    manifest appends nothing and reports the same summary.
    """
    cfg = cfg or PipelineConfig()
    store = ManifestStore(manifest_path)
    todo = [e for e in store.entries() if e.status == Status.PENDING]

    def work(entry: ManifestEntry) -> tuple[str, Optional[ManifestEntry], Optional[str]]:
        try:
            return entry.id, _process_entry(entry, clients, cfg, ledger), None
        except Exception as exc:  # noqa: BLE001 - partial failure leaves entries Pending
            logger.warning("pipeline failed on %s: %s", entry.id, exc)
            return entry.id, None, str(exc)

    summary = PipelineSummary()
    if parallelism <= 1:
        results = map(work, todo)
    else:
        pool = ThreadPoolExecutor(max_workers=parallelism)
        results = pool.map(work, todo)
    for entry_id, processed, error in results:
        if processed is None:
            summary.pending.append(entry_id)
        else:
            store.append(processed)
    if parallelism > 1:
        pool.shutdown()

    for entry in store.entries():
        if entry.status == Status.ACCEPTED:
            summary.accepted += 1
        elif entry.status == Status.DISCARDED:
            summary.discarded += 1
        elif entry.status == Status.FLAGGED:
            summary.flagged += 1
        if entry.caption is not None:
            summary.captioned += 1
            if entry.caption.agent_tier == Tier.SENIOR:
                summary.escalated += 1
    return summary
