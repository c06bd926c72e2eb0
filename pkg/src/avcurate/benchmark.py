"""Benchmark track construction: ground-truth coverage audit, the natural
off-screen filter chain, synthetic music mixing, and track assembly.

Tracks are emitted as self-contained JSONL manifests. Assembly is
deterministic for a fixed (manifest, config, seed): candidate batches come
from the pinned split-mix generator and rows serialize with a fixed key
order, so reruns are byte-identical.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional

from . import __version__
from .audio import MixSpec, mix_offscreen, read_wav, write_wav
from .clients import CoverageVerdict, JudgeKind
from .core import ManifestEntry, ManifestStore, Modality, ModalityLabel, Status
from .errors import ClientError, EmptyCandidates, EmptyLabels, MissingScore
from .rng import SplitMix64

logger = logging.getLogger(__name__)


@dataclass
class NaturalFilterConfig:
    av_ratio_min: float = 0.25
    av_ratio_max: float = 0.80
    max_labels: int = 6
    speech_cap: float = 0.20
    exclude_flags: frozenset[str] = frozenset({"HasBGM", "StaticImage", "VoiceOver"})

    def __post_init__(self):
        if not 0.0 <= self.av_ratio_min <= self.av_ratio_max <= 1.0:
            raise ValueError("require 0 <= av_ratio_min <= av_ratio_max <= 1")
        if not 0.0 <= self.speech_cap <= 1.0:
            raise ValueError("speech_cap must be in [0, 1]")


@dataclass
class SyntheticBaseConfig:
    ib_min: float = 0.30
    desync_max: float = 0.55
    candidate_batch: int = 50


@dataclass
class MusicCandidate:
    id: str
    caption: str
    audio_path: str = ""


@dataclass
class FilterResult:
    passed: bool
    reason: Optional[str] = None

    def __bool__(self) -> bool:
        return self.passed


# --- label-level predicates ------------------------------------------------------

def av_ratio(labels: list[ModalityLabel]) -> float:
    if not labels:
        raise EmptyLabels("av_ratio needs at least one label")
    return sum(1 for l in labels if l.modality == Modality.AV) / len(labels)


def is_speech_entry(entry: ManifestEntry) -> bool:
    return any(l.is_speech for l in entry.labels)


def natural_offscreen_filter(entry: ManifestEntry,
                             cfg: Optional[NaturalFilterConfig] = None) -> FilterResult:
    """Off-screen candidate gate; the reason names the first failed rule."""
    cfg = cfg or NaturalFilterConfig()
    if not entry.labels:
        return FilterResult(False, "EmptyLabels")
    if any(l.modality == Modality.V for l in entry.labels):
        return FilterResult(False, "VOnlyLabel")
    if any(flag in cfg.exclude_flags for flag in entry.meta_flags):
        return FilterResult(False, "ExcludedFlag")
    if len(entry.labels) > cfg.max_labels:
        return FilterResult(False, "TooManyLabels")
    ratio = av_ratio(entry.labels)
    if not cfg.av_ratio_min <= ratio <= cfg.av_ratio_max:
        return FilterResult(False, "AvRatioOutOfBand")
    return FilterResult(True)


def balance_speech(corpus: list[ManifestEntry], cap: float) -> list[ManifestEntry]:
    """Largest subset with speech fraction <= cap: all non-speech entries stay,
    speech entries are dropped lowest alignment score first."""
    non_speech = [e for e in corpus if not is_speech_entry(e)]
    speech = [e for e in corpus if is_speech_entry(e)]
    if not speech:
        return list(corpus)

    def rank(entry: ManifestEntry):
        ib = entry.scores.ib_score
        return (ib if ib is not None else -1.5, entry.id)

    n = len(non_speech)
    keep = len(speech)
    while keep > 0 and keep / (n + keep) > cap:
        keep -= 1
    kept_ids = {e.id for e in sorted(speech, key=rank, reverse=True)[:keep]}
    return [e for e in corpus if not is_speech_entry(e) or e.id in kept_ids]


def synthetic_base_filter(entry: ManifestEntry,
                          cfg: Optional[SyntheticBaseConfig] = None) -> FilterResult:
    """Clean-base gate for synthetic mixing: fully AV, aligned, and in sync."""
    cfg = cfg or SyntheticBaseConfig()
    if not entry.labels:
        return FilterResult(False, "EmptyLabels")
    if entry.scores.ib_score is None or entry.scores.desync_score is None:
        raise MissingScore(f"{entry.id}: synthetic base filter needs ib and desync scores")
    if av_ratio(entry.labels) != 1.0:
        return FilterResult(False, "NotFullyAV")
    if entry.scores.ib_score < cfg.ib_min:
        return FilterResult(False, "LowAlignment")
    if entry.scores.desync_score >= cfg.desync_max:
        return FilterResult(False, "HighDesync")
    return FilterResult(True)


# --- music selection ----------------------------------------------------------

def select_music_candidate(video_context: str,
                           candidates: list[MusicCandidate],
                           judge_client) -> str:
    """Id of the judge's most-congruent candidate for the given context."""
    if not candidates:
        raise EmptyCandidates("no music candidates supplied")
    idx = judge_client.judge(JudgeKind.CONGRUENCE_RANK, {
        "context": video_context,
        "candidates": [c.caption for c in candidates],
    })
    return candidates[int(idx)].id


# --- coverage audit -------------------------------------------------------------

def audit_gt_coverage(entry: ManifestEntry, judge_client) -> CoverageVerdict:
    """Audit whether the caption covers every audible (A / AV) label; V-only
    labels are out of audit scope."""
    if entry.caption is None:
        raise ValueError(f"{entry.id}: coverage audit needs a caption")
    audited = [l for l in entry.labels if l.modality in (Modality.A, Modality.AV)]
    if not audited:
        return CoverageVerdict(covered=True)
    return judge_client.judge(JudgeKind.COVERAGE_AUDIT, {
        "caption": entry.caption.text,
        "labels": [{"name": l.name} for l in audited],
    })


@dataclass
class AuditSummary:
    audited: int = 0
    covered: int = 0
    mismatched: list[str] = field(default_factory=list)
    errored: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "audited": self.audited,
            "covered": self.covered,
            "mismatched": list(self.mismatched),
            "errored": list(self.errored),
        }


def audit_manifest(store: ManifestStore, judge_client) -> AuditSummary:
    """Run the coverage audit over accepted entries; mismatches and judge
    failures are flagged in place for the human review queue."""
    summary = AuditSummary()
    for entry in store.entries():
        if entry.status != Status.ACCEPTED or entry.caption is None or not entry.labels:
            continue
        summary.audited += 1
        working = replace(entry)
        try:
            verdict = audit_gt_coverage(entry, judge_client)
        except ClientError as exc:
            logger.warning("coverage audit failed for %s: %s", entry.id, exc)
            working.extra = dict(entry.extra)
            working.extra["audit"] = {"error": str(exc)}
            store.append(replace(working, status=Status.FLAGGED))
            summary.errored.append(entry.id)
            continue
        if verdict.covered:
            summary.covered += 1
            continue
        working.extra = dict(entry.extra)
        working.extra["audit"] = {"uncovered": list(verdict.uncovered)}
        store.append(replace(working, status=Status.FLAGGED))
        summary.mismatched.append(entry.id)
    return summary


# --- track assembly --------------------------------------------------------------

class Track(str, Enum):
    PRIMARY = "primary"
    OFFSCREEN_NATURAL = "offscreen-natural"
    OFFSCREEN_SYNTHETIC = "offscreen-synthetic"


@dataclass
class AssembleConfig:
    natural: NaturalFilterConfig = field(default_factory=NaturalFilterConfig)
    synthetic: SyntheticBaseConfig = field(default_factory=SyntheticBaseConfig)
    mix: MixSpec = field(default_factory=MixSpec)
    music_pool: list[MusicCandidate] = field(default_factory=list)
    mix_dir: Optional[str] = None
    caption_template: str = ", with {caption}"
    materialize_audio: bool = True


def _eligible(store: ManifestStore) -> list[ManifestEntry]:
    return [e for e in store.entries() if e.status in (Status.ACCEPTED, Status.REVIEWED)]


def _row_base(entry: ManifestEntry, track: Track, seed: int) -> dict:
    return {
        "id": f"{track.value}:{entry.id}",
        "track": track.value,
        "base_id": entry.id,
        "caption": entry.caption.text if entry.caption else "",
        "labels": [l.to_dict() for l in entry.labels],
        "audio_path": entry.media.audio_path,
        "video_path": entry.media.video_path,
        "provenance": {"seed": seed, "generator": f"avcurate {__version__}"},
    }


def _primary_rows(entries: list[ManifestEntry], seed: int) -> list[dict]:
    return [_row_base(e, Track.PRIMARY, seed) for e in entries]


def _natural_rows(entries: list[ManifestEntry], cfg: AssembleConfig, seed: int) -> list[dict]:
    passing = [e for e in entries if natural_offscreen_filter(e, cfg.natural)]
    balanced = balance_speech(passing, cfg.natural.speech_cap)
    return [_row_base(e, Track.OFFSCREEN_NATURAL, seed) for e in balanced]


def _synthetic_rows(store: ManifestStore, entries: list[ManifestEntry],
                    cfg: AssembleConfig, seed: int, out_dir: Path,
                    judge_client) -> list[dict]:
    if judge_client is None:
        raise ValueError("assemble_track needs a judge client for the synthetic track")
    if not cfg.music_pool:
        raise EmptyCandidates("synthetic track needs a music pool")
    bases = [e for e in entries if synthetic_base_filter(e, cfg.synthetic)]
    rng = SplitMix64(seed)
    mix_dir = Path(cfg.mix_dir) if cfg.mix_dir else out_dir / "mixes"
    rows: list[dict] = []
    for base in bases:
        batch_size = min(cfg.synthetic.candidate_batch, len(cfg.music_pool))
        picked = rng.sample_indices(len(cfg.music_pool), batch_size)
        candidates = [cfg.music_pool[i] for i in picked]
        context = base.visual_context or (base.caption.text if base.caption else "")
        try:
            chosen_id = select_music_candidate(context, candidates, judge_client)
        except ClientError as exc:
            logger.warning("music selection failed for %s: %s", base.id, exc)
            flagged = replace(base, status=Status.FLAGGED)
            flagged.extra = dict(base.extra)
            flagged.extra["audit"] = {"error": f"music selection: {exc}"}
            store.append(flagged)
            continue
        overlay = next(c for c in candidates if c.id == chosen_id)
        row = _row_base(base, Track.OFFSCREEN_SYNTHETIC, seed)
        row["id"] = f"{Track.OFFSCREEN_SYNTHETIC.value}:{base.id}"
        row["overlay_id"] = overlay.id
        row["mix_gain_db"] = cfg.mix.overlay_gain_db
        row["caption"] = row["caption"] + cfg.caption_template.format(
            caption=overlay.caption.lower())
        if cfg.materialize_audio:
            mix_dir.mkdir(parents=True, exist_ok=True)
            mixed = mix_offscreen(read_wav(base.media.audio_path),
                                  read_wav(overlay.audio_path), cfg.mix)
            mix_path = mix_dir / f"{base.id}__{overlay.id}.wav"
            write_wav(mix_path, mixed)
            row["audio_path"] = str(mix_path)
        rows.append(row)
    return rows


_ROW_KEY_ORDER = [
    "id", "track", "base_id", "overlay_id", "mix_gain_db", "caption",
    "labels", "audio_path", "video_path", "provenance",
]


def _row_line(row: dict) -> str:
    ordered = {k: row[k] for k in _ROW_KEY_ORDER if k in row}
    ordered.update({k: v for k, v in row.items() if k not in _ROW_KEY_ORDER})
    return json.dumps(ordered, ensure_ascii=False, separators=(",", ": "))


def assemble_track(store: ManifestStore, track: Track,
                   cfg: Optional[AssembleConfig] = None, seed: int = 0,
                   out_path: str | Path = "track.jsonl",
                   judge_client=None) -> list[dict]:
    """Build one benchmark track and write it atomically as JSONL.

    Only Accepted/Reviewed entries participate; Discarded ids can never
    appear. Returns the emitted rows.
    """
    cfg = cfg or AssembleConfig()
    out_path = Path(out_path)
    entries = _eligible(store)
    if track == Track.PRIMARY:
        rows = _primary_rows(entries, seed)
    elif track == Track.OFFSCREEN_NATURAL:
        rows = _natural_rows(entries, cfg, seed)
    elif track == Track.OFFSCREEN_SYNTHETIC:
        rows = _synthetic_rows(store, entries, cfg, seed, out_path.parent, judge_client)
    else:
        raise ValueError(f"unknown track {track!r}")

    tmp = out_path.with_suffix(out_path.suffix + ".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(_row_line(row) + "\n")
    tmp.replace(out_path)
    return rows
