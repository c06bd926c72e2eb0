"""Domain types shared by all modules and the append-only JSONL manifest store.

Every sample is one ``ManifestEntry`` persisted as a single JSON object per
line. The file is append-only: updates append a new line with a bumped
revision and readers keep, per id, the entry with the highest revision.
Unknown JSON keys survive a load/append round trip untouched.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Optional

from .errors import (
    DuplicateRevision,
    InvalidTransition,
    ManifestParseError,
    RevisionConflict,
)

SENIOR_OUTPUT_TOKEN_CAP = 128


class RouteClass(str, Enum):
    ENHANCED = "Enhanced"
    AUDIO_ONLY = "AudioOnly"
    DISCARD = "Discard"


class Status(str, Enum):
    PENDING = "Pending"
    ACCEPTED = "Accepted"
    DISCARDED = "Discarded"
    FLAGGED = "Flagged"
    REVIEWED = "Reviewed"


class Tier(str, Enum):
    JUNIOR = "Junior"
    SENIOR = "Senior"
    HUMAN = "Human"


class Modality(str, Enum):
    A = "A"
    AV = "AV"
    V = "V"


class CaptionFlag(str, Enum):
    COMPLEXITY = "Complexity"
    HALLUCINATION_PHRASE = "HallucinationPhrase"
    LOW_CLAP = "LowClap"


# Lifecycle: Pending fans out once; the coverage audit can demote Accepted to
# Flagged; Flagged resolves to Reviewed or Discarded (human rejection);
# everything else is terminal. Self-loops carry metadata updates (route,
# scores, context) that do not change the status.
_ALLOWED_TRANSITIONS = {
    Status.PENDING: {Status.PENDING, Status.ACCEPTED, Status.DISCARDED, Status.FLAGGED},
    Status.FLAGGED: {Status.FLAGGED, Status.REVIEWED, Status.DISCARDED},
    Status.ACCEPTED: {Status.ACCEPTED, Status.FLAGGED},
    Status.DISCARDED: {Status.DISCARDED},
    Status.REVIEWED: {Status.REVIEWED},
}


def _take(raw: dict, known: tuple[str, ...]) -> dict:
    """Split off unknown keys so they can be re-emitted on serialization."""
    return {k: v for k, v in raw.items() if k not in known}


@dataclass
class MediaRef:
    audio_path: str
    video_path: Optional[str] = None
    duration_s: float = 10.0
    sample_rate_hz: int = 16000
    extra: dict = field(default_factory=dict)

    _KNOWN = ("audio_path", "video_path", "duration_s", "sample_rate_hz")

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"audio_path": self.audio_path}
        if self.video_path is not None:
            d["video_path"] = self.video_path
        d["duration_s"] = self.duration_s
        d["sample_rate_hz"] = self.sample_rate_hz
        d.update(self.extra)
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "MediaRef":
        return cls(
            audio_path=raw.get("audio_path", ""),
            video_path=raw.get("video_path"),
            duration_s=raw.get("duration_s", 10.0),
            sample_rate_hz=raw.get("sample_rate_hz", 16000),
            extra=_take(raw, cls._KNOWN),
        )


@dataclass
class ScoreSet:
    ib_score: Optional[float] = None
    clap_score: Optional[float] = None
    desync_score: Optional[float] = None
    extra: dict = field(default_factory=dict)

    _KNOWN = ("ib_score", "clap_score", "desync_score")

    def to_dict(self) -> dict:
        d: dict[str, Any] = {}
        if self.ib_score is not None:
            d["ib_score"] = self.ib_score
        if self.clap_score is not None:
            d["clap_score"] = self.clap_score
        if self.desync_score is not None:
            d["desync_score"] = self.desync_score
        d.update(self.extra)
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "ScoreSet":
        return cls(
            ib_score=raw.get("ib_score"),
            clap_score=raw.get("clap_score"),
            desync_score=raw.get("desync_score"),
            extra=_take(raw, cls._KNOWN),
        )


@dataclass
class CaptionRecord:
    text: str
    agent_tier: Tier
    input_tokens: int = 0
    output_tokens: int = 0
    clap_score: Optional[float] = None
    flags: list[CaptionFlag] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    _KNOWN = ("text", "agent_tier", "input_tokens", "output_tokens", "clap_score", "flags")

    def to_dict(self) -> dict:
        d: dict[str, Any] = {
            "text": self.text,
            "agent_tier": self.agent_tier.value,
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
        }
        if self.clap_score is not None:
            d["clap_score"] = self.clap_score
        d["flags"] = [f.value for f in self.flags]
        d.update(self.extra)
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "CaptionRecord":
        return cls(
            text=raw.get("text", ""),
            agent_tier=Tier(raw.get("agent_tier", "Junior")),
            input_tokens=raw.get("input_tokens", 0),
            output_tokens=raw.get("output_tokens", 0),
            clap_score=raw.get("clap_score"),
            flags=[CaptionFlag(f) for f in raw.get("flags", [])],
            extra=_take(raw, cls._KNOWN),
        )


@dataclass
class ModalityLabel:
    name: str
    modality: Modality = Modality.AV
    is_speech: bool = False
    is_music: bool = False
    extra: dict = field(default_factory=dict)

    _KNOWN = ("name", "modality", "is_speech", "is_music")

    def to_dict(self) -> dict:
        d: dict[str, Any] = {
            "name": self.name,
            "modality": self.modality.value,
            "is_speech": self.is_speech,
            "is_music": self.is_music,
        }
        d.update(self.extra)
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "ModalityLabel":
        return cls(
            name=raw.get("name", ""),
            modality=Modality(raw.get("modality", "AV")),
            is_speech=raw.get("is_speech", False),
            is_music=raw.get("is_music", False),
            extra=_take(raw, cls._KNOWN),
        )


class DecisionAction(str, Enum):
    ACCEPT = "Accept"
    CORRECT = "Correct"
    REJECT = "Reject"


@dataclass
class Decision:
    action: DecisionAction
    reviewer_id: str
    timestamp: str
    note: str = ""
    corrected_caption: Optional[str] = None
    extra: dict = field(default_factory=dict)

    _KNOWN = ("action", "reviewer_id", "timestamp", "note", "corrected_caption")

    def to_dict(self) -> dict:
        d: dict[str, Any] = {
            "action": self.action.value,
            "reviewer_id": self.reviewer_id,
            "timestamp": self.timestamp,
            "note": self.note,
        }
        if self.corrected_caption is not None:
            d["corrected_caption"] = self.corrected_caption
        d.update(self.extra)
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "Decision":
        return cls(
            action=DecisionAction(raw["action"]),
            reviewer_id=raw.get("reviewer_id", ""),
            timestamp=raw.get("timestamp", ""),
            note=raw.get("note", ""),
            corrected_caption=raw.get("corrected_caption"),
            extra=_take(raw, cls._KNOWN),
        )


@dataclass
class ManifestEntry:
    id: str
    dataset: str
    media: MediaRef
    labels: list[ModalityLabel] = field(default_factory=list)
    scores: ScoreSet = field(default_factory=ScoreSet)
    route: Optional[RouteClass] = None
    visual_context: Optional[str] = None
    caption: Optional[CaptionRecord] = None
    status: Status = Status.PENDING
    revision: int = 0
    decisions: list[Decision] = field(default_factory=list)
    # meta_flags carries source-metadata markers (HasBGM, StaticImage,
    # VoiceOver) consumed by the benchmark filters; verifier_pass records the
    # post-hoc acoustic-inference verdict for audit.
    meta_flags: list[str] = field(default_factory=list)
    verifier_pass: Optional[bool] = None
    extra: dict = field(default_factory=dict)

    _KNOWN = (
        "id", "dataset", "media", "labels", "scores", "route", "visual_context",
        "caption", "status", "revision", "decisions", "meta_flags", "verifier_pass",
    )

    def to_dict(self) -> dict:
        d: dict[str, Any] = {
            "id": self.id,
            "dataset": self.dataset,
            "media": self.media.to_dict(),
            "labels": [l.to_dict() for l in self.labels],
            "scores": self.scores.to_dict(),
        }
        if self.route is not None:
            d["route"] = self.route.value
        if self.visual_context is not None:
            d["visual_context"] = self.visual_context
        if self.caption is not None:
            d["caption"] = self.caption.to_dict()
        d["status"] = self.status.value
        d["revision"] = self.revision
        d["decisions"] = [dec.to_dict() for dec in self.decisions]
        if self.meta_flags:
            d["meta_flags"] = list(self.meta_flags)
        if self.verifier_pass is not None:
            d["verifier_pass"] = self.verifier_pass
        d.update(self.extra)
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "ManifestEntry":
        if "id" not in raw:
            raise KeyError("entry missing 'id'")
        return cls(
            id=raw["id"],
            dataset=raw.get("dataset", ""),
            media=MediaRef.from_dict(raw.get("media", {"audio_path": ""})),
            labels=[ModalityLabel.from_dict(l) for l in raw.get("labels", [])],
            scores=ScoreSet.from_dict(raw.get("scores", {})),
            route=RouteClass(raw["route"]) if raw.get("route") is not None else None,
            visual_context=raw.get("visual_context"),
            caption=CaptionRecord.from_dict(raw["caption"]) if raw.get("caption") else None,
            status=Status(raw.get("status", "Pending")),
            revision=raw.get("revision", 0),
            decisions=[Decision.from_dict(x) for x in raw.get("decisions", [])],
            meta_flags=list(raw.get("meta_flags", [])),
            verifier_pass=raw.get("verifier_pass"),
            extra=_take(raw, cls._KNOWN),
        )

    def to_json_line(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, separators=(",", ": "))


# --- validation --------------------------------------------------------------

def validate_entry(entry: ManifestEntry) -> list[str]:
    """Return every invariant violation; an empty list means the entry is valid."""
    violations: list[str] = []
    m = entry.media
    if not m.audio_path:
        violations.append("EmptyAudioPath")
    if not m.duration_s > 0:
        violations.append("InvalidDuration")
    if m.sample_rate_hz <= 0:
        violations.append("InvalidSampleRate")

    s = entry.scores
    if s.ib_score is not None and not -1.0 <= s.ib_score <= 1.0:
        violations.append("ScoreOutOfRange")
    if s.clap_score is not None and not -1.0 <= s.clap_score <= 1.0:
        violations.append("ScoreOutOfRange")
    if s.desync_score is not None and s.desync_score < 0:
        violations.append("ScoreOutOfRange")

    for label in entry.labels:
        if not label.name:
            violations.append("EmptyLabelName")
            break

    c = entry.caption
    if c is not None:
        if c.input_tokens < 0 or c.output_tokens < 0:
            violations.append("NegativeTokenCount")
        if c.agent_tier == Tier.SENIOR and c.output_tokens > SENIOR_OUTPUT_TOKEN_CAP:
            violations.append("SeniorTokenCapExceeded")
        if c.clap_score is not None and not -1.0 <= c.clap_score <= 1.0:
            violations.append("ScoreOutOfRange")
    if entry.status == Status.ACCEPTED and (c is None or not c.text.strip()):
        violations.append("EmptyCaptionText")

    if entry.revision < 0:
        violations.append("NegativeRevision")
    return violations


# --- manifest I/O -------------------------------------------------------------

def iter_manifest_lines(path: Path):
    """Yield (line_number, parsed dict) for every non-blank manifest line."""
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                raw = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise ManifestParseError(line_no, f"invalid JSON: {exc.msg}") from exc
            if not isinstance(raw, dict):
                raise ManifestParseError(line_no, "line is not a JSON object")
            yield line_no, raw


def load_manifest(path: str | Path) -> list[ManifestEntry]:
    """Current view of a manifest: per id, the entry with the highest revision.

    Order follows first appearance in the file. Raises ManifestParseError with
    the offending line number and DuplicateRevision on a repeated
    (id, revision) pair.
    """
    path = Path(path)
    current: dict[str, ManifestEntry] = {}
    seen: set[tuple[str, int]] = set()
    order: list[str] = []
    for line_no, raw in iter_manifest_lines(path):
        try:
            entry = ManifestEntry.from_dict(raw)
        except (KeyError, ValueError, TypeError) as exc:
            raise ManifestParseError(line_no, f"bad entry: {exc}") from exc
        key = (entry.id, entry.revision)
        if key in seen:
            raise DuplicateRevision(entry.id, entry.revision)
        seen.add(key)
        if entry.id not in current:
            order.append(entry.id)
            current[entry.id] = entry
        elif entry.revision > current[entry.id].revision:
            current[entry.id] = entry
    return [current[i] for i in order]


class ManifestStore:
    """Append-only JSONL store with optimistic-lock revisions.

    Appends are serialized through a single writer lock; the in-memory
    current view is rebuilt from the file on open and kept in sync on append.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._current: dict[str, ManifestEntry] = {}
        self._order: list[str] = []
        if self.path.exists():
            for entry in load_manifest(self.path):
                self._current[entry.id] = entry
                self._order.append(entry.id)

    def get(self, entry_id: str) -> Optional[ManifestEntry]:
        with self._lock:
            return self._current.get(entry_id)

    def entries(self) -> list[ManifestEntry]:
        with self._lock:
            return [self._current[i] for i in self._order]

    def __len__(self) -> int:
        return len(self._current)

    def append(self, entry: ManifestEntry) -> int:
        """Persist ``entry`` at the next revision and return that revision.

        The presented entry must carry the currently stored revision
        (0 for a fresh id); the stored line gets revision + 1.
        """
        with self._lock:
            stored = self._current.get(entry.id)
            if stored is not None:
                if stored.revision != entry.revision:
                    raise RevisionConflict(entry.id, stored.revision, entry.revision)
                if entry.status not in _ALLOWED_TRANSITIONS[stored.status]:
                    raise InvalidTransition(
                        f"{entry.id}: {stored.status.value} -> {entry.status.value}"
                    )
            bumped = replace(entry, revision=entry.revision + 1)
            line = bumped.to_json_line()
            try:
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(line + "\n")
                    fh.flush()
                    os.fsync(fh.fileno())
            except OSError as exc:
                raise IOError(f"manifest write failed: {exc}") from exc
            if entry.id not in self._current:
                self._order.append(entry.id)
            self._current[entry.id] = bumped
            return bumped.revision

    def compact(self) -> int:
        """Rewrite the file keeping only current revisions; returns entry count."""
        with self._lock:
            tmp = self.path.with_suffix(self.path.suffix + ".tmp")
            with tmp.open("w", encoding="utf-8") as fh:
                for entry_id in self._order:
                    fh.write(self._current[entry_id].to_json_line() + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            tmp.replace(self.path)
            return len(self._order)
