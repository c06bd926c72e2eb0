"""Human verification queue for flagged samples, plus its HTTP service.

One ReviewItem per flagged manifest entry; reviewers claim an item, then
submit exactly one Accept / Correct / Reject decision guarded by the item's
revision (stale writes are rejected, never merged). Decisions write back to
the manifest through the single-writer store, and claims expire back to
Pending after a TTL so abandoned items never starve the queue.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Callable, Optional

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse
from pydantic import BaseModel

from .core import (
    CaptionRecord,
    Decision,
    DecisionAction,
    ManifestEntry,
    ManifestStore,
    Status,
    Tier,
)
from .errors import (
    AlreadyClaimed,
    NotClaimedByYou,
    NotFound,
    RevisionConflict,
    StyleViolation,
)
from .pipeline import validate_caption_style

DEFAULT_CLAIM_TTL_S = 30 * 60


class ReviewReason(str, Enum):
    COVERAGE_MISMATCH = "CoverageMismatch"
    VERIFIER_FAILURE = "VerifierFailure"
    MANUAL_FLAG = "ManualFlag"


class ReviewStatus(str, Enum):
    PENDING = "Pending"
    CLAIMED = "Claimed"
    RESOLVED = "Resolved"


@dataclass
class ReviewItem:
    item_id: str
    entry_id: str
    reason: ReviewReason
    payload: dict = field(default_factory=dict)
    status: ReviewStatus = ReviewStatus.PENDING
    claimed_by: Optional[str] = None
    revision: int = 0
    created_at: str = ""
    claimed_at: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "entry_id": self.entry_id,
            "reason": self.reason.value,
            "payload": self.payload,
            "status": self.status.value,
            "claimed_by": self.claimed_by,
            "revision": self.revision,
            "created_at": self.created_at,
            "claimed_at": self.claimed_at,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ReviewItem":
        return cls(
            item_id=raw["item_id"],
            entry_id=raw["entry_id"],
            reason=ReviewReason(raw.get("reason", "ManualFlag")),
            payload=raw.get("payload", {}),
            status=ReviewStatus(raw.get("status", "Pending")),
            claimed_by=raw.get("claimed_by"),
            revision=raw.get("revision", 0),
            created_at=raw.get("created_at", ""),
            claimed_at=raw.get("claimed_at"),
        )


def _flag_reason(entry: ManifestEntry) -> ReviewReason:
    audit = entry.extra.get("audit") or {}
    if audit.get("uncovered"):
        return ReviewReason.COVERAGE_MISMATCH
    note = str(entry.extra.get("error_note", "")) + str(audit.get("error", ""))
    if "verifier" in note.lower() or "judge" in note.lower() or "selection" in note.lower():
        return ReviewReason.VERIFIER_FAILURE
    return ReviewReason.MANUAL_FLAG


def _item_payload(entry: ManifestEntry) -> dict:
    return {
        "caption": entry.caption.text if entry.caption else None,
        "labels": [l.to_dict() for l in entry.labels],
        "media": entry.media.to_dict(),
        "visual_context": entry.visual_context,
        "audit": entry.extra.get("audit"),
        "style_violations": entry.extra.get("style_violations"),
    }


class ReviewQueue:
    """JSONL-persisted queue with the same append-only revision discipline
    as the manifest: per item, the line with the highest revision wins."""

    def __init__(self, path: str | Path, store: ManifestStore,
                 ttl_s: int = DEFAULT_CLAIM_TTL_S,
                 clock: Callable[[], float] = time.time):
        self.path = Path(path)
        self.store = store
        self.ttl_s = ttl_s
        self._clock = clock
        self._lock = threading.Lock()
        self._items: dict[str, ReviewItem] = {}
        self._order: list[str] = []
        if self.path.exists():
            with self.path.open("r", encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    item = ReviewItem.from_dict(json.loads(line))
                    if item.item_id not in self._items:
                        self._order.append(item.item_id)
                        self._items[item.item_id] = item
                    elif item.revision > self._items[item.item_id].revision:
                        self._items[item.item_id] = item

    def _now_iso(self) -> str:
        return datetime.fromtimestamp(self._clock(), tz=timezone.utc).isoformat()

    def _persist(self, item: ReviewItem) -> None:
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(item.to_dict(), ensure_ascii=False) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        if item.item_id not in self._items:
            self._order.append(item.item_id)
        self._items[item.item_id] = item

    def _release_expired(self) -> None:
        now = self._clock()
        for item in list(self._items.values()):
            if item.status != ReviewStatus.CLAIMED or not item.claimed_at:
                continue
            claimed = datetime.fromisoformat(item.claimed_at).timestamp()
            if now - claimed >= self.ttl_s:
                released = replace(item, status=ReviewStatus.PENDING, claimed_by=None,
                                   claimed_at=None, revision=item.revision + 1)
                self._persist(released)

    # --- queue operations -------------------------------------------------

    def enqueue_flagged(self) -> int:
        """One item per Flagged entry that has no unresolved item; idempotent.
        Returns the number of unresolved items afterwards."""
        with self._lock:
            open_by_entry = {
                item.entry_id for item in self._items.values()
                if item.status != ReviewStatus.RESOLVED
            }
            for entry in self.store.entries():
                if entry.status != Status.FLAGGED or entry.id in open_by_entry:
                    continue
                prior = sum(1 for i in self._items.values() if i.entry_id == entry.id)
                # "::" keeps item ids URL-safe for the /api/items/{id} routes
                item = ReviewItem(
                    item_id=f"{entry.id}::{prior}",
                    entry_id=entry.id,
                    reason=_flag_reason(entry),
                    payload=_item_payload(entry),
                    created_at=self._now_iso(),
                )
                self._persist(item)
            return sum(1 for i in self._items.values()
                       if i.status != ReviewStatus.RESOLVED)

    def items(self, status: Optional[ReviewStatus] = None) -> list[ReviewItem]:
        with self._lock:
            self._release_expired()
            out = [self._items[i] for i in self._order]
        if status is not None:
            out = [i for i in out if i.status == status]
        return sorted(out, key=lambda i: (i.created_at, i.item_id))

    def get(self, item_id: str) -> ReviewItem:
        with self._lock:
            self._release_expired()
            item = self._items.get(item_id)
        if item is None:
            raise NotFound(f"review item {item_id!r} not found")
        return item

    def claim(self, item_id: str, reviewer_id: str) -> ReviewItem:
        if not reviewer_id:
            raise ValueError("claim needs a reviewer id")
        with self._lock:
            self._release_expired()
            item = self._items.get(item_id)
            if item is None:
                raise NotFound(f"review item {item_id!r} not found")
            if item.status != ReviewStatus.PENDING:
                raise AlreadyClaimed(
                    f"{item_id} is {item.status.value.lower()}"
                    + (f" by {item.claimed_by}" if item.claimed_by else ""))
            claimed = replace(item, status=ReviewStatus.CLAIMED, claimed_by=reviewer_id,
                              claimed_at=self._now_iso(), revision=item.revision + 1)
            self._persist(claimed)
            return claimed

    def submit_decision(self, item_id: str, expected_revision: int,
                        decision: Decision) -> ManifestEntry:
        """Apply a reviewer decision to the flagged entry and resolve the item.

        Accept keeps the caption and marks the entry Reviewed; Correct swaps
        in the human caption (style-checked); Reject discards the entry.
        """
        with self._lock:
            self._release_expired()
            item = self._items.get(item_id)
            if item is None:
                raise NotFound(f"review item {item_id!r} not found")
            if item.revision != expected_revision:
                raise RevisionConflict(item_id, item.revision, expected_revision)
            if item.status != ReviewStatus.CLAIMED or item.claimed_by != decision.reviewer_id:
                raise NotClaimedByYou(
                    f"{item_id} is not claimed by {decision.reviewer_id!r}")

            if decision.action == DecisionAction.CORRECT:
                corrected = decision.corrected_caption or ""
                violations = validate_caption_style(corrected)
                if violations:
                    raise StyleViolation(violations)

            entry = self.store.get(item.entry_id)
            if entry is None:
                raise NotFound(f"manifest entry {item.entry_id!r} not found")

            updated = replace(entry, decisions=entry.decisions + [decision])
            if decision.action == DecisionAction.ACCEPT:
                updated = replace(updated, status=Status.REVIEWED)
            elif decision.action == DecisionAction.CORRECT:
                updated = replace(updated, status=Status.REVIEWED, caption=CaptionRecord(
                    text=decision.corrected_caption,
                    agent_tier=Tier.HUMAN,
                ))
            elif decision.action == DecisionAction.REJECT:
                updated = replace(updated, status=Status.DISCARDED)
            self.store.append(updated)

            resolved = replace(item, status=ReviewStatus.RESOLVED,
                               revision=item.revision + 1)
            self._persist(resolved)
            return self.store.get(item.entry_id)


# --- HTTP service -----------------------------------------------------------------

class ClaimBody(BaseModel):
    reviewer_id: str


class DecisionBody(BaseModel):
    expected_revision: int
    action: str
    corrected_caption: Optional[str] = None
    note: str = ""
    reviewer_id: Optional[str] = None


def create_app(manifest_path: str | Path, queue_path: str | Path,
               media_root: Optional[str | Path] = None,
               ttl_s: int = DEFAULT_CLAIM_TTL_S,
               cors_origins: tuple[str, ...] = ("*",)) -> FastAPI:
    store = ManifestStore(manifest_path)
    queue = ReviewQueue(queue_path, store, ttl_s=ttl_s)
    queue.enqueue_flagged()

    app = FastAPI(title="avcurate review service")
    app.state.store = store
    app.state.queue = queue
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def error(status_code: int, code: str, message: str) -> JSONResponse:
        return JSONResponse(status_code=status_code,
                            content={"code": code, "message": message})

    @app.exception_handler(NotFound)
    async def _not_found(_req: Request, exc: NotFound):
        return error(404, "not_found", str(exc))

    @app.exception_handler(AlreadyClaimed)
    async def _already_claimed(_req: Request, exc: AlreadyClaimed):
        return error(409, "already_claimed", str(exc))

    @app.exception_handler(RevisionConflict)
    async def _conflict(_req: Request, exc: RevisionConflict):
        return error(409, "revision_conflict", str(exc))

    @app.exception_handler(NotClaimedByYou)
    async def _not_claimed(_req: Request, exc: NotClaimedByYou):
        return error(409, "not_claimed_by_you", str(exc))

    @app.exception_handler(StyleViolation)
    async def _style(_req: Request, exc: StyleViolation):
        return error(422, "style_violation", str(exc))

    @app.get("/api/queue")
    def list_queue(status: str = "pending"):
        wanted = None if status == "all" else ReviewStatus(status.capitalize())
        return {"items": [i.to_dict() for i in queue.items(wanted)]}

    @app.post("/api/queue/refresh")
    def refresh_queue():
        return {"queue_size": queue.enqueue_flagged()}

    @app.get("/api/items/{item_id}")
    def get_item(item_id: str):
        return queue.get(item_id).to_dict()

    @app.post("/api/items/{item_id}/claim")
    def claim_item(item_id: str, body: ClaimBody):
        return queue.claim(item_id, body.reviewer_id).to_dict()

    @app.post("/api/items/{item_id}/decision")
    def decide_item(item_id: str, body: DecisionBody, request: Request):
        reviewer = body.reviewer_id or request.headers.get("x-reviewer-id") or ""
        if not reviewer:
            item = queue.get(item_id)
            reviewer = item.claimed_by or ""
        decision = Decision(
            action=DecisionAction(body.action),
            reviewer_id=reviewer,
            timestamp=datetime.now(timezone.utc).isoformat(),
            note=body.note,
            corrected_caption=body.corrected_caption,
        )
        entry = queue.submit_decision(item_id, body.expected_revision, decision)
        return {"item": queue.get(item_id).to_dict(), "entry": entry.to_dict()}

    if media_root is not None:
        root = Path(media_root).resolve()

        @app.get("/media/{media_path:path}")
        def serve_media(media_path: str):
            target = (root / media_path).resolve()
            if root not in target.parents and target != root:
                raise NotFound(f"media path {media_path!r} outside the media root")
            if not target.is_file():
                raise NotFound(f"media file {media_path!r} not found")
            return FileResponse(target)

    return app
