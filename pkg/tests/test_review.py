"""Review queue semantics and the HTTP service surface."""

from __future__ import annotations

import threading
from datetime import datetime, timezone

import pytest
from fastapi.testclient import TestClient

from avcurate.core import (
    CaptionRecord,
    Decision,
    DecisionAction,
    ManifestEntry,
    ManifestStore,
    MediaRef,
    ModalityLabel,
    Status,
    Tier,
)
from avcurate.errors import (
    AlreadyClaimed,
    NotClaimedByYou,
    NotFound,
    RevisionConflict,
    StyleViolation,
)
from avcurate.review import ReviewQueue, ReviewReason, ReviewStatus, create_app


def flagged_entry(entry_id, uncovered=("siren",)):
    entry = ManifestEntry(
        id=entry_id,
        dataset="unit",
        media=MediaRef(audio_path=f"a/{entry_id}.wav"),
        labels=[ModalityLabel(name="dog_bark"), ModalityLabel(name="siren")],
        caption=CaptionRecord(text="a dog barks", agent_tier=Tier.JUNIOR, clap_score=0.5),
        status=Status.FLAGGED,
    )
    if uncovered:
        entry.extra["audit"] = {"uncovered": list(uncovered)}
    return entry


def make_queue(tmp_path, n_flagged=3, clock=None):
    store = ManifestStore(tmp_path / "m.jsonl")
    for i in range(n_flagged):
        store.append(flagged_entry(f"f{i}"))
    kwargs = {"clock": clock} if clock else {}
    return store, ReviewQueue(tmp_path / "q.jsonl", store, **kwargs)


def decision(action, reviewer="rev1", corrected=None, note=""):
    return Decision(
        action=action,
        reviewer_id=reviewer,
        timestamp=datetime.now(timezone.utc).isoformat(),
        note=note,
        corrected_caption=corrected,
    )


class TestEnqueue:
    def test_one_item_per_flagged_entry(self, tmp_path):
        _, queue = make_queue(tmp_path, n_flagged=3)
        assert queue.enqueue_flagged() == 3
        assert len(queue.items(ReviewStatus.PENDING)) == 3

    def test_idempotent(self, tmp_path):
        _, queue = make_queue(tmp_path, n_flagged=3)
        queue.enqueue_flagged()
        assert queue.enqueue_flagged() == 3
        assert len(queue.items()) == 3

    def test_zero_flagged(self, tmp_path):
        _, queue = make_queue(tmp_path, n_flagged=0)
        assert queue.enqueue_flagged() == 0

    def test_reason_derived_from_audit(self, tmp_path):
        _, queue = make_queue(tmp_path, n_flagged=1)
        queue.enqueue_flagged()
        assert queue.items()[0].reason == ReviewReason.COVERAGE_MISMATCH


class TestClaim:
    def test_claim_pending(self, tmp_path):
        _, queue = make_queue(tmp_path, 1)
        queue.enqueue_flagged()
        item = queue.claim("f0::0", "rev1")
        assert item.status == ReviewStatus.CLAIMED
        assert item.claimed_by == "rev1"

    def test_concurrent_claims_single_winner(self, tmp_path):
        _, queue = make_queue(tmp_path, 1)
        queue.enqueue_flagged()
        outcomes = []

        def attempt(reviewer):
            try:
                queue.claim("f0::0", reviewer)
                outcomes.append(("ok", reviewer))
            except AlreadyClaimed:
                outcomes.append(("conflict", reviewer))

        threads = [threading.Thread(target=attempt, args=(f"r{i}",)) for i in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sum(1 for kind, _ in outcomes if kind == "ok") == 1
        assert sum(1 for kind, _ in outcomes if kind == "conflict") == 7

    def test_claim_unknown(self, tmp_path):
        _, queue = make_queue(tmp_path, 1)
        queue.enqueue_flagged()
        with pytest.raises(NotFound):
            queue.claim("nope", "rev1")

    def test_expired_claim_returns_to_pending(self, tmp_path):
        now = [1000.0]
        _, queue = make_queue(tmp_path, 1, clock=lambda: now[0])
        queue.enqueue_flagged()
        queue.claim("f0::0", "rev1")
        now[0] += queue.ttl_s + 1
        assert queue.get("f0::0").status == ReviewStatus.PENDING
        # the item is claimable again by someone else
        assert queue.claim("f0::0", "rev2").claimed_by == "rev2"


class TestSubmitDecision:
    def _claimed(self, tmp_path):
        store, queue = make_queue(tmp_path, 1)
        queue.enqueue_flagged()
        item = queue.claim("f0::0", "rev1")
        return store, queue, item

    def test_accept_marks_reviewed(self, tmp_path):
        store, queue, item = self._claimed(tmp_path)
        entry = queue.submit_decision(item.item_id, item.revision,
                                      decision(DecisionAction.ACCEPT))
        assert entry.status == Status.REVIEWED
        assert entry.decisions[-1].action == DecisionAction.ACCEPT
        assert queue.get(item.item_id).status == ReviewStatus.RESOLVED

    def test_correct_replaces_caption_with_human_tier(self, tmp_path):
        store, queue, item = self._claimed(tmp_path)
        entry = queue.submit_decision(
            item.item_id, item.revision,
            decision(DecisionAction.CORRECT, corrected="a dog barks while a siren wails"))
        assert entry.status == Status.REVIEWED
        assert entry.caption.agent_tier == Tier.HUMAN
        assert entry.caption.text == "a dog barks while a siren wails"

    def test_correct_with_long_caption_rejected(self, tmp_path):
        _, queue, item = self._claimed(tmp_path)
        with pytest.raises(StyleViolation):
            queue.submit_decision(item.item_id, item.revision,
                                  decision(DecisionAction.CORRECT,
                                           corrected=" ".join(["word"] * 50)))

    def test_reject_discards(self, tmp_path):
        store, queue, item = self._claimed(tmp_path)
        entry = queue.submit_decision(item.item_id, item.revision,
                                      decision(DecisionAction.REJECT))
        assert entry.status == Status.DISCARDED

    def test_stale_revision_conflicts_without_side_effects(self, tmp_path):
        store, queue, item = self._claimed(tmp_path)
        with pytest.raises(RevisionConflict):
            queue.submit_decision(item.item_id, item.revision - 1,
                                  decision(DecisionAction.ACCEPT))
        assert store.get("f0").status == Status.FLAGGED
        assert queue.get(item.item_id).status == ReviewStatus.CLAIMED

    def test_wrong_reviewer_rejected(self, tmp_path):
        _, queue, item = self._claimed(tmp_path)
        with pytest.raises(NotClaimedByYou):
            queue.submit_decision(item.item_id, item.revision,
                                  decision(DecisionAction.ACCEPT, reviewer="intruder"))

    def test_resolve_exactly_once(self, tmp_path):
        store, queue, item = self._claimed(tmp_path)
        queue.submit_decision(item.item_id, item.revision, decision(DecisionAction.ACCEPT))
        resolved = queue.get(item.item_id)
        with pytest.raises(NotClaimedByYou):
            queue.submit_decision(item.item_id, resolved.revision,
                                  decision(DecisionAction.ACCEPT))
        assert store.get("f0").status == Status.REVIEWED
        assert len(store.get("f0").decisions) == 1


class TestHttpService:
    def _client(self, tmp_path, n_flagged=3):
        store = ManifestStore(tmp_path / "m.jsonl")
        for i in range(n_flagged):
            store.append(flagged_entry(f"f{i}"))
        app = create_app(tmp_path / "m.jsonl", tmp_path / "q.jsonl",
                         media_root=tmp_path)
        return TestClient(app)

    def test_queue_listing(self, tmp_path):
        client = self._client(tmp_path)
        resp = client.get("/api/queue?status=pending")
        assert resp.status_code == 200
        assert len(resp.json()["items"]) == 3

    def test_claim_and_decide_round_trip(self, tmp_path):
        client = self._client(tmp_path)
        claim = client.post("/api/items/f0::0/claim", json={"reviewer_id": "rev1"})
        assert claim.status_code == 200
        revision = claim.json()["revision"]

        resp = client.post("/api/items/f0::0/decision", json={
            "expected_revision": revision,
            "action": "Correct",
            "corrected_caption": "a dog barks twice while a siren wails",
            "reviewer_id": "rev1",
        })
        assert resp.status_code == 200
        body = resp.json()
        assert body["entry"]["status"] == "Reviewed"
        assert body["entry"]["caption"]["agent_tier"] == "Human"
        assert body["item"]["status"] == "Resolved"

    def test_double_claim_conflict(self, tmp_path):
        client = self._client(tmp_path)
        assert client.post("/api/items/f1::0/claim",
                           json={"reviewer_id": "a"}).status_code == 200
        second = client.post("/api/items/f1::0/claim", json={"reviewer_id": "b"})
        assert second.status_code == 409
        assert second.json()["code"] == "already_claimed"

    def test_stale_decision_409(self, tmp_path):
        client = self._client(tmp_path)
        claim = client.post("/api/items/f0::0/claim", json={"reviewer_id": "rev1"})
        resp = client.post("/api/items/f0::0/decision", json={
            "expected_revision": claim.json()["revision"] + 5,
            "action": "Accept",
            "reviewer_id": "rev1",
        })
        assert resp.status_code == 409
        assert resp.json()["code"] == "revision_conflict"

    def test_style_violation_422(self, tmp_path):
        client = self._client(tmp_path)
        claim = client.post("/api/items/f0::0/claim", json={"reviewer_id": "rev1"})
        resp = client.post("/api/items/f0::0/decision", json={
            "expected_revision": claim.json()["revision"],
            "action": "Correct",
            "corrected_caption": " ".join(["word"] * 41),
            "reviewer_id": "rev1",
        })
        assert resp.status_code == 422
        assert resp.json()["code"] == "style_violation"

    def test_unknown_item_404(self, tmp_path):
        client = self._client(tmp_path)
        assert client.get("/api/items/ghost").status_code == 404

    def test_media_served_and_guarded(self, tmp_path):
        (tmp_path / "clip.wav").write_bytes(b"RIFFxxxx")
        client = self._client(tmp_path)
        assert client.get("/media/clip.wav").status_code == 200
        assert client.get("/media/../etc/passwd").status_code in (404, 422)

    def test_refresh_idempotent(self, tmp_path):
        client = self._client(tmp_path)
        assert client.post("/api/queue/refresh").json()["queue_size"] == 3
        assert client.post("/api/queue/refresh").json()["queue_size"] == 3
