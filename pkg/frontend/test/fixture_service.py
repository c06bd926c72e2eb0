"""Disposable review-service instance for the UI integration tests: a fresh
manifest with three flagged entries, served on the given port."""

import argparse
import tempfile
from pathlib import Path

import numpy as np
import uvicorn

from avcurate.audio import Pcm, write_wav
from avcurate.core import (
    CaptionRecord,
    ManifestEntry,
    ManifestStore,
    MediaRef,
    Modality,
    ModalityLabel,
    ScoreSet,
    Status,
    Tier,
)
from avcurate.review import create_app


def build_fixture(root: Path) -> Path:
    manifest = root / "manifest.jsonl"
    store = ManifestStore(manifest)
    t = np.arange(8000) / 16000
    write_wav(root / "clip.wav", Pcm(samples=0.2 * np.sin(2 * np.pi * 440 * t), rate=16000))
    for i in range(3):
        entry = ManifestEntry(
            id=f"ui{i}",
            dataset="fixture",
            media=MediaRef(audio_path="clip.wav", video_path=f"vid/ui{i}.mp4"),
            labels=[ModalityLabel(name="dog_bark", modality=Modality.AV),
                    ModalityLabel(name="siren", modality=Modality.A)],
            scores=ScoreSet(ib_score=0.5),
            caption=CaptionRecord(text="a dog barks", agent_tier=Tier.JUNIOR,
                                  clap_score=0.6),
            status=Status.FLAGGED,
        )
        entry.extra["audit"] = {"uncovered": ["siren"]}
        store.append(entry)
    return manifest


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--port", type=int, required=True)
    args = parser.parse_args()
    root = Path(tempfile.mkdtemp(prefix="review-ui-fixture-"))
    manifest = build_fixture(root)
    app = create_app(manifest, root / "queue.jsonl", media_root=root)
    uvicorn.run(app, host="127.0.0.1", port=args.port, log_level="warning")


if __name__ == "__main__":
    main()
