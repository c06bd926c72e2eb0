"""Batch engine for audio-caption curation, benchmark assembly, training-plan
generation, and evaluation statistics over JSONL sample manifests."""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    CaptionFlag,
    CaptionRecord,
    Decision,
    DecisionAction,
    ManifestEntry,
    ManifestStore,
    MediaRef,
    Modality,
    ModalityLabel,
    RouteClass,
    ScoreSet,
    Status,
    Tier,
    load_manifest,
    validate_entry,
)
