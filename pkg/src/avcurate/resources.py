"""Loaders for the small default lexicon/synonym files shipped with the package."""

from __future__ import annotations

import json
from importlib.resources import files
from pathlib import Path
from typing import Optional


def _read_text(name: str) -> str:
    return files("avcurate").joinpath("data", name).read_text(encoding="utf-8")


def load_wordlist(path: Optional[str | Path], default_name: str) -> list[str]:
    """Read a one-term-per-line wordlist; falls back to the packaged default."""
    text = Path(path).read_text(encoding="utf-8") if path else _read_text(default_name)
    return [line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#")]


def default_sound_lexicon() -> list[str]:
    return load_wordlist(None, "sound_lexicon.txt")


def default_hallucination_phrases() -> list[str]:
    return load_wordlist(None, "hallucination_phrases.txt")


def load_synonyms(path: Optional[str | Path] = None) -> dict[str, list[str]]:
    text = Path(path).read_text(encoding="utf-8") if path else _read_text("judge_synonyms.json")
    return {k: list(v) for k, v in json.loads(text).items()}


def default_captioner_prompt() -> str:
    """Instruction payload deployed with the remote captioning agents; the
    style validator enforces the same output contract."""
    return _read_text("captioner_prompt.txt").strip()
