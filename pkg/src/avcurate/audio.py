"""Mono 16-bit PCM WAV I/O and additive off-screen mixing.

Mixing operates on float sample arrays in [-1, 1]; the overlay is looped or
truncated to the base length, scaled by the configured gain, added sample by
sample, and peak-normalized only when the sum exceeds full scale.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import SampleRateMismatch


class Pcm(NamedTuple):
    samples: np.ndarray  # float64 mono in [-1, 1]
    rate: int


@dataclass
class MixSpec:
    overlay_gain_db: float = -3.0
    peak_normalize: bool = True


def db_to_linear(gain_db: float) -> float:
    return float(10.0 ** (gain_db / 20.0))


def read_wav(path: str | Path) -> Pcm:
    with wave.open(str(path), "rb") as wav:
        if wav.getsampwidth() != 2:
            raise ValueError(f"{path}: only 16-bit PCM is supported")
        rate = wav.getframerate()
        channels = wav.getnchannels()
        raw = wav.readframes(wav.getnframes())
    data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if channels > 1:
        data = data.reshape(-1, channels).mean(axis=1)
    return Pcm(samples=data, rate=rate)


def write_wav(path: str | Path, pcm: Pcm) -> None:
    clipped = np.clip(pcm.samples, -1.0, 1.0)
    ints = np.round(clipped * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(pcm.rate)
        wav.writeframes(ints.tobytes())


def fit_to_length(overlay: np.ndarray, n: int) -> np.ndarray:
    """Loop a short overlay (or truncate a long one) to exactly n samples."""
    if len(overlay) == 0:
        return np.zeros(n, dtype=np.float64)
    if len(overlay) >= n:
        return overlay[:n]
    reps = -(-n // len(overlay))
    return np.tile(overlay, reps)[:n]


def mix_offscreen(base: Pcm, overlay: Pcm, spec: MixSpec | None = None) -> Pcm:
    """out[i] = base[i] + g * overlay[i] with g = 10^(gain_db / 20); the result
    is peak-normalized to <= 1.0 only when it clips and normalization is on."""
    spec = spec or MixSpec()
    if base.rate != overlay.rate:
        raise SampleRateMismatch(base.rate, overlay.rate)
    gain = db_to_linear(spec.overlay_gain_db)
    fitted = fit_to_length(np.asarray(overlay.samples, dtype=np.float64), len(base.samples))
    mixed = np.asarray(base.samples, dtype=np.float64) + gain * fitted
    if spec.peak_normalize:
        peak = float(np.max(np.abs(mixed))) if len(mixed) else 0.0
        if peak > 1.0:
            mixed = mixed / peak
    return Pcm(samples=mixed, rate=base.rate)
