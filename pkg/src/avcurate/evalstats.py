"""Evaluation statistics: pairwise win rates, MOS aggregation, and the
embedding-space metrics (Gaussian Fréchet distance, inception score, paired
KL divergence) computed from externally supplied embedding/logit files.

All operations are pure functions over in-memory matrices; covariance uses
the unbiased (n-1) estimator and the matrix square root goes through the
symmetric product C_x^{1/2} C_y C_x^{1/2} with eigenvalues clamped at zero
below 1e-10.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

from .core import ManifestEntry, Status
from .errors import (
    DegenerateInput,
    DimensionMismatch,
    InvalidCounts,
    InvalidDistribution,
    RangeViolation,
    ShapeMismatch,
)

EIGENVALUE_CLAMP = 1e-10
KL_FLOOR = 1e-12


class Outcome(str, Enum):
    WIN_A = "WinA"
    WIN_B = "WinB"
    TIE = "Tie"


@dataclass
class PairwiseResult:
    item_id: str
    method_a: str
    method_b: str
    outcome: Outcome

    def __post_init__(self):
        if self.method_a == self.method_b:
            raise ValueError("pairwise comparison needs two distinct methods")


@dataclass
class MosRecord:
    item_id: str
    rater_id: str
    mos_s: Optional[int] = None          # semantic alignment, 1..4
    mos_t: Optional[Union[int, str]] = None  # temporal alignment, 1..3 or "NA"
    mos_q: Optional[int] = None          # acoustic quality, 1..5

    def validate(self) -> None:
        if self.mos_s is not None and not 1 <= self.mos_s <= 4:
            raise RangeViolation(f"mos_s={self.mos_s} outside 1..4")
        if self.mos_t is not None and self.mos_t != "NA" and not 1 <= self.mos_t <= 3:
            raise RangeViolation(f"mos_t={self.mos_t} outside 1..3")
        if self.mos_q is not None and not 1 <= self.mos_q <= 5:
            raise RangeViolation(f"mos_q={self.mos_q} outside 1..5")


# --- win rates -------------------------------------------------------------------

def mean_win_rate(n_win: int, n_tie: int, n_total: int) -> float:
    """(wins + 0.5 * ties) / total over pairwise comparisons."""
    if n_total <= 0 or n_win < 0 or n_tie < 0 or n_win + n_tie > n_total:
        raise InvalidCounts(f"bad counts win={n_win} tie={n_tie} total={n_total}")
    return (n_win + 0.5 * n_tie) / n_total


def tally_pairwise(results: Iterable[PairwiseResult], method: str) -> tuple[int, int, int]:
    """(wins, ties, total) over every comparison involving ``method``."""
    wins = ties = total = 0
    for res in results:
        if method == res.method_a:
            total += 1
            if res.outcome == Outcome.WIN_A:
                wins += 1
            elif res.outcome == Outcome.TIE:
                ties += 1
        elif method == res.method_b:
            total += 1
            if res.outcome == Outcome.WIN_B:
                wins += 1
            elif res.outcome == Outcome.TIE:
                ties += 1
    return wins, ties, total


def method_win_rate(results: list[PairwiseResult], method: str) -> float:
    return mean_win_rate(*tally_pairwise(results, method))


# --- MOS aggregation ----------------------------------------------------------------

def aggregate_mos(records: list[MosRecord]) -> dict:
    """Two-level mean per dimension: rater mean per item, then mean over items.

    ``NA`` temporal ratings are excluded from both numerator and denominator;
    ``n`` counts the ratings that entered each dimension.
    """
    for rec in records:
        rec.validate()

    out: dict[str, dict] = {}
    for dim in ("mos_s", "mos_t", "mos_q"):
        per_item: dict[str, list[float]] = {}
        n_ratings = 0
        for rec in records:
            value = getattr(rec, dim)
            if value is None or value == "NA":
                continue
            per_item.setdefault(rec.item_id, []).append(float(value))
            n_ratings += 1
        if per_item:
            item_means = [sum(vals) / len(vals) for vals in per_item.values()]
            mean = sum(item_means) / len(item_means)
        else:
            mean = None
        out[dim] = {"mean": mean, "n": n_ratings, "items": len(per_item)}
    return out


# --- matrix validation ---------------------------------------------------------------

def as_embedding_set(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatch(f"embeddings must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 2:
        raise DegenerateInput("need at least 2 embeddings to fit a Gaussian")
    if not np.all(np.isfinite(arr)):
        raise DegenerateInput("embeddings must be finite")
    return arr


def normalize_rows(p) -> np.ndarray:
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise InvalidDistribution(f"logits must be a non-empty 2-D matrix, got {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise InvalidDistribution("logit entries must be finite and non-negative")
    sums = arr.sum(axis=1, keepdims=True)
    if np.any(sums <= 0):
        raise InvalidDistribution("every row needs positive mass")
    return arr / sums


# --- Fréchet distance ----------------------------------------------------------------

def _mean_and_cov(arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = arr.mean(axis=0)
    centered = arr - mean
    cov = centered.T @ centered / (arr.shape[0] - 1)
    return mean, cov


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((mat + mat.T) / 2.0)
    vals = np.where(vals < EIGENVALUE_CLAMP, 0.0, vals)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_distance(x, y) -> float:
    """||mu_x - mu_y||^2 + Tr(C_x + C_y - 2 (C_x C_y)^{1/2}) for Gaussians
    fitted with sample means and unbiased covariances."""
    ax, ay = as_embedding_set(x), as_embedding_set(y)
    if ax.shape[1] != ay.shape[1]:
        raise DimensionMismatch(f"dimension mismatch: {ax.shape[1]} vs {ay.shape[1]}")
    mu_x, cov_x = _mean_and_cov(ax)
    mu_y, cov_y = _mean_and_cov(ay)

    sqrt_x = _psd_sqrt(cov_x)
    inner = sqrt_x @ cov_y @ sqrt_x
    vals = np.linalg.eigvalsh((inner + inner.T) / 2.0)
    vals = np.where(vals < EIGENVALUE_CLAMP, 0.0, vals)
    trace_sqrt = float(np.sum(np.sqrt(vals)))

    diff = mu_x - mu_y
    fd = float(diff @ diff + np.trace(cov_x) + np.trace(cov_y) - 2.0 * trace_sqrt)
    return max(fd, 0.0)


# --- inception score and paired KL ------------------------------------------------------

def inception_score(p) -> float:
    """exp of the mean KL between each row and the marginal; natural log,
    0 * log 0 = 0."""
    probs = normalize_rows(p)
    marginal = probs.mean(axis=0)
    mask = probs > 0
    ratios = np.ones_like(probs)
    np.divide(probs, marginal[None, :], out=ratios, where=mask)
    kls = np.sum(np.where(mask, probs * np.log(ratios), 0.0), axis=1)
    return float(np.exp(kls.mean()))


def paired_kl(p, q) -> float:
    """Mean over paired rows of KL(p_i || q_i); q is floored at 1e-12 before
    normalization so empty bins cannot blow up the divergence."""
    ap = np.asarray(p, dtype=np.float64)
    aq = np.asarray(q, dtype=np.float64)
    if ap.shape != aq.shape:
        raise ShapeMismatch(f"paired rows must match: {ap.shape} vs {aq.shape}")
    probs_p = normalize_rows(ap)
    probs_q = normalize_rows(np.maximum(aq, KL_FLOOR))
    mask = probs_p > 0
    ratios = np.ones_like(probs_p)
    np.divide(probs_p, probs_q, out=ratios, where=mask)
    kls = np.sum(np.where(mask, probs_p * np.log(ratios), 0.0), axis=1)
    return float(max(kls.mean(), 0.0))


# --- manifest statistics -----------------------------------------------------------------

def nearest_rank(sorted_values: list[float], pct: float) -> float:
    """Nearest-rank percentile over an ascending list."""
    n = len(sorted_values)
    rank = max(1, int(np.ceil(pct / 100.0 * n)))
    return sorted_values[rank - 1]


def clap_report(entries: Iterable[ManifestEntry]) -> dict:
    """Mean and nearest-rank percentiles of accepted caption alignment scores."""
    scores = sorted(
        e.caption.clap_score for e in entries
        if e.status == Status.ACCEPTED and e.caption is not None
        and e.caption.clap_score is not None
    )
    if not scores:
        return {"n": 0, "mean": None, "p10": None, "p50": None, "p90": None}
    return {
        "n": len(scores),
        "mean": sum(scores) / len(scores),
        "p10": nearest_rank(scores, 10),
        "p50": nearest_rank(scores, 50),
        "p90": nearest_rank(scores, 90),
    }


# --- embedding / logit file formats -------------------------------------------------------

def write_matrix(path: str | Path, matrix) -> None:
    """Binary layout: u32 rows, u32 cols (little-endian), then float32 data."""
    arr = np.asarray(matrix, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatch("matrix files are 2-D")
    path = Path(path)
    if path.suffix == ".csv":
        np.savetxt(path, arr, delimiter=",", fmt="%.9g")
        return
    with path.open("wb") as fh:
        fh.write(np.asarray(arr.shape, dtype="<u4").tobytes())
        fh.write(arr.astype("<f4").tobytes())


def read_matrix(path: str | Path) -> np.ndarray:
    path = Path(path)
    if path.suffix == ".csv":
        arr = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
        return arr
    raw = path.read_bytes()
    if len(raw) < 8:
        raise ShapeMismatch(f"{path}: too short for the 8-byte header")
    n, d = (int(v) for v in np.frombuffer(raw[:8], dtype="<u4"))
    data = np.frombuffer(raw[8:], dtype="<f4")
    if data.size != n * d:
        raise ShapeMismatch(f"{path}: header says {n}x{d}, file has {data.size} values")
    return data.reshape(n, d).astype(np.float64)


def load_pairwise_results(path: str | Path) -> list[PairwiseResult]:
    results = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            raw = json.loads(line)
            results.append(PairwiseResult(
                item_id=raw.get("item_id", ""),
                method_a=raw["method_a"],
                method_b=raw["method_b"],
                outcome=Outcome(raw["outcome"]),
            ))
    return results


def load_mos_records(path: str | Path) -> list[MosRecord]:
    records = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            raw = json.loads(line)
            records.append(MosRecord(
                item_id=raw.get("item_id", ""),
                rater_id=raw.get("rater_id", ""),
                mos_s=raw.get("mos_s"),
                mos_t=raw.get("mos_t"),
                mos_q=raw.get("mos_q"),
            ))
    return records
