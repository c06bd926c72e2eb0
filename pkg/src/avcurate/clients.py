"""Wire-contract clients for the neural scorers and LLM captioning agents.

Every dependency (AV-alignment scorer, text-audio scorer, desync scorer,
vision compressor, tiered captioners, judge) is reachable either as a real
HTTP client or as a deterministic in-process mock. Mock outputs depend only
on (inputs, mock_seed, overrides): they hash the inputs with 64-bit FNV-1a
and scale into the target range, so tests can recompute them independently.
"""

from __future__ import annotations

import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional

import httpx

from .core import Tier
from .errors import (
    InvalidRequest,
    JudgeFailure,
    RateLimited,
    RemoteError,
    RequestTimeout,
    TokenCapViolation,
)
from .resources import load_synonyms

JUNIOR_OUTPUT_TOKEN_CAP = 160
SENIOR_OUTPUT_TOKEN_CAP = 128

# Input-token profile used by the caption mocks: the audio prompt costs 1,340
# tokens and riding a compressed visual context along adds 2,480 more.
MOCK_INPUT_TOKENS_BASE = 1340
MOCK_INPUT_TOKENS_VISUAL = 2480


def fnv1a64(text: str) -> int:
    """64-bit FNV-1a over the UTF-8 bytes of ``text``."""
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def _unit(key: str) -> float:
    return fnv1a64(key) / 2.0**64


# --- configuration -----------------------------------------------------------

@dataclass
class ClientConfig:
    endpoint: str = "http://127.0.0.1:8080"
    timeout_ms: int = 10_000
    max_retries: int = 2
    backoff_base_ms: int = 100
    rate_limit_per_s: float = 50.0
    mock_seed: Optional[int] = None
    # overrides[op][request_key] -> fixed response; op in
    # {av, ta, desync, vision, caption, judge}, request_key "|"-joined inputs.
    overrides: dict[str, dict[str, Any]] = field(default_factory=dict)

    def override_for(self, op: str, key: str):
        return self.overrides.get(op, {}).get(key)

    @property
    def seed(self) -> int:
        return self.mock_seed if self.mock_seed is not None else 0


@dataclass
class AgentTier:
    tier: Tier = Tier.JUNIOR
    max_output_tokens: int = JUNIOR_OUTPUT_TOKEN_CAP

    @classmethod
    def junior(cls) -> "AgentTier":
        return cls(Tier.JUNIOR, JUNIOR_OUTPUT_TOKEN_CAP)

    @classmethod
    def senior(cls) -> "AgentTier":
        return cls(Tier.SENIOR, SENIOR_OUTPUT_TOKEN_CAP)


@dataclass
class CaptionResponse:
    text: str
    input_tokens: int
    output_tokens: int


class JudgeKind(str, Enum):
    PAIRWISE_PREFERENCE = "PairwisePreference"
    COVERAGE_AUDIT = "CoverageAudit"
    CONGRUENCE_RANK = "CongruenceRank"


class Preference(str, Enum):
    A = "A"
    B = "B"
    TIE = "Tie"


@dataclass
class CoverageVerdict:
    covered: bool
    uncovered: list[str] = field(default_factory=list)


# --- keyword matching shared by the mock judge --------------------------------

_STOPWORDS = {
    "a", "an", "the", "in", "on", "at", "of", "and", "to", "is", "are", "as",
    "with", "by", "for", "its", "it", "then", "while",
}


def content_tokens(text: str) -> set[str]:
    tokens = set()
    for raw in text.lower().replace("_", " ").replace("-", " ").split():
        token = "".join(ch for ch in raw if ch.isalnum())
        if len(token) >= 2 and token not in _STOPWORDS:
            tokens.add(token)
    return tokens


def label_keywords(name: str, synonyms: dict[str, list[str]]) -> set[str]:
    keywords = content_tokens(name)
    for syn in synonyms.get(name, []):
        keywords |= content_tokens(syn)
    return keywords


def label_covered(caption: str, name: str, synonyms: dict[str, list[str]]) -> bool:
    lowered = caption.lower()
    return any(kw in lowered for kw in label_keywords(name, synonyms))


def keyword_overlap(context: str, candidate: str) -> int:
    return len(content_tokens(context) & content_tokens(candidate))


# --- rate limiting and retries -------------------------------------------------

class RateLimiter:
    """Minimum-interval limiter: at most one request per 1/rate seconds,
    so any window of w seconds sees at most ceil(rate * w) + 1 requests."""

    def __init__(self, rate_per_s: float,
                 clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        if rate_per_s <= 0:
            raise ValueError("rate_limit_per_s must be positive")
        self._interval = 1.0 / rate_per_s
        self._clock = clock
        self._sleep = sleep
        self._next_free: Optional[float] = None
        self._lock = threading.Lock()

    def acquire(self) -> None:
        with self._lock:
            now = self._clock()
            if self._next_free is None or now >= self._next_free:
                self._next_free = now + self._interval
                wait = 0.0
            else:
                wait = self._next_free - now
                self._next_free += self._interval
        if wait > 0:
            self._sleep(wait)


class _Retryable(Exception):
    def __init__(self, final: Exception):
        self.final = final


def run_with_retries(attempt: Callable[[], Any], max_retries: int,
                     backoff_base_ms: int,
                     sleep: Callable[[float], None] = time.sleep) -> Any:
    """Run ``attempt`` up to max_retries + 1 times; the k-th retry waits
    backoff_base_ms * 2^(k-1) milliseconds. Raises the mapped final error."""
    last: Optional[_Retryable] = None
    for attempt_no in range(max_retries + 1):
        if attempt_no > 0:
            sleep(backoff_base_ms * (2 ** (attempt_no - 1)) / 1000.0)
        try:
            return attempt()
        except _Retryable as exc:
            last = exc
    assert last is not None
    raise last.final


# --- mock clients --------------------------------------------------------------

_SOUND_PHRASES = [
    "a dog barks sharply",
    "rain patters on a tin roof",
    "an engine hums steadily",
    "waves crash against rocks",
    "a crowd cheers loudly",
    "glass shatters nearby",
    "footsteps echo on concrete",
    "a siren wails in the distance",
    "wind rustles through leaves",
    "a door creaks open",
    "birds chirp brightly",
    "thunder rumbles overhead",
    "water drips steadily",
    "keys jangle briefly",
    "a horn honks twice",
    "papers rustle softly",
]

_SCENE_SUBJECTS = ["man", "woman", "child", "dog", "crowd", "musician", "worker", "cyclist"]
_SCENE_ACTIONS = ["speaks", "walks", "plays", "works", "gestures", "runs", "waits", "performs"]
_SCENE_PLACES = ["stage", "street", "kitchen", "park", "workshop", "beach", "hallway", "field"]


class MockClients:
    """Deterministic stand-ins for every remote dependency.

    Outputs are pure functions of (inputs, mock_seed, overrides); call counts
    are tracked per operation for call-discipline assertions.
    """

    is_mock = True

    def __init__(self, config: Optional[ClientConfig] = None,
                 synonyms: Optional[dict[str, list[str]]] = None):
        self.config = config or ClientConfig()
        self.synonyms = synonyms if synonyms is not None else load_synonyms()
        self.calls: Counter[str] = Counter()

    # scoring ------------------------------------------------------------

    def score_av_alignment(self, video_ref: str, audio_ref: str) -> float:
        if not video_ref or not audio_ref:
            raise InvalidRequest("score_av_alignment needs both refs")
        self.calls["av"] += 1
        override = self.config.override_for("av", f"{video_ref}|{audio_ref}")
        if override is not None:
            return float(override)
        return _unit(f"{video_ref}|{audio_ref}|{self.config.seed}")

    def score_text_audio(self, caption: str, audio_ref: str) -> float:
        if not caption:
            raise InvalidRequest("score_text_audio needs a non-empty caption")
        if not audio_ref:
            raise InvalidRequest("score_text_audio needs an audio ref")
        self.calls["ta"] += 1
        override = self.config.override_for("ta", f"{caption}|{audio_ref}")
        if override is not None:
            return float(override)
        return _unit(f"ta|{caption}|{audio_ref}|{self.config.seed}")

    def score_desync(self, video_ref: str, audio_ref: str) -> float:
        if not video_ref:
            raise InvalidRequest("score_desync needs a video ref")
        if not audio_ref:
            raise InvalidRequest("score_desync needs an audio ref")
        self.calls["desync"] += 1
        override = self.config.override_for("desync", f"{video_ref}|{audio_ref}")
        if override is not None:
            return float(override)
        return 2.0 * _unit(f"ds|{video_ref}|{audio_ref}|{self.config.seed}")

    # vision + captioning --------------------------------------------------

    def compress_vision(self, video_ref: str) -> str:
        if not video_ref:
            raise InvalidRequest("compress_vision needs a video ref")
        self.calls["vision"] += 1
        override = self.config.override_for("vision", video_ref)
        if override is not None:
            return str(override)
        h = fnv1a64(f"cv|{video_ref}|{self.config.seed}")
        subject = _SCENE_SUBJECTS[h % len(_SCENE_SUBJECTS)]
        action = _SCENE_ACTIONS[(h >> 8) % len(_SCENE_ACTIONS)]
        place = _SCENE_PLACES[(h >> 16) % len(_SCENE_PLACES)]
        return f"a {subject} {action} near a {place} [scene {h:016x}]"

    def generate_caption(self, tier: AgentTier, audio_ref: str,
                         visual_context: Optional[str] = None) -> CaptionResponse:
        if not audio_ref:
            raise InvalidRequest("generate_caption needs an audio ref")
        op = "caption_junior" if tier.tier == Tier.JUNIOR else "caption_senior"
        self.calls[op] += 1
        input_tokens = MOCK_INPUT_TOKENS_BASE
        if visual_context is not None:
            input_tokens += MOCK_INPUT_TOKENS_VISUAL

        override = self.config.override_for(
            "caption", f"{tier.tier.value.lower()}|{audio_ref}")
        h = fnv1a64(f"cap|{tier.tier.value}|{audio_ref}|{visual_context or ''}|{self.config.seed}")
        if override is not None:
            if isinstance(override, dict):
                return CaptionResponse(
                    text=override["text"],
                    input_tokens=override.get("input_tokens", input_tokens),
                    output_tokens=override.get(
                        "output_tokens", min(tier.max_output_tokens, 40 + h % 120)),
                )
            text = str(override)
        else:
            first = _SOUND_PHRASES[h % len(_SOUND_PHRASES)]
            second = _SOUND_PHRASES[(h >> 8) % len(_SOUND_PHRASES)]
            text = f"{first}, then {second}"
            if tier.tier == Tier.SENIOR:
                third = _SOUND_PHRASES[(h >> 16) % len(_SOUND_PHRASES)]
                text += f" while {third}"
            if visual_context:
                scene_words = [w for w in visual_context.split() if not w.startswith("[")][:4]
                text += f" near {' '.join(scene_words)}"
        return CaptionResponse(
            text=text,
            input_tokens=input_tokens,
            output_tokens=min(tier.max_output_tokens, 40 + h % 120),
        )

    # judging -------------------------------------------------------------

    def judge(self, kind: JudgeKind, payload: dict) -> Any:
        self.calls[f"judge_{kind.value}"] += 1
        if kind == JudgeKind.COVERAGE_AUDIT:
            return self._judge_coverage(payload)
        if kind == JudgeKind.CONGRUENCE_RANK:
            return self._judge_congruence(payload)
        if kind == JudgeKind.PAIRWISE_PREFERENCE:
            return self._judge_pairwise(payload)
        raise InvalidRequest(f"unknown judge kind: {kind}")

    def _judge_coverage(self, payload: dict) -> CoverageVerdict:
        caption = payload.get("caption")
        labels = payload.get("labels")
        if not isinstance(caption, str) or not isinstance(labels, list):
            raise InvalidRequest("CoverageAudit payload needs caption and labels")
        override = self.config.override_for("judge", caption)
        if override is not None:
            return _parse_coverage_override(override)
        uncovered = [
            str(label["name"]) for label in labels
            if not label_covered(caption, str(label["name"]), self.synonyms)
        ]
        return CoverageVerdict(covered=not uncovered, uncovered=uncovered)

    def _judge_congruence(self, payload: dict) -> int:
        context = payload.get("context")
        candidates = payload.get("candidates")
        if not isinstance(context, str) or not isinstance(candidates, list) or not candidates:
            raise InvalidRequest("CongruenceRank payload needs context and candidates")
        override = self.config.override_for("judge", context)
        if override is not None:
            if override == "error":
                raise JudgeFailure("judge override forced a failure")
            return int(override)
        best_idx, best_overlap = 0, -1
        for idx, candidate in enumerate(candidates):
            overlap = keyword_overlap(context, str(candidate))
            if overlap > best_overlap:
                best_idx, best_overlap = idx, overlap
        return best_idx

    def _judge_pairwise(self, payload: dict) -> Preference:
        a, b = payload.get("a"), payload.get("b")
        if not isinstance(a, str) or not isinstance(b, str):
            raise InvalidRequest("PairwisePreference payload needs captions a and b")
        override = self.config.override_for("judge", f"{a}||{b}")
        if override is not None:
            return Preference(override)
        return [Preference.A, Preference.B, Preference.TIE][
            fnv1a64(f"pp|{a}||{b}|{self.config.seed}") % 3]


def _parse_coverage_override(value: Any) -> CoverageVerdict:
    if isinstance(value, bool):
        return CoverageVerdict(covered=value)
    if isinstance(value, str):
        if value == "Covered":
            return CoverageVerdict(covered=True)
        if value == "error":
            raise JudgeFailure("judge override forced a failure")
        return CoverageVerdict(covered=False, uncovered=[value])
    if isinstance(value, dict):
        return CoverageVerdict(
            covered=value.get("covered", value.get("verdict") == "Covered"),
            uncovered=list(value.get("uncovered", [])),
        )
    raise InvalidRequest(f"bad coverage override: {value!r}")


# --- HTTP clients ---------------------------------------------------------------

class HttpClients:
    """Real clients speaking the JSON-over-POST wire contract.

    Behavior on status codes: 429 and 5xx are retried with exponential
    backoff (RateLimited / RemoteError once the budget is spent), other 4xx
    raise InvalidRequest immediately, timeouts retry then raise RequestTimeout.
    """

    is_mock = False

    def __init__(self, config: ClientConfig,
                 transport: Optional[httpx.BaseTransport] = None,
                 clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        self.config = config
        self._sleep = sleep
        self._limiter = RateLimiter(config.rate_limit_per_s, clock=clock, sleep=sleep)
        self._http = httpx.Client(
            base_url=config.endpoint,
            timeout=config.timeout_ms / 1000.0,
            transport=transport,
        )

    def close(self) -> None:
        self._http.close()

    def _post(self, path: str, payload: dict) -> dict:
        def attempt() -> dict:
            self._limiter.acquire()
            try:
                resp = self._http.post(path, json=payload)
            except httpx.TimeoutException as exc:
                raise _Retryable(RequestTimeout(str(exc)))
            except httpx.HTTPError as exc:
                raise _Retryable(RemoteError(0, str(exc)))
            if resp.status_code == 429:
                raise _Retryable(RateLimited(f"{path} returned 429"))
            if resp.status_code >= 500:
                raise _Retryable(RemoteError(resp.status_code, resp.text[:200]))
            if resp.status_code >= 400:
                raise InvalidRequest(f"{path} returned {resp.status_code}: {resp.text[:200]}")
            return resp.json()

        return run_with_retries(
            attempt, self.config.max_retries, self.config.backoff_base_ms, self._sleep)

    def score_av_alignment(self, video_ref: str, audio_ref: str) -> float:
        if not video_ref or not audio_ref:
            raise InvalidRequest("score_av_alignment needs both refs")
        return float(self._post("/v1/score/av",
                                {"left_ref": video_ref, "right_ref": audio_ref})["score"])

    def score_text_audio(self, caption: str, audio_ref: str) -> float:
        if not caption:
            raise InvalidRequest("score_text_audio needs a non-empty caption")
        return float(self._post("/v1/score/ta",
                                {"left_ref": caption, "right_ref": audio_ref})["score"])

    def score_desync(self, video_ref: str, audio_ref: str) -> float:
        if not video_ref:
            raise InvalidRequest("score_desync needs a video ref")
        return float(self._post("/v1/score/desync",
                                {"left_ref": video_ref, "right_ref": audio_ref})["score"])

    def compress_vision(self, video_ref: str) -> str:
        if not video_ref:
            raise InvalidRequest("compress_vision needs a video ref")
        return str(self._post("/v1/vision", {"video_ref": video_ref})["text"])

    def generate_caption(self, tier: AgentTier, audio_ref: str,
                         visual_context: Optional[str] = None) -> CaptionResponse:
        if not audio_ref:
            raise InvalidRequest("generate_caption needs an audio ref")
        body = {
            "tier": tier.tier.value,
            "audio_ref": audio_ref,
            "max_output_tokens": tier.max_output_tokens,
        }
        if visual_context is not None:
            body["visual_context"] = visual_context
        raw = self._post("/v1/caption", body)
        resp = CaptionResponse(
            text=raw["text"],
            input_tokens=int(raw["input_tokens"]),
            output_tokens=int(raw["output_tokens"]),
        )
        if resp.output_tokens > tier.max_output_tokens:
            raise TokenCapViolation(
                f"remote returned {resp.output_tokens} output tokens, cap {tier.max_output_tokens}")
        return resp

    def judge(self, kind: JudgeKind, payload: dict) -> Any:
        raw = self._post("/v1/judge", {"kind": kind.value, "payload": payload})
        verdict = raw["verdict"]
        if kind == JudgeKind.COVERAGE_AUDIT:
            return _parse_coverage_override(verdict)
        if kind == JudgeKind.CONGRUENCE_RANK:
            return int(verdict)
        return Preference(verdict)


def make_clients(config: Optional[ClientConfig] = None, mock: bool = True,
                 **kwargs) -> MockClients | HttpClients:
    if mock:
        return MockClients(config, **kwargs)
    if config is None:
        raise ValueError("HTTP clients need an explicit ClientConfig")
    return HttpClients(config, **kwargs)
