"""Exception types shared across the pipeline modules."""

from __future__ import annotations


class CurationError(Exception):
    """Base class for all errors raised by this package."""


# --- manifest store ---------------------------------------------------------

class RevisionConflict(CurationError):
    """Optimistic-lock failure: presented revision does not match stored."""

    def __init__(self, entry_id: str, stored: int, presented: int):
        super().__init__(
            f"revision conflict for {entry_id!r}: stored={stored} presented={presented}"
        )
        self.entry_id = entry_id
        self.stored = stored
        self.presented = presented


class ManifestParseError(CurationError):
    """A manifest line failed to parse; carries the 1-based line number."""

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class DuplicateRevision(CurationError):
    def __init__(self, entry_id: str, revision: int):
        super().__init__(f"duplicate (id, revision) = ({entry_id!r}, {revision})")
        self.entry_id = entry_id
        self.revision = revision


class InvalidTransition(CurationError):
    """Status change not allowed by the entry lifecycle."""


# --- remote clients ---------------------------------------------------------

class ClientError(CurationError):
    """Base class for scoring/captioning client failures."""


class RequestTimeout(ClientError):
    pass


class RemoteError(ClientError):
    def __init__(self, status: int, detail: str = ""):
        super().__init__(f"remote error {status}: {detail}" if detail else f"remote error {status}")
        self.status = status
        self.detail = detail


class RateLimited(ClientError):
    pass


class InvalidRequest(ClientError):
    pass


class TokenCapViolation(ClientError):
    """The remote returned more output tokens than the requested cap."""


class JudgeFailure(ClientError):
    """The judge endpoint failed; callers flag the sample for manual review."""


# --- pipeline / scoring -----------------------------------------------------

class InvalidScore(CurationError):
    pass


# --- benchmark construction -------------------------------------------------

class EmptyLabels(CurationError):
    pass


class MissingScore(CurationError):
    pass


class SampleRateMismatch(CurationError):
    def __init__(self, base_hz: int, overlay_hz: int):
        super().__init__(f"sample rate mismatch: base={base_hz} overlay={overlay_hz}")
        self.base_hz = base_hz
        self.overlay_hz = overlay_hz


class EmptyCandidates(CurationError):
    pass


# --- evaluation statistics --------------------------------------------------

class InvalidCounts(CurationError):
    pass


class RangeViolation(CurationError):
    pass


class DimensionMismatch(CurationError):
    pass


class DegenerateInput(CurationError):
    pass


class InvalidDistribution(CurationError):
    pass


class ShapeMismatch(CurationError):
    pass


# --- schedule planning ------------------------------------------------------

class NotSimplex(CurationError):
    pass


class UnknownDataset(CurationError):
    pass


class BadStageOrder(CurationError):
    pass


class EmptyPool(CurationError):
    pass


# --- review queue -----------------------------------------------------------

class NotFound(CurationError):
    pass


class AlreadyClaimed(CurationError):
    pass


class NotClaimedByYou(CurationError):
    pass


class StyleViolation(CurationError):
    def __init__(self, violations: list[str]):
        super().__init__(f"caption style violations: {', '.join(violations)}")
        self.violations = violations
