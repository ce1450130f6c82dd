"""Exception types shared across the workbench."""


class FactlabError(Exception):
    """Base class for all workbench errors."""


class IngestError(FactlabError):
    """Unrecoverable ingestion problem (unreadable file, bad mapping)."""


class EmptyCorpusError(FactlabError):
    """An operation that requires records was given none."""


class AlignmentError(FactlabError):
    """A token-score vector does not align with its document."""


class ScoreRangeError(FactlabError):
    """A score fell outside the permitted range."""


class WireError(FactlabError):
    """Transport or protocol failure when talking to a remote endpoint."""


class WireFormatError(WireError):
    """The remote endpoint answered, but the payload is malformed."""


class NotRewritable(FactlabError):
    """No rewrite rule applies to the given claim/evidence pair."""


class RewriteError(FactlabError):
    """A rewrite failed its invariants after exhausting retries."""


class InvariantViolation(FactlabError):
    """A constructed object violates a structural invariant."""


class LeakageError(FactlabError):
    """Evaluation data overlaps with training data."""

    def __init__(self, message: str, ids: list[str] | None = None):
        super().__init__(message)
        self.ids = ids or []
