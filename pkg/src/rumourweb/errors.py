"""Error types raised across the toolkit."""


class RumourWebError(Exception):
    """Base class for all toolkit errors."""


class EmptyTweet(RumourWebError):
    """Raised when a tweet has no tokens left after cleaning."""

    def __init__(self, tweet_id: str):
        self.tweet_id = tweet_id
        super().__init__(f"tweet {tweet_id!r} is empty after cleaning")


class MalformedParse(RumourWebError):
    """Raised when a dependency-parse block violates tree invariants."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SpanNotFound(RumourWebError):
    """Raised when a triple span cannot be aligned to sentence tokens."""

    def __init__(self, sentence_id: str, field: str):
        self.sentence_id = sentence_id
        self.field = field
        super().__init__(f"no token match for {field!r} in sentence {sentence_id!r}")


class EmptyQueryBody(RumourWebError):
    """Raised when query shortening removes every body token."""


class BackendUnavailable(RumourWebError):
    """Raised when a search backend stays unreachable after bounded retries."""


class QuotaExceeded(RumourWebError):
    """Raised when a live search backend reports quota exhaustion."""


class UnparseableUrl(RumourWebError):
    """Raised when a string cannot be interpreted as a URL."""

    def __init__(self, url: str):
        self.url = url
        super().__init__(f"cannot parse URL: {url!r}")


class NoScorablePairs(RumourWebError):
    """Raised when no (article, response URL) pair has in-vocabulary words."""


class NoKnownWords(RumourWebError):
    """Raised when neither the article units nor the rumour have known words."""


class ScorerUnavailable(RumourWebError):
    """Raised when the external similarity scorer cannot be reached."""


class InsufficientEvidence(RumourWebError):
    """Raised when fewer sentences than requested score above zero."""

    def __init__(self, needed: int, selected):
        self.needed = needed
        self.selected = list(selected)
        super().__init__(
            f"only {len(self.selected)} of {needed} sentences scored above zero"
        )


class MissingAnnotation(RumourWebError):
    """Raised when a thread folder has no veracity annotation record."""

    def __init__(self, thread_id: str):
        self.thread_id = thread_id
        super().__init__(f"thread {thread_id!r} has no annotation record")


class MalformedTweet(RumourWebError):
    """Raised when a tweet record file cannot be parsed."""

    def __init__(self, path, reason: str = ""):
        self.path = str(path)
        msg = f"malformed tweet record: {self.path}"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg)


class SchemaVersionMismatch(RumourWebError):
    """Raised when a dataset file carries an unsupported schema version."""

    def __init__(self, found, expected):
        self.found = found
        self.expected = expected
        super().__init__(f"dataset schema version {found!r}, expected {expected!r}")


class MissingEvent(RumourWebError):
    """Raised when fold construction finds an event with no entries."""

    def __init__(self, event):
        self.event = event
        super().__init__(f"no entries for event {event!r}")


class LengthMismatch(RumourWebError):
    """Raised when gold and predicted label lists differ in length."""


class UntrainedModel(RumourWebError):
    """Raised when a classifier predicts before being fitted."""


class ConfigError(RumourWebError):
    """Raised when a run configuration fails validation."""
