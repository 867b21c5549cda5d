"""Exception taxonomy shared across the package."""

from __future__ import annotations


class CtxRouteError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(CtxRouteError):
    """A configuration value is missing, malformed, or inconsistent."""


# -- memory store ------------------------------------------------------------

class DuplicateId(CtxRouteError):
    """An item with the same id already exists in the store."""


class RoundFromFuture(CtxRouteError):
    """An item claims a creation round beyond the store's current round."""


class RoundOutOfRange(CtxRouteError):
    """A snapshot was requested for a round the store has not reached."""


class RoundMismatch(CtxRouteError):
    """An agent output is stamped with a round other than the store's current one."""


# -- scoring -----------------------------------------------------------------

class NegativeAge(CtxRouteError):
    """An item appears to have been created after the round being scored."""


# -- router ------------------------------------------------------------------

class TooManyItems(CtxRouteError):
    """The exhaustive selection oracle was asked to enumerate too large a set."""


# -- agents ------------------------------------------------------------------

class TemplateMismatch(CtxRouteError):
    """A prompt template does not carry the required placeholder exactly once."""


class BackendFailure(CtxRouteError):
    """An agent backend failed to produce a response."""


# -- metrics -----------------------------------------------------------------

class NegativeInterval(CtxRouteError):
    """A wall-clock interval ends before it starts."""


class EmptyRound(CtxRouteError):
    """A latency aggregate was requested for a round with no agents."""


class NoJsonFound(CtxRouteError):
    """Judge output contains no parseable JSON object."""


class MissingField(CtxRouteError):
    """The first JSON object in the judge output lacks a required field."""


class ScoreOutOfRange(CtxRouteError):
    """The judge score is not an integral number in the 1..5 range."""


# -- datasets ----------------------------------------------------------------

class UnknownFormat(CtxRouteError):
    """The requested dataset format has no adapter."""


class ParseError(CtxRouteError):
    """A dataset file could not be parsed into examples.

    Carries the offending line number (1-based, 0 when not line-oriented)
    and a short description of the problem.
    """

    def __init__(self, message: str, *, line: int = 0, field: str | None = None):
        self.line = line
        self.field = field
        detail = message
        if line:
            detail = f"line {line}: {detail}"
        super().__init__(detail)
