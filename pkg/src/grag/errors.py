"""Exception hierarchy shared by every stage of the pipeline.

Every error carries its class name as a stable, greppable tag; the CLI
prints ``<ClassName>: <message>`` on failure.
"""


class GragError(Exception):
    """Base class for all library errors."""


# graph / encoder
class EmptyGraph(GragError):
    pass


class DanglingEdge(GragError):
    pass


class DimMismatch(GragError, ValueError):
    pass


class DuplicateEdge(GragError):
    pass


class UnknownNode(GragError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


# retrieval
class DuplicateFragment(GragError):
    pass


class EmptyIndex(GragError):
    pass


class CorruptIndex(GragError):
    pass


# ingestion
class ParseError(GragError):
    """Malformed corpus line. ``lineno`` is 1-based."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class EmptyText(GragError):
    pass


# generation
class NonFiniteInput(GragError, ValueError):
    pass


class BadTemplate(GragError):
    pass


class ConfigError(GragError):
    pass


class AuthError(GragError):
    pass


class RequestTimeout(GragError, TimeoutError):
    pass


class RateLimited(GragError):
    pass


class MalformedResponse(GragError):
    pass


# evaluation
class EmptyInput(GragError):
    pass
