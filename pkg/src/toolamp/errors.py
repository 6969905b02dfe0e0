"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes, so new error types should
subclass one of the three roots below.
"""


class ToolampError(Exception):
    """Base class for all package errors."""


class ConfigurationError(ToolampError):
    """Invalid parameters, unknown identifiers, bad registrations (exit code 2)."""


class DataError(ToolampError):
    """Malformed datasets, library files, or name strings (exit code 3)."""


class ToolFailure(ToolampError):
    """An external tool misbehaved: bad exit status, timeout, bad response (exit code 4).

    Carries optional diagnostic context from the failing backend.
    """

    def __init__(self, message: str, *, status: int | None = None, stderr: str = ""):
        super().__init__(message)
        self.status = status
        self.stderr = stderr


class RegistrationError(ConfigurationError):
    """Duplicate or inconsistent tool registration."""


class UnknownToolError(ConfigurationError):
    """Lookup of a tool id or public name that is not registered."""


class TemplateError(ConfigurationError):
    """Missing prompt template or unbound placeholder."""


class NameParseError(DataError):
    """A composition name string does not conform to the bracket grammar."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class ProtocolError(ToolFailure):
    """A remote planner or tool endpoint returned a malformed response."""


class TransportError(ToolFailure):
    """A remote endpoint could not be reached or timed out."""
