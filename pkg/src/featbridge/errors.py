"""Exception types shared across the package.

Each CLI-facing error class carries the process exit code the command
should terminate with, so the dispatcher in ``cli`` stays a plain lookup.
"""


class FeatBridgeError(Exception):
    """Base class for errors raised by this package."""

    exit_code = 1


class InputError(FeatBridgeError):
    """Missing files, malformed config, bad command-line arguments."""

    exit_code = 2


class ConfigError(InputError):
    """Invalid run configuration (duplicate experts, unknown method, ...)."""


class SchemaError(FeatBridgeError):
    """Data does not match the declared schema."""

    exit_code = 3


class DataError(SchemaError):
    """Unusable data content (bad labels, empty splits, bad indices)."""


class ExpertError(FeatBridgeError):
    """An expert violated the response protocol beyond the retry budget."""

    exit_code = 4


class TransportError(ExpertError):
    """Network-level failure talking to an expert endpoint."""


class NumericError(FeatBridgeError):
    """Non-finite values encountered during training or inference."""

    exit_code = 5


class ParseFailure(Exception):
    """A single expert response did not name a candidate feature.

    Internal control flow only: the iteration loop retries, and escalates
    to :class:`ExpertError` once the retry budget is spent.
    """

    def __init__(self, raw_line: str, message: str | None = None):
        self.raw_line = raw_line
        super().__init__(message or f"could not match a candidate feature in {raw_line!r}")
