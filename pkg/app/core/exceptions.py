"""Error hierarchy shared by every layer of the service."""

from typing import Optional


class RevcacheError(Exception):
    """Base class for all errors raised by revcache."""


class DimensionError(RevcacheError, ValueError):
    """A record, query or pattern does not have the schema's length."""

    def __init__(self, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(f"expected {expected} positions, got {actual}")


class UnsupportedTokenError(RevcacheError, ValueError):
    """A token kind was used where its semantics are not defined."""


class ConfigurationError(RevcacheError):
    """Invalid schema, plan or wrapper configuration."""


class CacheKeyError(RevcacheError, ValueError):
    """Key violates memcached key constraints."""


class KeyTooLongError(CacheKeyError):
    """Key is longer than 250 bytes and must be folded by the caller."""

    def __init__(self, key: str):
        self.key = key
        super().__init__(f"key of {len(key.encode('utf-8'))} bytes exceeds the 250 byte limit")


class CacheBackendError(RevcacheError):
    """I/O failure talking to a cache backend. Never means a miss."""


class CacheNumericError(RevcacheError):
    """Increment issued against a value that is not an unsigned decimal."""


class HorizonViolationError(RevcacheError):
    """Revision repair recursed deeper than the horizon contract allows."""

    def __init__(self, depth: int, keys: list):
        self.depth = depth
        self.keys = keys
        super().__init__(f"revision keys still missing at depth {depth}: {keys[:4]}")


class InvalidationError(RevcacheError):
    """Increments for a write could not be delivered; cached data may be stale."""

    def __init__(self, key: str, attempts: int, cause: Optional[BaseException] = None):
        self.key = key
        self.attempts = attempts
        self.cause = cause
        super().__init__(f"increment of {key!r} failed after {attempts} attempts: {cause}")


class DroppedConstraintError(RevcacheError, ValueError):
    """Projection would discard a constrained (non-star) column."""


class WhitelistViolationError(RevcacheError):
    """A runtime query matches no whitelisted template."""


class WhitelistParseError(RevcacheError, ValueError):
    """Whitelist text could not be parsed."""

    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class RangeError(RevcacheError, ValueError):
    """Range bounds outside the column's bit width."""


class SimulationInvariantError(RevcacheError):
    """The harness observed a violated invariant."""
