"""
Query space definitions.

Records are k-tuples of field values (strings). Queries are k-tuples where a
position holds either a value or ``STAR``. Patterns name revision counters and
may additionally hold ``QMARK`` (some fixed value), ``PERCENT`` (collapsed
ancestor counter of the dyadic scheme) or a ``Bit`` of a dyadic column.

Wildcards are enum members, never strings, so the value ``"*"`` and ``STAR``
are distinct tokens.
"""

import enum
from itertools import product
from typing import Iterator, Optional, Sequence, Tuple, Union

from app.core.exceptions import ConfigurationError, DimensionError, UnsupportedTokenError


class Wildcard(enum.Enum):
    """Placeholder tokens."""
    STAR = "*"
    QMARK = "?"
    PERCENT = "%"


class Bit(enum.Enum):
    """A fixed bit of a dyadic column prefix."""
    ZERO = 0
    ONE = 1


STAR = Wildcard.STAR
QMARK = Wildcard.QMARK
PERCENT = Wildcard.PERCENT

FieldValue = str
Record = Tuple[FieldValue, ...]
QueryToken = Union[FieldValue, Wildcard]
Query = Tuple[QueryToken, ...]
PatternToken = Union[FieldValue, Wildcard, Bit]
Pattern = Tuple[PatternToken, ...]


def field_value(value) -> FieldValue:
    """Serialize a scalar column value."""
    if isinstance(value, (Wildcard, Bit)):
        raise UnsupportedTokenError(f"{value} is not a field value")
    return value if isinstance(value, str) else str(value)


def check_length(tokens: Sequence, k: int) -> None:
    if len(tokens) != k:
        raise DimensionError(k, len(tokens))


def check_query(q: Query) -> None:
    """Queries only hold values and STAR."""
    for token in q:
        if isinstance(token, Bit) or (isinstance(token, Wildcard) and token is not STAR):
            raise UnsupportedTokenError(f"{format_token(token)} cannot appear in a query")


def _check_pair(a: Sequence, b: Sequence) -> None:
    if len(a) != len(b):
        raise DimensionError(len(a), len(b))


def contains_record(q: Query, r: Record) -> bool:
    """True iff ``r`` lies in subspace(q)."""
    _check_pair(q, r)
    return all(t is STAR or t == v for t, v in zip(q, r))


def intersects(q: Query, q2: Query) -> bool:
    """Subspaces are disjoint iff some position has two different non-star values."""
    _check_pair(q, q2)
    return all(a == b or a is STAR or b is STAR for a, b in zip(q, q2))


def witness(q: Query, q2: Query, minimal: Sequence[Optional[FieldValue]]) -> Optional[Record]:
    """
    Construct a record lying in both subspaces.

    Args:
        q: First query
        q2: Second query
        minimal: Per-column minimal value used where both queries have STAR

    Returns:
        Optional[Record]: A common record, or None when the subspaces are disjoint

    Raises:
        ConfigurationError: If an unconstrained column declares no minimal value
    """
    _check_pair(q, q2)
    check_length(minimal, len(q))
    if not intersects(q, q2):
        return None
    fields = []
    for i, (a, b) in enumerate(zip(q, q2)):
        if a is not STAR:
            fields.append(a)
        elif b is not STAR:
            fields.append(b)
        elif minimal[i] is None:
            raise ConfigurationError(f"column {i} declares no minimal value")
        else:
            fields.append(minimal[i])
    return tuple(fields)


def _reject_scheme_tokens(p: Pattern) -> None:
    for token in p:
        if token is PERCENT or isinstance(token, Bit):
            raise UnsupportedTokenError(
                f"{format_token(token)} is only meaningful in the dyadic range scheme"
            )


def edge_e_prime(q: Query, p: Pattern) -> bool:
    """Write query -> middle layer edge: keep, value->STAR, STAR->QMARK."""
    _check_pair(q, p)
    _reject_scheme_tokens(p)
    for a, b in zip(q, p):
        if a == b:
            continue
        if a is not STAR and b is STAR:
            continue
        if a is STAR and b is QMARK:
            continue
        return False
    return True


def edge_e_double_prime(p: Pattern, q: Query) -> bool:
    """Middle layer -> read query edge: keep, or QMARK over a value."""
    _check_pair(p, q)
    _reject_scheme_tokens(p)
    return all(a == b or (a is QMARK and b is not STAR) for a, b in zip(p, q))


def format_token(token: PatternToken) -> str:
    if isinstance(token, Wildcard):
        return token.value
    if isinstance(token, Bit):
        return f"b{token.value}"
    return str(token)


def format_tuple(tokens: Sequence[PatternToken]) -> str:
    """Human readable form, e.g. ``(*,?,2)``."""
    return "(" + ",".join(format_token(t) for t in tokens) + ")"


def parse_query(text: str) -> Query:
    """Parse ``"2,*,*"``; a bare ``*`` is STAR, anything else a value."""
    text = text.strip()
    if text.startswith("(") and text.endswith(")"):
        text = text[1:-1]
    if not text:
        return ()
    return tuple(STAR if t.strip() == "*" else t.strip() for t in text.split(","))


def enumerate_queries(k: int, domain: Sequence[FieldValue]) -> Iterator[Query]:
    """Every query of length k over ``domain`` plus STAR."""
    return product([*domain, STAR], repeat=k)


def enumerate_records(k: int, domain: Sequence[FieldValue]) -> Iterator[Record]:
    return product(list(domain), repeat=k)


def enumerate_patterns(k: int, domain: Sequence[FieldValue]) -> Iterator[Pattern]:
    """Every Percent-free pattern of length k over ``domain``."""
    return product([*domain, STAR, QMARK], repeat=k)
