"""
Cache key formats.

Independent processes must agree on these bit for bit:

* revision keys: ``rev:`` + pattern tokens joined by ``|``; keys longer than
  the memcached limit are folded to ``rev#`` + sha1 of the long encoding.
* result keys: ``res:`` + sha1 of the canonical query serialization and the
  opaque query text.
"""

import hashlib
from typing import Mapping, Optional, Sequence, Tuple

from app.cache.base import MAX_KEY_BYTES
from app.core.exceptions import KeyTooLongError
from app.models.query import Bit, PatternToken, Query, Wildcard

REVISION_PREFIX = "rev:"
FOLDED_PREFIX = "rev#"
RESULT_PREFIX = "res:"

_ESCAPED = frozenset(b"%| ") | frozenset(range(0x20)) | {0x7F}


def escape_value(value: str) -> str:
    """Percent-encode ``%``, ``|``, space and control bytes of a UTF-8 value."""
    out = []
    for byte in value.encode("utf-8"):
        if byte in _ESCAPED:
            out.append(f"%{byte:02X}")
        else:
            out.append(chr(byte))
    # Non-ASCII bytes pass through; re-decode the byte string as a whole
    return "".join(out).encode("latin-1").decode("utf-8")


def encode_token(token: PatternToken) -> str:
    if isinstance(token, Wildcard):
        return token.value
    if isinstance(token, Bit):
        return f"b{token.value}"
    return "v" + escape_value(token)


def revision_key(p: Sequence[PatternToken]) -> str:
    """
    Encode a pattern as a revision key.

    Raises:
        KeyTooLongError: If the encoding exceeds 250 bytes
    """
    key = REVISION_PREFIX + "|".join(encode_token(t) for t in p)
    if len(key.encode("utf-8")) > MAX_KEY_BYTES:
        raise KeyTooLongError(key)
    return key


def storage_key(p: Sequence[PatternToken]) -> str:
    """Revision key, folded through sha1 when too long for memcached."""
    try:
        return revision_key(p)
    except KeyTooLongError as e:
        return FOLDED_PREFIX + hashlib.sha1(e.key.encode("utf-8")).hexdigest()


def _canonical_query(q: Query) -> str:
    return "|".join(encode_token(t) for t in q)


def _canonical_ranges(ranges: Optional[Mapping[int, Tuple[int, int]]]) -> str:
    if not ranges:
        return ""
    return ";".join(f"{col}:{lo}-{hi}" for col, (lo, hi) in sorted(ranges.items()))


def digest(
    q: Query,
    extra: str = "",
    ranges: Optional[Mapping[int, Tuple[int, int]]] = None,
) -> str:
    """
    Result key for a query.

    Two queries with the same subspace but different ordering or limits are
    told apart by ``extra``.
    """
    h = hashlib.sha1()
    h.update(_canonical_query(q).encode("utf-8"))
    h.update(b"\x00")
    h.update(_canonical_ranges(ranges).encode("utf-8"))
    h.update(b"\x00")
    h.update(extra.encode("utf-8"))
    return RESULT_PREFIX + h.hexdigest()


def digest_any(clauses: Sequence[Query], extra: str = "") -> str:
    """Result key of a select over a union of clauses."""
    h = hashlib.sha1()
    for q in clauses:
        h.update(_canonical_query(q).encode("utf-8"))
        h.update(b"\x01")
    h.update(b"\x00")
    h.update(extra.encode("utf-8"))
    return RESULT_PREFIX + h.hexdigest()
