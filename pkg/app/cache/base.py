"""
Cache interface shared by the in-memory and memcached backends.

A miss is ``None``; an I/O failure is ``CacheBackendError``. The public
methods validate keys and keep per-backend operation counters so callers can
assert key budgets.
"""

import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from app.core.exceptions import CacheKeyError, KeyTooLongError

MAX_KEY_BYTES = 250


def validate_key(key: str) -> bytes:
    """
    Check memcached key constraints.

    Args:
        key: Cache key

    Returns:
        bytes: UTF-8 encoded key

    Raises:
        CacheKeyError: If the key is empty or contains whitespace/control bytes
        KeyTooLongError: If the key exceeds 250 bytes
    """
    raw = key.encode("utf-8")
    if not raw:
        raise CacheKeyError("empty cache key")
    if len(raw) > MAX_KEY_BYTES:
        raise KeyTooLongError(key)
    if any(b <= 0x20 or b == 0x7F for b in raw):
        raise CacheKeyError(f"cache key contains whitespace or control bytes: {key!r}")
    return raw


@dataclass
class CacheStats:
    """Operation counters; ``keys_fetched`` counts keys read by get and multiget."""
    gets: int = 0
    multigets: int = 0
    keys_fetched: int = 0
    sets: int = 0
    adds: int = 0
    adds_stored: int = 0
    increments: int = 0
    increments_missed: int = 0
    deletes: int = 0
    evictions: int = 0
    evictions_refused: int = 0
    flushes: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def bump(self, name: str, amount: int = 1) -> None:
        with self._lock:
            setattr(self, name, getattr(self, name) + amount)

    def snapshot(self) -> Dict[str, int]:
        with self._lock:
            return {k: v for k, v in self.__dict__.items() if not k.startswith("_")}

    @staticmethod
    def delta(before: Dict[str, int], after: Dict[str, int]) -> Dict[str, int]:
        return {k: after[k] - before.get(k, 0) for k in after}


class CacheBackend(ABC):
    """Key-value cache with the get/multiget/set/add/increment/delete contract."""

    def __init__(self, name: str):
        self.name = name
        self.stats = CacheStats()

    async def get(self, key: str) -> Optional[bytes]:
        validate_key(key)
        self.stats.bump("gets")
        self.stats.bump("keys_fetched")
        return await self._get(key)

    async def multiget(self, keys: Sequence[str]) -> List[Optional[bytes]]:
        """Positionally aligned values; not atomic across keys."""
        keys = list(keys)
        for key in keys:
            validate_key(key)
        if not keys:
            return []
        self.stats.bump("multigets")
        self.stats.bump("keys_fetched", len(keys))
        return await self._multiget(keys)

    async def set(self, key: str, value: bytes) -> None:
        validate_key(key)
        self.stats.bump("sets")
        await self._set(key, value)

    async def add(self, key: str, value: bytes) -> bool:
        """Store only if absent; atomic."""
        validate_key(key)
        self.stats.bump("adds")
        stored = await self._add(key, value)
        if stored:
            self.stats.bump("adds_stored")
        return stored

    async def increment(self, key: str) -> Optional[int]:
        """Add one to a present value; ``None`` and no mutation when absent."""
        validate_key(key)
        self.stats.bump("increments")
        value = await self._increment(key)
        if value is None:
            self.stats.bump("increments_missed")
        return value

    async def delete(self, key: str) -> bool:
        validate_key(key)
        self.stats.bump("deletes")
        return await self._delete(key)

    async def flush(self) -> None:
        """Drop every key."""
        self.stats.bump("flushes")
        await self._flush()

    async def close(self) -> None:
        return None

    async def _flush(self) -> None:
        raise NotImplementedError(f"{type(self).__name__} cannot flush")

    @abstractmethod
    async def _get(self, key: str) -> Optional[bytes]:
        ...

    async def _multiget(self, keys: List[str]) -> List[Optional[bytes]]:
        return [await self._get(key) for key in keys]

    @abstractmethod
    async def _set(self, key: str, value: bytes) -> None:
        ...

    @abstractmethod
    async def _add(self, key: str, value: bytes) -> bool:
        ...

    @abstractmethod
    async def _increment(self, key: str) -> Optional[int]:
        ...

    @abstractmethod
    async def _delete(self, key: str) -> bool:
        ...
