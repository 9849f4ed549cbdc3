"""
Deterministic in-memory cache backend.

Entries remember when they were stored and by which wrapper invocation, so
evictions (injected or capacity-driven) can honor the horizon contract: a
key younger than the horizon, or stored by an invocation that is still
running, is never evicted.
"""

import logging
import random
import threading
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from app.cache.base import CacheBackend, validate_key
from app.cache.invocations import current_invocation, is_active
from app.core.clock import Clock, system_clock
from app.core.exceptions import CacheNumericError
from app.schemas.cache import CacheConfig

logger = logging.getLogger(__name__)

UINT64 = 1 << 64


@dataclass
class _Entry:
    value: bytes
    stored_ms: float
    writer: Optional[int]


def parse_counter(value: bytes) -> int:
    """Parse an unsigned decimal counter the way memcached does for incr."""
    if not value.isdigit() or len(value) > 20:
        raise CacheNumericError(f"cannot increment non-numeric value {value[:32]!r}")
    number = int(value)
    if number >= UINT64:
        raise CacheNumericError(f"value {number} does not fit in 64 bits")
    return number


class ShadowLedger:
    """Append-only log of successful writes, per key."""

    def __init__(self):
        self._log: Dict[str, List[Tuple[float, str, bytes]]] = defaultdict(list)
        self._lock = threading.Lock()

    def record(self, key: str, at_ms: float, op: str, value: bytes) -> None:
        with self._lock:
            self._log[key].append((at_ms, op, value))

    def entries(self, key: str) -> List[Tuple[float, str, bytes]]:
        with self._lock:
            return list(self._log.get(key, ()))

    def keys(self) -> List[str]:
        with self._lock:
            return list(self._log)

    def real_revision(self, key: str, at_ms: float) -> int:
        """Maximum value written to ``key`` strictly before ``at_ms``; 0 if none."""
        values = [int(v) for t, _, v in self.entries(key) if t < at_ms and v.isdigit()]
        return max(values, default=0)

    def strictly_increasing(self, key: str) -> bool:
        values = [int(v) for _, _, v in self.entries(key) if v.isdigit()]
        return all(a < b for a, b in zip(values, values[1:]))


class MemoryCache(CacheBackend):
    """Thread-safe dict-backed cache with horizon-aware eviction."""

    def __init__(
        self,
        config: Optional[CacheConfig] = None,
        clock: Clock = system_clock,
        seed: int = 0,
        name: str = "memory",
    ):
        super().__init__(name)
        self.config = config or CacheConfig()
        self.clock = clock
        self._rng = random.Random(seed)
        self._data: Dict[str, _Entry] = {}
        self._lock = threading.Lock()
        self.ledger: Optional[ShadowLedger] = ShadowLedger() if self.config.ledger else None

    def __len__(self) -> int:
        return len(self._data)

    def __contains__(self, key: str) -> bool:
        return key in self._data

    def keys(self) -> List[str]:
        """Keys in storage order (oldest first)."""
        with self._lock:
            return list(self._data)

    async def _pause(self) -> None:
        if not self.config.latency.is_zero:
            await self.clock.sleep(self.config.latency.sample(self._rng))

    def _log(self, key: str, op: str, value: bytes) -> None:
        if self.ledger is not None:
            self.ledger.record(key, self.clock.now_ms(), op, value)

    def _store(self, key: str, value: bytes) -> None:
        # Re-inserting keeps dict order equal to storage order
        if key in self._data:
            del self._data[key]
        elif self.config.capacity is not None and len(self._data) >= self.config.capacity:
            self._evict_oldest()
        self._data[key] = _Entry(value, self.clock.now_ms(), current_invocation())

    def _evictable(self, entry: _Entry, now_ms: float) -> bool:
        if now_ms - entry.stored_ms < self.config.horizon_ms:
            return False
        return not is_active(entry.writer)

    def _evict_oldest(self) -> None:
        now_ms = self.clock.now_ms()
        for key, entry in self._data.items():
            if now_ms - entry.stored_ms < self.config.horizon_ms:
                break
            if not is_active(entry.writer):
                del self._data[key]
                self.stats.bump("evictions")
                return
        logger.debug("%s: capacity %s exceeded, no key past the horizon", self.name, self.config.capacity)

    async def _get(self, key: str) -> Optional[bytes]:
        await self._pause()
        with self._lock:
            entry = self._data.get(key)
            return None if entry is None else entry.value

    async def _multiget(self, keys: List[str]) -> List[Optional[bytes]]:
        await self._pause()
        with self._lock:
            return [self._data[k].value if k in self._data else None for k in keys]

    async def _set(self, key: str, value: bytes) -> None:
        await self._pause()
        with self._lock:
            self._store(key, value)
            self._log(key, "set", value)

    async def _add(self, key: str, value: bytes) -> bool:
        await self._pause()
        with self._lock:
            if key in self._data:
                return False
            self._store(key, value)
            self._log(key, "add", value)
            return True

    async def _increment(self, key: str) -> Optional[int]:
        await self._pause()
        with self._lock:
            entry = self._data.get(key)
            if entry is None:
                return None
            number = (parse_counter(entry.value) + 1) % UINT64
            entry.value = str(number).encode()
            self._log(key, "incr", entry.value)
            return number

    async def _delete(self, key: str) -> bool:
        await self._pause()
        with self._lock:
            return self._data.pop(key, None) is not None

    def inject_eviction(self, key: str) -> bool:
        """
        Spontaneously evict ``key`` as a full cache would.

        Args:
            key: Key to evict

        Returns:
            bool: True if evicted; False if absent, younger than the horizon,
            or stored by an invocation that has not finished
        """
        validate_key(key)
        with self._lock:
            entry = self._data.get(key)
            if entry is None:
                return False
            if not self._evictable(entry, self.clock.now_ms()):
                self.stats.bump("evictions_refused")
                return False
            del self._data[key]
            self.stats.bump("evictions")
            return True

    def evict_random(self, rng: random.Random, prefix: str = "") -> Optional[str]:
        """Pick a random stored key (optionally by prefix) and try to evict it."""
        with self._lock:
            candidates = [k for k in self._data if k.startswith(prefix)]
        if not candidates:
            return None
        key = candidates[rng.randrange(len(candidates))]
        return key if self.inject_eviction(key) else None

    async def _flush(self) -> None:
        await self._pause()
        with self._lock:
            self._data.clear()
