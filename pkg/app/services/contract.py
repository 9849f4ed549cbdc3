"""Behavioral contract every cache backend must meet for the wrapper to be correct."""

import asyncio
import logging
import uuid
from dataclasses import dataclass
from typing import Awaitable, Callable, List, Optional

from app.cache.base import CacheBackend
from app.core.exceptions import CacheBackendError, CacheKeyError, CacheNumericError

logger = logging.getLogger(__name__)

CONCURRENCY = 100


@dataclass
class ContractCheck:
    name: str
    passed: bool
    detail: str = ""


class ContractSuite:
    """
    Runs the cache contract against one backend.

    Keys are namespaced with a random prefix so the suite can run against a
    live, shared server.
    """

    def __init__(self, cache: CacheBackend, prefix: Optional[str] = None):
        self.cache = cache
        self.prefix = prefix or f"contract:{uuid.uuid4().hex[:12]}:"

    def key(self, name: str) -> str:
        return self.prefix + name

    async def run(self) -> List[ContractCheck]:
        checks: List[ContractCheck] = []
        for name, check in self._checks():
            try:
                detail = await check()
                checks.append(ContractCheck(name, detail is None, detail or ""))
            except CacheBackendError:
                raise
            except Exception as e:
                checks.append(ContractCheck(name, False, f"{type(e).__name__}: {e}"))
        for c in checks:
            logger.info("%s %s %s", "PASS" if c.passed else "FAIL", c.name, c.detail)
        return checks

    def _checks(self) -> List[tuple]:
        return [
            ("get-miss", self.get_miss),
            ("set-get-round-trip", self.round_trip),
            ("add-once", self.add_once),
            ("increment-not-found", self.increment_not_found),
            ("increment-adds-one", self.increment_adds_one),
            ("increment-non-numeric", self.increment_non_numeric),
            ("multiget-aligned", self.multiget_aligned),
            ("delete", self.delete),
            ("key-validation", self.key_validation),
            ("concurrent-add-unique", self.concurrent_add),
            ("concurrent-increment-total", self.concurrent_increment),
        ]

    async def get_miss(self) -> Optional[str]:
        value = await self.cache.get(self.key("never-written"))
        return None if value is None else f"expected a miss, got {value!r}"

    async def round_trip(self) -> Optional[str]:
        await self.cache.set(self.key("rt"), b"5")
        value = await self.cache.get(self.key("rt"))
        return None if value == b"5" else f"expected b'5', got {value!r}"

    async def add_once(self) -> Optional[str]:
        first = await self.cache.add(self.key("add"), b"1")
        second = await self.cache.add(self.key("add"), b"2")
        value = await self.cache.get(self.key("add"))
        if (first, second, value) != (True, False, b"1"):
            return f"add returned {first}, {second}; value {value!r}"
        return None

    async def increment_not_found(self) -> Optional[str]:
        result = await self.cache.increment(self.key("incr-missing"))
        if result is not None:
            return f"increment of a missing key returned {result!r}"
        value = await self.cache.get(self.key("incr-missing"))
        return None if value is None else f"increment created the key with {value!r}"

    async def increment_adds_one(self) -> Optional[str]:
        await self.cache.set(self.key("incr"), b"7")
        result = await self.cache.increment(self.key("incr"))
        return None if result == 8 else f"expected 8, got {result!r}"

    async def increment_non_numeric(self) -> Optional[str]:
        await self.cache.set(self.key("incr-text"), b"abc")
        try:
            result = await self.cache.increment(self.key("incr-text"))
        except CacheNumericError:
            return None
        return f"increment of a non-numeric value returned {result!r}"

    async def multiget_aligned(self) -> Optional[str]:
        if await self.cache.multiget([]) != []:
            return "multiget([]) is not empty"
        await self.cache.set(self.key("mg-a"), b"a")
        keys = [self.key("mg-a"), self.key("mg-b"), self.key("mg-a")]
        values = await self.cache.multiget(keys)
        return None if values == [b"a", None, b"a"] else f"unexpected multiget result {values!r}"

    async def delete(self) -> Optional[str]:
        await self.cache.set(self.key("del"), b"x")
        await self.cache.delete(self.key("del"))
        value = await self.cache.get(self.key("del"))
        return None if value is None else f"deleted key still holds {value!r}"

    async def key_validation(self) -> Optional[str]:
        for bad in ("", "has space", "x" * 251, "ctl\x01"):
            try:
                await self.cache.get(bad)
            except CacheKeyError:
                continue
            return f"key {bad[:20]!r} was accepted"
        return None

    async def _concurrently(self, factory: Callable[[int], Awaitable]) -> list:
        return await asyncio.gather(*(factory(i) for i in range(CONCURRENCY)))

    async def concurrent_add(self) -> Optional[str]:
        key = self.key("add-race")
        results = await self._concurrently(lambda i: self.cache.add(key, str(i).encode()))
        winners = sum(1 for r in results if r)
        return None if winners == 1 else f"{winners} of {CONCURRENCY} concurrent adds succeeded"

    async def concurrent_increment(self) -> Optional[str]:
        key = self.key("incr-race")
        await self.cache.set(key, b"0")
        await self._concurrently(lambda i: self.cache.increment(key))
        value = await self.cache.get(key)
        return None if value == str(CONCURRENCY).encode() else f"expected {CONCURRENCY}, got {value!r}"


async def run_contract_suite(cache: CacheBackend, prefix: Optional[str] = None) -> List[ContractCheck]:
    return await ContractSuite(cache, prefix).run()
