"""Time sources used by the wrapper, the caches and the table.

All times are milliseconds since the epoch as floats. ``sleep`` returns an
awaitable so that a virtual scheduler can substitute its own suspension
points for ``asyncio.sleep``.
"""

import asyncio
import time
from typing import Awaitable, Protocol


class Clock(Protocol):
    def now_ms(self) -> float:
        ...

    def sleep(self, delay_ms: float) -> Awaitable[None]:
        ...


class SystemClock:
    """Wall clock backed by ``time.time`` and ``asyncio.sleep``."""

    def now_ms(self) -> float:
        return time.time() * 1000.0

    async def sleep(self, delay_ms: float) -> None:
        await asyncio.sleep(max(delay_ms, 0.0) / 1000.0)


class OffsetClock:
    """A clock that reads ``offset_ms`` ahead of (or behind) another clock.

    Models a front-end machine whose clock is skewed against the cache server.
    """

    def __init__(self, inner: Clock, offset_ms: float):
        self.inner = inner
        self.offset_ms = offset_ms

    def now_ms(self) -> float:
        return self.inner.now_ms() + self.offset_ms

    def sleep(self, delay_ms: float) -> Awaitable[None]:
        return self.inner.sleep(delay_ms)


system_clock = SystemClock()
