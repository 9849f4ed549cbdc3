"""
Deterministic virtual-time scheduler, and a real-thread runner.

Under the virtual scheduler every actor is a coroutine whose only suspension
point is ``VirtualClock.sleep``. The scheduler resumes the actor with the
earliest wake-up time; ties are broken by a seeded random draw, so one seed
always produces one interleaving. Each actor runs in its own
``contextvars`` context, like an asyncio task.
"""

import asyncio
import contextvars
import heapq
import itertools
import logging
import random
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Coroutine, List, Optional

from app.core.clock import SystemClock

logger = logging.getLogger(__name__)

# 2023-11-14T22:13:20Z; realistic magnitude for monotone revision values
VIRTUAL_EPOCH_MS = 1_700_000_000_000.0


class _Sleep:
    __slots__ = ("delay_ms",)

    def __init__(self, delay_ms: float):
        self.delay_ms = delay_ms

    def __await__(self):
        yield self


class VirtualClock:
    """Clock advanced only by the scheduler."""

    def __init__(self, start_ms: float = VIRTUAL_EPOCH_MS):
        self.start_ms = start_ms
        self._now = start_ms

    def now_ms(self) -> float:
        return self._now

    def sleep(self, delay_ms: float) -> _Sleep:
        return _Sleep(max(delay_ms, 0.0))

    def _advance(self, to_ms: float) -> None:
        if to_ms > self._now:
            self._now = to_ms


@dataclass
class Actor:
    name: str
    coro: Coroutine
    daemon: bool = False
    context: contextvars.Context = field(default_factory=contextvars.copy_context)
    done: bool = False
    result: Any = None
    steps: int = 0


@dataclass(order=True)
class _Slot:
    wake_ms: float
    tiebreak: float
    seq: int
    actor: Actor = field(compare=False)


class VirtualScheduler:
    """
    Runs actors to completion in virtual time.

    Daemon actors (eviction injectors) are closed once every regular actor
    has finished.
    """

    def __init__(self, clock: VirtualClock, seed: int = 0):
        self.clock = clock
        self._rng = random.Random(f"scheduler:{seed}")
        self._heap: List[_Slot] = []
        self._seq = itertools.count()
        self._actors: List[Actor] = []
        self._pending = 0

    def spawn(self, coro: Coroutine, name: str, daemon: bool = False) -> Actor:
        actor = Actor(name, coro, daemon)
        self._actors.append(actor)
        if not daemon:
            self._pending += 1
        self._push(actor, self.clock.now_ms())
        return actor

    def _push(self, actor: Actor, wake_ms: float) -> None:
        heapq.heappush(self._heap, _Slot(wake_ms, self._rng.random(), next(self._seq), actor))

    def run(self) -> List[Actor]:
        try:
            while self._heap and self._pending:
                slot = heapq.heappop(self._heap)
                actor = slot.actor
                self.clock._advance(slot.wake_ms)
                actor.steps += 1
                try:
                    yielded = actor.context.run(actor.coro.send, None)
                except StopIteration as stop:
                    actor.done = True
                    actor.result = stop.value
                    if not actor.daemon:
                        self._pending -= 1
                    continue
                if not isinstance(yielded, _Sleep):
                    raise RuntimeError(
                        f"actor {actor.name} awaited {yielded!r}; only the virtual clock may suspend an actor"
                    )
                self._push(actor, self.clock.now_ms() + yielded.delay_ms)
        finally:
            for actor in self._actors:
                if not actor.done:
                    actor.coro.close()
            self._heap.clear()
        logger.debug("virtual run finished at +%.3f ms", self.clock.now_ms() - self.clock.start_ms)
        return self._actors


class ThreadRunner:
    """
    Runs each actor on its own OS thread with its own event loop.

    Daemon factories receive a ``threading.Event`` that is set once every
    regular actor has returned.
    """

    def __init__(self, clock: Optional[SystemClock] = None):
        self.clock = clock or SystemClock()
        self.stop = threading.Event()

    def run(
        self,
        workers: List[Callable[[], Coroutine]],
        daemons: List[Callable[[], Coroutine]] = (),
    ) -> List[Any]:
        with ThreadPoolExecutor(max_workers=len(workers) + len(daemons)) as pool:
            daemon_futures = [pool.submit(asyncio.run, factory()) for factory in daemons]
            futures = [pool.submit(asyncio.run, factory()) for factory in workers]
            try:
                return [f.result() for f in futures]
            finally:
                self.stop.set()
                for f in daemon_futures:
                    f.result()
