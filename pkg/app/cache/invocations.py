"""
Tracking of in-flight wrapper invocations.

The eviction model allows a key to be evicted only after the invocation that
stored it has finished. The wrapper enters ``invocation()`` around every
select and write; backends record the current invocation id with each
stored key and consult ``is_active`` before accepting an eviction.
"""

import itertools
import threading
from contextlib import contextmanager
from contextvars import ContextVar
from typing import Iterator, Optional

_current: ContextVar[Optional[int]] = ContextVar("revcache_invocation", default=None)
_active: set = set()
_lock = threading.Lock()
_ids = itertools.count(1)


@contextmanager
def invocation() -> Iterator[int]:
    with _lock:
        invocation_id = next(_ids)
        _active.add(invocation_id)
    token = _current.set(invocation_id)
    try:
        yield invocation_id
    finally:
        _current.reset(token)
        with _lock:
            _active.discard(invocation_id)


def current_invocation() -> Optional[int]:
    return _current.get()


def is_active(invocation_id: Optional[int]) -> bool:
    if invocation_id is None:
        return False
    with _lock:
        return invocation_id in _active
