"""Baseline front-ends with the wrapper's interface."""

import logging
from typing import Optional

from app.cache.base import CacheBackend
from app.cache.invocations import invocation
from app.core.exceptions import CacheBackendError
from app.models.query import Query, Record, field_value
from app.models.version import Version
from app.repositories.table_repository import RangeMap, TableRepository
from app.schemas.wrapper import CachedEntry, SelectOutcome, ServedFrom, WriteOutcome
from app.services.keys import digest

logger = logging.getLogger(__name__)

_NO_VERSION = Version(())


class NaiveCacheDB:
    """
    Caches select results by digest and flushes the whole cache after every
    insert or delete. Revision counters are not used.
    """

    def __init__(self, table: TableRepository, cache: CacheBackend, record_snapshot: bool = False):
        self.table = table
        self.cache = cache
        self.record_snapshot = record_snapshot

    async def fetch(self, q: Query, extra: str = "", ranges: Optional[RangeMap] = None) -> SelectOutcome:
        key = digest(q, extra, ranges)
        with invocation():
            try:
                entry = CachedEntry.decode(await self.cache.get(key))
            except CacheBackendError as e:
                logger.warning("naive cache read failed: %s", e)
                entry = None
            if entry is not None:
                return SelectOutcome(
                    rows=entry.records(), served_from=ServedFrom.GLOBAL, snapshot_seq=entry.snapshot_seq
                )
            snapshot = await self.table.select(q, ranges)
            entry = CachedEntry.build(_NO_VERSION, snapshot.rows, snapshot.seq if self.record_snapshot else None)
            try:
                await self.cache.set(key, entry.encode())
            except CacheBackendError as e:
                logger.warning("naive cache write failed: %s", e)
            return SelectOutcome(rows=snapshot.rows, served_from=ServedFrom.DATABASE, snapshot_seq=snapshot.seq)

    async def select(self, q: Query, extra: str = "", ranges: Optional[RangeMap] = None) -> frozenset:
        return (await self.fetch(q, extra, ranges)).rows

    async def _flush(self, result) -> WriteOutcome:
        await self.cache.flush()
        return WriteOutcome(changed=result.changed, seq=result.seq, committed_ms=result.committed_ms, invalidated=True)

    async def insert(self, r: Record) -> WriteOutcome:
        with invocation():
            return await self._flush(await self.table.insert(tuple(field_value(v) for v in r)))

    async def delete(self, q: Query, ranges: Optional[RangeMap] = None) -> WriteOutcome:
        with invocation():
            return await self._flush(await self.table.delete(q, ranges))


class PassthroughDB:
    """No caching at all; every select reads the table."""

    def __init__(self, table: TableRepository):
        self.table = table

    async def fetch(self, q: Query, extra: str = "", ranges: Optional[RangeMap] = None) -> SelectOutcome:
        snapshot = await self.table.select(q, ranges)
        return SelectOutcome(rows=snapshot.rows, served_from=ServedFrom.DATABASE, snapshot_seq=snapshot.seq)

    async def select(self, q: Query, extra: str = "", ranges: Optional[RangeMap] = None) -> frozenset:
        return (await self.fetch(q, extra, ranges)).rows

    async def insert(self, r: Record) -> WriteOutcome:
        result = await self.table.insert(tuple(field_value(v) for v in r))
        return WriteOutcome(changed=result.changed, seq=result.seq, committed_ms=result.committed_ms, invalidated=False)

    async def delete(self, q: Query, ranges: Optional[RangeMap] = None) -> WriteOutcome:
        result = await self.table.delete(q, ranges)
        return WriteOutcome(changed=result.changed, seq=result.seq, committed_ms=result.committed_ms, invalidated=False)
