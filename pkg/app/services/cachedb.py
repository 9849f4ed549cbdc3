"""
The caching wrapper.

Selects are tagged with the revisions of every counter their query depends
on. Writes increment the counters of every subspace they touch, so an entry
computed before a write can no longer satisfy the version check afterwards.
Missing counters are re-seeded with ``now * max_queries_per_time_step`` via
``add``, which is larger than any value the evicted counter ever held.

Nothing here holds a lock across a cache round trip and a database call;
correctness relies on the atomicity of ``add``/``increment`` and of single
table statements.
"""

import logging
from typing import List, Optional, Sequence

from app.cache.base import CacheBackend
from app.cache.invocations import invocation
from app.core.clock import Clock, system_clock
from app.core.exceptions import CacheBackendError, CacheNumericError, HorizonViolationError, InvalidationError
from app.models.query import Query, Record, field_value
from app.models.version import Version
from app.repositories.table_repository import RangeMap, SelectSnapshot, TableRepository
from app.schemas.wrapper import CachedEntry, SelectOutcome, ServedFrom, WrapperConfig, WriteOutcome
from app.services.keys import digest, digest_any, storage_key
from app.services.schemes import GraphScheme, KeyScheme

logger = logging.getLogger(__name__)


class WrapperStats:
    """Counters the wrapper exports besides the cache backends' own."""

    def __init__(self):
        self.max_revision_depth = 0
        self.revision_repairs = 0
        self.cache_bypasses = 0
        self.invalidation_retries = 0

    def snapshot(self) -> dict:
        return dict(self.__dict__)


class CacheDB:
    """
    Select/insert/delete over a table with a local and a global cache.

    Args:
        table: The authoritative table
        global_cache: Shared cache holding revision counters and results
        local_cache: Per front-end result cache; ``None`` aliases the global one
        scheme: Key scheme, full dependency graph by default
        config: Wrapper tunables
        clock: Time source for monotone revision values
    """

    def __init__(
        self,
        table: TableRepository,
        global_cache: CacheBackend,
        local_cache: Optional[CacheBackend] = None,
        scheme: Optional[KeyScheme] = None,
        config: Optional[WrapperConfig] = None,
        clock: Clock = system_clock,
    ):
        self.table = table
        self.global_cache = global_cache
        self.local_cache = local_cache if local_cache is not None else global_cache
        self.scheme = scheme if scheme is not None else GraphScheme(table.schema)
        self.config = config or WrapperConfig()
        self.clock = clock
        self.stats = WrapperStats()

    # --- revisions ----------------------------------------------------------

    def monotone_value(self) -> int:
        return int(self.clock.now_ms()) * self.config.max_queries_per_time_step

    async def get_revisions(self, keys: Sequence[str]) -> List[int]:
        """
        Current revision of every key, repairing missing ones.

        Raises:
            HorizonViolationError: If keys are still missing after
                ``revision_max_depth`` recursive fetches
            CacheBackendError: On global cache I/O failure
        """
        return await self._get_revisions(list(keys), 0)

    async def _get_revisions(self, keys: List[str], depth: int) -> List[int]:
        if depth > self.stats.max_revision_depth:
            self.stats.max_revision_depth = depth
        values = await self.global_cache.multiget(keys)
        revisions: List[Optional[int]] = [_parse_revision(v) for v in values]
        missing = [i for i, r in enumerate(revisions) if r is None]
        if not missing:
            return revisions

        monotone = self.monotone_value()
        lost: List[int] = []
        for i in missing:
            if await self.global_cache.add(keys[i], str(monotone).encode()):
                revisions[i] = monotone
                self.stats.revision_repairs += 1
            else:
                lost.append(i)
        if lost:
            # Another invocation added first; its value must be fetched, not assumed
            if depth + 1 > self.config.revision_max_depth:
                raise HorizonViolationError(depth + 1, [keys[i] for i in lost])
            logger.debug("add lost for %d revision keys, refetching at depth %d", len(lost), depth + 1)
            refetched = await self._get_revisions([keys[i] for i in lost], depth + 1)
            for i, value in zip(lost, refetched):
                revisions[i] = value
        return revisions

    # --- reads --------------------------------------------------------------

    async def _probe(self, cache: CacheBackend, key: str) -> Optional[CachedEntry]:
        try:
            return CachedEntry.decode(await cache.get(key))
        except CacheBackendError as e:
            self.stats.cache_bypasses += 1
            logger.warning("%s cache read failed, treating as miss: %s", cache.name, e)
            return None

    async def _store(self, cache: CacheBackend, key: str, entry: CachedEntry) -> None:
        try:
            await cache.set(key, entry.encode())
        except CacheBackendError as e:
            logger.warning("%s cache write failed, result not cached: %s", cache.name, e)

    def _usable(self, entry: Optional[CachedEntry], version: Version) -> bool:
        return entry is not None and entry.parsed_version.satisfies(version, self.config.version_compare)

    async def _cached_select(self, patterns, result_key: str, load) -> SelectOutcome:
        try:
            version = Version(await self.get_revisions([storage_key(p) for p in patterns]))
        except CacheBackendError as e:
            self.stats.cache_bypasses += 1
            logger.warning("revision fetch failed, reading through to the database: %s", e)
            snapshot = await load()
            return SelectOutcome(rows=snapshot.rows, served_from=ServedFrom.DATABASE, snapshot_seq=snapshot.seq)

        entry = await self._probe(self.local_cache, result_key)
        if self._usable(entry, version):
            return self._outcome(entry, ServedFrom.LOCAL)

        served_from = ServedFrom.GLOBAL
        if self.global_cache is not self.local_cache:
            entry = await self._probe(self.global_cache, result_key)
        else:
            entry = None
        if not self._usable(entry, version):
            snapshot: SelectSnapshot = await load()
            entry = CachedEntry.build(
                version,
                snapshot.rows,
                snapshot.seq if self.config.record_snapshot else None,
            )
            served_from = ServedFrom.DATABASE
            await self._store(self.global_cache, result_key, entry)
            if self.local_cache is not self.global_cache:
                await self._store(self.local_cache, result_key, entry)
            return SelectOutcome(
                rows=snapshot.rows, served_from=served_from, version=entry.version, snapshot_seq=snapshot.seq
            )

        await self._store(self.local_cache, result_key, entry)
        return self._outcome(entry, served_from)

    @staticmethod
    def _outcome(entry: CachedEntry, served_from: ServedFrom) -> SelectOutcome:
        return SelectOutcome(
            rows=entry.records(), served_from=served_from, version=entry.version, snapshot_seq=entry.snapshot_seq
        )

    async def fetch(self, q: Query, extra: str = "", ranges: Optional[RangeMap] = None) -> SelectOutcome:
        """
        Select with provenance: where the result came from and its version.

        Args:
            q: Query
            extra: Opaque query text distinguishing queries with equal subspaces
            ranges: Inclusive integer ranges for dyadic columns

        Returns:
            SelectOutcome: Rows, source and version
        """
        with invocation():
            patterns = self.scheme.probe_patterns(q, ranges)
            return await self._cached_select(
                patterns, digest(q, extra, ranges), lambda: self.table.select(q, ranges)
            )

    async def select(self, q: Query, extra: str = "", ranges: Optional[RangeMap] = None) -> frozenset:
        return (await self.fetch(q, extra, ranges)).rows

    async def fetch_any(self, clauses: Sequence[Query], extra: str = "") -> SelectOutcome:
        """Select the union of several clauses (a WHERE clause in DNF)."""
        clauses = list(clauses)
        with invocation():
            patterns = self.scheme.probe_patterns_any(clauses)
            return await self._cached_select(
                patterns, digest_any(clauses, extra), lambda: self.table.select_any(clauses)
            )

    async def select_any(self, clauses: Sequence[Query], extra: str = "") -> frozenset:
        return (await self.fetch_any(clauses, extra)).rows

    # --- writes -------------------------------------------------------------

    async def _increment(self, key: str) -> None:
        last_error: Optional[BaseException] = None
        attempt = 0
        for attempt in range(1, self.config.increment_attempts + 1):
            try:
                # A missing counter needs nothing: the next reader seeds a larger value
                await self.global_cache.increment(key)
                return
            except CacheNumericError as e:
                last_error = e
                break
            except CacheBackendError as e:
                last_error = e
                self.stats.invalidation_retries += 1
                logger.debug("increment of %s failed (attempt %d): %s", key, attempt, e)
        logger.error("invalidation of %s failed: %s", key, last_error)
        raise InvalidationError(key, attempt, last_error)

    async def invalidate(self, q: Query, ranges: Optional[RangeMap] = None) -> int:
        """
        Increment every counter whose subspace intersects ``q``.

        Returns:
            int: Number of increments issued

        Raises:
            InvalidationError: If an increment cannot be delivered
        """
        patterns = self.scheme.increment_patterns(q, ranges)
        for p in patterns:
            await self._increment(storage_key(p))
        return len(patterns)

    async def _write(self, operation, targets) -> WriteOutcome:
        # Key lists are computed first so a rejected query never reaches the table
        plans = [self.scheme.increment_patterns(q, ranges) for q, ranges in targets]
        result = await operation()
        if not result.changed and not self.config.invalidate_on_noop:
            return WriteOutcome(changed=0, seq=result.seq, committed_ms=result.committed_ms, invalidated=False)
        increments = 0
        for patterns in plans:
            for p in patterns:
                await self._increment(storage_key(p))
            increments += len(patterns)
        return WriteOutcome(
            changed=result.changed,
            seq=result.seq,
            committed_ms=result.committed_ms,
            invalidated=True,
            increments=increments,
        )

    async def insert(self, r: Record) -> WriteOutcome:
        """Insert a record, then invalidate the point it occupies."""
        r = tuple(field_value(v) for v in r)
        with invocation():
            return await self._write(lambda: self.table.insert(r), [(r, None)])

    async def delete(self, q: Query, ranges: Optional[RangeMap] = None) -> WriteOutcome:
        """Delete subspace(q), then invalidate it."""
        with invocation():
            return await self._write(lambda: self.table.delete(q, ranges), [(q, ranges)])

    async def delete_any(self, clauses: Sequence[Query]) -> WriteOutcome:
        """Delete the union of several clauses, invalidating each clause."""
        clauses = list(clauses)
        with invocation():
            return await self._write(lambda: self.table.delete_any(clauses), [(q, None) for q in clauses])


def _parse_revision(value: Optional[bytes]) -> Optional[int]:
    if value is None or not value.isdigit():
        return None
    return int(value)
