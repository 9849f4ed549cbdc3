import asyncio
import random
from typing import Optional

import pytest
from hypothesis import given, settings, strategies as st

from app.cache.memory import MemoryCache
from app.core.exceptions import CacheBackendError, HorizonViolationError, InvalidationError
from app.models.query import STAR
from app.models.version import VersionCompare
from app.repositories.table_repository import TableRepository
from app.schemas.cache import CacheConfig
from app.schemas.table import TableSchema
from app.schemas.wrapper import ServedFrom, WrapperConfig
from app.services.cachedb import CacheDB
from app.services.keys import storage_key
from app.services.variants import read_variants
from tests.conftest import ManualClock


class RacingCache(MemoryCache):
    """Loses every add to a concurrent writer that stored ``winner`` first."""

    def __init__(self, clock, winner: bytes = b"42", **kwargs):
        super().__init__(CacheConfig(), clock, **kwargs)
        self.winner = winner

    async def _add(self, key: str, value: bytes) -> bool:
        if key not in self:
            await self._set(key, self.winner)
        return False


class VanishingCache(MemoryCache):
    """Every add loses, yet the key never appears: a broken eviction contract."""

    async def _add(self, key: str, value: bytes) -> bool:
        return False


class FailingCache(MemoryCache):
    """Raises I/O errors on the selected operations."""

    def __init__(self, clock, fail_reads: bool = False, fail_increments: bool = False):
        super().__init__(CacheConfig(), clock)
        self.fail_reads = fail_reads
        self.fail_increments = fail_increments

    async def _multiget(self, keys):
        if self.fail_reads:
            raise CacheBackendError("connection reset")
        return await super()._multiget(keys)

    async def _increment(self, key: str) -> Optional[int]:
        if self.fail_increments:
            raise CacheBackendError("connection reset")
        return await super()._increment(key)


class TestSelect:
    """Read path: local, then global, then the table."""

    async def test_cold_then_warm(self, wrapper, table, global_cache, local_cache):
        table.load([("2", "2", "0")])
        first = await wrapper.fetch((STAR, "2", "0"))
        assert first.served_from is ServedFrom.DATABASE
        assert first.rows == {("2", "2", "0")}
        assert len([k for k in global_cache.keys() if k.startswith("res:")]) == 1
        assert len(local_cache.keys()) == 1

        second = await wrapper.fetch((STAR, "2", "0"))
        assert second.served_from is ServedFrom.LOCAL
        assert second.rows == first.rows
        assert second.version == first.version

    async def test_global_hit_refills_local(self, wrapper, local_cache):
        await wrapper.select(("1", STAR, STAR))
        await local_cache.flush()
        outcome = await wrapper.fetch(("1", STAR, STAR))
        assert outcome.served_from is ServedFrom.GLOBAL
        assert len(local_cache.keys()) == 1

    async def test_insert_is_visible(self, wrapper):
        assert await wrapper.select((STAR, "2", "0")) == frozenset()
        await wrapper.insert(("2", "2", "0"))
        assert await wrapper.select((STAR, "2", "0")) == {("2", "2", "0")}

    async def test_intersecting_delete_forces_reread(self, wrapper, table):
        table.load([("2", "2", "0"), ("3", "2", "0")])
        await wrapper.select((STAR, "2", "0"))
        await wrapper.delete(("2", STAR, STAR))
        outcome = await wrapper.fetch((STAR, "2", "0"))
        assert outcome.served_from is ServedFrom.DATABASE
        assert outcome.rows == {("3", "2", "0")} == table.peek((STAR, "2", "0"))

    async def test_disjoint_write_keeps_hit(self, wrapper):
        await wrapper.select(("1", STAR, STAR))
        await wrapper.insert(("2", "5", "5"))
        await wrapper.delete(("3", "1", STAR))
        assert (await wrapper.fetch(("1", STAR, STAR))).served_from is ServedFrom.LOCAL

    async def test_extra_separates_results(self, wrapper):
        await wrapper.select(("1", STAR, STAR), extra="order by date")
        outcome = await wrapper.fetch(("1", STAR, STAR), extra="order by game")
        assert outcome.served_from is ServedFrom.DATABASE

    async def test_garbage_entry_is_a_miss(self, wrapper, global_cache, local_cache):
        await wrapper.select(("1", STAR, STAR))
        for cache in (global_cache, local_cache):
            for key in cache.keys():
                if key.startswith("res:"):
                    await cache.set(key, b"\x00not json")
        assert (await wrapper.fetch(("1", STAR, STAR))).served_from is ServedFrom.DATABASE

    async def test_empty_local_cache_is_kept(self, table, global_cache, clock):
        local = MemoryCache(clock=clock, name="local")
        assert len(local) == 0
        db = CacheDB(table, global_cache, local, clock=clock)
        assert db.local_cache is local
        await db.select(("1", STAR, STAR))
        assert len(local) == 1
        assert (await db.fetch(("1", STAR, STAR))).served_from is ServedFrom.LOCAL
        assert global_cache.stats.gets == 1
        assert local.stats.gets == 2

    async def test_aliased_local_cache(self, table, global_cache, clock):
        db = CacheDB(table, global_cache, clock=clock)
        await db.select(("1", STAR, STAR))
        assert (await db.fetch(("1", STAR, STAR))).served_from is ServedFrom.LOCAL
        assert global_cache.stats.gets == 2

    async def test_exact_version_compare(self, table, global_cache, local_cache, clock):
        db = CacheDB(table, global_cache, local_cache, config=WrapperConfig(version_compare=VersionCompare.EXACT),
                     clock=clock)
        await db.select(("1", STAR, STAR))
        assert (await db.fetch(("1", STAR, STAR))).served_from is ServedFrom.LOCAL

    async def test_revision_read_failure_reads_through(self, table, clock):
        db = CacheDB(table, FailingCache(clock, fail_reads=True), clock=clock)
        table.load([("1", "1", "1")])
        outcome = await db.fetch(("1", STAR, STAR))
        assert outcome.served_from is ServedFrom.DATABASE
        assert outcome.rows == {("1", "1", "1")}
        assert db.stats.cache_bypasses == 1


class TestRevisions:
    """getRevisions and its repair of missing counters."""

    async def test_missing_keys_get_monotone_value(self, wrapper, clock):
        revisions = await wrapper.get_revisions(["rev:a", "rev:b"])
        expected = int(clock.now_ms()) * 1000
        assert revisions == [expected, expected]
        assert wrapper.stats.revision_repairs == 2

    async def test_present_keys_returned_verbatim(self, wrapper, global_cache):
        await global_cache.set("rev:a", b"17")
        await global_cache.set("rev:b", b"5")
        assert await wrapper.get_revisions(["rev:a", "rev:b"]) == [17, 5]
        assert wrapper.stats.max_revision_depth == 0

    async def test_lost_add_refetches_once(self, table, clock):
        db = CacheDB(table, RacingCache(clock), clock=clock)
        assert await db.get_revisions(["rev:a"]) == [42]
        assert db.stats.max_revision_depth == 1

    async def test_horizon_violation(self, table, clock):
        db = CacheDB(table, VanishingCache(CacheConfig(), clock), config=WrapperConfig(revision_max_depth=2),
                     clock=clock)
        with pytest.raises(HorizonViolationError) as info:
            await db.get_revisions(["rev:a"])
        assert info.value.depth == 3

    async def test_evicted_counter_reseeded_higher(self, wrapper, global_cache, clock):
        key = storage_key(("1", STAR, STAR))
        await wrapper.select(("1", STAR, STAR))
        before = int(await global_cache.get(key))
        await wrapper.insert(("1", "2", "3"))
        clock.advance(150.0)
        assert global_cache.inject_eviction(key)
        await wrapper.select(("1", STAR, STAR))
        assert int(await global_cache.get(key)) > before + 1
        assert global_cache.ledger.strictly_increasing(key)

    async def test_stale_local_entry_after_eviction_is_refused(self, wrapper, global_cache, clock):
        await wrapper.select(("1", STAR, STAR))
        await wrapper.insert(("1", "2", "3"))
        clock.advance(150.0)
        for key in global_cache.keys():
            global_cache.inject_eviction(key)
        outcome = await wrapper.fetch(("1", STAR, STAR))
        assert outcome.served_from is ServedFrom.DATABASE
        assert outcome.rows == {("1", "2", "3")}


class TestWrites:
    """Invalidation after inserts and deletes."""

    async def test_invalidate_increments_two_to_the_k(self, wrapper, global_cache):
        before = global_cache.stats.snapshot()
        assert await wrapper.invalidate(("1", STAR, "3")) == 8
        assert global_cache.stats.increments - before["increments"] == 8

    async def test_write_outcome(self, wrapper, clock):
        outcome = await wrapper.insert(("1", "2", "3"))
        assert outcome.changed == 1 and outcome.invalidated and outcome.increments == 8
        assert outcome.committed_ms == clock.now_ms()
        duplicate = await wrapper.insert(("1", "2", "3"))
        assert duplicate.changed == 0 and duplicate.invalidated

    async def test_noop_invalidation_can_be_skipped(self, table, global_cache, clock):
        db = CacheDB(table, global_cache, config=WrapperConfig(invalidate_on_noop=False), clock=clock)
        outcome = await db.delete(("9", STAR, STAR))
        assert not outcome.invalidated and outcome.increments == 0
        assert global_cache.stats.increments == 0

    async def test_invalidation_failure_surfaces(self, table, clock):
        cache = FailingCache(clock, fail_increments=True)
        db = CacheDB(table, cache, config=WrapperConfig(increment_attempts=3), clock=clock)
        with pytest.raises(InvalidationError) as info:
            await db.insert(("1", "2", "3"))
        assert db.stats.invalidation_retries == 3
        assert info.value.attempts == 3
        # The table write itself went through
        assert table.rows() == {("1", "2", "3")}

    async def test_non_numeric_counter_is_not_retried(self, table, global_cache, clock):
        db = CacheDB(table, global_cache, config=WrapperConfig(increment_attempts=3), clock=clock)
        patterns = db.scheme.increment_patterns(("1", "2", "3"))
        await global_cache.set(storage_key(patterns[0]), b"garbage")
        with pytest.raises(InvalidationError) as info:
            await db.insert(("1", "2", "3"))
        assert info.value.attempts == 1
        assert db.stats.invalidation_retries == 0

    async def test_dnf_select_and_delete(self, wrapper, table):
        table.load([("1", "a", "x"), ("2", "b", "y"), ("3", "c", "z")])
        clauses = [("1", STAR, STAR), (STAR, STAR, "z")]
        assert await wrapper.select_any(clauses) == {("1", "a", "x"), ("3", "c", "z")}
        assert (await wrapper.fetch_any(clauses)).served_from is ServedFrom.LOCAL
        await wrapper.delete_any([(STAR, "c", STAR)])
        outcome = await wrapper.fetch_any(clauses)
        assert outcome.served_from is ServedFrom.DATABASE
        assert outcome.rows == {("1", "a", "x")}


class TestRangeColumns:
    """Dyadic counters for an integer column."""

    @pytest.fixture
    def ranged(self, clock):
        table = TableRepository(TableSchema.parse("user,day:range:4"), clock=clock)
        db = CacheDB(table, MemoryCache(clock=clock), MemoryCache(clock=clock), clock=clock)
        yield db
        table.close()

    async def test_insert_inside_range_invalidates(self, ranged):
        await ranged.select(("u", STAR), ranges={1: (3, 9)})
        await ranged.insert(("u", "5"))
        outcome = await ranged.fetch(("u", STAR), ranges={1: (3, 9)})
        assert outcome.served_from is ServedFrom.DATABASE
        assert outcome.rows == {("u", "5")}

    async def test_insert_outside_range_keeps_hit(self, ranged):
        await ranged.select(("u", STAR), ranges={1: (3, 9)})
        await ranged.insert(("u", "12"))
        assert (await ranged.fetch(("u", STAR), ranges={1: (3, 9)})).served_from is ServedFrom.LOCAL

    async def test_range_delete_invalidates_point_read(self, ranged):
        await ranged.insert(("u", "6"))
        await ranged.select((STAR, "6"))
        await ranged.delete((STAR, STAR), ranges={1: (4, 7)})
        outcome = await ranged.fetch((STAR, "6"))
        assert outcome.served_from is ServedFrom.DATABASE
        assert outcome.rows == frozenset()


class TestKeyBudgets:
    """Exact counter traffic per operation over random single-threaded runs."""

    @pytest.mark.slow
    async def test_random_operations(self, wrapper, global_cache, table):
        rng = random.Random(7)
        for _ in range(10_000):
            u = rng.random()
            if u < 0.6:
                q = tuple(str(rng.randrange(4)) if rng.random() < 0.5 else STAR for _ in range(3))
                constrained = sum(1 for t in q if t is not STAR)
                before = global_cache.stats.snapshot()
                outcome = await wrapper.fetch(q)
                delta = global_cache.stats.delta(before, global_cache.stats.snapshot())
                assert delta["multigets"] == 1
                assert delta["keys_fetched"] - delta["gets"] == 2 ** constrained == len(read_variants(q))
                assert delta["keys_fetched"] <= 2 ** (3 + 1) + 1
                assert outcome.rows == table.peek(q)
            else:
                before = global_cache.stats.snapshot()
                if u < 0.8:
                    await wrapper.insert(tuple(str(rng.randrange(4)) for _ in range(3)))
                else:
                    q = tuple(str(rng.randrange(4)) if rng.random() < 0.5 else STAR for _ in range(3))
                    await wrapper.delete(q)
                assert global_cache.stats.increments - before["increments"] == 8


values = st.sampled_from(["0", "1", "2"])
token = st.one_of(values, st.just(STAR))
operation = st.one_of(
    st.tuples(st.just("select"), st.tuples(token, token, token)),
    st.tuples(st.just("insert"), st.tuples(values, values, values)),
    st.tuples(st.just("delete"), st.tuples(token, token, token)),
    st.tuples(st.just("evict"), st.just(())),
)


class TestSequentialFuzz:
    """Any single-threaded sequence of operations reads what the table holds."""

    @settings(max_examples=60, deadline=None)
    @given(st.lists(operation, max_size=40))
    def test_select_matches_table(self, ops):
        asyncio.run(self._run(ops))

    async def _run(self, ops):
        clock = ManualClock()
        table = TableRepository(TableSchema.from_names(["a", "b", "c"]), clock=clock)
        global_cache = MemoryCache(CacheConfig(horizon_ms=10.0), clock)
        db = CacheDB(table, global_cache, MemoryCache(CacheConfig(horizon_ms=10.0), clock), clock=clock)
        rng = random.Random(0)
        try:
            for kind, arg in ops:
                clock.advance(20.0)
                if kind == "select":
                    assert await db.select(arg) == table.peek(arg)
                elif kind == "insert":
                    await db.insert(arg)
                elif kind == "delete":
                    await db.delete(arg)
                else:
                    global_cache.evict_random(rng)
        finally:
            table.close()
