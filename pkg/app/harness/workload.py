"""
The concurrent workload: workers issuing plane selects, point inserts and
line deletes over a ``grid^3`` lattice against a shared table and caches.

One ``WorkloadRunner`` builds a fresh table, caches and front-ends for a
``WorkloadSpec``, runs every worker to completion under the chosen
scheduler and turns the collected events into a ``FreshnessReport``.
"""

import hashlib
import json
import logging
import math
import random
import threading
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

from app.cache.base import CacheBackend
from app.cache.memory import MemoryCache
from app.core.clock import Clock, OffsetClock, SystemClock
from app.harness.oracle import epsilon, judge_select, lower_median
from app.harness.scheduler import ThreadRunner, VirtualClock, VirtualScheduler
from app.models.query import STAR, Query, Record, format_token
from app.repositories.table_repository import TableRepository
from app.schemas.cache import CacheConfig
from app.schemas.table import ColumnSpec, TableSchema
from app.schemas.workload import (
    EvictionTarget,
    FreshnessReport,
    LocalTopology,
    OpEvent,
    OpKind,
    PairedRun,
    SchedulerMode,
    SchemeKind,
    Strategy,
    WorkloadSpec,
)
from app.schemas.wrapper import ServedFrom, WrapperConfig
from app.services.cachedb import CacheDB
from app.services.keys import FOLDED_PREFIX, REVISION_PREFIX, digest
from app.services.naive import NaiveCacheDB, PassthroughDB
from app.services.planner import BoundName, Projection, TrimmedPlan, trim
from app.services.schemes import GraphScheme, KeyScheme, ProjectedScheme, TrimmedScheme

logger = logging.getLogger(__name__)

GRID_COLUMNS = ("x", "y", "z")
PADDING_VALUE = "0"

# (p_select, p_insert, p_delete) in order of rising write fraction
STANDARD_MIXES = (
    (0.99, 0.009, 0.001),
    (0.98, 0.01, 0.01),
    (0.90, 0.09, 0.01),
    (0.80, 0.10, 0.10),
    (1 / 3, 1 / 3, 1 / 3),
)

# The leading mixes whose hit ratio must beat the naive one by a fixed factor
READ_HEAVY_MIXES = 2
READ_HEAVY_NAIVE_FACTOR = 2.0


def workload_schema(padding_columns: int = 0) -> TableSchema:
    names = list(GRID_COLUMNS) + [f"p{i}" for i in range(padding_columns)]
    return TableSchema(columns=tuple(ColumnSpec(name=n) for n in names))


def lattice_fill(grid: int, fill: int, padding_columns: int = 0) -> List[Record]:
    """
    ``fill`` equally spaced lattice points.

    Points are taken every ``ceil(grid^3 / fill)`` positions of the row-major
    enumeration (x slowest, z fastest).
    """
    total = grid ** 3
    if fill <= 0:
        return []
    stride = max(1, math.ceil(total / fill))
    padding = (PADDING_VALUE,) * padding_columns
    points: List[Record] = []
    for index in range(0, total, stride):
        if len(points) == fill:
            break
        x, rest = divmod(index, grid * grid)
        y, z = divmod(rest, grid)
        points.append((str(x), str(y), str(z)) + padding)
    return points


def harness_plan(schema: TableSchema) -> TrimmedPlan:
    """Whitelist of exactly the query shapes the workload issues."""
    k = schema.k
    names = schema.names
    grid_axes = range(len(GRID_COLUMNS))
    reads = [
        tuple(BoundName(names[i]) if i == axis else STAR for i in range(k))
        for axis in grid_axes
    ]
    inserts = [tuple(BoundName(n) for n in names)]
    deletes = [
        tuple(BoundName(names[i]) if i in grid_axes and i != free else STAR for i in range(k))
        for free in grid_axes
    ]
    return trim(schema, reads, inserts + deletes)


def build_scheme(kind: SchemeKind, schema: TableSchema) -> KeyScheme:
    if kind is SchemeKind.TRIMMED:
        return TrimmedScheme(harness_plan(schema))
    if kind is SchemeKind.PROJECTED:
        return ProjectedScheme(schema, Projection(tuple(range(len(GRID_COLUMNS))), schema.k))
    return GraphScheme(schema)


def draw_operation(rng: random.Random, spec: WorkloadSpec) -> Tuple[OpKind, Query]:
    """
    Draw one operation of the mix.

    Selects fix one grid coordinate (a plane), inserts fix all of them (a
    point), deletes fix two (a line). Padding columns are never constrained
    except by inserts, which store ``PADDING_VALUE`` there.
    """
    grid = spec.grid
    padding = spec.padding_columns
    u = rng.random()
    if u < spec.p_select:
        axis = rng.randrange(3)
        q = [STAR] * 3
        q[axis] = str(rng.randrange(grid))
        return OpKind.SELECT, tuple(q) + (STAR,) * padding
    if u < spec.p_select + spec.p_insert:
        point = tuple(str(rng.randrange(grid)) for _ in range(3))
        return OpKind.INSERT, point + (PADDING_VALUE,) * padding
    free = rng.randrange(3)
    q = [str(rng.randrange(grid)) for _ in range(3)]
    q[free] = STAR
    return OpKind.DELETE, tuple(q) + (STAR,) * padding


def result_digest(rows) -> str:
    payload = json.dumps(sorted(list(r) for r in rows), separators=(",", ":"))
    return hashlib.sha1(payload.encode("utf-8")).hexdigest()


class ShadowNaive:
    """
    Hit accounting of a flush-on-write cache over the observed interleaving.

    A select is a naive hit when an earlier select of the same query finished
    before it started, and no write was in flight from the earlier select's
    start to this select's end.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._epoch = 0
        self._active_writes = 0
        self._stored: Dict[str, int] = {}
        # Bumped when a select overlapping a write finishes; its store may be older
        self._unclean: Dict[str, int] = {}
        self.hits = 0
        self.misses = 0

    def write_started(self) -> None:
        with self._lock:
            self._active_writes += 1
            self._epoch += 1

    def write_finished(self) -> None:
        with self._lock:
            self._active_writes -= 1
            self._epoch += 1

    def select_started(self, key: str) -> tuple:
        with self._lock:
            return self._epoch, self._active_writes == 0, self._stored.get(key), self._unclean.get(key, 0)

    def select_finished(self, key: str, token: tuple) -> bool:
        epoch, idle, stored, unclean = token
        with self._lock:
            clean = idle and self._epoch == epoch
            hit = clean and stored == epoch
            if clean and self._unclean.get(key, 0) == unclean:
                self._stored[key] = epoch
            else:
                self._stored.pop(key, None)
                if not clean:
                    self._unclean[key] = self._unclean.get(key, 0) + 1
            if hit:
                self.hits += 1
            else:
                self.misses += 1
            return hit


@dataclass
class EvictionCounters:
    attempted: int = 0
    accepted: int = 0
    refused: int = 0


async def evictor(
    clock: Clock,
    caches: List[MemoryCache],
    interval_ms: float,
    rng: random.Random,
    counters: EvictionCounters,
    should_stop: Callable[[], bool],
) -> None:
    """Every ``interval_ms`` try to evict one random key from each target cache."""
    while not should_stop():
        await clock.sleep(interval_ms)
        for cache in caches:
            if not len(cache):
                continue
            counters.attempted += 1
            if cache.evict_random(rng) is None:
                counters.refused += 1
            else:
                counters.accepted += 1


@dataclass
class _Recorded:
    event: OpEvent
    query: Query


@dataclass
class EventSink:
    """Serialized collection point for events from every worker."""
    _items: List[_Recorded] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def add(self, event: OpEvent, query: Query) -> None:
        with self._lock:
            self._items.append(_Recorded(event, query))

    def drain(self) -> List[_Recorded]:
        with self._lock:
            return sorted(self._items, key=lambda r: (r.event.invoke_ms, r.event.worker, r.event.index))


class WorkloadRunner:
    """
    One run of a ``WorkloadSpec`` on fresh state.

    Args:
        spec: Workload parameters
    """

    def __init__(self, spec: WorkloadSpec):
        self.spec = spec
        if spec.scheduler is SchedulerMode.VIRTUAL:
            self.clock = VirtualClock()
            self.scheduler: Optional[VirtualScheduler] = VirtualScheduler(self.clock, spec.seed)
            self.threads: Optional[ThreadRunner] = None
        else:
            self.clock = SystemClock()
            self.scheduler = None
            self.threads = ThreadRunner(self.clock)

        self.schema = workload_schema(spec.padding_columns)
        self.table = TableRepository(
            self.schema,
            clock=self.clock,
            latency=spec.db_latency,
            write_ack_latency=spec.write_gap,
            seed=spec.seed,
        )
        self.table.load(lattice_fill(spec.grid, spec.fill, spec.padding_columns))

        cache_config = CacheConfig(horizon_ms=spec.horizon_ms, latency=spec.cache_latency, ledger=True)
        self.global_cache = MemoryCache(cache_config, self.clock, seed=spec.seed, name="global")
        self.local_caches = self._local_caches(cache_config)
        self.fronts = [self._front_end(w) for w in range(spec.workers)]

        self.shadow = ShadowNaive()
        self.sink = EventSink()
        self.evictions = EvictionCounters()
        self.oracle_mismatches = 0

    def _local_caches(self, config: CacheConfig) -> List[Optional[MemoryCache]]:
        spec = self.spec
        local_config = config.model_copy(update={"ledger": False})
        if spec.local is LocalTopology.ALIAS or spec.strategy is not Strategy.REVISION:
            return [None] * spec.workers
        if spec.local is LocalTopology.SHARED:
            shared = MemoryCache(local_config, self.clock, seed=spec.seed + 1, name="local")
            return [shared] * spec.workers
        return [
            MemoryCache(local_config, self.clock, seed=spec.seed + 1 + w, name=f"local-{w}")
            for w in range(spec.workers)
        ]

    def _front_end(self, worker: int):
        spec = self.spec
        if spec.strategy is Strategy.NONE:
            return PassthroughDB(self.table)
        if spec.strategy is Strategy.NAIVE:
            return NaiveCacheDB(self.table, self.global_cache, record_snapshot=True)
        clock = self.clock
        if spec.skew_ms:
            offset = random.Random(f"{spec.seed}:skew:{worker}").uniform(-spec.skew_ms, spec.skew_ms)
            clock = OffsetClock(self.clock, offset)
        config = WrapperConfig(
            version_compare=spec.version_compare,
            invalidate_on_noop=spec.invalidate_on_noop,
            record_snapshot=True,
        )
        return CacheDB(
            self.table,
            self.global_cache,
            self.local_caches[worker],
            scheme=build_scheme(spec.scheme, self.schema),
            config=config,
            clock=clock,
        )

    def _distinct_caches(self) -> List[CacheBackend]:
        caches: Dict[str, CacheBackend] = {self.global_cache.name: self.global_cache}
        for cache in self.local_caches:
            if cache is not None:
                caches.setdefault(cache.name, cache)
        return list(caches.values())

    def _eviction_targets(self) -> List[MemoryCache]:
        target = self.spec.evictions.target
        locals_ = [c for c in self._distinct_caches() if c is not self.global_cache]
        if target is EvictionTarget.GLOBAL:
            return [self.global_cache]
        if target is EvictionTarget.LOCAL:
            return locals_
        return [self.global_cache] + locals_

    # --- actors -------------------------------------------------------------

    async def _worker(self, worker: int) -> int:
        spec = self.spec
        front = self.fronts[worker]
        ops = random.Random(f"{spec.seed}:{worker}")
        think = random.Random(f"{spec.seed}:{worker}:think")
        for index in range(spec.ops):
            kind, q = draw_operation(ops, spec)
            await self._perform(worker, index, front, kind, q)
            if not spec.think_time.is_zero:
                await self.clock.sleep(spec.think_time.sample(think))
        return spec.ops

    async def _perform(self, worker: int, index: int, front, kind: OpKind, q: Query) -> None:
        invoke_ms = self.clock.now_ms()
        if kind is OpKind.SELECT:
            key = digest(q)
            token = self.shadow.select_started(key)
            outcome = await front.fetch(q)
            return_ms = self.clock.now_ms()
            naive_hit = self.shadow.select_finished(key, token)
            if self.spec.workers == 1 and outcome.served_from is not ServedFrom.DATABASE:
                if self.table.peek(q) != outcome.rows:
                    self.oracle_mismatches += 1
            fields = dict(
                served_from=outcome.served_from.value,
                snapshot_seq=outcome.snapshot_seq,
                result_digest=result_digest(outcome.rows),
                rows=len(outcome.rows),
                naive_hit=naive_hit,
            )
        else:
            self.shadow.write_started()
            try:
                if kind is OpKind.INSERT:
                    outcome = await front.insert(q)
                else:
                    outcome = await front.delete(q)
            finally:
                self.shadow.write_finished()
            return_ms = self.clock.now_ms()
            fields = dict(changed=outcome.changed, write_seq=outcome.seq, committed_ms=outcome.committed_ms)
        event = OpEvent(
            worker=worker,
            index=index,
            kind=kind,
            query=[format_token(t) for t in q],
            invoke_ms=invoke_ms,
            return_ms=return_ms,
            **fields,
        )
        self.sink.add(event, q)

    # --- running ------------------------------------------------------------

    def _execute(self) -> None:
        spec = self.spec
        evicting = spec.evictions.enabled and spec.strategy is not Strategy.NONE
        rng = random.Random(f"{spec.seed}:evictions")
        if self.scheduler is not None:
            for w in range(spec.workers):
                self.scheduler.spawn(self._worker(w), f"worker-{w}")
            if evicting:
                self.scheduler.spawn(
                    evictor(self.clock, self._eviction_targets(), spec.evictions.interval_ms, rng,
                            self.evictions, lambda: False),
                    "evictor",
                    daemon=True,
                )
            self.scheduler.run()
            return

        runner = self.threads
        daemons = []
        if evicting:
            daemons.append(
                lambda: evictor(self.clock, self._eviction_targets(), spec.evictions.interval_ms, rng,
                                self.evictions, runner.stop.is_set)
            )
        runner.run([lambda w=w: self._worker(w) for w in range(spec.workers)], daemons)

    def run(self) -> Tuple[List[OpEvent], FreshnessReport]:
        spec = self.spec
        logger.info(
            "running %s/%s workload: %d workers x %d ops, grid %d, seed %d",
            spec.strategy.value, spec.scheduler.value, spec.workers, spec.ops, spec.grid, spec.seed,
        )
        try:
            self._execute()
            events, report = self._report()
        finally:
            self.table.close()
        logger.info(
            "%s: %d selects, hit ratio %.3f, %d stale, naive hit ratio %.3f",
            spec.strategy.value, report.selects, report.hit_ratio, report.stale, report.naive_hit_ratio,
        )
        return events, report

    # --- metrics ------------------------------------------------------------

    def _report(self) -> Tuple[List[OpEvent], FreshnessReport]:
        spec = self.spec
        recorded = self.sink.drain()
        write_log = self.table.write_log
        eps = epsilon([r.event for r in recorded])
        allowance = spec.skew_allowance_ms

        events: List[OpEvent] = []
        ages: List[float] = []
        max_lag = 0.0
        violations = 0
        for item in recorded:
            event = item.event
            if event.kind is OpKind.SELECT and event.from_cache:
                judgement = judge_select(event, item.query, write_log)
                event = event.model_copy(update={
                    "stale": judgement.stale,
                    "stale_age_ms": judgement.age_ms if judgement.stale else None,
                    "stale_lag_ms": judgement.lag_ms if judgement.stale else None,
                })
                if judgement.stale:
                    ages.append(judgement.age_ms)
                    max_lag = max(max_lag, judgement.lag_ms)
                    if judgement.lag_ms > eps + allowance:
                        violations += 1
            events.append(event)

        selects = [e for e in events if e.kind is OpKind.SELECT]
        hits = sum(1 for e in selects if e.from_cache)
        stale = len(ages)
        report = FreshnessReport(
            strategy=spec.strategy,
            scheduler=spec.scheduler,
            workers=spec.workers,
            ops_per_worker=spec.ops,
            grid=spec.grid,
            seed=spec.seed,
            p_select=spec.p_select,
            p_insert=spec.p_insert,
            p_delete=spec.p_delete,
            selects=len(selects),
            cache_misses=len(selects) - hits,
            cache_hits=hits,
            hit_ratio=_ratio(hits, len(selects)),
            stale=stale,
            max_stale_age_ms=max(ages, default=0.0),
            median_stale_age_ms=lower_median(ages),
            fresh=hits - stale,
            fresh_ratio=_ratio(hits - stale, hits, empty=1.0),
            inserts=sum(1 for e in events if e.kind is OpKind.INSERT and e.changed),
            deletes=sum(1 for e in events if e.kind is OpKind.DELETE and e.changed),
            naive_hits=self.shadow.hits,
            naive_misses=self.shadow.misses,
            naive_hit_ratio=_ratio(self.shadow.hits, self.shadow.hits + self.shadow.misses),
            epsilon_ms=eps,
            skew_allowance_ms=allowance,
            max_stale_lag_ms=max_lag,
            bound_violations=violations,
            oracle_mismatches=self.oracle_mismatches,
            max_revision_depth=max(
                (f.stats.max_revision_depth for f in self.fronts if isinstance(f, CacheDB)), default=0
            ),
            evictions_attempted=self.evictions.attempted,
            evictions_accepted=self.evictions.accepted,
            evictions_refused=self.evictions.refused,
            ledger_violations=self._ledger_violations(),
            cache_counters={
                c.name: c.stats.snapshot() for c in sorted(self._distinct_caches(), key=lambda c: c.name)
            },
        )
        report.invariant_failures = self._invariant_failures(report)
        return events, report

    def _ledger_violations(self) -> int:
        ledger = self.global_cache.ledger
        if ledger is None or self.spec.strategy is not Strategy.REVISION:
            return 0
        return sum(
            1
            for key in ledger.keys()
            if key.startswith((REVISION_PREFIX, FOLDED_PREFIX)) and not ledger.strictly_increasing(key)
        )

    def _invariant_failures(self, report: FreshnessReport) -> List[str]:
        spec = self.spec
        failures: List[str] = []
        if report.oracle_mismatches:
            failures.append(f"{report.oracle_mismatches} cache hits differ from the table")
        if spec.strategy is not Strategy.REVISION:
            return failures
        if report.bound_violations:
            failures.append(
                f"{report.bound_violations} stale results older than epsilon "
                f"({report.epsilon_ms:.3f} ms) plus skew allowance"
            )
        if spec.workers == 1 and report.stale:
            failures.append(f"{report.stale} stale results with a single worker")
        if report.max_revision_depth > 1:
            failures.append(f"revision repair recursed to depth {report.max_revision_depth}")
        if not spec.skew_ms and report.ledger_violations:
            failures.append(f"{report.ledger_violations} revision keys took a non-increasing value")
        if not spec.evictions.enabled and report.cache_hits < report.naive_hits:
            failures.append(
                f"revision hits {report.cache_hits} below flush-on-write hits {report.naive_hits}"
            )
        return failures


def _ratio(part: int, whole: int, empty: float = 0.0) -> float:
    return part / whole if whole else empty


def run_workload(spec: WorkloadSpec) -> Tuple[List[OpEvent], FreshnessReport]:
    """
    Execute a workload on fresh state.

    Args:
        spec: Workload parameters

    Returns:
        Tuple of the events (ordered by invoke time) and the run's report

    Raises:
        InvalidationError: If a write's increments cannot be delivered
        HorizonViolationError: If revision repair exceeds its depth cap
    """
    return WorkloadRunner(spec).run()


def run_paired(spec: WorkloadSpec) -> Tuple[List[OpEvent], FreshnessReport]:
    """
    Run ``spec`` and replay the same op streams under the naive strategy.

    The naive run's metrics are attached to the report as ``paired_naive``.
    """
    events, report = run_workload(spec)
    if spec.strategy is Strategy.NAIVE:
        return events, report
    _, naive = run_workload(spec.model_copy(update={"strategy": Strategy.NAIVE}))
    report.paired_naive = PairedRun(
        hits=naive.cache_hits,
        misses=naive.cache_misses,
        hit_ratio=naive.hit_ratio,
        stale=naive.stale,
        revision_dominates=report.cache_hits >= naive.cache_hits,
    )
    if spec.strategy is Strategy.REVISION and not report.paired_naive.revision_dominates:
        report.invariant_failures.append(
            f"revision hits {report.cache_hits} below naive baseline hits {naive.cache_hits}"
        )
    return events, report


def run_mixes(
    spec: WorkloadSpec,
    compare_naive: bool = False,
    naive_factor: float = READ_HEAVY_NAIVE_FACTOR,
) -> List[FreshnessReport]:
    """
    Run ``spec`` once per standard mix.

    For the revision strategy a hit ratio that rises with the write fraction
    is recorded as a failure on the later report, and so is a read-heavy mix
    whose hit ratio falls short of ``naive_factor`` times the naive hit
    ratio of the same interleaving. A factor of 0 disables that check.
    """
    run = run_paired if compare_naive else run_workload
    reports: List[FreshnessReport] = []
    for p_select, p_insert, p_delete in STANDARD_MIXES:
        mixed = spec.model_copy(update={"p_select": p_select, "p_insert": p_insert, "p_delete": p_delete})
        _, report = run(mixed)
        if spec.strategy is Strategy.REVISION:
            if reports and report.hit_ratio > reports[-1].hit_ratio:
                report.invariant_failures.append(
                    f"hit ratio {report.hit_ratio:.3f} rose above {reports[-1].hit_ratio:.3f} as writes increased"
                )
            if len(reports) < READ_HEAVY_MIXES and report.hit_ratio < naive_factor * report.naive_hit_ratio:
                report.invariant_failures.append(
                    f"hit ratio {report.hit_ratio:.3f} is below {naive_factor:g}x "
                    f"the naive hit ratio {report.naive_hit_ratio:.3f}"
                )
        reports.append(report)
    return reports
