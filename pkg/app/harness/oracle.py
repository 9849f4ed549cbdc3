"""
Staleness oracle.

A select answered from cache is stale when some write that changed rows in
its subspace committed before the select was invoked, yet is not reflected
in the cached result (its sequence number is above the entry's snapshot).
The freshness bound is met when every such write committed no more than
``epsilon + skew allowance`` before the invocation.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from app.models.query import STAR, Query
from app.repositories.table_repository import WriteLogEntry
from app.schemas.workload import OpEvent


@dataclass(frozen=True)
class Judgement:
    stale: bool
    age_ms: float = 0.0
    lag_ms: float = 0.0


FRESH = Judgement(False)


def _position_overlaps(a, b, range_a: Optional[Tuple[int, int]], range_b: Optional[Tuple[int, int]]) -> bool:
    if range_a is None and a is STAR or range_b is None and b is STAR:
        return True
    if range_a is None and range_b is None:
        return a == b
    lo_a, hi_a = range_a if range_a is not None else (int(a), int(a))
    lo_b, hi_b = range_b if range_b is not None else (int(b), int(b))
    return lo_a <= hi_b and lo_b <= hi_a


def write_intersects(entry: WriteLogEntry, q: Query, ranges: Optional[dict] = None) -> bool:
    """Whether any clause of a logged write intersects the read's subspace."""
    ranges = ranges or {}
    write_ranges = {col: (lo, hi) for col, lo, hi in entry.ranges}
    for clause in entry.clauses:
        if all(
            _position_overlaps(w, r, write_ranges.get(i), ranges.get(i))
            for i, (w, r) in enumerate(zip(clause, q))
        ):
            return True
    return False


def judge_select(event: OpEvent, query: Query, write_log: Sequence[WriteLogEntry]) -> Judgement:
    """
    Classify a select served from cache.

    Args:
        event: The select, with the snapshot sequence number of the served entry
        query: The select's query
        write_log: Every write of the run, in sequence order

    Returns:
        Judgement: Fresh, or stale with age (return time minus the earliest
        missed write) and lag (invoke time minus that write)
    """
    if not event.from_cache or event.snapshot_seq is None:
        return FRESH
    for entry in write_log:
        if entry.seq <= event.snapshot_seq or entry.changed == 0:
            continue
        if entry.at_ms >= event.invoke_ms:
            # Later writes may be missed; the log is ordered by commit time
            break
        if write_intersects(entry, query):
            return Judgement(True, event.return_ms - entry.at_ms, event.invoke_ms - entry.at_ms)
    return FRESH


def epsilon(events: Sequence[OpEvent]) -> float:
    """Largest delay between a write committing and its invalidation completing."""
    return max(
        (e.return_ms - e.committed_ms for e in events if e.committed_ms is not None),
        default=0.0,
    )


def lower_median(values: List[float]) -> float:
    if not values:
        return 0.0
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]
