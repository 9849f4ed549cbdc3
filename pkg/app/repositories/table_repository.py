import logging
import random
import threading
from dataclasses import dataclass
from typing import FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from sqlalchemy import Engine, Integer, Table, and_, cast, delete, false, insert, or_, select, true
from sqlalchemy.dialects.postgresql import insert as postgresql_insert
from sqlalchemy.dialects.sqlite import insert as sqlite_insert

from app.core.clock import Clock, system_clock
from app.core.database import create_metadata, create_store_engine
from app.core.exceptions import ConfigurationError, RangeError, UnsupportedTokenError
from app.models.query import STAR, Query, Record, check_length, check_query, field_value
from app.models.records import build_records_table
from app.schemas.cache import LatencyModel
from app.schemas.table import TableSchema

logger = logging.getLogger(__name__)

RangeMap = Mapping[int, Tuple[int, int]]


@dataclass(frozen=True)
class WriteLogEntry:
    """One insert or delete call; ``changed == 0`` marks a no-op."""
    seq: int
    at_ms: float
    kind: str
    clauses: Tuple[Query, ...]
    ranges: Tuple[Tuple[int, int, int], ...]
    changed: int

    @property
    def query(self) -> Query:
        return self.clauses[0]


@dataclass(frozen=True)
class SelectSnapshot:
    rows: FrozenSet[Record]
    seq: int


@dataclass(frozen=True)
class WriteResult:
    changed: int
    seq: int
    committed_ms: float

    @property
    def inserted(self) -> bool:
        return self.changed > 0


# Dialects whose INSERT can skip rows violating the uniqueness constraint
_ON_CONFLICT_INSERTS = {"sqlite": sqlite_insert, "postgresql": postgresql_insert}
_INSERT_IGNORE_DIALECTS = ("mysql", "mariadb")
SUPPORTED_DIALECTS = (*_ON_CONFLICT_INSERTS, *_INSERT_IGNORE_DIALECTS)


def check_dialect(dialect: str) -> None:
    if dialect not in SUPPORTED_DIALECTS:
        raise ConfigurationError(
            f"row store dialect {dialect!r} is not supported; expected one of {', '.join(SUPPORTED_DIALECTS)}"
        )


def insert_if_absent(table: Table, rows: List[dict], dialect: str):
    """
    INSERT that silently skips rows already present.

    Raises:
        ConfigurationError: If the dialect has no conflict-ignoring insert
    """
    check_dialect(dialect)
    if dialect in _ON_CONFLICT_INSERTS:
        return _ON_CONFLICT_INSERTS[dialect](table).values(rows).on_conflict_do_nothing()
    return insert(table).values(rows).prefix_with("IGNORE")


def freeze_ranges(ranges: Optional[RangeMap]) -> Tuple[Tuple[int, int, int], ...]:
    if not ranges:
        return ()
    return tuple(sorted((col, lo, hi) for col, (lo, hi) in ranges.items()))


class TableRepository:
    """
    The database: a set of k-tuples with subspace select/delete and insert.

    All statements run under one lock, so each call is atomic and the write
    sequence number returned with a select is consistent with its rows.
    """

    def __init__(
        self,
        schema: TableSchema,
        engine: Optional[Engine] = None,
        clock: Clock = system_clock,
        latency: LatencyModel = LatencyModel(),
        write_ack_latency: LatencyModel = LatencyModel(),
        seed: int = 0,
    ):
        self.schema = schema
        self.engine = engine or create_store_engine()
        check_dialect(self.engine.dialect.name)
        self.clock = clock
        self.latency = latency
        self.write_ack_latency = write_ack_latency
        self._rng = random.Random(seed)
        self._metadata = create_metadata()
        self.table = build_records_table(schema, self._metadata)
        self._metadata.create_all(self.engine)
        self._lock = threading.Lock()
        self._seq = 0
        self._log: List[WriteLogEntry] = []

    @property
    def write_seq(self) -> int:
        return self._seq

    @property
    def write_log(self) -> List[WriteLogEntry]:
        with self._lock:
            return list(self._log)

    def _where(self, q: Query, ranges: Optional[RangeMap]):
        """Equality constraints first, then range filters on dyadic columns."""
        check_length(q, self.schema.k)
        check_query(q)
        columns = list(self.table.columns)
        conditions = [columns[i] == token for i, token in enumerate(q) if token is not STAR]
        for col, (lo, hi) in (ranges or {}).items():
            if q[col] is not STAR:
                raise UnsupportedTokenError(f"column {col} has both a value and a range")
            width = self.schema.columns[col].range_width
            if width is None:
                raise RangeError(f"column {self.schema.names[col]!r} is not a range column")
            if not 0 <= lo <= hi < (1 << width):
                raise RangeError(f"range [{lo}, {hi}] outside [0, 2^{width})")
            conditions.append(cast(columns[col], Integer).between(lo, hi))
        return and_(true(), *conditions)

    async def _pause(self, model: LatencyModel) -> None:
        if not model.is_zero:
            await self.clock.sleep(model.sample(self._rng))

    def _fetch(self, condition) -> FrozenSet[Record]:
        with self.engine.connect() as conn:
            return frozenset(tuple(row) for row in conn.execute(select(self.table).where(condition)))

    async def select(self, q: Query, ranges: Optional[RangeMap] = None) -> SelectSnapshot:
        """
        Rows in subspace(q) together with the write sequence number they reflect.

        Args:
            q: Query
            ranges: Optional inclusive integer ranges for dyadic columns

        Returns:
            SelectSnapshot: Matching rows and snapshot sequence number
        """
        condition = self._where(q, ranges)
        await self._pause(self.latency)
        with self._lock:
            return SelectSnapshot(self._fetch(condition), self._seq)

    async def select_any(self, clauses: Sequence[Query]) -> SelectSnapshot:
        """Union of several clause subspaces (a WHERE clause in DNF)."""
        condition = or_(false(), *(self._where(q, None) for q in clauses))
        await self._pause(self.latency)
        with self._lock:
            return SelectSnapshot(self._fetch(condition), self._seq)

    def peek(self, q: Query, ranges: Optional[RangeMap] = None) -> FrozenSet[Record]:
        """Ground truth read for oracles; no latency, no sequence number."""
        condition = self._where(q, ranges)
        with self._lock:
            return self._fetch(condition)

    def rows(self) -> FrozenSet[Record]:
        with self._lock:
            return self._fetch(true())

    def _commit(self, kind: str, clauses: Tuple[Query, ...], ranges: Optional[RangeMap], changed: int) -> WriteResult:
        self._seq += 1
        now = self.clock.now_ms()
        self._log.append(WriteLogEntry(self._seq, now, kind, tuple(clauses), freeze_ranges(ranges), changed))
        return WriteResult(changed, self._seq, now)

    async def delete(self, q: Query, ranges: Optional[RangeMap] = None) -> WriteResult:
        """Remove every row in subspace(q); ``changed`` is the number removed."""
        condition = self._where(q, ranges)
        await self._pause(self.latency)
        with self._lock:
            with self.engine.begin() as conn:
                removed = conn.execute(delete(self.table).where(condition)).rowcount
            result = self._commit("delete", (q,), ranges, removed)
        await self._pause(self.write_ack_latency)
        return result

    async def delete_any(self, clauses: Sequence[Query]) -> WriteResult:
        """Remove the union of several clause subspaces in one statement."""
        clauses = list(clauses)
        condition = or_(false(), *(self._where(q, None) for q in clauses))
        await self._pause(self.latency)
        with self._lock:
            with self.engine.begin() as conn:
                removed = conn.execute(delete(self.table).where(condition)).rowcount
            result = self._commit("delete", tuple(clauses), None, removed)
        await self._pause(self.write_ack_latency)
        return result

    async def insert(self, r: Record) -> WriteResult:
        """Add a record; a duplicate leaves the set unchanged (``inserted`` is False)."""
        r = self._record(r)
        await self._pause(self.latency)
        with self._lock:
            with self.engine.begin() as conn:
                added = conn.execute(self._insert_statement([r])).rowcount
            result = self._commit("insert", (r,), None, added)
        await self._pause(self.write_ack_latency)
        return result

    def load(self, records: Iterable[Record]) -> int:
        """Bulk seed rows before a run; not logged and not sequenced."""
        batch = [self._record(r) for r in records]
        if not batch:
            return 0
        with self._lock:
            with self.engine.begin() as conn:
                return conn.execute(self._insert_statement(batch)).rowcount

    def _record(self, r: Sequence) -> Record:
        check_length(r, self.schema.k)
        return tuple(field_value(v) for v in r)

    def _insert_statement(self, records: List[Record]):
        names = self.schema.names
        return insert_if_absent(self.table, [dict(zip(names, r)) for r in records], self.engine.dialect.name)

    def close(self) -> None:
        self.engine.dispose()
