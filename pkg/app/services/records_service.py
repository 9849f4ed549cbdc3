import logging
from contextlib import contextmanager
from typing import Dict, Iterator, Mapping, Tuple

from fastapi import HTTPException, status

from app.core.exceptions import (
    CacheBackendError,
    HorizonViolationError,
    InvalidationError,
    RevcacheError,
)
from app.models.query import STAR, Query, Record
from app.schemas.records import (
    DeleteRequest,
    InsertRequest,
    RangeBody,
    SelectRequest,
    SelectResponse,
    WriteResponse,
)
from app.services.cachedb import CacheDB

logger = logging.getLogger(__name__)


@contextmanager
def http_errors() -> Iterator[None]:
    """Map wrapper errors onto HTTP status codes."""
    try:
        yield
    except InvalidationError as e:
        raise HTTPException(
            status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
            detail=f"write applied but invalidation failed: {e}",
        ) from e
    except (CacheBackendError, HorizonViolationError) as e:
        raise HTTPException(status_code=status.HTTP_503_SERVICE_UNAVAILABLE, detail=str(e)) from e
    except (RevcacheError, ValueError) as e:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(e)) from e


class RecordsService:
    """Service layer translating request bodies into wrapper calls."""

    def __init__(self, db: CacheDB):
        self.db = db
        self.schema = db.table.schema

    def _index(self, name: str) -> int:
        try:
            return self.schema.index_of(name)
        except KeyError:
            raise HTTPException(
                status_code=status.HTTP_400_BAD_REQUEST,
                detail=f"unknown column {name!r}; columns are {list(self.schema.names)}",
            ) from None

    def _query(self, where: Mapping[str, str], ranges: Mapping[str, RangeBody]) -> Tuple[Query, Dict[int, Tuple[int, int]]]:
        tokens = [STAR] * self.schema.k
        for name, value in where.items():
            tokens[self._index(name)] = value
        bounds = {self._index(name): (r.lo, r.hi) for name, r in ranges.items()}
        return tuple(tokens), bounds

    def _record(self, record: Mapping[str, str]) -> Record:
        missing = [n for n in self.schema.names if n not in record]
        unknown = [n for n in record if n not in self.schema.names]
        if missing or unknown:
            raise HTTPException(
                status_code=status.HTTP_400_BAD_REQUEST,
                detail=f"record must give exactly the columns {list(self.schema.names)}",
            )
        return tuple(record[n] for n in self.schema.names)

    async def select(self, body: SelectRequest) -> SelectResponse:
        """
        Run a select through the cache.

        Raises:
            HTTPException: 400 for malformed queries, 503 when the global cache is unusable
        """
        q, ranges = self._query(body.where, body.ranges)
        with http_errors():
            outcome = await self.db.fetch(q, body.extra, ranges or None)
        rows = [list(r) for r in outcome.sorted_rows()]
        return SelectResponse(
            rows=rows,
            row_count=len(rows),
            served_from=outcome.served_from.value,
            version=outcome.version,
        )

    async def insert(self, body: InsertRequest) -> WriteResponse:
        r = self._record(body.record)
        with http_errors():
            outcome = await self.db.insert(r)
        return WriteResponse(changed=outcome.changed, invalidated=outcome.invalidated, increments=outcome.increments)

    async def delete(self, body: DeleteRequest) -> WriteResponse:
        q, ranges = self._query(body.where, body.ranges)
        with http_errors():
            outcome = await self.db.delete(q, ranges or None)
        if outcome.changed:
            logger.info("deleted %d rows matching %s", outcome.changed, body.where)
        return WriteResponse(changed=outcome.changed, invalidated=outcome.invalidated, increments=outcome.increments)
