import logging
from typing import Optional

from fastapi import HTTPException, Request, status

from app.cache.base import CacheBackend
from app.cache.memcached import MemcachedCache
from app.cache.memory import MemoryCache
from app.core.config import Settings
from app.core.database import create_store_engine
from app.models.version import VersionCompare
from app.repositories.table_repository import TableRepository
from app.schemas.cache import CacheConfig
from app.schemas.table import TableSchema
from app.schemas.wrapper import WrapperConfig
from app.services.cachedb import CacheDB
from app.services.planner import load_whitelist
from app.services.records_service import RecordsService
from app.services.schemes import GraphScheme, KeyScheme, TrimmedScheme

logger = logging.getLogger(__name__)


def _cache(settings: Settings, addr: str, name: str) -> CacheBackend:
    if settings.CACHE_BACKEND == "memcached":
        return MemcachedCache.from_addr(addr, timeout_s=settings.CACHE_TIMEOUT_S, name=name)
    if settings.CACHE_BACKEND != "memory":
        raise ValueError(f"unknown CACHE_BACKEND {settings.CACHE_BACKEND!r}; expected memory or memcached")
    config = CacheConfig(horizon_ms=settings.CACHE_HORIZON_MS, capacity=settings.CACHE_CAPACITY)
    return MemoryCache(config, name=name)


def create_cachedb(settings: Settings) -> CacheDB:
    """
    Build the wrapper described by the settings.

    A whitelist, when configured, replaces the full dependency graph and
    also defines the table schema.
    """
    scheme: Optional[KeyScheme] = None
    if settings.WHITELIST_PATH:
        plan = load_whitelist(settings.WHITELIST_PATH).plan()
        schema = plan.schema
        scheme = TrimmedScheme(plan)
    else:
        schema = TableSchema.parse(settings.COLUMNS)
        scheme = GraphScheme(schema)

    global_cache = _cache(settings, settings.GLOBAL_CACHE_ADDR, "global")
    local_cache = None
    if settings.LOCAL_CACHE_ADDR:
        local_cache = _cache(settings, settings.LOCAL_CACHE_ADDR, "local")

    table = TableRepository(
        schema,
        engine=create_store_engine(settings.DATABASE_URL, echo=settings.LOG_LEVEL.upper() == "DEBUG"),
    )
    config = WrapperConfig(
        max_queries_per_time_step=settings.MAX_QUERIES_PER_TIME_STEP,
        revision_max_depth=settings.REVISION_MAX_DEPTH,
        increment_attempts=settings.INCREMENT_ATTEMPTS,
        version_compare=VersionCompare(settings.VERSION_COMPARE),
        invalidate_on_noop=settings.INVALIDATE_ON_NOOP,
    )
    logger.info(
        "wrapper over columns %s with %s cache, scheme %s",
        list(schema.names), settings.CACHE_BACKEND, type(scheme).__name__,
    )
    return CacheDB(table, global_cache, local_cache, scheme=scheme, config=config)


async def close_cachedb(db: CacheDB) -> None:
    await db.global_cache.close()
    if db.local_cache is not db.global_cache:
        await db.local_cache.close()
    db.table.close()


def get_cachedb(request: Request) -> CacheDB:
    db = getattr(request.app.state, "cachedb", None)
    if db is None:
        raise HTTPException(status_code=status.HTTP_503_SERVICE_UNAVAILABLE, detail="wrapper not initialized")
    return db


def get_records_service(request: Request) -> RecordsService:
    return RecordsService(get_cachedb(request))
