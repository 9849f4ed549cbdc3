import pytest
from typing import AsyncGenerator
from httpx import ASGITransport, AsyncClient

from app.cache.memcached import MemcachedCache
from app.cache.memory import MemoryCache
from app.core.clock import system_clock
from app.main import app
from app.repositories.table_repository import TableRepository
from app.schemas.cache import CacheConfig
from app.schemas.table import TableSchema
from app.schemas.wrapper import WrapperConfig
from app.services.cachedb import CacheDB
from tests.fake_memcached import FakeMemcachedServer


class ManualClock:
    """A clock tests move by hand; sleeping advances it."""

    def __init__(self, start_ms: float = 1_700_000_000_000.0):
        self.now = start_ms

    def now_ms(self) -> float:
        return self.now

    def advance(self, delta_ms: float) -> None:
        self.now += delta_ms

    async def sleep(self, delay_ms: float) -> None:
        self.now += max(delay_ms, 0.0)


@pytest.fixture
def clock() -> ManualClock:
    return ManualClock()


@pytest.fixture
def schema() -> TableSchema:
    """The three-column table of the running example."""
    return TableSchema.from_names(["user", "game", "date"])


@pytest.fixture
def table(schema: TableSchema, clock: ManualClock):
    repo = TableRepository(schema, clock=clock)
    yield repo
    repo.close()


@pytest.fixture
def global_cache(clock: ManualClock) -> MemoryCache:
    return MemoryCache(CacheConfig(horizon_ms=100.0, ledger=True), clock, name="global")


@pytest.fixture
def local_cache(clock: ManualClock) -> MemoryCache:
    return MemoryCache(CacheConfig(horizon_ms=100.0), clock, name="local")


@pytest.fixture
def wrapper(table, global_cache, local_cache, clock) -> CacheDB:
    return CacheDB(table, global_cache, local_cache, config=WrapperConfig(record_snapshot=True), clock=clock)


@pytest.fixture
async def memcached_server() -> AsyncGenerator[FakeMemcachedServer, None]:
    """A memcached text-protocol server on an ephemeral port."""
    server = await FakeMemcachedServer(MemoryCache(clock=system_clock)).start()
    yield server
    await server.stop()


@pytest.fixture
async def memcached(memcached_server: FakeMemcachedServer) -> AsyncGenerator[MemcachedCache, None]:
    cache = MemcachedCache.from_addr(memcached_server.addr, timeout_s=2.0)
    yield cache
    await cache.close()


@pytest.fixture
async def client(table, global_cache, local_cache) -> AsyncGenerator[AsyncClient, None]:
    """HTTP client against the app with an in-memory wrapper installed."""
    app.state.cachedb = CacheDB(table, global_cache, local_cache)
    async with AsyncClient(transport=ASGITransport(app=app), base_url="http://test") as test_client:
        yield test_client
    app.state.cachedb = None
