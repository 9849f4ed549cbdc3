import pytest

from app.cache.memcached import MemcachedCache
from app.core.config import Settings
from app.dependencies.cachedb import close_cachedb, create_cachedb
from app.models.query import STAR
from app.models.version import VersionCompare
from app.services.schemes import GraphScheme, TrimmedScheme


class TestCreateCacheDB:
    """Wiring the wrapper from settings."""

    async def test_defaults(self):
        db = create_cachedb(Settings(_env_file=None))
        try:
            assert isinstance(db.scheme, GraphScheme)
            assert db.table.schema.names == ("user", "game", "date")
            assert db.local_cache is db.global_cache
            assert await db.select((STAR, STAR, STAR)) == frozenset()
        finally:
            await close_cachedb(db)

    async def test_range_columns_and_local_cache(self):
        settings = Settings(_env_file=None, COLUMNS="user, day:range:8", LOCAL_CACHE_ADDR="local",
                            VERSION_COMPARE="exact")
        db = create_cachedb(settings)
        try:
            assert db.table.schema.range_widths == {1: 8}
            assert db.local_cache is not db.global_cache
            assert db.config.version_compare is VersionCompare.EXACT
        finally:
            await close_cachedb(db)

    async def test_whitelist_defines_schema(self, tmp_path):
        path = tmp_path / "played.wl"
        path.write_text("columns user game date\nread * $game $date\nwrite $user $game $date\n")
        db = create_cachedb(Settings(_env_file=None, WHITELIST_PATH=str(path), COLUMNS="ignored"))
        try:
            assert isinstance(db.scheme, TrimmedScheme)
            await db.insert(("ann", "chess", "mon"))
            assert await db.select((STAR, "chess", "mon")) == {("ann", "chess", "mon")}
        finally:
            await close_cachedb(db)

    def test_memcached_backend(self):
        db = create_cachedb(Settings(_env_file=None, CACHE_BACKEND="memcached", GLOBAL_CACHE_ADDR="10.0.0.1:11311"))
        assert isinstance(db.global_cache, MemcachedCache)
        db.table.close()

    def test_unknown_backend(self):
        with pytest.raises(ValueError):
            create_cachedb(Settings(_env_file=None, CACHE_BACKEND="redis"))
