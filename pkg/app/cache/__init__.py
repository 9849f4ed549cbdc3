from app.cache.base import CacheBackend, CacheStats, validate_key
from app.cache.memory import MemoryCache, ShadowLedger
from app.cache.memcached import MemcachedCache

__all__ = [
    "CacheBackend",
    "CacheStats",
    "validate_key",
    "MemoryCache",
    "ShadowLedger",
    "MemcachedCache",
]
