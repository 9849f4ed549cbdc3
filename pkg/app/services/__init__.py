from app.services.cachedb import CacheDB
from app.services.records_service import RecordsService

__all__ = [
    "CacheDB",
    "RecordsService",
]
