from app.dependencies.cachedb import get_cachedb, get_records_service

__all__ = [
    "get_cachedb",
    "get_records_service",
]
