from app.core.config import settings
from app.core.database import create_store_engine, dispose_engine

__all__ = [
    "settings",
    "create_store_engine",
    "dispose_engine",
]
