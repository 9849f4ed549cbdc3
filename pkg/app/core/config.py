from pydantic_settings import BaseSettings
from typing import Optional
from dotenv import load_dotenv

load_dotenv()


class Settings(BaseSettings):
    """Application settings and configuration."""

    # Service
    SERVICE_NAME: str = "revcache"
    LOG_LEVEL: str = "INFO"

    # Row store (SQLAlchemy URL)
    DATABASE_URL: str = "sqlite+pysqlite:///:memory:"

    # Table schema: comma separated column names, "name:range:w" for dyadic columns
    COLUMNS: str = "user,game,date"

    # Wrapper
    MAX_QUERIES_PER_TIME_STEP: int = 1000
    REVISION_MAX_DEPTH: int = 4
    INCREMENT_ATTEMPTS: int = 3
    VERSION_COMPARE: str = "partial"
    INVALIDATE_ON_NOOP: bool = True
    WHITELIST_PATH: Optional[str] = None

    # Caches
    CACHE_BACKEND: str = "memory"
    GLOBAL_CACHE_ADDR: str = "127.0.0.1:11211"
    # Empty means the local cache aliases the global one
    LOCAL_CACHE_ADDR: str = ""
    CACHE_HORIZON_MS: float = 3_600_000.0
    CACHE_CAPACITY: Optional[int] = None
    CACHE_TIMEOUT_S: float = 2.0

    class Config:
        env_file = ".env"
        case_sensitive = True


settings = Settings()
