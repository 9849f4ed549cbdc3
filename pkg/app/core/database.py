from sqlalchemy import Engine, MetaData, create_engine
from sqlalchemy.pool import StaticPool
from app.core.config import settings


def create_store_engine(url: str = None, echo: bool = False) -> Engine:
    """
    Create the engine backing a row store.

    In-memory SQLite databases live inside a single connection, so the engine
    pins one connection (StaticPool) and allows it to be used from any
    thread; the table repository serializes access itself.

    Args:
        url: SQLAlchemy database URL (defaults to settings.DATABASE_URL)
        echo: Log emitted SQL

    Returns:
        Engine: SQLAlchemy engine
    """
    url = url or settings.DATABASE_URL
    if url.startswith("sqlite") and (":memory:" in url or url.endswith("://")):
        return create_engine(
            url,
            echo=echo,
            poolclass=StaticPool,
            connect_args={"check_same_thread": False},
        )
    return create_engine(url, echo=echo, pool_pre_ping=True)


def create_metadata() -> MetaData:
    """Fresh metadata; every table repository owns its own."""
    return MetaData()


def dispose_engine(engine: Engine) -> None:
    """Close database connections."""
    engine.dispose()
