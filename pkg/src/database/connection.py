from contextlib import contextmanager
from pathlib import Path
from typing import Optional, Union

from sqlalchemy import create_engine, event
from sqlalchemy.engine import Engine
from sqlalchemy.orm import Session, sessionmaker

from src.database.models import Base
from src.utils.config import DATABASE_FULL_PATH
from src.utils.logger import get_logger

logger = get_logger(__name__)

engine: Optional[Engine] = None
SessionLocal = sessionmaker(autocommit=False, autoflush=False)


def init_engine(path: Optional[Union[str, Path]] = None) -> Engine:
    """
    Bind the session factory to a SQLite run store.

    A path different from the current binding replaces the engine.
    """
    global engine
    target = Path(path) if path is not None else Path(DATABASE_FULL_PATH)
    database_url = f"sqlite:///{target}"
    if engine is not None and str(engine.url) == database_url:
        return engine

    target.parent.mkdir(parents=True, exist_ok=True)
    if engine is not None:
        engine.dispose()

    engine = create_engine(
        database_url,
        echo=False,
        connect_args={"check_same_thread": False},
    )

    @event.listens_for(engine, "connect")
    def set_sqlite_pragma(dbapi_connection, connection_record):
        cursor = dbapi_connection.cursor()
        cursor.execute("PRAGMA journal_mode=WAL")
        cursor.execute("PRAGMA synchronous=NORMAL")
        cursor.close()

    SessionLocal.configure(bind=engine)
    return engine


def init_database(path: Optional[Union[str, Path]] = None) -> Engine:
    try:
        bound = init_engine(path)
        Base.metadata.create_all(bind=bound)
        logger.info("Run store initialized ({})", bound.url.render_as_string(hide_password=True))
        return bound
    except Exception as e:
        logger.error(f"Failed to initialize run store: {e}")
        raise


@contextmanager
def get_db() -> Session:
    """
    Usage:
        with get_db() as db:
            db.query(ForecastRun).all()
    """
    if engine is None:
        init_database()
    db = SessionLocal()
    try:
        yield db
        db.commit()
    except Exception as e:
        db.rollback()
        logger.error(f"Database error: {e}")
        raise
    finally:
        db.close()
