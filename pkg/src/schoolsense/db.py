from sqlalchemy import create_engine, event, inspect
from sqlalchemy.engine import Engine
from sqlalchemy.orm import DeclarativeBase, sessionmaker


class Base(DeclarativeBase):
    pass


def _sqlite_pragmas(dbapi_connection, _record) -> None:
    cursor = dbapi_connection.cursor()
    cursor.execute("PRAGMA journal_mode = WAL")
    cursor.execute("PRAGMA synchronous = NORMAL")
    cursor.execute("PRAGMA cache_size = -64000")
    cursor.close()


def create_db_engine(database_url: str) -> Engine:
    engine = create_engine(database_url, pool_pre_ping=True, future=True)
    if engine.dialect.name == "sqlite":
        event.listen(engine, "connect", _sqlite_pragmas)
    return engine


def create_session_factory(database_url: str) -> sessionmaker:
    engine = create_db_engine(database_url)
    return sessionmaker(bind=engine, autoflush=False, autocommit=False, future=True)


def ensure_schema(base_class: type[DeclarativeBase], engine: Engine) -> None:
    """Create missing tables; recreate a table whose columns lag behind the model.

    Summaries are derived data (replayable from the raw log), so dropping a stale table
    is acceptable here.
    """
    inspector = inspect(engine)
    existing_tables = set(inspector.get_table_names())
    for name, table in base_class.metadata.tables.items():
        if name not in existing_tables:
            table.create(engine)
            continue
        existing_columns = {col["name"] for col in inspector.get_columns(name)}
        if not {c.name for c in table.columns}.issubset(existing_columns):
            table.drop(engine)
            table.create(engine)
