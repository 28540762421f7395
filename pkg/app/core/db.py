from pathlib import Path
from alembic import command
from alembic.config import Config
from sqlalchemy import Engine, create_engine
from sqlalchemy.orm import sessionmaker, declarative_base

MIGRATIONS_DIR = Path(__file__).resolve().parent.parent / "db" / "migration"

SessionLocal = sessionmaker(autoflush=False, autocommit=False, future=True)
Base = declarative_base()


def sqlite_url(path: Path) -> str:
    return f"sqlite:///{Path(path).resolve()}"


def upgrade_schema(url: str) -> None:
    cfg = Config()
    cfg.set_main_option("script_location", str(MIGRATIONS_DIR))
    cfg.set_main_option("sqlalchemy.url", url)
    command.upgrade(cfg, "head")


def make_engine(path: Path, migrate: bool = False) -> Engine:
    url = sqlite_url(path)
    if migrate:
        upgrade_schema(url)
    return create_engine(url, future=True)
