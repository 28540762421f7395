import json
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator

from sqlalchemy import Engine
from sqlalchemy.orm import Session

from app.core.db import SessionLocal
from app.core.errors import ConfigurationError

MANIFEST_FILE = "manifest.json"
LEDGER_FILE = "ledger.json"
SPARSE_INDEX_FILE = "index.sqlite"
STORE_FILE = "store.mlke"
PASSAGE_MAP_FILE = "passages.jsonl"


@contextmanager
def get_db(engine: Engine) -> Iterator[Session]:
    db = SessionLocal(bind=engine)
    try:
        yield db
    finally:
        db.close()


def write_manifest(index_dir: Path, manifest: Dict[str, Any]) -> None:
    index_dir = Path(index_dir)
    index_dir.mkdir(parents=True, exist_ok=True)
    (index_dir / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_manifest(index_dir: Path) -> Dict[str, Any]:
    path = Path(index_dir) / MANIFEST_FILE
    if not path.exists():
        raise ConfigurationError(f"{index_dir} is not an index directory (no {MANIFEST_FILE})")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"{path} is not a readable index manifest: {e}")
