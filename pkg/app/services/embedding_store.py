import json
import logging
import struct
from pathlib import Path
from typing import Dict

import numpy as np
from pydantic import ValidationError

from app.core.errors import InputFormatError
from app.schemas.dense import PassageRef, ScorerKind, SingleVector, TokenMatrix
from app.services.formats import iter_lines
from app.services.late_interaction import Embedding, EmbeddingStore

logger = logging.getLogger(__name__)

MAGIC = b"MLKE"
FORMAT_VERSION = 1

# magic, version u32, mode u8, dim u32, entry count u64
_HEADER = struct.Struct("<4sIBIQ")
_ID_LEN = struct.Struct("<H")
_ROW_COUNT = struct.Struct("<I")


def write_store(store: EmbeddingStore, path: Path, map_path: Path) -> None:
    path, map_path = Path(path), Path(map_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, FORMAT_VERSION, store.kind.mode_byte, store.dim, len(store)))
        for pid in store.passage_ids:
            emb = store.entries[pid]
            rows = emb.rows if isinstance(emb, TokenMatrix) else emb.vector[None, :]
            raw_id = pid.encode("utf-8")
            f.write(_ID_LEN.pack(len(raw_id)))
            f.write(raw_id)
            f.write(_ROW_COUNT.pack(rows.shape[0]))
            f.write(np.ascontiguousarray(rows, dtype="<f4").tobytes())
    with open(map_path, "w", encoding="utf-8", newline="\n") as f:
        for pid in store.passage_ids:
            ref = store.passage_to_doc[pid]
            f.write(json.dumps({"id": pid, "doc_id": ref.doc_id, "passage_index": ref.passage_index}) + "\n")
    logger.info("wrote %d %s entries to %s", len(store), store.kind.value, path)


def _read_map(map_path: Path) -> Dict[str, PassageRef]:
    refs = {}
    for lineno, line in iter_lines(map_path):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            refs[record["id"]] = PassageRef(
                passage_id=record["id"], doc_id=record["doc_id"], passage_index=record["passage_index"],
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValidationError) as e:
            raise InputFormatError(f"bad passage map record: {e}", str(map_path), lineno)
    return refs


def read_store(path: Path, map_path: Path) -> EmbeddingStore:
    path = Path(path)
    buf = memoryview(path.read_bytes())
    if len(buf) < _HEADER.size:
        raise InputFormatError("truncated header", str(path))
    magic, version, mode, dim, count = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise InputFormatError(f"bad magic {bytes(magic)!r}", str(path))
    if version != FORMAT_VERSION:
        raise InputFormatError(f"unsupported format version {version}", str(path))
    try:
        kind = ScorerKind.from_mode_byte(mode)
    except ValueError as e:
        raise InputFormatError(str(e), str(path))

    entries: Dict[str, Embedding] = {}
    offset = _HEADER.size
    try:
        for _ in range(count):
            (id_len,) = _ID_LEN.unpack_from(buf, offset)
            offset += _ID_LEN.size
            try:
                pid = bytes(buf[offset:offset + id_len]).decode("utf-8")
            except UnicodeDecodeError:
                raise InputFormatError(f"passage id at byte {offset} is not valid UTF-8", str(path))
            offset += id_len
            (rows,) = _ROW_COUNT.unpack_from(buf, offset)
            offset += _ROW_COUNT.size
            n_values = rows * dim
            if offset + 4 * n_values > len(buf):
                raise InputFormatError(f"entry {pid!r} is truncated", str(path))
            values = np.frombuffer(buf, dtype="<f4", count=n_values, offset=offset).reshape(rows, dim)
            offset += 4 * n_values
            if kind is ScorerKind.MAXSIM:
                entries[pid] = TokenMatrix(id=pid, rows=values)
            else:
                if rows != 1:
                    raise InputFormatError(f"single-vector entry {pid!r} has {rows} rows", str(path))
                entries[pid] = SingleVector(id=pid, vector=values[0])
    except struct.error:
        raise InputFormatError("truncated entry header", str(path))
    except ValidationError as e:
        raise InputFormatError(f"invalid embedding: {e}", str(path))
    if offset != len(buf):
        raise InputFormatError(f"{len(buf) - offset} trailing bytes after {count} entries", str(path))

    return EmbeddingStore(dim, kind, entries, _read_map(Path(map_path)))
