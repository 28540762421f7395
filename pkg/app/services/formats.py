import csv
import json
import logging
from collections import defaultdict
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Type, TypeVar

from pydantic import BaseModel, ValidationError

from app.core.errors import InputFormatError
from app.schemas.evaluation import Run, ScoredDocument
from app.schemas.text import Document, Query

logger = logging.getLogger(__name__)

M = TypeVar("M", bound=BaseModel)


def iter_lines(path: Path) -> Iterator[Tuple[int, str]]:
    """Yield `(lineno, line)` pairs, decoding each line as UTF-8 on its own.

    A line that is not valid UTF-8 raises `InputFormatError` naming the file and line.
    Line terminators are kept.
    """
    with open(path, "rb") as f:
        for lineno, raw in enumerate(f, 1):
            try:
                yield lineno, raw.decode("utf-8")
            except UnicodeDecodeError as e:
                raise InputFormatError(f"invalid UTF-8 at byte {e.start}", str(path), lineno)


def read_jsonl(path: Path, model: Type[M]) -> List[M]:
    records = []
    for lineno, line in iter_lines(path):
        if not line.strip():
            continue
        try:
            records.append(model.model_validate_json(line))
        except ValidationError as e:
            err = e.errors()[0]
            where = ".".join(str(x) for x in err.get("loc", ())) or "record"
            raise InputFormatError(f"{where}: {err['msg']}", str(path), lineno)
    return records


def read_corpus(path: Path, languages: Optional[Iterable[str]] = None) -> List[Document]:
    docs = read_jsonl(path, Document)
    allowed = set(languages or ())
    if allowed:
        for doc in docs:
            if doc.lang not in allowed:
                raise InputFormatError(f"document {doc.id} has undeclared language {doc.lang!r}", str(path))
    return docs


def read_topics(path: Path) -> List[Query]:
    return read_jsonl(path, Query)


def read_qrels(path: Path) -> Dict[str, Dict[str, int]]:
    qrels: Dict[str, Dict[str, int]] = defaultdict(dict)
    for lineno, line in iter_lines(path):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 4:
            raise InputFormatError(f"expected 'qid 0 docid rel', got {len(parts)} columns", str(path), lineno)
        qid, _, doc_id, rel = parts
        try:
            grade = int(rel)
        except ValueError:
            raise InputFormatError(f"relevance {rel!r} is not an integer", str(path), lineno)
        if doc_id in qrels[qid]:
            raise InputFormatError(f"document {doc_id} judged twice for query {qid}", str(path), lineno)
        qrels[qid][doc_id] = grade
    return dict(qrels)


def read_run(path: Path) -> Run:
    rows: Dict[str, List[ScoredDocument]] = {}
    tag = None
    for lineno, line in iter_lines(path):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 6:
            raise InputFormatError(f"expected 'qid Q0 docid rank score tag', got {len(parts)} columns", str(path), lineno)
        qid, _, doc_id, _, score, run_tag = parts
        try:
            rows.setdefault(qid, []).append(ScoredDocument(doc_id=doc_id, score=float(score)))
        except ValueError:
            raise InputFormatError(f"score {score!r} is not a number", str(path), lineno)
        tag = tag or run_tag
    # stable: equal scores keep the order they were emitted in
    rankings = {qid: sorted(docs, key=lambda d: -d.score) for qid, docs in rows.items()}
    try:
        return Run(tag=tag or Path(path).stem, rankings=rankings)
    except ValidationError as e:
        raise InputFormatError(e.errors()[0]["msg"], str(path))


def write_run(run: Run, path: Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for qid, ranking in run.rankings.items():
            for rank, item in enumerate(ranking, 1):
                f.write(f"{qid} Q0 {item.doc_id} {rank} {item.score:.6f} {run.tag}\n")


def _cell(value: Any) -> Any:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def write_csv(path: Path, rows: Sequence[Mapping[str, Any]], fieldnames: Optional[Sequence[str]] = None) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    if fieldnames is None:
        fieldnames = list(rows[0].keys()) if rows else []
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(row.get(k)) for k in fieldnames})


def write_json(path: Path, payload: Any) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    if isinstance(payload, BaseModel):
        payload = payload.model_dump(mode="json")
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
