import argparse
import logging
from pathlib import Path

from app.cli.common import EXIT_OK
from app.core.config import PipelineConfig, RetrievalMode
from app.core.deps import LEDGER_FILE, PASSAGE_MAP_FILE, SPARSE_INDEX_FILE, STORE_FILE, write_manifest
from app.schemas.dense import ScorerKind
from app.schemas.sparse import BM25Params
from app.schemas.timing import Stage
from app.services.embedding_store import write_store
from app.services.formats import read_corpus, write_json
from app.services.late_interaction import encode_passages
from app.services.sparse_retrieval import (
    analyze_documents,
    build_index_from_tokens,
    collection_stats_by_language,
    ensure_unique_ids,
    language_profiles,
    save_index,
)
from app.services.text_pipeline import split_documents
from app.services.timing import StageClock

logger = logging.getLogger(__name__)


def cmd_index(config: PipelineConfig) -> int:
    """
    Builds the collection index and records how long each stage took.

    In ``bm25`` mode every document is analyzed and the inverted index is stored
    in SQLite. In ``maxsim`` and ``single-vector`` modes documents are cut into
    overlapping passages, encoded with the toy encoder and written as an MLKE store.
    Stage times go to ``ledger.json``; everything needed to query the index goes
    to ``manifest.json``.

    **Params**:
    - **corpus (Path)**: JSONL corpus, one document per line.
    - **index_dir (Path)**: target directory; defaults to ``<output>/index``.
    - **mode (RetrievalMode)**: bm25, maxsim or single-vector.
    - **window, stride, dim, seed**: passage and encoder settings for dense modes.
    - **translation_seconds (float)**: externally measured translation time for the ledger.

    **Returns**:
    - **int**: exit code, 0 on success.

    **Raises**:
        InputFormatError: a corpus line does not parse; the message names the line.
        DuplicateDocumentError: two documents share an id.
    """
    config.require("corpus")
    index_dir = config.index_dir or config.output / "index"
    analyzer = config.analyzer_config()
    clock = StageClock()

    with clock.stage(Stage.TEXT_PROCESSING):
        docs = read_corpus(config.corpus, config.languages)
        ensure_unique_ids(docs)

    manifest = {
        "mode": config.mode.value,
        "analyzer": analyzer.model_dump(mode="json"),
        "seed": config.seed,
        "doc_count": len(docs),
    }
    if config.mode is RetrievalMode.BM25:
        with clock.stage(Stage.TEXT_PROCESSING):
            tokens = analyze_documents(docs, analyzer, config.threads)
        with clock.stage(Stage.INDEX_BUILD):
            index = build_index_from_tokens(docs, tokens, BM25Params(k1=config.k1, b=config.b))
            save_index(index, Path(index_dir) / SPARSE_INDEX_FILE)
        profiles = collection_stats_by_language(index)
        manifest.update(k1=config.k1, b=config.b)
    else:
        kind = ScorerKind(config.mode.value)
        with clock.stage(Stage.TEXT_PROCESSING):
            passages = split_documents(docs, config.window, config.stride, analyzer, config.threads)
        with clock.stage(Stage.REPRESENTATION):
            store = encode_passages((p for per_doc in passages for p in per_doc), kind, config.dim, config.seed)
        with clock.stage(Stage.INDEX_BUILD):
            write_store(store, Path(index_dir) / STORE_FILE, Path(index_dir) / PASSAGE_MAP_FILE)
        profiles = language_profiles(
            (doc.lang, per_doc[-1].token_span[1] if per_doc else 0) for doc, per_doc in zip(docs, passages)
        )
        manifest.update(window=config.window, stride=config.stride, dim=config.dim, passage_count=len(store))

    for profile in profiles:
        logger.info("%s: %d documents, mean analyzed length %.1f", profile.lang, profile.doc_count, profile.mean_length)
    manifest["languages"] = [p.model_dump() for p in profiles]
    write_manifest(index_dir, manifest)

    ledger = clock.ledger(config.system or config.mode.value, len(docs), config.translation_seconds)
    write_json(Path(index_dir) / LEDGER_FILE, ledger)
    logger.info(
        "indexed %d documents in %.2fs (%s per document)",
        ledger.doc_count, ledger.total,
        "n/a" if ledger.per_document is None else f"{ledger.per_document:.4f}s",
    )
    return EXIT_OK


def register(subparsers: argparse._SubParsersAction, parents) -> None:
    p = subparsers.add_parser("index", parents=parents, help="build a sparse index or an embedding store")
    p.add_argument("--corpus", type=Path)
    p.add_argument("--index-dir", dest="index_dir", type=Path)
    p.add_argument("--mode", choices=[m.value for m in RetrievalMode])
    p.add_argument("--window", type=int)
    p.add_argument("--stride", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--k1", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--languages", nargs="+", help="accepted document languages; others are an input error")
    p.add_argument("--stem-languages", dest="stem_languages", nargs="+")
    p.add_argument("--system", help="configuration name written into the ledger")
    p.add_argument("--translation-seconds", dest="translation_seconds", type=float)
    p.set_defaults(handler=cmd_index)
