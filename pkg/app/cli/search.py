import argparse
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, List, Optional, Tuple

from app.cli.common import EXIT_OK, output_path
from app.core.config import PipelineConfig, QueryFields, RetrievalMode
from app.core.deps import PASSAGE_MAP_FILE, SPARSE_INDEX_FILE, STORE_FILE, read_manifest
from app.core.errors import EmptyQueryError, InputFormatError
from app.schemas.dense import ScorerKind
from app.schemas.evaluation import Run, ScoredDocument
from app.schemas.text import AnalyzerConfig, Query
from app.services.embedding_store import read_store
from app.services.formats import read_topics, write_run
from app.services.late_interaction import dense_search, encode_query
from app.services.sparse_retrieval import load_index, sparse_search
from app.services.text_pipeline import analyze_query, load_stop_structure, strip_with

logger = logging.getLogger(__name__)

Ranking = List[Tuple[str, float]]


def _searcher(config: PipelineConfig, index_dir: Path, manifest: dict) -> Callable[[Query], Ranking]:
    mode = RetrievalMode(manifest["mode"])
    analyzer = AnalyzerConfig.model_validate(manifest["analyzer"])
    fields = config.query_fields.value
    if mode is RetrievalMode.BM25:
        index = load_index(index_dir / SPARSE_INDEX_FILE)
        return lambda query: sparse_search(query, index, config.k, analyzer, fields)

    kind = ScorerKind(mode.value)
    store = read_store(index_dir / STORE_FILE, index_dir / PASSAGE_MAP_FILE)
    # queries must share the encoder settings the store was built with
    dim, seed = manifest["dim"], manifest["seed"]

    def search(query: Query) -> Ranking:
        terms = analyze_query(query, analyzer, fields)
        return dense_search(encode_query(terms, kind, dim, seed, query.id), store, kind, config.k)

    return search


def cmd_search(config: PipelineConfig) -> int:
    """
    Runs every topic against a built index and writes a TREC run file.

    Stop structure ("Find documents on ...") is stripped from each topic first.
    A topic left with no terms is skipped with a warning and does not appear in the run.
    Results are deterministic: ties are broken by document id.

    **Params**:
    - **topics (Path)**: JSONL topics.
    - **index_dir (Path)**: index built by ``index``; defaults to ``<output>/index``.
    - **k (int)**: ranking depth per topic.
    - **query_fields (QueryFields)**: title or title+description.
    - **run (Path)**: where to write the run; defaults to ``<output>/run.trec``.

    **Returns**:
    - **int**: exit code, 0 on success.

    **Raises**:
        ConfigurationError: the index directory is missing or incomplete.
    """
    config.require("topics")
    index_dir = Path(config.index_dir or config.output / "index")
    manifest = read_manifest(index_dir)
    search = _searcher(config, index_dir, manifest)
    stop = load_stop_structure(config.stop_structure)

    topics = read_topics(config.topics)
    seen = set()
    for topic in topics:
        if topic.id in seen:
            raise InputFormatError(f"topic {topic.id} appears twice", str(config.topics))
        seen.add(topic.id)

    def work(topic: Query) -> Tuple[Query, Optional[Ranking], Optional[str]]:
        try:
            return topic, search(strip_with(topic, stop)), None
        except EmptyQueryError as e:
            return topic, None, str(e)

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(work, topics))
    else:
        results = [work(topic) for topic in topics]

    rankings = {}
    for topic, ranking, problem in results:
        if ranking is None:
            logger.warning("topic %s skipped: %s", topic.id, problem)
            continue
        rankings[topic.id] = [ScoredDocument(doc_id=doc_id, score=score) for doc_id, score in ranking]

    run = Run(tag=config.run_tag or manifest["mode"], rankings=rankings)
    target = config.run or output_path(config, "run.trec")
    write_run(run, target)
    logger.info("wrote %d of %d topics to %s", len(rankings), len(topics), target)
    return EXIT_OK


def register(subparsers: argparse._SubParsersAction, parents) -> None:
    p = subparsers.add_parser("search", parents=parents, help="run topics against an index")
    p.add_argument("--topics", type=Path)
    p.add_argument("--index-dir", dest="index_dir", type=Path)
    p.add_argument("--k", type=int, help="ranking depth per topic")
    p.add_argument("--query-fields", dest="query_fields", choices=[f.value for f in QueryFields])
    p.add_argument("--stop-structure", dest="stop_structure", type=Path)
    p.add_argument("--run", type=Path, help="output run file")
    p.add_argument("--run-tag", dest="run_tag")
    p.set_defaults(handler=cmd_search)
