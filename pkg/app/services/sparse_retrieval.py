import logging
import math
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from types import MappingProxyType
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

from sqlalchemy import insert, select
from sqlalchemy.orm import Session
from tqdm import tqdm

from app.core.config import settings
from app.core.db import make_engine
from app.core.deps import get_db
from app.core.errors import ConfigurationError, DuplicateDocumentError, UnknownDocumentError
from app.models import IndexedDocument, IndexSetting, Posting
from app.schemas.sparse import BM25Params, CollectionStats, LanguageProfile
from app.schemas.text import AnalyzerConfig, Document, Query
from app.services.text_pipeline import DEFAULT_CONFIG, analyze, analyze_query, source_text

logger = logging.getLogger(__name__)

PostingList = Tuple[Tuple[str, int], ...]

INSERT_CHUNK = 50_000


class InvertedIndex:
    """Term postings plus collection statistics; read-only once built."""

    def __init__(
        self,
        postings: Mapping[str, Sequence[Tuple[str, int]]],
        doc_lens: Mapping[str, int],
        params: BM25Params,
        doc_langs: Mapping[str, str] | None = None,
    ):
        self._postings: Dict[str, PostingList] = {
            term: tuple(sorted(plist)) for term, plist in postings.items()
        }
        self._tf: Dict[str, Dict[str, int]] = {
            term: dict(plist) for term, plist in self._postings.items()
        }
        n = len(doc_lens)
        self.stats = CollectionStats(
            doc_count=n,
            avg_doc_len=(sum(doc_lens.values()) / n) if n else 0.0,
            doc_lens=dict(doc_lens),
            df={term: len(plist) for term, plist in self._postings.items()},
        )
        self.params = params
        self.doc_langs = MappingProxyType(dict(doc_langs or {}))

    @property
    def postings(self) -> Mapping[str, PostingList]:
        return MappingProxyType(self._postings)

    def tf(self, term: str, doc_id: str) -> int:
        return self._tf.get(term, {}).get(doc_id, 0)

    def idf(self, term: str) -> float:
        n = self.stats.doc_count
        df = self.stats.df.get(term, 0)
        return math.log(1.0 + (n - df + 0.5) / (df + 0.5))

    def term_weight(self, tf: int, doc_len: int) -> float:
        k1, b = self.params.k1, self.params.b
        avgdl = self.stats.avg_doc_len
        norm = 1.0 - b + b * (doc_len / avgdl) if avgdl > 0 else 1.0
        return tf * (k1 + 1.0) / (tf + k1 * norm)


def analyze_documents(docs: Sequence[Document], config: AnalyzerConfig, threads: int) -> List[List[str]]:
    def work(doc: Document) -> List[str]:
        return analyze(source_text(doc), doc.lang, config)

    progress = dict(total=len(docs), desc="Analyzing", disable=not settings.PROGRESS)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            # map keeps input order, so the merge below is deterministic
            return list(tqdm(pool.map(work, docs), **progress))
    return [work(doc) for doc in tqdm(docs, **progress)]


def ensure_unique_ids(docs: Sequence[Document]) -> None:
    seen = set()
    for doc in docs:
        if doc.id in seen:
            raise DuplicateDocumentError(doc.id)
        seen.add(doc.id)


def build_index_from_tokens(
    docs: Sequence[Document],
    tokens: Sequence[Sequence[str]],
    params: BM25Params,
) -> InvertedIndex:
    postings: Dict[str, List[Tuple[str, int]]] = defaultdict(list)
    doc_lens: Dict[str, int] = {}
    doc_langs: Dict[str, str] = {}
    for doc, terms in zip(docs, tokens):
        if doc.id in doc_lens:
            raise DuplicateDocumentError(doc.id)
        doc_lens[doc.id] = len(terms)
        doc_langs[doc.id] = doc.lang
        for term, tf in Counter(terms).items():
            postings[term].append((doc.id, tf))
    return InvertedIndex(postings, doc_lens, params, doc_langs)


def build_index(
    docs: Sequence[Document],
    config: AnalyzerConfig = DEFAULT_CONFIG,
    params: BM25Params = BM25Params(),
    threads: int = 1,
) -> InvertedIndex:
    ensure_unique_ids(docs)
    index = build_index_from_tokens(docs, analyze_documents(docs, config, threads), params)
    logger.info("indexed %d documents, %d terms", index.stats.doc_count, len(index.stats.df))
    return index


def bm25_score(query_terms: Sequence[str], doc_id: str, index: InvertedIndex) -> float:
    doc_len = index.stats.doc_lens.get(doc_id)
    if doc_len is None:
        raise UnknownDocumentError(doc_id)
    score = 0.0
    for term in query_terms:
        tf = index.tf(term, doc_id)
        if tf == 0:
            continue
        score += index.idf(term) * index.term_weight(tf, doc_len)
    return score


def score_candidates(query_terms: Sequence[str], index: InvertedIndex) -> Dict[str, float]:
    scores: Dict[str, float] = defaultdict(float)
    doc_lens = index.stats.doc_lens
    for term in query_terms:
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf(term)
        for doc_id, tf in plist:
            scores[doc_id] += idf * index.term_weight(tf, doc_lens[doc_id])
    return scores


def rank_scores(scores: Mapping[str, float], k: int) -> List[Tuple[str, float]]:
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return ranked[:k]


def sparse_search(
    query: Query,
    index: InvertedIndex,
    k: int,
    config: AnalyzerConfig = DEFAULT_CONFIG,
    fields: str = "title+description",
) -> List[Tuple[str, float]]:
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    terms = analyze_query(query, config, fields)
    return rank_scores(score_candidates(terms, index), k)


def language_profiles(lang_lengths: Iterable[Tuple[str, int]]) -> List[LanguageProfile]:
    lens: Dict[str, List[int]] = defaultdict(list)
    for lang, length in lang_lengths:
        lens[lang].append(length)
    return [
        LanguageProfile(lang=lang, doc_count=len(v), mean_length=sum(v) / len(v))
        for lang, v in sorted(lens.items())
    ]


def _save(db: Session, index: InvertedIndex) -> None:
    db.add_all([
        IndexSetting(key="k1", value=repr(index.params.k1)),
        IndexSetting(key="b", value=repr(index.params.b)),
    ])
    if index.stats.doc_count:
        db.execute(insert(IndexedDocument), [
            {"id": doc_id, "lang": index.doc_langs.get(doc_id, "und"), "length": length}
            for doc_id, length in index.stats.doc_lens.items()
        ])
    rows = [
        {"term": term, "doc_id": doc_id, "tf": tf}
        for term, plist in index.postings.items()
        for doc_id, tf in plist
    ]
    for i in range(0, len(rows), INSERT_CHUNK):
        db.execute(insert(Posting), rows[i:i + INSERT_CHUNK])
    db.commit()


def save_index(index: InvertedIndex, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.exists():
        path.unlink()
    engine = make_engine(path, migrate=True)
    try:
        with get_db(engine) as db:
            _save(db, index)
    finally:
        engine.dispose()
    logger.info("wrote sparse index to %s", path)


def load_index(path: Path) -> InvertedIndex:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"sparse index {path} does not exist")
    engine = make_engine(path)
    try:
        with get_db(engine) as db:
            params = dict(db.execute(select(IndexSetting.key, IndexSetting.value)).all())
            docs = db.execute(select(IndexedDocument.id, IndexedDocument.lang, IndexedDocument.length)).all()
            postings: Dict[str, List[Tuple[str, int]]] = defaultdict(list)
            for term, doc_id, tf in db.execute(select(Posting.term, Posting.doc_id, Posting.tf)):
                postings[term].append((doc_id, tf))
    finally:
        engine.dispose()
    return InvertedIndex(
        postings,
        {doc_id: length for doc_id, _, length in docs},
        BM25Params(k1=float(params["k1"]), b=float(params["b"])),
        {doc_id: lang for doc_id, lang, _ in docs},
    )


def collection_stats_by_language(index: InvertedIndex) -> List[LanguageProfile]:
    return language_profiles((index.doc_langs.get(doc_id, "und"), n) for doc_id, n in index.stats.doc_lens.items())
