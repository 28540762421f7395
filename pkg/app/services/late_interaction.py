"""Late-interaction (MaxSim) and single-vector scoring with MaxP document aggregation.

Scoring is exhaustive: every passage in the store is scored for every query,
so results can be checked against brute-force oracles.
"""

import hashlib
import logging
from functools import lru_cache
from types import MappingProxyType
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

import numpy as np

from app.core.errors import AggregationError, ConfigurationError, EmptyQueryError, ShapeError
from app.schemas.dense import PassageRef, ScorerKind, SingleVector, TokenMatrix
from app.schemas.text import Passage

logger = logging.getLogger(__name__)

Embedding = TokenMatrix | SingleVector


def maxsim_score(query: TokenMatrix, passage: TokenMatrix) -> float:
    if query.dim != passage.dim:
        raise ShapeError(f"query dimension {query.dim} does not match passage dimension {passage.dim}")
    sims = query.rows @ passage.rows.T
    return float(sims.max(axis=1).sum())


def single_vector_score(query: SingleVector, passage: SingleVector) -> float:
    if query.dim != passage.dim:
        raise ShapeError(f"query dimension {query.dim} does not match passage dimension {passage.dim}")
    return float(query.vector @ passage.vector)


def maxp_aggregate(passage_scores: Sequence[Tuple[int, float]]) -> float:
    if not passage_scores:
        raise AggregationError("cannot aggregate a document without passages")
    return max(score for _, score in passage_scores)


@lru_cache(maxsize=1 << 18)
def _token_vector(token: str, dim: int, seed: int) -> np.ndarray:
    digest = hashlib.blake2b(f"{seed}\x1f{token}".encode("utf-8"), digest_size=8).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    v.setflags(write=False)
    return v


def toy_embed(tokens: Sequence[str], dim: int, seed: int, id: str = "query") -> TokenMatrix:
    """Deterministic stand-in encoder: each token maps to a pseudo-random unit vector of hash(token, seed)."""
    if dim < 2:
        raise ShapeError(f"embedding dimension must be at least 2, got {dim}")
    if not tokens:
        raise EmptyQueryError(f"{id}: cannot embed an empty token sequence")
    return TokenMatrix(id=id, rows=np.vstack([_token_vector(t, dim, seed) for t in tokens]))


def toy_embed_single(tokens: Sequence[str], dim: int, seed: int, id: str = "query") -> SingleVector:
    rows = toy_embed(tokens, dim, seed, id).rows
    mean = rows.mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm < 1e-12:
        raise ShapeError(f"{id}: token vectors cancel out, no single-vector representation")
    return SingleVector(id=id, vector=mean / norm)


class EmbeddingStore:
    """Per-passage embeddings with their document mapping; read-only after construction."""

    def __init__(self, dim: int, kind: ScorerKind, entries: Mapping[str, Embedding], passage_to_doc: Mapping[str, PassageRef]):
        expected = TokenMatrix if kind is ScorerKind.MAXSIM else SingleVector
        for pid, emb in entries.items():
            if not isinstance(emb, expected):
                raise ShapeError(f"{pid}: a {kind.value} store holds {expected.__name__} entries")
            if emb.dim != dim:
                raise ShapeError(f"{pid}: dimension {emb.dim} does not match store dimension {dim}")
            if pid not in passage_to_doc:
                raise ConfigurationError(f"passage {pid} does not resolve to a document")
        self.dim = dim
        self.kind = kind
        self.entries = MappingProxyType(dict(entries))
        self.passage_to_doc = MappingProxyType({pid: passage_to_doc[pid] for pid in entries})

        order = sorted(entries, key=lambda pid: (self.passage_to_doc[pid].doc_id, self.passage_to_doc[pid].passage_index))
        self.passage_ids: Tuple[str, ...] = tuple(order)
        self.doc_ids: Tuple[str, ...] = tuple(sorted({self.passage_to_doc[pid].doc_id for pid in order}))
        doc_pos = {doc_id: i for i, doc_id in enumerate(self.doc_ids)}

        self._passage_doc = np.array([doc_pos[self.passage_to_doc[pid].doc_id] for pid in order], dtype=np.int64)
        self._passage_index = [self.passage_to_doc[pid].passage_index for pid in order]
        # passages are grouped by document, so each document owns one contiguous slice
        bounds = np.flatnonzero(np.diff(self._passage_doc)) + 1 if order else np.array([], dtype=np.int64)
        starts = np.concatenate([[0], bounds]) if order else bounds
        ends = np.concatenate([bounds, [len(order)]]) if order else bounds
        self._doc_slices = list(zip(starts.tolist(), ends.tolist()))

        if kind is ScorerKind.MAXSIM:
            blocks = [entries[pid].rows for pid in order]
            counts = np.array([b.shape[0] for b in blocks], dtype=np.int64)
            self._offsets = np.concatenate([[0], np.cumsum(counts)[:-1]]) if order else counts
        else:
            blocks = [entries[pid].vector[None, :] for pid in order]
            self._offsets = np.arange(len(order), dtype=np.int64)
        self._rows = np.vstack(blocks) if blocks else np.zeros((0, dim))
        self._rows.setflags(write=False)

    def __len__(self) -> int:
        return len(self.passage_ids)

    def passage_scores(self, query: Embedding) -> np.ndarray:
        if query.dim != self.dim:
            raise ShapeError(f"query dimension {query.dim} does not match store dimension {self.dim}")
        if not len(self):
            return np.zeros(0)
        if self.kind is ScorerKind.MAXSIM:
            sims = self._rows @ query.rows.T
            return np.maximum.reduceat(sims, self._offsets, axis=0).sum(axis=1)
        return self._rows @ query.vector

    def document_scores(self, query: Embedding) -> np.ndarray:
        scores = self.passage_scores(query)
        out = np.empty(len(self.doc_ids))
        for i, (start, end) in enumerate(self._doc_slices):
            out[i] = maxp_aggregate(list(zip(self._passage_index[start:end], scores[start:end].tolist())))
        return out


def dense_search(query: Embedding, store: EmbeddingStore, kind: ScorerKind, k: int) -> List[Tuple[str, float]]:
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    if kind is not store.kind:
        raise ConfigurationError(f"{kind.value} search requested on a {store.kind.value} store")
    expected = TokenMatrix if kind is ScorerKind.MAXSIM else SingleVector
    if not isinstance(query, expected):
        raise ShapeError(f"{kind.value} search needs a {expected.__name__} query")
    scores = store.document_scores(query)
    # primary key descending score, ties by ascending doc id (doc_ids are sorted)
    order = np.lexsort((np.arange(len(scores)), -scores))[:k]
    return [(store.doc_ids[i], float(scores[i])) for i in order]


def encode_passages(passages: Iterable[Passage], kind: ScorerKind, dim: int, seed: int) -> EmbeddingStore:
    entries: Dict[str, Embedding] = {}
    refs: Dict[str, PassageRef] = {}
    embed = toy_embed if kind is ScorerKind.MAXSIM else toy_embed_single
    for p in passages:
        pid = p.id
        entries[pid] = embed(p.tokens, dim, seed, pid)
        refs[pid] = PassageRef(passage_id=pid, doc_id=p.doc_id, passage_index=p.index)
    logger.info("encoded %d passages (%s, dim=%d)", len(entries), kind.value, dim)
    return EmbeddingStore(dim, kind, entries, refs)


def encode_query(tokens: Sequence[str], kind: ScorerKind, dim: int, seed: int, id: str = "query") -> Embedding:
    if kind is ScorerKind.MAXSIM:
        return toy_embed(tokens, dim, seed, id)
    return toy_embed_single(tokens, dim, seed, id)
