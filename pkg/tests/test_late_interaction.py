import numpy as np
import pytest

from app.core.errors import AggregationError, ConfigurationError, EmptyQueryError, ShapeError
from app.schemas.dense import PassageRef, ScorerKind, SingleVector, TokenMatrix
from app.schemas.text import Document
from app.services.late_interaction import (
    EmbeddingStore,
    dense_search,
    encode_passages,
    encode_query,
    maxp_aggregate,
    maxsim_score,
    single_vector_score,
    toy_embed,
    toy_embed_single,
)
from app.services.text_pipeline import split_passages


def _unit(rng, rows, dim):
    m = rng.standard_normal((rows, dim))
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def _nested_maxsim(q, p):
    total = 0.0
    for qi in q:
        total += max(float(np.dot(qi, pj)) for pj in p)
    return total


def test_maxsim_matches_nested_loops():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        dim = int(rng.integers(1, 17))
        q = _unit(rng, int(rng.integers(1, 9)), dim)
        p = _unit(rng, int(rng.integers(1, 9)), dim)
        got = maxsim_score(TokenMatrix(id="q", rows=q), TokenMatrix(id="p", rows=p))
        assert got == pytest.approx(_nested_maxsim(q, p), abs=1e-6)


def test_maxsim_invariant_to_passage_row_order():
    rng = np.random.default_rng(12)
    for _ in range(1000):
        dim = int(rng.integers(2, 17))
        q = TokenMatrix(id="q", rows=_unit(rng, int(rng.integers(1, 9)), dim))
        rows = _unit(rng, int(rng.integers(1, 9)), dim)
        shuffled = rows[rng.permutation(len(rows))]
        assert maxsim_score(q, TokenMatrix(id="p", rows=rows)) == pytest.approx(
            maxsim_score(q, TokenMatrix(id="p", rows=shuffled)), abs=1e-9)


def test_maxsim_total_invariant_to_query_row_order():
    rng = np.random.default_rng(17)
    for _ in range(1000):
        dim = int(rng.integers(2, 17))
        rows = _unit(rng, int(rng.integers(1, 9)), dim)
        p = TokenMatrix(id="p", rows=_unit(rng, int(rng.integers(1, 9)), dim))
        shuffled = rows[rng.permutation(len(rows))]
        assert maxsim_score(TokenMatrix(id="q", rows=rows), p) == pytest.approx(
            maxsim_score(TokenMatrix(id="q", rows=shuffled), p), abs=1e-9)


def test_maxsim_never_drops_when_rows_are_appended():
    rng = np.random.default_rng(13)
    for _ in range(1000):
        dim = int(rng.integers(2, 17))
        q = TokenMatrix(id="q", rows=_unit(rng, int(rng.integers(1, 9)), dim))
        rows = _unit(rng, int(rng.integers(1, 8)), dim)
        extended = np.vstack([rows, _unit(rng, 1, dim)])
        assert maxsim_score(q, TokenMatrix(id="p", rows=extended)) >= maxsim_score(q, TokenMatrix(id="p", rows=rows)) - 1e-12


def test_maxsim_bounded_by_query_length():
    rng = np.random.default_rng(14)
    q = TokenMatrix(id="q", rows=_unit(rng, 5, 8))
    assert maxsim_score(q, q) == pytest.approx(5.0)
    p = TokenMatrix(id="p", rows=_unit(rng, 3, 8))
    assert -5.0 - 1e-9 <= maxsim_score(q, p) <= 5.0 + 1e-9


def test_dimension_mismatch():
    rng = np.random.default_rng(15)
    with pytest.raises(ShapeError):
        maxsim_score(TokenMatrix(id="q", rows=_unit(rng, 2, 4)), TokenMatrix(id="p", rows=_unit(rng, 2, 5)))
    with pytest.raises(ShapeError):
        single_vector_score(SingleVector(id="q", vector=_unit(rng, 1, 4)[0]), SingleVector(id="p", vector=_unit(rng, 1, 5)[0]))


def test_embeddings_must_be_unit_norm():
    with pytest.raises(ValueError):
        TokenMatrix(id="q", rows=[[1.0, 1.0]])


def test_single_vector_is_inner_product():
    a = SingleVector(id="a", vector=[0.6, 0.8])
    b = SingleVector(id="b", vector=[1.0, 0.0])
    assert single_vector_score(a, b) == pytest.approx(0.6)


def test_maxp():
    assert maxp_aggregate([(0, 0.2), (1, 0.9), (2, 0.4)]) == 0.9
    with pytest.raises(AggregationError):
        maxp_aggregate([])


def test_single_vector_is_symmetric():
    rng = np.random.default_rng(18)
    for _ in range(200):
        a, b = _unit(rng, 2, int(rng.integers(2, 33)))
        u, v = SingleVector(id="a", vector=a), SingleVector(id="b", vector=b)
        assert single_vector_score(u, v) == pytest.approx(single_vector_score(v, u), abs=1e-12)


def test_maxp_unchanged_by_passages_at_or_below_the_max():
    rng = np.random.default_rng(19)
    for _ in range(200):
        scores = [(i, float(s)) for i, s in enumerate(rng.uniform(-1, 1, int(rng.integers(1, 10))))]
        best = maxp_aggregate(scores)
        extra = (len(scores), best - float(rng.uniform(0, 1)))
        assert maxp_aggregate(scores + [extra]) == best
        assert maxp_aggregate(scores + [(len(scores), best)]) == best


def test_toy_embed_is_deterministic():
    a = toy_embed(["alpha", "beta", "alpha"], 16, 3)
    b = toy_embed(["alpha", "beta", "alpha"], 16, 3)
    assert np.array_equal(a.rows, b.rows)
    assert np.array_equal(a.rows[0], a.rows[2])
    assert not np.array_equal(a.rows, toy_embed(["alpha", "beta", "alpha"], 16, 4).rows)
    assert np.allclose(np.linalg.norm(a.rows, axis=1), 1.0)


def test_toy_embed_empty():
    with pytest.raises(EmptyQueryError):
        toy_embed([], 8, 1)


def test_toy_embed_single_is_normalized_mean():
    rows = toy_embed(["x", "y"], 8, 1).rows
    expected = rows.mean(axis=0) / np.linalg.norm(rows.mean(axis=0))
    assert np.allclose(toy_embed_single(["x", "y"], 8, 1).vector, expected)


def _docs():
    long_text = " ".join(f"filler{i}" for i in range(300)) + " needle"
    return [
        Document(id="long", lang="de", text=long_text),
        Document(id="short", lang="de", text="haystack only"),
        Document(id="exact", lang="de", text="needle"),
    ]


def _passages():
    return [p for doc in _docs() for p in split_passages(doc, 180, 90)]


def test_document_score_is_max_over_passages():
    passages = _passages()
    store = encode_passages(passages, ScorerKind.MAXSIM, 16, 5)
    query = encode_query(["needle"], ScorerKind.MAXSIM, 16, 5)
    results = dict(dense_search(query, store, ScorerKind.MAXSIM, 10))
    for doc_id in ("long", "short", "exact"):
        per_passage = [
            (p.index, maxsim_score(query, toy_embed(p.tokens, 16, 5, p.id)))
            for p in passages if p.doc_id == doc_id
        ]
        assert results[doc_id] == pytest.approx(maxp_aggregate(per_passage), abs=1e-9)
    assert results["exact"] == pytest.approx(1.0)
    assert results["long"] == pytest.approx(1.0)


def test_dense_search_ranks_and_truncates():
    store = encode_passages(_passages(), ScorerKind.SINGLE_VECTOR, 16, 5)
    query = encode_query(["needle"], ScorerKind.SINGLE_VECTOR, 16, 5)
    ranked = dense_search(query, store, ScorerKind.SINGLE_VECTOR, 2)
    assert len(ranked) == 2
    assert ranked[0][0] == "exact"
    assert ranked[0][1] >= ranked[1][1]


def test_dense_search_ties_break_by_doc_id():
    entries = {f"{d}#0": TokenMatrix(id=f"{d}#0", rows=[[1.0]]) for d in ("b", "c", "a")}
    refs = {pid: PassageRef(passage_id=pid, doc_id=pid[0], passage_index=0) for pid in entries}
    store = EmbeddingStore(1, ScorerKind.MAXSIM, entries, refs)
    query = TokenMatrix(id="q", rows=[[1.0]])
    assert dense_search(query, store, ScorerKind.MAXSIM, 3) == [("a", 1.0), ("b", 1.0), ("c", 1.0)]


def test_dense_search_kind_mismatch():
    store = encode_passages(_passages(), ScorerKind.MAXSIM, 8, 1)
    query = encode_query(["needle"], ScorerKind.SINGLE_VECTOR, 8, 1)
    with pytest.raises(ConfigurationError):
        dense_search(query, store, ScorerKind.SINGLE_VECTOR, 5)


def test_store_rejects_unmapped_passage():
    emb = toy_embed(["x"], 4, 1, "d#0")
    with pytest.raises(ConfigurationError):
        EmbeddingStore(4, ScorerKind.MAXSIM, {"d#0": emb}, {})
    store = EmbeddingStore(4, ScorerKind.MAXSIM, {"d#0": emb}, {"d#0": PassageRef(passage_id="d#0", doc_id="d", passage_index=0)})
    assert store.doc_ids == ("d",)


def test_empty_store():
    store = encode_passages([], ScorerKind.MAXSIM, 8, 1)
    assert len(store) == 0
    assert dense_search(encode_query(["x"], ScorerKind.MAXSIM, 8, 1), store, ScorerKind.MAXSIM, 5) == []


def test_maxsim_basis_vectors():
    e = np.eye(4)
    assert maxsim_score(TokenMatrix(id="q", rows=e[:1]), TokenMatrix(id="p", rows=e[:2])) == 1.0
    assert maxsim_score(TokenMatrix(id="q", rows=e[:2]), TokenMatrix(id="p", rows=e[2:])) == 0.0


def test_single_vector_extremes():
    e = np.eye(3)
    assert single_vector_score(SingleVector(id="a", vector=e[0]), SingleVector(id="b", vector=e[1])) == 0.0
    assert single_vector_score(SingleVector(id="a", vector=e[0]), SingleVector(id="b", vector=-e[0])) == -1.0


def test_dense_search_matches_exhaustive_oracle():
    rng = np.random.default_rng(16)
    entries, refs = {}, {}
    counts = {f"doc{i:02d}": 0 for i in range(20)}
    for n in range(50):
        doc_id = f"doc{n % 20:02d}" if n < 20 else f"doc{int(rng.integers(0, 20)):02d}"
        pid = f"{doc_id}#{counts[doc_id]}"
        entries[pid] = TokenMatrix(id=pid, rows=_unit(rng, int(rng.integers(1, 6)), 8))
        refs[pid] = PassageRef(passage_id=pid, doc_id=doc_id, passage_index=counts[doc_id])
        counts[doc_id] += 1
    store = EmbeddingStore(8, ScorerKind.MAXSIM, entries, refs)
    query = TokenMatrix(id="q", rows=_unit(rng, 3, 8))

    best = {}
    for pid, emb in entries.items():
        doc_id = refs[pid].doc_id
        best[doc_id] = max(best.get(doc_id, -np.inf), _nested_maxsim(query.rows, emb.rows))
    expected = sorted(best.items(), key=lambda item: (-item[1], item[0]))[:7]
    got = dense_search(query, store, ScorerKind.MAXSIM, 7)
    assert [d for d, _ in got] == [d for d, _ in expected]
    for (_, a), (_, b) in zip(got, expected):
        assert a == pytest.approx(b, abs=1e-9)


def test_dense_search_shorter_cutoff_is_a_prefix():
    rng = np.random.default_rng(20)
    entries, refs = {}, {}
    for n in range(40):
        doc_id = f"doc{n % 15:02d}"
        pid = f"{doc_id}#{n // 15}"
        entries[pid] = SingleVector(id=pid, vector=_unit(rng, 1, 8)[0])
        refs[pid] = PassageRef(passage_id=pid, doc_id=doc_id, passage_index=n // 15)
    store = EmbeddingStore(8, ScorerKind.SINGLE_VECTOR, entries, refs)
    query = SingleVector(id="q", vector=_unit(rng, 1, 8)[0])
    for k in range(1, 16):
        assert dense_search(query, store, ScorerKind.SINGLE_VECTOR, k) == \
            dense_search(query, store, ScorerKind.SINGLE_VECTOR, k + 1)[:k]
