import logging
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from app.core.errors import EvaluationError, QrelsCollisionError
from app.schemas.evaluation import ALL_LANGUAGES, MergedQrels, QueryMetrics, Run

logger = logging.getLogger(__name__)

Judgments = Mapping[str, Mapping[str, int]]


def merge_qrels(
    sources: Sequence[Tuple[Optional[str], Judgments]],
    doc_langs: Optional[Mapping[str, str]] = None,
) -> MergedQrels:
    """Union per-language judgments; each judged document keeps the language of its file."""
    doc_langs = doc_langs or {}
    judgments: Dict[str, Dict[str, int]] = {}
    judged_lang: Dict[str, str] = {}
    judged_in: Dict[str, int] = {}
    for source_no, (lang, qrels) in enumerate(sources):
        for qid, docs in qrels.items():
            merged = judgments.setdefault(qid, {})
            for doc_id, grade in docs.items():
                if judged_in.get(doc_id, source_no) != source_no:
                    raise QrelsCollisionError(f"document {doc_id} is judged in more than one qrels file")
                judged_in[doc_id] = source_no
                doc_lang = lang or doc_langs.get(doc_id)
                if doc_lang is None:
                    raise QrelsCollisionError(f"judged document {doc_id} has no language")
                if doc_id in doc_langs and doc_langs[doc_id] != doc_lang:
                    raise QrelsCollisionError(
                        f"document {doc_id} is judged as {doc_lang} but the corpus says {doc_langs[doc_id]}"
                    )
                judged_lang[doc_id] = doc_lang
                merged[doc_id] = grade
    return MergedQrels(judgments=judgments, doc_lang={**doc_langs, **judged_lang})


def _relevant(qrels: Mapping[str, int]) -> set[str]:
    return {d for d, grade in qrels.items() if grade > 0}


def average_precision(ranking: Sequence[str], qrels: Mapping[str, int]) -> float:
    relevant = _relevant(qrels)
    if not relevant:
        raise EvaluationError("average precision needs at least one relevant document")
    hits = 0
    total = 0.0
    for rank, doc_id in enumerate(ranking, 1):
        if doc_id in relevant:
            hits += 1
            total += hits / rank
    return total / len(relevant)


def precision_at(ranking: Sequence[str], qrels: Mapping[str, int], k: int) -> float:
    relevant = _relevant(qrels)
    return sum(1 for doc_id in ranking[:k] if doc_id in relevant) / k


def precision_at_10(ranking: Sequence[str], qrels: Mapping[str, int]) -> float:
    return precision_at(ranking, qrels, 10)


def r_precision(ranking: Sequence[str], qrels: Mapping[str, int]) -> float:
    r = len(_relevant(qrels))
    if r == 0:
        raise EvaluationError("R-precision needs at least one relevant document")
    return precision_at(ranking, qrels, r)


def recall_at_mlir_relevant(
    ranking: Sequence[str],
    qrels: MergedQrels,
    qid: str,
    lang: str = ALL_LANGUAGES,
) -> Optional[float]:
    """Recall of ``lang`` documents within the top R_q of the ranking filtered to ``lang``.

    R_q counts relevant documents of every language. Returns None when the query
    has no relevant document in ``lang``.
    """
    r_q = len(qrels.relevant(qid))
    target = qrels.relevant(qid, lang)
    if r_q == 0 or not target:
        return None
    if lang == ALL_LANGUAGES:
        filtered = ranking
    else:
        filtered = [d for d in ranking if qrels.doc_lang.get(d) == lang]
    hits = sum(1 for d in filtered[:r_q] if d in target)
    return hits / len(target)


def evaluate_run(run: Run, qrels: MergedQrels) -> Tuple[List[QueryMetrics], List[str]]:
    """Per-query metrics over queries in both run and qrels with at least one relevant document."""
    warnings = []
    common = [qid for qid in run.rankings if qid in qrels.judgments]
    if not common:
        raise EvaluationError("run and qrels share no query ids")
    for qid in qrels.judgments:
        if qid not in run.rankings and qrels.relevant(qid):
            warnings.append(f"query {qid} has judgments but no results; excluded")
    languages = qrels.languages
    unknown = {d for qid in common for d in run.doc_ids(qid) if d not in qrels.doc_lang}
    if unknown:
        warnings.append(f"{len(unknown)} retrieved documents have no known language; left out of per-language recall")

    results = []
    for qid in common:
        docs = qrels.judgments[qid]
        if not qrels.relevant(qid):
            warnings.append(f"query {qid} has no relevant documents; excluded")
            continue
        ranking = run.doc_ids(qid)
        results.append(QueryMetrics(
            qid=qid,
            average_precision=average_precision(ranking, docs),
            precision_at_10=precision_at_10(ranking, docs),
            r_precision=r_precision(ranking, docs),
            recall_by_lang={lang: recall_at_mlir_relevant(ranking, qrels, qid, lang) for lang in languages},
        ))
    for w in warnings:
        logger.warning(w)
    return results, warnings


def mean_metrics(per_query: Sequence[QueryMetrics]) -> Dict[str, Optional[float]]:
    if not per_query:
        return {"map": None, "p@10": None, "r_precision": None}
    n = len(per_query)
    out: Dict[str, Optional[float]] = {
        "map": sum(q.average_precision for q in per_query) / n,
        "p@10": sum(q.precision_at_10 for q in per_query) / n,
        "r_precision": sum(q.r_precision for q in per_query) / n,
    }
    langs = sorted({lang for q in per_query for lang in q.recall_by_lang})
    for lang in langs:
        # undefined values are omitted from the mean
        values = [q.recall_by_lang[lang] for q in per_query if q.recall_by_lang.get(lang) is not None]
        out[f"recall_mlir_rel_{lang}"] = sum(values) / len(values) if values else None
    return out
