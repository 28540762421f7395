import logging
from typing import Dict, List, Sequence

import numpy as np

from app.core.errors import ConfigurationError
from app.schemas.evaluation import BiasReport, Distribution, KSResult, LanguageBias, MergedQrels, Run
from app.services.mlir_eval import r_precision, recall_at_mlir_relevant
from app.services.significance import bonferroni_adjust, ks_two_sample

logger = logging.getLogger(__name__)

MIN_RELEVANT_FOR_KS = 3
IQR_WHISKER = 1.5


def summarize(values: Sequence[float]) -> Distribution:
    if not values:
        return Distribution(topic_count=0)
    arr = np.asarray(values, dtype=np.float64)
    q1, median, q3 = np.percentile(arr, [25, 50, 75])
    iqr = q3 - q1
    low, high = q1 - IQR_WHISKER * iqr, q3 + IQR_WHISKER * iqr
    return Distribution(
        topic_count=int(arr.size),
        mean=float(arr.mean()),
        median=float(median),
        q1=float(q1),
        q3=float(q3),
        outliers=sorted(float(v) for v in arr if v < low or v > high),
    )


def bias_report(
    run: Run,
    qrels: MergedQrels,
    reference_lang: str,
    significance_level: float = 0.05,
    min_relevant: int = MIN_RELEVANT_FOR_KS,
) -> BiasReport:
    languages = qrels.languages
    if reference_lang not in languages:
        raise ConfigurationError(f"reference language {reference_lang!r} has no judged documents (have {languages})")

    warnings = []
    topics = [qid for qid in run.rankings if qrels.relevant(qid)]
    if not topics:
        warnings.append("run has no judged topics; every entry of the report is undefined")

    recall: Dict[str, Dict[str, float]] = {lang: {} for lang in languages}
    relevant_counts: Dict[str, List[int]] = {lang: [] for lang in languages}
    r_precisions = []
    for qid in topics:
        ranking = run.doc_ids(qid)
        r_precisions.append(r_precision(ranking, qrels.judgments[qid]))
        for lang in languages:
            value = recall_at_mlir_relevant(ranking, qrels, qid, lang)
            if value is not None:
                recall[lang][qid] = value
                relevant_counts[lang].append(len(qrels.relevant(qid, lang)))

    candidates = []
    eligible: Dict[str, int] = {lang: 0 for lang in languages}
    for lang in languages:
        if lang == reference_lang:
            continue
        for qid in topics:
            rel_lang = qrels.relevant(qid, lang)
            rel_ref = qrels.relevant(qid, reference_lang)
            if len(rel_lang) < min_relevant or len(rel_ref) < min_relevant:
                continue
            eligible[lang] += 1
            scores = {item.doc_id: item.score for item in run.rankings[qid]}
            sample = [scores[d] for d in sorted(rel_lang) if d in scores]
            reference = [scores[d] for d in sorted(rel_ref) if d in scores]
            if not sample or not reference:
                warnings.append(f"topic {qid}: no retrieved relevant {lang if not sample else reference_lang} documents; KS test skipped")
                continue
            d, p = ks_two_sample(sample, reference)
            candidates.append((lang, qid, d, p, len(sample), len(reference)))

    n_tests = len(candidates)
    adjusted = bonferroni_adjust([c[3] for c in candidates], n_tests) if n_tests else []
    ks_tests = [
        KSResult(lang=lang, topic=qid, d=d, p=p, adjusted_p=adj, n_lang=n_l, n_reference=n_r)
        for (lang, qid, d, p, n_l, n_r), adj in zip(candidates, adjusted)
    ]

    per_lang = {}
    for lang in languages:
        tests = [t for t in ks_tests if t.lang == lang]
        biased = sum(1 for t in tests if t.adjusted_p < significance_level)
        counts = relevant_counts[lang]
        per_lang[lang] = LanguageBias(
            lang=lang,
            recall=summarize(list(recall[lang].values())),
            recall_by_topic=recall[lang],
            ks_topic_count=eligible[lang],
            biased_topic_count=biased,
            biased_fraction=(biased / len(tests)) if tests else None,
            mean_relevant_per_topic=(sum(counts) / len(counts)) if counts else None,
        )

    for w in warnings:
        logger.warning(w)
    report = BiasReport(
        tag=run.tag,
        reference_lang=reference_lang,
        languages=per_lang,
        ks_tests=ks_tests,
        n_tests=n_tests,
        significance_level=significance_level,
        mean_r_precision=(sum(r_precisions) / len(r_precisions)) if r_precisions else None,
        warnings=warnings,
    )
    return report


def topic_rows(report: BiasReport) -> List[dict]:
    """One row per (topic, language) for external plotting."""
    ks = {(t.topic, t.lang): t for t in report.ks_tests}
    rows = []
    for lang, bias in sorted(report.languages.items()):
        for qid, value in sorted(bias.recall_by_topic.items()):
            t = ks.get((qid, lang))
            rows.append({
                "topic": qid,
                "lang": lang,
                "recall_mlir_relevant": value,
                "ks_d": t.d if t else None,
                "ks_p": t.p if t else None,
                "ks_adjusted_p": t.adjusted_p if t else None,
            })
    return rows
