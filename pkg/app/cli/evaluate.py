import argparse
import logging
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

from app.cli.common import add_qrels_option, exit_code, load_merged_qrels, output_path
from app.core.config import PipelineConfig
from app.schemas.evaluation import QueryMetrics, SignificanceResult
from app.services.formats import read_run, write_csv, write_json
from app.services.mlir_eval import evaluate_run, mean_metrics
from app.services.significance import bonferroni_adjust, paired_t_test

logger = logging.getLogger(__name__)

COMPARED_METRICS = {
    "map": lambda q: q.average_precision,
    "p@10": lambda q: q.precision_at_10,
}


def metric_rows(tag: str, per_query: Sequence[QueryMetrics], languages: Sequence[str]) -> Tuple[List[dict], List[str]]:
    recall_cols = [f"recall_mlir_rel_{lang}" for lang in languages]
    fieldnames = ["run", "qid", "ap", "p@10", "r_precision", *recall_cols]
    rows = []
    for q in per_query:
        rows.append({
            "run": tag,
            "qid": q.qid,
            "ap": q.average_precision,
            "p@10": q.precision_at_10,
            "r_precision": q.r_precision,
            **{f"recall_mlir_rel_{lang}": q.recall_by_lang.get(lang) for lang in languages},
        })
    means = mean_metrics(per_query)
    rows.append({
        "run": tag,
        "qid": "all",
        "ap": means["map"],
        "p@10": means["p@10"],
        "r_precision": means["r_precision"],
        **{col: means.get(col) for col in recall_cols},
    })
    return rows, fieldnames


def compare_to_baseline(
    per_query: Sequence[QueryMetrics],
    baseline: Sequence[QueryMetrics],
    n_tests: int,
) -> Tuple[List[SignificanceResult], List[str]]:
    warnings = []
    ours: Dict[str, QueryMetrics] = {q.qid: q for q in per_query}
    theirs: Dict[str, QueryMetrics] = {q.qid: q for q in baseline}
    common = sorted(set(ours) & set(theirs))
    if len(common) != len(ours) or len(common) != len(theirs):
        warnings.append(f"significance uses the {len(common)} queries evaluated in both runs")
    if len(common) < 2:
        warnings.append("fewer than two shared queries; no significance test")
        return [], warnings

    raw = []
    for name, value in COMPARED_METRICS.items():
        t, p = paired_t_test([value(ours[qid]) for qid in common], [value(theirs[qid]) for qid in common])
        raw.append((name, t, p))
    adjusted = bonferroni_adjust([p for _, _, p in raw], n_tests)
    results = [
        SignificanceResult(metric=name, t=t, p=p, adjusted_p=adj, n=len(common))
        for (name, t, p), adj in zip(raw, adjusted)
    ]
    return results, warnings


def cmd_evaluate(config: PipelineConfig) -> int:
    """
    Scores a run against merged multilingual qrels.

    Writes per-query and mean MAP, P@10, R-Precision and per-language
    Recall@MLIR-Relevant to ``metrics.csv`` and ``metrics.json``. With a baseline
    run, also writes paired t-test p-values for MAP and P@10, raw and
    Bonferroni-adjusted.

    **Params**:
    - **run (Path)**: TREC run file to evaluate.
    - **qrels (List[LangPath])**: one qrels file per document language.
    - **baseline (Path)**: optional run to compare against.
    - **bonferroni (int)**: correction factor; defaults to the number of comparisons.

    **Returns**:
    - **int**: 0, or 1 when queries were excluded or inputs were only partly usable.

    **Raises**:
        EvaluationError: run and qrels share no query ids.
    """
    config.require("run", "qrels")
    qrels = load_merged_qrels(config)
    run = read_run(config.run)
    per_query, warnings = evaluate_run(run, qrels)
    rows, fieldnames = metric_rows(run.tag, per_query, qrels.languages)

    payload = {
        "run": run.tag,
        "query_count": len(per_query),
        "aggregate": mean_metrics(per_query),
        "per_query": [q.model_dump() for q in per_query],
    }

    if config.baseline is not None:
        config.require("baseline")
        baseline = read_run(config.baseline)
        base_queries, base_warnings = evaluate_run(baseline, qrels)
        warnings.extend(f"baseline: {w}" for w in base_warnings)
        base_rows, _ = metric_rows(baseline.tag, base_queries, qrels.languages)
        rows.extend(base_rows)
        n_tests = config.bonferroni or len(COMPARED_METRICS)
        tests, test_warnings = compare_to_baseline(per_query, base_queries, n_tests)
        for w in test_warnings:
            logger.warning(w)
        warnings.extend(test_warnings)
        payload["baseline"] = {"run": baseline.tag, "aggregate": mean_metrics(base_queries)}
        payload["significance"] = {"bonferroni": n_tests, "tests": [t.model_dump() for t in tests]}
        write_csv(output_path(config, "significance.csv"), [t.model_dump() for t in tests],
                  fieldnames=list(SignificanceResult.model_fields))
        for t in tests:
            logger.info("%s vs %s on %s: t=%.3f p=%.4f adjusted=%.4f", run.tag, baseline.tag, t.metric, t.t, t.p, t.adjusted_p)

    payload["warnings"] = warnings
    write_csv(output_path(config, "metrics.csv"), rows, fieldnames)
    write_json(output_path(config, "metrics.json"), payload)
    means = payload["aggregate"]
    if means["map"] is not None:
        logger.info("%s: MAP %.4f P@10 %.4f over %d queries", run.tag, means["map"], means["p@10"], len(per_query))
    return exit_code(warnings)


def register(subparsers: argparse._SubParsersAction, parents) -> None:
    p = subparsers.add_parser("evaluate", parents=parents, help="compute MAP, P@10 and MLIR recall for a run")
    p.add_argument("--run", type=Path)
    add_qrels_option(p)
    p.add_argument("--baseline", type=Path, help="baseline run for paired t-tests")
    p.add_argument("--bonferroni", type=int, help="Bonferroni factor; defaults to the number of comparisons")
    p.set_defaults(handler=cmd_evaluate)
