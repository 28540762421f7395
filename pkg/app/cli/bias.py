import argparse
import logging
from pathlib import Path

from app.cli.common import add_qrels_option, exit_code, load_merged_qrels, output_path
from app.core.config import PipelineConfig
from app.services.formats import read_run, write_csv, write_json
from app.services.language_bias import bias_report, topic_rows

logger = logging.getLogger(__name__)

TOPIC_COLUMNS = ["topic", "lang", "recall_mlir_relevant", "ks_d", "ks_p", "ks_adjusted_p"]


def cmd_bias_report(config: PipelineConfig) -> int:
    """
    Measures whether a run favors documents of some languages over the reference language.

    **Params**:
    - **run (Path)**: TREC run file.
    - **qrels (List[LangPath])**: one qrels file per document language.
    - **reference_lang (str)**: language every other language is tested against.
    - **significance_level (float)**: threshold for the Bonferroni-adjusted KS p-values.

    **Returns**:
    - **int**: 0, or 1 when the report carries warnings (for example an empty run).

    Writes ``bias_report.json`` and ``bias_topics.csv`` (one row per topic and language).
    """
    config.require("run", "qrels", "reference_lang")
    qrels = load_merged_qrels(config)
    run = read_run(config.run)
    report = bias_report(run, qrels, config.reference_lang, config.significance_level)

    write_json(output_path(config, "bias_report.json"), report)
    write_csv(output_path(config, "bias_topics.csv"), topic_rows(report), TOPIC_COLUMNS)
    for lang, bias in sorted(report.languages.items()):
        if lang == report.reference_lang:
            continue
        logger.info(
            "%s vs %s: %d of %d eligible topics differ (adjusted p < %.2f)",
            lang, report.reference_lang, bias.biased_topic_count, bias.ks_topic_count, report.significance_level,
        )
    return exit_code(report.warnings)


def register(subparsers: argparse._SubParsersAction, parents) -> None:
    p = subparsers.add_parser("bias-report", parents=parents, help="per-language recall and KS bias tests for a run")
    p.add_argument("--run", type=Path)
    add_qrels_option(p)
    p.add_argument("--reference-lang", dest="reference_lang")
    p.add_argument("--significance-level", dest="significance_level", type=float)
    p.set_defaults(handler=cmd_bias_report)
