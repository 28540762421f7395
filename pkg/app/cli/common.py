import argparse
import logging
from pathlib import Path
from typing import Dict

from app.core.config import PipelineConfig
from app.schemas.evaluation import MergedQrels
from app.services.formats import read_corpus, read_qrels
from app.services.mlir_eval import merge_qrels

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_WARNINGS = 1
EXIT_INPUT_ERROR = 2


def global_options() -> argparse.ArgumentParser:
    """Flags every command accepts; attached to each subparser as a parent."""
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("global options")
    group.add_argument("--config", type=Path, help="JSON file with pipeline options; flags override it")
    group.add_argument("--seed", type=int)
    group.add_argument("--threads", type=int)
    group.add_argument("--output", type=Path, help="directory for command outputs")
    group.add_argument("--log-level", dest="log_level", help="DEBUG, INFO, WARNING or ERROR")
    return parent


def add_qrels_option(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--qrels", nargs="+", metavar="LANG=PATH",
        help="one TREC qrels file per document language, e.g. de=qrels.de.txt",
    )
    parser.add_argument("--corpus", type=Path, help="corpus JSONL giving languages of unjudged documents")


def load_merged_qrels(config: PipelineConfig) -> MergedQrels:
    doc_langs: Dict[str, str] = {}
    if config.corpus is not None:
        doc_langs = {doc.id: doc.lang for doc in read_corpus(config.corpus)}
    sources = [(item.lang, read_qrels(item.path)) for item in config.qrels]
    return merge_qrels(sources, doc_langs)


def output_path(config: PipelineConfig, name: str) -> Path:
    config.output.mkdir(parents=True, exist_ok=True)
    return config.output / name


def exit_code(warnings) -> int:
    return EXIT_WARNINGS if warnings else EXIT_OK
