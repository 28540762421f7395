import argparse
import logging
import sys
from typing import List, Optional

from app.cli import bias, evaluate, index, mix, search, timing
from app.cli.common import EXIT_INPUT_ERROR, global_options
from app.core.config import PipelineConfig, settings
from app.core.errors import MLIRError
from app.core.logging import configure_logging

logger = logging.getLogger("app")

COMMANDS = (index, search, evaluate, bias, timing, mix)

# parsed arguments that are not pipeline options
_CONTROL_ARGS = {"command", "handler", "config", "log_level"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mlir", description="Multilingual retrieval toolkit")
    subparsers = parser.add_subparsers(dest="command", required=True)
    parents = [global_options()]
    for command in COMMANDS:
        command.register(subparsers, parents)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level or settings.LOG_LEVEL)
    overrides = {k: v for k, v in vars(args).items() if k not in _CONTROL_ARGS}
    try:
        config = PipelineConfig.load(args.config, overrides)
        return args.handler(config)
    except MLIRError as e:
        logger.error("%s: %s", args.command, e)
        return EXIT_INPUT_ERROR
    except OSError as e:
        logger.error("%s: %s", args.command, e)
        return EXIT_INPUT_ERROR


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
