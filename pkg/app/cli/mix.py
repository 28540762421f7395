import argparse
import logging
from pathlib import Path

from pydantic import ValidationError

from app.cli.common import EXIT_OK, output_path
from app.core.config import LangPath, PipelineConfig
from app.core.errors import ConfigurationError
from app.schemas.training import MixConfig, MixMode
from app.services.training_mixer import (
    check_stream_lengths,
    emit_combined_file,
    mix_round_robin,
    read_triple_file,
    schedule_batches,
    shuffle_instances,
    write_schedule_manifest,
)

logger = logging.getLogger(__name__)


def triple_language(item: LangPath) -> str:
    # triples.de.tsv -> de
    return item.lang or item.path.stem.rsplit(".", 1)[-1]


def cmd_mix_triples(config: PipelineConfig) -> int:
    """
    Builds the combined training file and the batch schedule for one mixing mode.

    ``combined.tsv`` holds line i of every per-language file on one row, in the
    order the files were given. ``schedule.jsonl`` lists every scheduled triple
    with its batch and position (and replica when there are several).

    **Params**:
    - **triples (List[LangPath])**: per-language triple files, ``lang=path`` or named ``*.<lang>.tsv``.
    - **mix_mode (MixMode)**: ET, MTT-M or MTT-S.
    - **batch_size, replicas, shuffle, seed**: schedule settings.

    **Returns**:
    - **int**: exit code, 0 on success.

    **Raises**:
        AlignmentError: the files differ in line count or instance i carries different queries.
    """
    config.require("triples")
    languages = [triple_language(item) for item in config.triples]
    try:
        mix = MixConfig(
            mode=config.mix_mode,
            languages=languages,
            batch_size=config.batch_size,
            seed=config.seed,
            replicas=config.replicas,
            shuffle=config.shuffle,
        )
    except ValidationError as e:
        raise ConfigurationError(f"mix-triples: {e.errors()[0]['msg']}")

    paths = [item.path for item in config.triples]
    streams = [read_triple_file(path, lang) for path, lang in zip(paths, languages)]
    check_stream_lengths(streams, [str(p) for p in paths])
    if mix.shuffle:
        streams = shuffle_instances(streams, mix.seed)
    stream = streams[0] if mix.mode is MixMode.ET else mix_round_robin(streams)
    schedule = schedule_batches(stream, mix)

    # inputs are fully validated before anything is written
    emit_combined_file(paths, output_path(config, "combined.tsv"))
    write_schedule_manifest(schedule, output_path(config, "schedule.jsonl"))
    logger.info(
        "%s: %d triples in %d batches (%d partial)",
        mix.mode.value, len(schedule.entries), len(schedule.batches()), len(schedule.partial_batches),
    )
    return EXIT_OK


def register(subparsers: argparse._SubParsersAction, parents) -> None:
    p = subparsers.add_parser("mix-triples", parents=parents, help="combine per-language triples and schedule batches")
    p.add_argument("--triples", nargs="+", metavar="[LANG=]PATH")
    p.add_argument("--mix-mode", dest="mix_mode", choices=[m.value for m in MixMode])
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--replicas", type=int)
    p.add_argument("--shuffle", action="store_true", default=None, help="permute instances before scheduling")
    p.set_defaults(handler=cmd_mix_triples)
