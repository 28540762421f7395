import argparse
import logging
from pathlib import Path
from typing import List

from pydantic import ValidationError

from app.cli.common import exit_code, output_path
from app.core.config import PipelineConfig
from app.core.errors import InputFormatError
from app.schemas.timing import Stage, TimingLedger
from app.services.formats import write_csv, write_json
from app.services.timing import timing_report

logger = logging.getLogger(__name__)

SYSTEM_COLUMNS = [
    "system", "doc_count", "total_seconds", *(f"{s.value}_seconds" for s in Stage), "seconds_per_doc", "map",
]
PAIR_COLUMNS = ["system", "baseline", "seconds_per_doc", "baseline_seconds_per_doc", "reduction", "speedup"]


def read_ledgers(paths: List[Path]) -> List[TimingLedger]:
    ledgers = []
    for path in paths:
        try:
            ledgers.append(TimingLedger.model_validate_json(Path(path).read_text(encoding="utf-8")))
        except UnicodeDecodeError as e:
            raise InputFormatError(f"invalid UTF-8 at byte {e.start}", str(path))
        except ValidationError as e:
            raise InputFormatError(f"not a timing ledger: {e.errors()[0]['msg']}", str(path))
    return ledgers


def cmd_timing_report(config: PipelineConfig) -> int:
    """
    Compares indexing cost across system configurations.

    **Params**:
    - **ledgers (List[Path])**: one ``ledger.json`` per configuration.
    - **map_values (Dict[str, float])**: optional MAP per system name, given as ``name=value``.

    **Returns**:
    - **int**: 0, or 1 when a per-document time is undefined.

    Outputs: ``timing_systems.csv``/``.json`` with per-document seconds,
    ``timing_pairs.csv`` with the relative reduction ``1 - t_a/t_b`` and speed-up
    ``t_b/t_a`` for every ordered pair, and ``tradeoff_points.csv`` with
    (seconds per document, MAP) points for plotting.
    """
    config.require("ledgers")
    ledgers = read_ledgers(config.ledgers)
    unknown = set(config.map_values) - {ledger.system for ledger in ledgers}
    if unknown:
        logger.warning("MAP given for unknown systems: %s", sorted(unknown))
    ledgers = [
        ledger.model_copy(update={"map": config.map_values[ledger.system]}) if ledger.system in config.map_values else ledger
        for ledger in ledgers
    ]
    systems, pairs, warnings = timing_report(ledgers)

    write_csv(output_path(config, "timing_systems.csv"), systems, SYSTEM_COLUMNS)
    write_json(output_path(config, "timing_systems.json"), {"systems": systems, "pairs": pairs, "warnings": warnings})
    write_csv(output_path(config, "timing_pairs.csv"), pairs, PAIR_COLUMNS)
    write_csv(
        output_path(config, "tradeoff_points.csv"),
        [{"system": s["system"], "seconds_per_doc": s["seconds_per_doc"], "map": s["map"]} for s in systems],
        ["system", "seconds_per_doc", "map"],
    )
    for pair in pairs:
        if pair["reduction"] is not None:
            logger.info("%s vs %s: %.1f%% less time per document", pair["system"], pair["baseline"], 100 * pair["reduction"])
    return exit_code(warnings)


def register(subparsers: argparse._SubParsersAction, parents) -> None:
    p = subparsers.add_parser("timing-report", parents=parents, help="per-document indexing cost and trade-offs")
    p.add_argument("--ledgers", nargs="+", type=Path)
    p.add_argument("--map", dest="map_values", nargs="+", metavar="SYSTEM=MAP")
    p.set_defaults(handler=cmd_timing_report)
