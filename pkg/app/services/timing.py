import logging
import time
from contextlib import contextmanager
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from app.schemas.timing import Stage, TimingLedger

logger = logging.getLogger(__name__)


class StageClock:
    """Accumulates wall-clock seconds per indexing stage."""

    def __init__(self):
        self.seconds: Dict[Stage, float] = {s: 0.0 for s in Stage}

    @contextmanager
    def stage(self, stage: Stage) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self.seconds[stage] += time.perf_counter() - start

    def ledger(self, system: str, doc_count: int, translation_seconds: float = 0.0) -> TimingLedger:
        stages = dict(self.seconds)
        # translation happens outside the toolkit and arrives as metadata
        stages[Stage.TRANSLATION] = translation_seconds
        return TimingLedger(system=system, stages=stages, doc_count=doc_count)


def relative_reduction(t_a: Optional[float], t_b: Optional[float]) -> Optional[float]:
    """Fraction of ``t_b`` saved by running at ``t_a`` instead."""
    if t_a is None or t_b is None or t_b == 0:
        return None
    return 1.0 - t_a / t_b


def timing_report(ledgers: Sequence[TimingLedger]) -> Tuple[List[dict], List[dict], List[str]]:
    warnings = []
    systems = []
    for ledger in ledgers:
        per_doc = ledger.per_document
        if per_doc is None and ledger.total > 0:
            warnings.append(f"{ledger.system}: {ledger.total:.3f}s over zero documents; per-document time undefined")
        systems.append({
            "system": ledger.system,
            "doc_count": ledger.doc_count,
            "total_seconds": ledger.total,
            **{f"{s.value}_seconds": ledger.stages[s] for s in Stage},
            "seconds_per_doc": per_doc,
            "map": ledger.map,
        })

    pairs = []
    for a in ledgers:
        for b in ledgers:
            if a is b:
                continue
            t_a, t_b = a.per_document, b.per_document
            pairs.append({
                "system": a.system,
                "baseline": b.system,
                "seconds_per_doc": t_a,
                "baseline_seconds_per_doc": t_b,
                "reduction": relative_reduction(t_a, t_b),
                "speedup": (t_b / t_a) if t_a and t_b is not None else None,
            })
    for w in warnings:
        logger.warning(w)
    return systems, pairs, warnings
