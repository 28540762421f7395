import json
import logging
from pathlib import Path
from typing import Dict, List, Sequence, TypeVar

import numpy as np
from pydantic import ValidationError

from app.core.errors import AlignmentError, ConfigurationError, InputFormatError
from app.schemas.training import MixConfig, MixMode, MixSchedule, ScheduledTriple, Triple
from app.services.formats import iter_lines

logger = logging.getLogger(__name__)

FIELDS_PER_TRIPLE = 3

T = TypeVar("T")


def read_triple_file(path: Path, lang: str) -> List[Triple]:
    triples = []
    for lineno, line in iter_lines(path):
        fields = line.rstrip("\n").split("\t")
        if len(fields) != FIELDS_PER_TRIPLE:
            raise InputFormatError(f"expected {FIELDS_PER_TRIPLE} tab-separated fields, got {len(fields)}", str(path), lineno)
        try:
            triples.append(Triple(query_text=fields[0], positive=fields[1], negative=fields[2], lang=lang, line=lineno))
        except ValidationError as e:
            raise InputFormatError(f"invalid triple: {e.errors()[0]['msg']}", str(path), lineno)
    return triples


def check_stream_lengths(streams: Sequence[Sequence[Triple]], sources: Sequence[str]) -> int:
    if not streams:
        raise ConfigurationError("no per-language triple files given")
    expected = len(streams[0])
    for source, stream in zip(sources, streams):
        if len(stream) != expected:
            raise AlignmentError(f"has {len(stream)} triples, expected {expected} like {sources[0]}", source)
    return expected


def shuffle_instances(streams: Sequence[Sequence[Triple]], seed: int) -> List[List[Triple]]:
    """Permute aligned instances with one permutation shared by every language stream."""
    if not streams:
        return []
    n = min(len(s) for s in streams)
    perm = np.random.default_rng(seed).permutation(n)
    return [[s[i] for i in perm] for s in streams]


def mix_round_robin(streams: Sequence[Sequence[Triple]]) -> List[Triple]:
    if not streams:
        raise ConfigurationError("round-robin mixing needs at least one triple stream")
    lengths = [len(s) for s in streams]
    n = min(lengths)
    if len(set(lengths)) > 1:
        logger.warning("triple streams have unequal lengths %s; truncating to %d instances", lengths, n)
    mixed = []
    for i in range(n):
        query = streams[0][i].query_text
        for s in streams:
            if s[i].query_text != query:
                raise AlignmentError(f"instance {i + 1}: query differs from the first stream", s[i].lang)
            mixed.append(s[i])
    return mixed


def _chunk(stream: Sequence[Triple], size: int) -> List[Sequence[Triple]]:
    return [stream[i:i + size] for i in range(0, len(stream), size)]


def _single_language_batches(stream: Sequence[Triple], config: MixConfig) -> List[Sequence[Triple]]:
    groups: Dict[str, List[Triple]] = {lang: [] for lang in config.languages}
    for t in stream:
        groups[t.lang].append(t)
    cursors = {lang: 0 for lang in config.languages}
    active = [lang for lang in config.languages if groups[lang]]
    batches = []
    turn = 0
    while active:
        p = turn % len(active)
        lang = active[p]
        start = cursors[lang]
        batches.append(groups[lang][start:start + config.batch_size])
        cursors[lang] = start + config.batch_size
        if cursors[lang] >= len(groups[lang]):
            del active[p]
            turn = p
        else:
            turn = p + 1
    return batches


def schedule_batches(stream: Sequence[Triple], config: MixConfig) -> MixSchedule:
    if not stream:
        raise ConfigurationError("cannot schedule an empty triple stream")
    unknown = {t.lang for t in stream} - set(config.languages)
    if unknown:
        raise ConfigurationError(f"triples in unconfigured languages: {sorted(unknown)}")

    if config.mode is MixMode.MTT_S:
        batches = _single_language_batches(stream, config)
    else:
        batches = _chunk(stream, config.batch_size)

    entries = []
    partial = []
    for b, batch in enumerate(batches):
        if len(batch) < config.batch_size:
            partial.append(b)
        shards = partition_replicas(range(len(batch)), config.replicas)
        replica_of = {pos: r for r, shard in enumerate(shards) for pos in shard}
        for pos, triple in enumerate(batch):
            entries.append(ScheduledTriple(triple=triple, batch=b, position=pos, replica=replica_of[pos]))
    if config.mode is MixMode.MTT_S and len(partial) > 0:
        logger.warning("MTT-S schedule has %d partial batches: %s", len(partial), partial)
    return MixSchedule(config=config, entries=entries, partial_batches=partial)


def partition_replicas(batch: Sequence[T], replicas: int) -> List[List[T]]:
    """Split a batch across data-parallel replicas; item i goes to replica i mod replicas."""
    if replicas < 1:
        raise ConfigurationError(f"replicas must be positive, got {replicas}")
    return [list(batch[r::replicas]) for r in range(replicas)]


def write_schedule_manifest(schedule: MixSchedule, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for e in schedule.entries:
            record = {"batch": e.batch, "position": e.position, "lang": e.triple.lang, "triple_line": e.triple.line}
            if schedule.config.replicas > 1:
                record["replica"] = e.replica
            f.write(json.dumps(record) + "\n")


def _read_lines(path: Path) -> List[bytes]:
    data = Path(path).read_bytes()
    if not data:
        return []
    lines = data.split(b"\n")
    if lines[-1] == b"":
        lines.pop()
    return lines


def emit_combined_file(paths: Sequence[Path], out_path: Path) -> int:
    if not paths:
        raise ConfigurationError("no per-language triple files given")
    per_lang = [_read_lines(p) for p in paths]
    expected = len(per_lang[0])
    for path, lines in zip(paths, per_lang):
        if len(lines) != expected:
            raise AlignmentError(f"has {len(lines)} lines, expected {expected} like {paths[0]}", str(path))
    with open(out_path, "wb") as f:
        for row in zip(*per_lang):
            f.write(b"\t".join(row) + b"\n")
    logger.info("combined %d files of %d lines into %s", len(paths), expected, out_path)
    return expected


def parse_combined_file(path: Path, m: int) -> List[List[bytes]]:
    per_lang: List[List[bytes]] = [[] for _ in range(m)]
    width = FIELDS_PER_TRIPLE * m
    for lineno, line in enumerate(_read_lines(path), 1):
        fields = line.split(b"\t")
        if len(fields) != width:
            raise InputFormatError(f"expected {width} fields, got {len(fields)}", str(path), lineno)
        for j in range(m):
            per_lang[j].append(b"\t".join(fields[FIELDS_PER_TRIPLE * j:FIELDS_PER_TRIPLE * (j + 1)]))
    return per_lang
