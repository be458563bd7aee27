"""Samples, manifests, file ingestion, and the upsampling mix.

A Sample pairs one utterance with its parse; a Manifest is an ordered,
id-unique collection of samples. JSONL is the interchange format (one object
per line with keys id, domain, utterance, parse, split, audio_path?,
provenance?); tab-separated files are supported for TOPv2-style imports.
All text is lowercased once at ingestion.
"""

from __future__ import annotations

import json
import logging
import os
import random
import tempfile
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator

from .errors import (
    AlignmentFailed,
    DuplicateId,
    MalformedParse,
    MalformedRecord,
    MissingColumn,
    ParseError,
)
from .top import ParseTree, align_leaves, canonicalize, parse_top, serialize

log = logging.getLogger(__name__)

DOMAINS = frozenset(
    {"alarm", "event", "messaging", "music", "navigation", "timer", "reminder", "weather"}
)
SPLITS = frozenset({"train", "valid", "test"})

DEFAULT_COLUMNS = {"domain": "domain", "utterance": "utterance", "parse": "semantic_parse"}


@dataclass(frozen=True)
class Sample:
    id: str
    domain: str
    utterance: tuple[str, ...]
    parse: ParseTree
    split: str
    audio_path: str | None = None
    provenance: dict | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise MalformedRecord("empty sample id")
        if self.domain not in DOMAINS:
            raise MalformedRecord(f"unknown domain {self.domain!r}")
        if self.split not in SPLITS:
            raise MalformedRecord(f"unknown split {self.split!r}")
        if not self.utterance:
            raise MalformedRecord(f"sample {self.id!r} has an empty utterance")
        # Parse leaves must occur in order within the utterance.
        align_leaves(self.parse, self.utterance)

    @property
    def text(self) -> str:
        return " ".join(self.utterance)


@dataclass(frozen=True)
class Manifest:
    samples: tuple[Sample, ...]
    provenance: str = ""

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for s in self.samples:
            if s.id in seen:
                raise DuplicateId(f"duplicate sample id {s.id!r}")
            seen.add(s.id)

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[Sample]:
        return iter(self.samples)

    def by_id(self) -> dict[str, Sample]:
        return {s.id: s for s in self.samples}


def _tokens(text: str) -> tuple[str, ...]:
    return tuple(canonicalize(text).split())


def make_sample(
    id: str,
    domain: str,
    utterance: str,
    parse: str,
    split: str = "train",
    audio_path: str | None = None,
    provenance: dict | None = None,
) -> Sample:
    """Build a Sample from raw strings, lowercasing and parsing on the way."""
    return Sample(
        id=id,
        domain=canonicalize(domain),
        utterance=_tokens(utterance),
        parse=parse_top(parse),
        split=split,
        audio_path=audio_path,
        provenance=provenance,
    )


def load_tsv(
    path: str | os.PathLike,
    column_map: dict[str, str] | None = None,
    strict: bool = True,
    default_split: str = "train",
) -> Manifest:
    """Load a tab-separated file with a header row.

    column_map maps the logical names domain/utterance/parse (and optionally
    id/split/audio_path) to actual column names. Malformed rows abort with
    their row number in strict mode and are skipped with a warning otherwise.
    """
    columns = dict(DEFAULT_COLUMNS)
    columns.update(column_map or {})
    path = os.fspath(path)
    name = os.path.basename(path)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MissingColumn(f"{name}: empty file, header row required")
    header = lines[0].split("\t")
    index: dict[str, int] = {}
    for logical in ("domain", "utterance", "parse"):
        col = columns[logical]
        if col not in header:
            raise MissingColumn(f"{name}: missing column {col!r}")
        index[logical] = header.index(col)
    for logical in ("id", "split", "audio_path"):
        col = columns.get(logical)
        if col is not None and col in header:
            index[logical] = header.index(col)

    samples: list[Sample] = []
    for row_no, line in enumerate(lines[1:], start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        try:
            if max(index.values()) >= len(fields):
                raise MalformedRecord(f"row has {len(fields)} fields")
            sid = fields[index["id"]] if "id" in index else f"{name}:{row_no}"
            samples.append(
                make_sample(
                    id=sid,
                    domain=fields[index["domain"]],
                    utterance=fields[index["utterance"]],
                    parse=fields[index["parse"]],
                    split=fields[index["split"]] if "split" in index else default_split,
                    audio_path=fields[index["audio_path"]] if "audio_path" in index else None,
                )
            )
        except ParseError as exc:
            err: Exception = MalformedParse(f"{name} row {row_no}: {exc}")
        except AlignmentFailed as exc:
            err = AlignmentFailed(f"{name} row {row_no}: {exc}")
        except MalformedRecord as exc:
            err = MalformedRecord(f"{name} row {row_no}: {exc}")
        else:
            continue
        if strict:
            raise err
        log.warning("skipping %s", err)
    return Manifest(tuple(samples), provenance=path)


def load_jsonl(path: str | os.PathLike, strict: bool = True) -> Manifest:
    path = os.fspath(path)
    name = os.path.basename(path)
    samples: list[Sample] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                samples.append(_sample_from_record(line))
            except (MalformedRecord, ParseError, AlignmentFailed) as exc:
                err = MalformedRecord(f"{name} line {line_no}: {exc}")
                if strict:
                    raise err from exc
                log.warning("skipping %s", err)
    return Manifest(tuple(samples), provenance=path)


def _sample_from_record(line: str) -> Sample:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"invalid JSON: {exc}") from exc
    if not isinstance(record, dict):
        raise MalformedRecord("record is not an object")
    for key in ("id", "domain", "utterance", "parse", "split"):
        if key not in record:
            raise MalformedRecord(f"missing field {key!r}")
    return make_sample(
        id=str(record["id"]),
        domain=str(record["domain"]),
        utterance=str(record["utterance"]),
        parse=str(record["parse"]),
        split=str(record["split"]),
        audio_path=record.get("audio_path"),
        provenance=record.get("provenance"),
    )


def sample_record(sample: Sample) -> dict:
    record: dict = {
        "id": sample.id,
        "domain": sample.domain,
        "utterance": sample.text,
        "parse": serialize(sample.parse),
        "split": sample.split,
    }
    if sample.audio_path is not None:
        record["audio_path"] = sample.audio_path
    if sample.provenance is not None:
        record["provenance"] = sample.provenance
    return record


def dumps_jsonl(manifest: Manifest) -> str:
    return "".join(json.dumps(sample_record(s)) + "\n" for s in manifest)


def save_jsonl(manifest: Manifest, path: str | os.PathLike) -> None:
    """Write the manifest atomically (temp file + rename)."""
    write_text_atomic(path, dumps_jsonl(manifest))


def write_text_atomic(path: str | os.PathLike, text: str) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def filter_domain(manifest: Manifest, domains: Iterable[str]) -> Manifest:
    wanted = set(domains)
    return Manifest(
        tuple(s for s in manifest if s.domain in wanted),
        provenance=manifest.provenance,
    )


def upsample_mix(
    held_in: Manifest, low_resource: Manifest, factor: int, seed: int
) -> Manifest:
    """Mix held-in data with low-resource data duplicated `factor` times.

    Each held-in sample appears once, each low-resource sample exactly
    `factor` times (copies beyond the first get ids suffixed #k), then the
    whole pool is shuffled deterministically by seed.
    """
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    pool: list[Sample] = list(held_in.samples)
    for s in low_resource.samples:
        pool.append(s)
        for k in range(1, factor):
            pool.append(replace(s, id=f"{s.id}#{k}"))
    random.Random(seed).shuffle(pool)
    return Manifest(
        tuple(pool),
        provenance=f"mix({held_in.provenance!r}, {low_resource.provenance!r}, "
        f"factor={factor}, seed={seed})",
    )
