"""Readers and writers for TREC run and qrels files.

Run lines: ``topic Q0 docid rank score tag``.
Qrels lines: ``topic iteration docid grade``.
"""

from __future__ import annotations

import gzip
import io
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping

from .errors import ParseError, ValidationError


@dataclass(frozen=True)
class RunEntry:
    doc: str
    rank: int
    score: float


@dataclass(frozen=True)
class RunSet:
    """Ranked lists keyed by system, then topic.

    Lists are sorted by (score desc, doc-id desc) and ranks are 1..len.
    """

    entries: Mapping[str, Mapping[str, tuple[RunEntry, ...]]] = field(default_factory=dict)

    @property
    def systems(self) -> list[str]:
        return sorted(self.entries)

    @property
    def topics(self) -> list[str]:
        out: set[str] = set()
        for per_topic in self.entries.values():
            out.update(per_topic)
        return sorted(out)

    def ranking(self, system: str, topic: str) -> tuple[str, ...]:
        """Doc ids in rank order; empty when the system skipped the topic."""
        return tuple(e.doc for e in self.entries[system].get(topic, ()))

    def subset(self, systems: Iterable[str]) -> RunSet:
        systems = list(systems)
        missing = [s for s in systems if s not in self.entries]
        if missing:
            raise ValidationError(f"unknown systems: {', '.join(missing)}")
        return RunSet({s: self.entries[s] for s in systems})

    def merge(self, other: RunSet) -> RunSet:
        clash = set(self.entries) & set(other.entries)
        if clash:
            raise ValidationError(f"duplicate run tags: {', '.join(sorted(clash))}")
        return RunSet({**self.entries, **other.entries})

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class Qrels:
    """topic -> doc -> grade. A missing doc is unjudged, not grade 0."""

    judgments: Mapping[str, Mapping[str, int]] = field(default_factory=dict)

    def topic(self, topic: str) -> Mapping[str, int]:
        return self.judgments.get(topic, {})

    @property
    def topics(self) -> list[str]:
        return sorted(self.judgments)

    def __len__(self) -> int:
        return sum(len(v) for v in self.judgments.values())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Qrels):
            return NotImplemented
        a = {t: dict(d) for t, d in self.judgments.items() if d}
        b = {t: dict(d) for t, d in other.judgments.items() if d}
        return a == b

    def num_relevant(self, threshold: int = 1) -> int:
        return sum(1 for d in self.judgments.values() for g in d.values() if g >= threshold)

    def restrict(self, docs_by_topic: Mapping[str, Iterable[str]]) -> Qrels:
        """Keep only judgments whose doc appears in ``docs_by_topic[topic]``."""
        out: dict[str, dict[str, int]] = {}
        for topic, docs in docs_by_topic.items():
            judged = self.judgments.get(topic, {})
            kept = {d: judged[d] for d in docs if d in judged}
            if kept:
                out[topic] = kept
        return Qrels(out)


def _lines(stream: IO[str] | Iterable[str]) -> Iterator[tuple[int, list[str]]]:
    for lineno, raw in enumerate(stream, start=1):
        parts = raw.split()
        if parts:
            yield lineno, parts


def parse_runs(stream: IO[str] | Iterable[str], tag: str | None = None, source: str | None = None) -> RunSet:
    """Parse a TREC run stream; ``tag`` overrides the run-tag column."""
    raw: dict[str, dict[str, dict[str, float]]] = {}
    for lineno, parts in _lines(stream):
        if len(parts) != 6:
            raise ParseError(f"expected 6 fields, got {len(parts)}", lineno, source)
        topic, q0, doc, rank, score, run_tag = parts
        if q0.upper() != "Q0":
            raise ParseError(f"expected literal Q0 in column 2, got {q0!r}", lineno, source)
        try:
            int(rank)
        except ValueError:
            raise ParseError(f"non-integer rank {rank!r}", lineno, source) from None
        try:
            value = float(score)
        except ValueError:
            raise ParseError(f"non-numeric score {score!r}", lineno, source) from None
        system = tag if tag is not None else run_tag
        docs = raw.setdefault(system, {}).setdefault(topic, {})
        if doc in docs:
            raise ValidationError(f"duplicate document {doc} for topic {topic} in run {system} (line {lineno})")
        docs[doc] = value

    entries: dict[str, dict[str, tuple[RunEntry, ...]]] = {}
    for system, per_topic in raw.items():
        entries[system] = {}
        for topic, docs in per_topic.items():
            # trec_eval order: score desc, then doc id desc
            ordered = sorted(docs.items(), key=lambda kv: (kv[1], kv[0]), reverse=True)
            entries[system][topic] = tuple(RunEntry(d, i, s) for i, (d, s) in enumerate(ordered, start=1))
    return RunSet(entries)


def parse_qrels(stream: IO[str] | Iterable[str], source: str | None = None) -> Qrels:
    judgments: dict[str, dict[str, int]] = {}
    for lineno, parts in _lines(stream):
        if len(parts) != 4:
            raise ParseError(f"expected 4 fields, got {len(parts)}", lineno, source)
        topic, _iteration, doc, grade_s = parts
        try:
            grade = int(grade_s)
        except ValueError:
            raise ParseError(f"non-integer grade {grade_s!r}", lineno, source) from None
        if grade < 0:
            warnings.warn(f"line {lineno}: negative grade {grade} for topic {topic}, doc {doc} clamped to 0",
                          stacklevel=2)
            grade = 0
        docs = judgments.setdefault(topic, {})
        if doc in docs:
            raise ValidationError(f"duplicate judgment for topic {topic}, doc {doc} (line {lineno})")
        docs[doc] = grade
    return Qrels(judgments)


def write_qrels(qrels: Qrels, sink: IO[str]) -> None:
    for topic in sorted(qrels.judgments):
        docs = qrels.judgments[topic]
        for doc in sorted(docs):
            sink.write(f"{topic} 0 {doc} {docs[doc]}\n")


def qrels_to_string(qrels: Qrels) -> str:
    buf = io.StringIO()
    write_qrels(qrels, buf)
    return buf.getvalue()


def _open_text(path: Path) -> IO[str]:
    if path.suffix == ".gz":
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, encoding="utf-8")


def read_runs(path: str | Path) -> RunSet:
    """Load one run file or every file in a directory (one run per file)."""
    path = Path(path)
    files = sorted(p for p in path.iterdir() if p.is_file() and not p.name.startswith(".")) if path.is_dir() else [path]
    runs = RunSet()
    for f in files:
        with _open_text(f) as fh:
            runs = runs.merge(parse_runs(fh, source=str(f)))
    return runs


def read_qrels(path: str | Path) -> Qrels:
    path = Path(path)
    with _open_text(path) as fh:
        return parse_qrels(fh, source=str(path))
