"""Per-topic AP and NDCG, and the topic x system score matrix built from them."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import IO, Mapping, Sequence

import numpy as np

from .errors import ConfigError
from .trec_io import Qrels, RunSet


class MeasureKind(str, enum.Enum):
    AP = "AP"
    NDCG = "NDCG"


@dataclass(frozen=True)
class Measure:
    kind: MeasureKind
    cutoff: int | None = None
    # grade needed for a document to count as relevant in AP
    rel_threshold: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", MeasureKind(self.kind))
        if self.cutoff is not None and self.cutoff < 1:
            raise ConfigError(f"cutoff must be >= 1, got {self.cutoff}")
        if self.rel_threshold < 1:
            raise ConfigError(f"rel_threshold must be >= 1, got {self.rel_threshold}")

    @property
    def name(self) -> str:
        label = "MAP" if self.kind is MeasureKind.AP else "NDCG"
        return label if self.cutoff is None else f"{label}@{self.cutoff}"

    @classmethod
    def parse(cls, text: str) -> Measure:
        """Accepts ``AP``, ``MAP``, ``NDCG`` and ``NDCG@10`` style names."""
        head, _, cut = text.strip().upper().partition("@")
        if head == "MAP":
            head = "AP"
        try:
            kind = MeasureKind(head)
        except ValueError:
            raise ConfigError(f"unknown measure {text!r}") from None
        return cls(kind, int(cut) if cut else None)

    def score(self, ranking: Sequence[str], topic_qrels: Mapping[str, int]) -> float:
        if self.kind is MeasureKind.AP:
            return average_precision(ranking, topic_qrels, self.cutoff, self.rel_threshold)
        return ndcg(ranking, topic_qrels, self.cutoff)


def average_precision(ranking: Sequence[str], topic_qrels: Mapping[str, int],
                      cutoff: int | None = None, threshold: int = 1) -> float:
    num_rel = sum(1 for g in topic_qrels.values() if g >= threshold)
    if num_rel == 0:
        return 0.0
    if cutoff is not None:
        ranking = ranking[:cutoff]
    hits = 0
    total = 0.0
    for k, doc in enumerate(ranking, start=1):
        if topic_qrels.get(doc, 0) >= threshold:
            hits += 1
            total += hits / k
    return total / num_rel


def _dcg(gains: Sequence[float]) -> float:
    return sum(g / math.log2(k + 1) for k, g in enumerate(gains, start=1) if g)


def ndcg(ranking: Sequence[str], topic_qrels: Mapping[str, int], cutoff: int | None = None) -> float:
    """Linear-gain NDCG; the ideal list is built from ``topic_qrels`` itself."""
    ideal = sorted((g for g in topic_qrels.values() if g > 0), reverse=True)
    if cutoff is not None:
        ideal = ideal[:cutoff]
        ranking = ranking[:cutoff]
    idcg = _dcg(ideal)
    if idcg == 0:
        return 0.0
    return _dcg([max(topic_qrels.get(d, 0), 0) for d in ranking]) / idcg


@dataclass(frozen=True)
class ScoreMatrix:
    topics: tuple[str, ...]
    systems: tuple[str, ...]
    values: np.ndarray  # shape (len(topics), len(systems))

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (len(self.topics), len(self.systems)):
            raise ValueError(f"values shape {values.shape} does not match "
                             f"{len(self.topics)} topics x {len(self.systems)} systems")
        values.setflags(write=False)
        object.__setattr__(self, "topics", tuple(self.topics))
        object.__setattr__(self, "systems", tuple(self.systems))
        object.__setattr__(self, "values", values)

    def means(self) -> np.ndarray:
        return self.values.mean(axis=0)

    def column(self, system: str) -> np.ndarray:
        return self.values[:, self.systems.index(system)]

    def to_csv(self, sink: IO[str]) -> None:
        sink.write("topic," + ",".join(self.systems) + "\n")
        for topic, row in zip(self.topics, self.values):
            sink.write(topic + "," + ",".join(f"{v:.10g}" for v in row) + "\n")


def score_matrix(runs: RunSet, qrels: Qrels, measure: Measure,
                 systems: Sequence[str], topics: Sequence[str]) -> ScoreMatrix:
    if not topics:
        raise ConfigError("score_matrix needs at least one topic")
    unknown = [s for s in systems if s not in runs.entries]
    if unknown:
        raise ConfigError(f"unknown systems: {', '.join(unknown)}")
    known_topics = set(runs.topics) | set(qrels.judgments)
    missing = [t for t in topics if t not in known_topics]
    if missing:
        raise ConfigError(f"unknown topics: {', '.join(missing)}")

    values = np.zeros((len(topics), len(systems)))
    for t, topic in enumerate(topics):
        judged = qrels.topic(topic)
        if not judged:
            continue
        for i, system in enumerate(systems):
            values[t, i] = measure.score(runs.ranking(system, topic), judged)
    return ScoreMatrix(tuple(topics), tuple(systems), values)
