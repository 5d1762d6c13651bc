"""Budget-limited adjudication over a depth-K pool.

Each method is a selector that proposes the next pooled document to judge
and is told the (binarised) outcome before proposing the following one.
All selector state is per topic.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from ._seeding import topic_key
from .errors import ConfigError, ValidationError
from .trec_io import Qrels, RunSet

log = logging.getLogger(__name__)


class MethodKind(str, enum.Enum):
    TOPK = "topk"
    MTF = "mtf"
    MM = "mm"
    MM_NS = "mm-ns"
    TS = "ts"
    TS_NS = "ts-ns"
    HEDGE = "hedge"
    NTCIR = "ntcir"

    @property
    def label(self) -> str:
        return _LABELS[self]

    @classmethod
    def parse(cls, text: str) -> MethodKind:
        key = text.strip().lower().replace("_", "-")
        key = {"top-k": "topk", "mmns": "mm-ns", "tsns": "ts-ns"}.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ConfigError(f"unknown adjudication method {text!r}") from None


_LABELS = {
    MethodKind.TOPK: "top-k", MethodKind.MTF: "MTF", MethodKind.MM: "MM", MethodKind.MM_NS: "MM-NS",
    MethodKind.TS: "TS", MethodKind.TS_NS: "TS-NS", MethodKind.HEDGE: "Hedge", MethodKind.NTCIR: "NTCIR",
}
METHOD_ORDER = list(MethodKind)


@dataclass(frozen=True)
class MethodConfig:
    kind: MethodKind
    rng_seed: int = 0
    decay: float = 0.99
    hedge_beta: float = 0.1
    ntcir_depth: int | None = None
    # break MM ties and the initial MTF queue order at random instead of by run tag
    random_ties: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", MethodKind(self.kind))
        if not 0.0 < self.decay <= 1.0:
            raise ConfigError(f"decay must be in (0, 1], got {self.decay}")
        if not 0.0 < self.hedge_beta < 1.0:
            raise ConfigError(f"hedge_beta must be in (0, 1), got {self.hedge_beta}")
        if self.ntcir_depth is not None and self.ntcir_depth < 1:
            raise ConfigError(f"ntcir_depth must be >= 1, got {self.ntcir_depth}")

    @property
    def stochastic(self) -> bool:
        """True when the judging order depends on the random stream."""
        if self.kind in (MethodKind.TS, MethodKind.TS_NS):
            return True
        return self.random_ties and self.kind in (MethodKind.MTF, MethodKind.MM, MethodKind.MM_NS)


@dataclass(frozen=True)
class TopicPool:
    topic: str
    depth: int
    # each pooling run's top-`depth` documents, in rank order
    rankings: Mapping[str, tuple[str, ...]]
    candidates: frozenset[str] = field(default=frozenset())

    def __post_init__(self):
        union = frozenset(d for docs in self.rankings.values() for d in docs)
        if self.candidates and self.candidates != union:
            raise ValidationError(f"topic {self.topic}: candidates differ from the union of run rankings")
        object.__setattr__(self, "candidates", union)

    def __len__(self) -> int:
        return len(self.candidates)


@dataclass(frozen=True)
class JudgingTrace:
    topic: str
    judgments: tuple[tuple[str, int], ...]

    @property
    def docs(self) -> list[str]:
        return [d for d, _ in self.judgments]

    def __len__(self) -> int:
        return len(self.judgments)


def build_pools(runs: RunSet, depth: int, topics: Sequence[str] | None = None) -> list[TopicPool]:
    if depth < 1:
        raise ConfigError(f"pool depth must be >= 1, got {depth}")
    if topics is None:
        topics = runs.topics
    pools = []
    for topic in topics:
        rankings = {}
        for system in runs.systems:
            docs = runs.ranking(system, topic)[:depth]
            if docs:
                rankings[system] = docs
        if not rankings:
            log.warning("topic %s is not retrieved by any pooling run; its pool is empty", topic)
        pools.append(TopicPool(topic, depth, rankings))
    return pools


def topic_rng(seed: int, kind: MethodKind, repetition: int, topic: str) -> np.random.Generator:
    key = topic_key(topic)
    entropy = [seed & 0xFFFFFFFFFFFFFFFF, METHOD_ORDER.index(kind), repetition, key]
    return np.random.default_rng(np.random.SeedSequence(entropy))


class _RunCursor:
    """Walks one run's ranking, skipping documents already judged."""

    __slots__ = ("docs", "pos")

    def __init__(self, docs: Sequence[str]):
        self.docs = docs
        self.pos = 0

    def peek(self, judged: set[str]) -> str | None:
        while self.pos < len(self.docs) and self.docs[self.pos] in judged:
            self.pos += 1
        return self.docs[self.pos] if self.pos < len(self.docs) else None


class Selector:
    def __init__(self, pool: TopicPool):
        self.pool = pool
        self.judged: set[str] = set()

    def select(self) -> str:
        raise NotImplementedError

    def update(self, doc: str, relevant: bool) -> None:
        self.judged.add(doc)


class _StaticOrder(Selector):
    order: list[str]

    def select(self) -> str:
        for doc in self.order:
            if doc not in self.judged:
                return doc
        raise IndexError("static order exhausted")


class TopKSelector(_StaticOrder):
    """Shallowest depth whose union fills the budget, judged in doc-id order."""

    def __init__(self, pool: TopicPool, budget: int):
        super().__init__(pool)
        union: set[str] = set()
        for k in range(1, pool.depth + 1):
            union = {d for docs in pool.rankings.values() for d in docs[:k]}
            if len(union) >= budget:
                break
        self.order = sorted(union)


class NTCIRSelector(_StaticOrder):
    """Most runs at or above the depth first, then lowest rank sum, then doc id."""

    def __init__(self, pool: TopicPool, depth: int | None = None):
        super().__init__(pool)
        depth = depth or pool.depth
        count: dict[str, int] = {}
        rank_sum: dict[str, int] = {}
        for docs in pool.rankings.values():
            for rank, doc in enumerate(docs, start=1):
                if rank <= depth:
                    count[doc] = count.get(doc, 0) + 1
                rank_sum[doc] = rank_sum.get(doc, 0) + rank
        self.order = sorted(pool.candidates, key=lambda d: (-count.get(d, 0), rank_sum[d], d))


class MTFSelector(Selector):
    """MoveToFront: stay on a run while it returns relevant documents."""

    def __init__(self, pool: TopicPool, rng: np.random.Generator | None = None, random_ties: bool = False):
        super().__init__(pool)
        tags = sorted(pool.rankings)
        if random_ties and rng is not None:
            tags = [tags[i] for i in rng.permutation(len(tags))]
        self.queue = [(tag, _RunCursor(pool.rankings[tag])) for tag in tags]

    def select(self) -> str:
        while self.queue:
            doc = self.queue[0][1].peek(self.judged)
            if doc is not None:
                return doc
            self.queue.pop(0)
        raise IndexError("all runs exhausted")

    def update(self, doc: str, relevant: bool) -> None:
        super().update(doc, relevant)
        if not relevant and self.queue:
            self.queue.append(self.queue.pop(0))


class BanditSelector(Selector):
    """Runs as Bernoulli arms with Beta posteriors (MaxMean or Thompson sampling).

    Non-stationary variants shrink the played arm's evidence towards the
    Beta(1, 1) prior by ``decay`` before adding the new outcome.
    """

    def __init__(self, pool: TopicPool, kind: MethodKind, rng: np.random.Generator,
                 decay: float = 0.99, random_ties: bool = False):
        super().__init__(pool)
        self.kind = kind
        self.rng = rng
        self.decay = decay if kind in (MethodKind.MM_NS, MethodKind.TS_NS) else 1.0
        self.random_ties = random_ties
        self.tags = sorted(pool.rankings)
        self.cursors = [_RunCursor(pool.rankings[t]) for t in self.tags]
        self.alpha = np.ones(len(self.tags))
        self.beta = np.ones(len(self.tags))
        self.current: int | None = None

    def _active(self) -> tuple[np.ndarray, list[str]]:
        idx, docs = [], []
        for i, cur in enumerate(self.cursors):
            doc = cur.peek(self.judged)
            if doc is not None:
                idx.append(i)
                docs.append(doc)
        return np.asarray(idx, dtype=np.intp), docs

    def select(self) -> str:
        idx, docs = self._active()
        if len(idx) == 0:
            raise IndexError("all arms exhausted")
        a, b = self.alpha[idx], self.beta[idx]
        if self.kind in (MethodKind.TS, MethodKind.TS_NS):
            value = self.rng.beta(a, b)
        else:
            value = a / (a + b)
        best = np.flatnonzero(value == value.max())
        pick = best[0]
        if self.random_ties and len(best) > 1:
            pick = best[self.rng.integers(len(best))]
        self.current = int(idx[pick])
        return docs[pick]

    def update(self, doc: str, relevant: bool) -> None:
        super().update(doc, relevant)
        arm = self.current
        if arm is None:
            return
        if self.decay != 1.0:
            self.alpha[arm] = 1.0 + self.decay * (self.alpha[arm] - 1.0)
            self.beta[arm] = 1.0 + self.decay * (self.beta[arm] - 1.0)
        self.alpha[arm] += float(relevant)
        self.beta[arm] += 1.0 - float(relevant)
        self.current = None

    @property
    def posterior_means(self) -> dict[str, float]:
        return {t: a / (a + b) for t, a, b in zip(self.tags, self.alpha, self.beta)}


class HedgeSelector(Selector):
    """Multiplicative weights over runs; pick the doc with the largest weighted confidence.

    A run's confidence in a document is (K - rank + 1) / K inside its top K and
    0 otherwise. Weights are rescaled to sum to the number of runs after each update.
    """

    def __init__(self, pool: TopicPool, beta: float = 0.1):
        super().__init__(pool)
        self.beta = beta
        self.depth = pool.depth
        self.docs = sorted(pool.candidates)
        self.tags = sorted(pool.rankings)
        row = {d: i for i, d in enumerate(self.docs)}
        # integer numerators keep uniform-weight sums exact, so ties are real ties
        self.conf = np.zeros((len(self.docs), len(self.tags)))
        for j, tag in enumerate(self.tags):
            for rank, doc in enumerate(pool.rankings[tag], start=1):
                self.conf[row[doc], j] = self.depth - rank + 1
        self.weights = np.ones(len(self.tags))
        self.open = np.ones(len(self.docs), dtype=bool)
        self._row = row

    def scores(self) -> np.ndarray:
        return self.conf @ self.weights

    def select(self) -> str:
        s = np.where(self.open, self.scores(), -np.inf)
        i = int(np.argmax(s))
        if not self.open[i]:
            raise IndexError("pool exhausted")
        return self.docs[i]

    def update(self, doc: str, relevant: bool) -> None:
        super().update(doc, relevant)
        i = self._row[doc]
        self.open[i] = False
        loss = np.abs(float(relevant) - self.conf[i] / self.depth)
        self.weights *= self.beta ** loss
        self.weights *= len(self.weights) / self.weights.sum()


def make_selector(method: MethodConfig, pool: TopicPool, budget: int,
                  rng: np.random.Generator | None = None) -> Selector:
    kind = method.kind
    if kind is MethodKind.TOPK:
        return TopKSelector(pool, budget)
    if kind is MethodKind.NTCIR:
        return NTCIRSelector(pool, method.ntcir_depth)
    if kind is MethodKind.HEDGE:
        return HedgeSelector(pool, method.hedge_beta)
    if rng is None:
        rng = topic_rng(method.rng_seed, kind, 0, pool.topic)
    if kind is MethodKind.MTF:
        return MTFSelector(pool, rng, method.random_ties)
    return BanditSelector(pool, kind, rng, method.decay, method.random_ties)


def adjudicate(method: MethodConfig, pool: TopicPool, gold: Qrels, budget: int,
               repetition: int = 0) -> JudgingTrace:
    """Judge up to ``budget`` pooled documents in the order chosen by ``method``."""
    if budget < 1:
        raise ConfigError(f"budget must be >= 1, got {budget}")
    if not pool.candidates:
        raise ValidationError(f"topic {pool.topic}: cannot adjudicate an empty pool")
    rng = topic_rng(method.rng_seed, method.kind, repetition, pool.topic)
    selector = make_selector(method, pool, budget, rng)
    truth = gold.topic(pool.topic)
    judgments = []
    for _ in range(min(budget, len(pool))):
        doc = selector.select()
        if doc not in pool.candidates or doc in selector.judged:
            raise RuntimeError(f"{method.kind.label} proposed invalid document {doc}")
        grade = max(truth.get(doc, 0), 0)
        selector.update(doc, grade >= 1)
        judgments.append((doc, grade))
    return JudgingTrace(pool.topic, tuple(judgments))


def adjudicate_all(method: MethodConfig, pools: Iterable[TopicPool], gold: Qrels, budget: int,
                   repetition: int = 0) -> list[JudgingTrace]:
    return [adjudicate(method, p, gold, budget, repetition) for p in pools if p.candidates]


def trace_to_qrels(traces: Iterable[JudgingTrace]) -> Qrels:
    out: dict[str, dict[str, int]] = {}
    for trace in traces:
        if trace.topic in out:
            raise ValidationError(f"topic {trace.topic} appears in more than one trace")
        out[trace.topic] = dict(trace.judgments)
    return Qrels({t: d for t, d in out.items() if d})


def write_traces(traces: Iterable[JudgingTrace], sink: IO[str]) -> None:
    sink.write("topic,position,docid,grade\n")
    for trace in traces:
        for pos, (doc, grade) in enumerate(trace.judgments, start=1):
            sink.write(f"{trace.topic},{pos},{doc},{grade}\n")


def pool_qrels(pools: Iterable[TopicPool], gold: Qrels) -> Qrels:
    """Gold restricted to the pool, with unjudged pooled docs recorded as grade 0."""
    out = {}
    for p in pools:
        truth = gold.topic(p.topic)
        if p.candidates:
            out[p.topic] = {d: max(truth.get(d, 0), 0) for d in p.candidates}
    return Qrels(out)
