"""Paired randomised Tukey HSD, pairwise significance and ranking correlation."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numba
import numpy as np

from . import _kernels
from ._seeding import topic_key
from .errors import ConfigError, ValidationError
from .measures import ScoreMatrix

Pair = tuple[str, str]

_BATCH = 1 << 20


@dataclass(frozen=True)
class SignificanceConfig:
    alpha: float = 0.05
    permutations: int = 1_000_000
    master_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.permutations < 1:
            raise ConfigError(f"permutations must be >= 1, got {self.permutations}")


@dataclass(frozen=True)
class PairwisePValues:
    systems: tuple[str, ...]
    counts: np.ndarray  # exceedance counts; diagonal holds `permutations`
    permutations: int

    @property
    def p(self) -> np.ndarray:
        return self.counts / self.permutations

    def get(self, a: str, b: str) -> float:
        i, j = self.systems.index(a), self.systems.index(b)
        return float(self.counts[i, j]) / self.permutations

    def pairs(self) -> Iterable[tuple[int, int]]:
        return itertools.combinations(range(len(self.systems)), 2)

    def to_csv(self, sink: IO[str]) -> None:
        p = self.p
        sink.write("system," + ",".join(self.systems) + "\n")
        for name, row in zip(self.systems, p):
            sink.write(name + "," + ",".join(f"{v:.10g}" for v in row) + "\n")

    @classmethod
    def from_p(cls, systems: Sequence[str], p: np.ndarray, permutations: int) -> PairwisePValues:
        counts = np.rint(np.asarray(p) * permutations).astype(np.int64)
        return cls(tuple(systems), counts, permutations)


def _canonical(X: ScoreMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Rows sorted by topic key so results do not depend on the input row order."""
    keys = [topic_key(t) for t in X.topics]
    order = sorted(range(len(X.topics)), key=lambda t: (keys[t], X.topics[t]))
    x = np.ascontiguousarray(X.values[order], dtype=np.float64)
    return x, np.asarray([keys[t] for t in order], dtype=np.uint64)


def _column_sums(x: np.ndarray) -> np.ndarray:
    # same left-to-right accumulation as the kernel, so an identity shuffle
    # reproduces these sums bit for bit
    sums = np.zeros(x.shape[1])
    for row in x:
        sums = sums + row
    return sums


def _set_threads(workers: int | None) -> None:
    limit = numba.config.NUMBA_NUM_THREADS
    numba.set_num_threads(max(1, min(workers or limit, limit)))


def permuted_ranges(X: ScoreMatrix, permutations: int, master_seed: int = 0,
                    workers: int | None = None) -> np.ndarray:
    """max - min of the permuted column sums, one value per permutation."""
    x, keys = _canonical(X)
    _set_threads(workers)
    master = np.uint64(master_seed & 0xFFFFFFFFFFFFFFFF)
    return _kernels.permuted_ranges(x, keys, master, 0, permutations)


def tukey_hsd(X: ScoreMatrix, cfg: SignificanceConfig, workers: int | None = None) -> PairwisePValues:
    """Randomised Tukey HSD over the topic x system matrix ``X``.

    A pair counts a permutation when the permuted range of system means is at
    least the pair's observed mean difference. Both sides are compared as
    column sums, which orders them exactly as the means would be.
    """
    m, n = X.values.shape
    if m < 2 or n < 2:
        raise ConfigError(f"Tukey HSD needs >= 2 topics and >= 2 systems, got {m}x{n}")
    x, keys = _canonical(X)
    observed = _column_sums(x)
    gap = np.abs(observed[:, None] - observed[None, :])

    _set_threads(workers)
    master = np.uint64(cfg.master_seed & 0xFFFFFFFFFFFFFFFF)
    counts = np.zeros(gap.shape, dtype=np.int64)
    for start in range(0, cfg.permutations, _BATCH):
        size = min(_BATCH, cfg.permutations - start)
        ranges = np.sort(_kernels.permuted_ranges(x, keys, master, start, size))
        counts += size - np.searchsorted(ranges, gap, side="left")
    np.fill_diagonal(counts, cfg.permutations)
    return PairwisePValues(X.systems, counts, cfg.permutations)


def pairwise_permutation_test(X: ScoreMatrix, permutations: int, seed: int = 0) -> PairwisePValues:
    """Uncorrected paired two-sided sign-flip test run separately for every pair.

    The same sign patterns are shared across pairs. Intended for Bonferroni
    cross-checks and for showing what happens without FWER control.
    """
    m, n = X.values.shape
    if m < 1 or n < 2:
        raise ConfigError("pairwise permutation test needs >= 1 topic and >= 2 systems")
    pairs = list(itertools.combinations(range(n), 2))
    diffs = np.stack([X.values[:, i] - X.values[:, j] for i, j in pairs])  # (pairs, m)
    observed = np.abs(diffs.sum(axis=1))
    tol = 1e-12 * np.abs(diffs).sum(axis=1)
    rng = np.random.default_rng(seed)
    hits = np.zeros(len(pairs), dtype=np.int64)
    step = max(1, _BATCH // max(m, 1))
    for start in range(0, permutations, step):
        size = min(step, permutations - start)
        signs = rng.integers(0, 2, size=(size, m)) * 2.0 - 1.0
        stats = np.abs(signs @ diffs.T)  # (size, pairs)
        hits += (stats >= observed - tol).sum(axis=0)
    counts = np.full((n, n), permutations, dtype=np.int64)
    for (i, j), h in zip(pairs, hits):
        counts[i, j] = counts[j, i] = h
    return PairwisePValues(X.systems, counts, permutations)


def significant_pairs(p: PairwisePValues, alpha: float, correction: str = "none") -> set[Pair]:
    """Pairs (in system order) with p < alpha; ``bonferroni`` multiplies p by the pair count."""
    if correction not in ("none", "bonferroni"):
        raise ConfigError(f"unknown correction {correction!r}")
    n = len(p.systems)
    factor = n * (n - 1) // 2 if correction == "bonferroni" else 1
    out = set()
    for i, j in p.pairs():
        # integer comparison avoids rounding at the boundary: count * factor / B < alpha
        if p.counts[i, j] * factor < alpha * p.permutations:
            out.add((p.systems[i], p.systems[j]))
    return out


def rank_systems(X: ScoreMatrix) -> list[str]:
    """Systems by descending mean score; exact ties go to the smaller system id."""
    means = X.means()
    return [s for _, s in sorted(zip(-means, X.systems))]


def kendall_tau(gold_ranking: Sequence[str], observed_ranking: Sequence[str]) -> float:
    """Kendall's tau-a between two total orders of the same items."""
    if len(set(gold_ranking)) != len(gold_ranking) or len(set(observed_ranking)) != len(observed_ranking):
        raise ValidationError("rankings must not repeat items")
    if set(gold_ranking) != set(observed_ranking):
        raise ValidationError("rankings cover different item sets")
    n = len(gold_ranking)
    if n < 2:
        raise ValidationError("kendall_tau needs at least two items")
    pos = {s: i for i, s in enumerate(observed_ranking)}
    seq = [pos[s] for s in gold_ranking]
    discordant = sum(1 for a in range(n) for b in range(a + 1, n) if seq[a] > seq[b])
    total = n * (n - 1) // 2
    return (total - 2 * discordant) / total
