"""Compare significance outcomes under gold and reduced judgments.

Every system pair becomes a triplet (i, j, c) with c one of >, >>, <, <<
(doubled symbols mark a significant difference). Gold and reduced triplets
are then cross-tabulated into active/mixed agreements and disagreements.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .measures import ScoreMatrix
from .significance import kendall_tau, rank_systems


class Outcome(str, enum.Enum):
    GT = ">"
    GG = ">>"
    LT = "<"
    LL = "<<"

    @property
    def significant(self) -> bool:
        return self in (Outcome.GG, Outcome.LL)

    @property
    def first_better(self) -> bool:
        return self in (Outcome.GT, Outcome.GG)

    @classmethod
    def of(cls, first_better: bool, significant: bool) -> Outcome:
        if first_better:
            return cls.GG if significant else cls.GT
        return cls.LL if significant else cls.LT


@dataclass(frozen=True)
class Triplet:
    i: str
    j: str
    c: Outcome


@dataclass(frozen=True)
class TripletSet:
    systems: tuple[str, ...]
    triplets: tuple[Triplet, ...]

    def significant(self) -> set[Triplet]:
        return {t for t in self.triplets if t.c.significant}

    def __len__(self) -> int:
        return len(self.triplets)


def build_triplets(X: ScoreMatrix, sig: Iterable[tuple[str, str]]) -> TripletSet:
    """One triplet per unordered pair, i before j in ``X.systems`` order.

    Direction follows ``rank_systems`` so exact ties resolve by system id.
    """
    position = {s: k for k, s in enumerate(rank_systems(X))}
    sig_pairs = {frozenset(p) for p in sig}
    triplets = []
    for a, b in itertools.combinations(X.systems, 2):
        c = Outcome.of(position[a] < position[b], frozenset((a, b)) in sig_pairs)
        triplets.append(Triplet(a, b, c))
    return TripletSet(X.systems, tuple(triplets))


@dataclass
class Classification:
    aa: int = 0
    ad: int = 0
    ma_g: int = 0
    ma_l: int = 0
    md_g: int = 0
    md_l: int = 0
    # pairs significant under neither set of judgments
    insig_agree: int = 0
    insig_disagree: int = 0
    ma_pairs: list[tuple[str, str]] = field(default_factory=list)

    @property
    def ma_total(self) -> int:
        return self.ma_g + self.ma_l

    @property
    def md_total(self) -> int:
        return self.md_g + self.md_l


def classify(gold: TripletSet, low: TripletSet) -> Classification:
    if gold.systems != low.systems:
        raise ValidationError("gold and reduced triplets are over different system lists")
    out = Classification()
    for g, l in zip(gold.triplets, low.triplets):
        same = g.c.first_better == l.c.first_better
        gs, ls = g.c.significant, l.c.significant
        if gs and ls:
            if same:
                out.aa += 1
            else:
                out.ad += 1
        elif gs:
            if same:
                out.ma_g += 1
                out.ma_pairs.append((g.i, g.j))
            else:
                out.md_g += 1
        elif ls:
            if same:
                out.ma_l += 1
                out.ma_pairs.append((g.i, g.j))
            else:
                out.md_l += 1
        elif same:
            out.insig_agree += 1
        else:
            out.insig_disagree += 1
    return out


def precision_recall(gold_sig: Iterable[Triplet], low_sig: Iterable[Triplet],
                     directional: bool = True) -> tuple[float, float]:
    """Precision and recall of the reduced significant set against the gold one.

    With ``directional`` a pair only matches when both sides agree on which
    system is better. An empty side scores 1 (nothing claimed, nothing missed).
    """
    if directional:
        g = {(t.i, t.j, t.c) for t in gold_sig}
        l = {(t.i, t.j, t.c) for t in low_sig}
    else:
        g = {(t.i, t.j) for t in gold_sig}
        l = {(t.i, t.j) for t in low_sig}
    common = len(g & l)
    precision = common / len(l) if l else 1.0
    recall = common / len(g) if g else 1.0
    return precision, recall


def bias(aa: float, ad: float, ma_l: float, md_l: float) -> float:
    """Publication bias: share of reduced-judgment significances the gold judgments do not back."""
    denom = aa + ad + ma_l + md_l
    if denom == 0:
        return 0.0
    return 1.0 - aa / denom


@dataclass(frozen=True)
class AgreementReport:
    aa: int
    ad: int
    ma_g: int
    ma_l: int
    md_g: int
    md_l: int
    precision: float
    recall: float
    tau: float
    bias: float
    n_gold_sig: int
    n_low_sig: int
    insig_agree: int = 0
    insig_disagree: int = 0

    @property
    def ma_total(self) -> int:
        return self.ma_g + self.ma_l

    @property
    def md_total(self) -> int:
        return self.md_g + self.md_l

    def as_dict(self) -> dict:
        return asdict(self)


def compare(gold: TripletSet, low: TripletSet, gold_ranking: Sequence[str], low_ranking: Sequence[str],
            directional: bool = True) -> tuple[AgreementReport, Classification]:
    cls = classify(gold, low)
    gsig, lsig = gold.significant(), low.significant()
    p, r = precision_recall(gsig, lsig, directional)
    report = AgreementReport(
        aa=cls.aa, ad=cls.ad, ma_g=cls.ma_g, ma_l=cls.ma_l, md_g=cls.md_g, md_l=cls.md_l,
        precision=p, recall=r, tau=kendall_tau(gold_ranking, low_ranking),
        bias=bias(cls.aa, cls.ad, cls.ma_l, cls.md_l),
        n_gold_sig=len(gsig), n_low_sig=len(lsig),
        insig_agree=cls.insig_agree, insig_disagree=cls.insig_disagree,
    )
    return report, cls


@dataclass(frozen=True)
class MABin:
    start: int  # first gold-ranking position in the bin (1-based)
    count: int
    median: float = math.nan
    q1: float = math.nan
    q3: float = math.nan
    min: float = math.nan
    max: float = math.nan

    @property
    def empty(self) -> bool:
        return self.count == 0


def ma_values(gold_ranking: Sequence[str], low_X: ScoreMatrix,
              ma_pairs: Iterable[tuple[str, str]]) -> list[tuple[int, float]]:
    """(gold position, signed score gap) entries: +gap for the pair's better system, -gap for the other."""
    position = {s: k for k, s in enumerate(gold_ranking, start=1)}
    means = dict(zip(low_X.systems, low_X.means()))
    low_pos = {s: k for k, s in enumerate(rank_systems(low_X))}
    out = []
    for a, b in ma_pairs:
        best, worst = (a, b) if low_pos[a] < low_pos[b] else (b, a)
        gap = float(means[best] - means[worst])
        out.append((position[best], gap))
        out.append((position[worst], -gap))
    return out


def bin_by_position(values: Iterable[tuple[int, float]], n_positions: int, bin_size: int = 3) -> list[MABin]:
    if bin_size < 1:
        raise ValidationError(f"bin_size must be >= 1, got {bin_size}")
    n_bins = max(1, math.ceil(n_positions / bin_size))
    grouped: list[list[float]] = [[] for _ in range(n_bins)]
    for pos, v in values:
        grouped[(pos - 1) // bin_size].append(v)
    bins = []
    for b, vals in enumerate(grouped):
        start = b * bin_size + 1
        if not vals:
            bins.append(MABin(start, 0))
            continue
        arr = np.asarray(vals)
        q1, med, q3 = np.percentile(arr, [25, 50, 75])  # linear interpolation
        bins.append(MABin(start, len(vals), float(med), float(q1), float(q3), float(arr.min()), float(arr.max())))
    return bins


def ma_distribution(gold_ranking: Sequence[str], low_X: ScoreMatrix, ma_pairs: Iterable[tuple[str, str]],
                    bin_size: int = 3) -> list[MABin]:
    return bin_by_position(ma_values(gold_ranking, low_X, ma_pairs), len(gold_ranking), bin_size)


def write_ma_csv(bins: Sequence[MABin], sink: IO[str]) -> None:
    sink.write("bin_start,median,q1,q3,min,max,count\n")
    for b in bins:
        if b.empty:
            sink.write(f"{b.start},,,,,,0\n")
        else:
            sink.write(f"{b.start},{b.median:.10g},{b.q1:.10g},{b.q3:.10g},{b.min:.10g},{b.max:.10g},{b.count}\n")


def report_from_mapping(d: Mapping) -> AgreementReport:
    return AgreementReport(**{k: d[k] for k in AgreementReport.__dataclass_fields__ if k in d})
