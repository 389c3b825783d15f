"""Inter-annotator agreement and classification metrics.

All agreement statistics operate on binary ratings for a single category.
Degenerate marginals (chance agreement exactly 1) cannot be scored by the
kappa/alpha formulas; those cases return the ``DEGENERATE_MARGINALS``
sentinel instead of raising, so gate logic can decide what they mean.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .labels import LABEL_KEYS, AnnotationSet, LabelVector


class DegenerateMarginals:
    """Sentinel for agreement values with zero chance-corrected range."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "DegenerateMarginals"

    def __float__(self):
        return float("nan")


DEGENERATE_MARGINALS = DegenerateMarginals()

Rating = int | None


@dataclass(frozen=True)
class RatingsMatrix:
    """Items x annotators grid of {0, 1, missing} for one category."""

    rows: tuple[tuple[Rating, ...], ...]

    def __post_init__(self):
        if not self.rows:
            raise ValueError("empty ratings matrix")
        width = len(self.rows[0])
        if width < 2:
            raise ValueError("at least two annotators required")
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise ValueError(f"item {i}: ragged row")
            if any(v not in (0, 1, None) for v in row):
                raise ValueError(f"item {i}: ratings must be 0, 1 or missing")
            if all(v is None for v in row):
                raise ValueError(f"item {i}: no ratings at all")

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence[Rating]]) -> "RatingsMatrix":
        return cls(tuple(tuple(row) for row in rows))

    @property
    def n_annotators(self) -> int:
        return len(self.rows[0])

    def is_complete(self) -> bool:
        return all(v is not None for row in self.rows for v in row)


def ratings_from_annotation_sets(
    sets: Sequence[AnnotationSet], category: str, kinds: set[str] | None = None
) -> RatingsMatrix:
    """Assemble the per-category matrix from gold-style annotation sets.

    Annotator columns are the sorted union of annotator ids; posts an
    annotator skipped become missing cells.
    """
    annotators = sorted(
        {
            e.annotator_id
            for s in sets
            for e in s.entries
            if kinds is None or e.kind in kinds
        }
    )
    rows = []
    for s in sets:
        by_id = {
            e.annotator_id: e
            for e in s.entries
            if kinds is None or e.kind in kinds
        }
        rows.append(
            tuple(
                int(by_id[a].labels.flag(category)) if a in by_id else None
                for a in annotators
            )
        )
    return RatingsMatrix.from_rows(rows)


def cohen_kappa(a: Sequence[int], b: Sequence[int]):
    """Cohen's kappa for two aligned binary sequences.

    Returns 1.0 when chance agreement is 1 and the sequences are identical,
    the DEGENERATE_MARGINALS sentinel when chance agreement is 1 otherwise.
    """
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if not a:
        raise ValueError("empty input")
    a = [int(v) for v in a]
    b = [int(v) for v in b]
    if any(v not in (0, 1) for v in a + b):
        raise ValueError("ratings must be binary")
    n = len(a)
    p_o = sum(x == y for x, y in zip(a, b)) / n
    pa1 = sum(a) / n
    pb1 = sum(b) / n
    p_e = pa1 * pb1 + (1.0 - pa1) * (1.0 - pb1)
    if p_e == 1.0:
        return 1.0 if a == b else DEGENERATE_MARGINALS
    return (p_o - p_e) / (1.0 - p_e)


def fleiss_kappa(m: RatingsMatrix):
    """Fleiss' kappa over the two nominal categories; complete data only."""
    if not m.is_complete():
        raise ValueError(
            "ratings contain missing cells; use krippendorff_alpha instead"
        )
    r = m.n_annotators
    n = len(m.rows)
    ones = [sum(row) for row in m.rows]
    p1 = sum(ones) / (n * r)
    p0 = 1.0 - p1
    p_e = p1 * p1 + p0 * p0
    if p_e == 1.0:
        return DEGENERATE_MARGINALS
    p_bar = sum(
        (o * (o - 1) + (r - o) * (r - o - 1)) / (r * (r - 1)) for o in ones
    ) / n
    return (p_bar - p_e) / (1.0 - p_e)


def krippendorff_alpha(m: RatingsMatrix):
    """Krippendorff's alpha, nominal, via the coincidence-matrix form.

    Items with fewer than two ratings contribute nothing; missing cells are
    fine. All pooled values identical -> DEGENERATE_MARGINALS.
    """
    o11 = o00 = o_dis = 0.0  # o_dis = o01 + o10
    n1 = n0 = 0
    for row in m.rows:
        vals = [v for v in row if v is not None]
        mu = len(vals)
        if mu < 2:
            continue
        u1 = sum(vals)
        u0 = mu - u1
        o11 += u1 * (u1 - 1) / (mu - 1)
        o00 += u0 * (u0 - 1) / (mu - 1)
        o_dis += 2 * u1 * u0 / (mu - 1)
        n1 += u1
        n0 += u0
    n = n1 + n0
    if n < 2:
        raise ValueError("no pairable values (every item has < 2 ratings)")
    d_o = o_dis / n
    d_e = 2 * n1 * n0 / (n * (n - 1))
    if d_e == 0.0:
        return DEGENERATE_MARGINALS
    return 1.0 - d_o / d_e


@dataclass(frozen=True)
class ClassMetrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    support: int
    flags: tuple[str, ...] = ()


@dataclass
class MetricsReport:
    per_class: dict[str, ClassMetrics]
    macro: ClassMetrics

    def rows(self) -> list[tuple]:
        """CSV-ready rows: one per category plus the macro line."""
        out = []
        for key in LABEL_KEYS:
            cm = self.per_class[key]
            out.append(
                (key, cm.accuracy, cm.precision, cm.recall, cm.f1, cm.support,
                 ";".join(cm.flags))
            )
        cm = self.macro
        out.append(
            ("macro", cm.accuracy, cm.precision, cm.recall, cm.f1, cm.support,
             ";".join(cm.flags))
        )
        return out


def _single_class_metrics(pred: Sequence[bool], gold: Sequence[bool]) -> ClassMetrics:
    tp = sum(p and g for p, g in zip(pred, gold))
    fp = sum(p and not g for p, g in zip(pred, gold))
    fn = sum(g and not p for p, g in zip(pred, gold))
    tn = len(pred) - tp - fp - fn
    flags = []
    if tp + fp == 0:
        precision = 0.0
        flags.append("zero_precision_denominator")
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall = 0.0
        flags.append("zero_recall_denominator")
    else:
        recall = tp / (tp + fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return ClassMetrics(
        accuracy=(tp + tn) / len(pred),
        precision=precision,
        recall=recall,
        f1=f1,
        support=tp + fn,
        flags=tuple(flags),
    )


def class_metrics(
    pred: Sequence[LabelVector], gold: Sequence[LabelVector]
) -> MetricsReport:
    """Per-category accuracy/precision/recall/F1 plus unweighted macro.

    The macro average runs over all five keys, None included.
    """
    if len(pred) != len(gold):
        raise ValueError(f"length mismatch: {len(pred)} vs {len(gold)}")
    if not pred:
        raise ValueError("empty input")
    per_class = {
        key: _single_class_metrics(
            [p.flag(key) for p in pred], [g.flag(key) for g in gold]
        )
        for key in LABEL_KEYS
    }
    k = len(LABEL_KEYS)
    macro = ClassMetrics(
        accuracy=sum(c.accuracy for c in per_class.values()) / k,
        precision=sum(c.precision for c in per_class.values()) / k,
        recall=sum(c.recall for c in per_class.values()) / k,
        f1=sum(c.f1 for c in per_class.values()) / k,
        support=sum(c.support for c in per_class.values()),
        flags=(),
    )
    return MetricsReport(per_class=per_class, macro=macro)
