"""Per-category confidence-threshold tuning and the prompting-mode benchmark.

Thresholds are tuned per category by exhaustive sweep over a fixed grid;
the prediction rule is confidence >= threshold. The benchmark compares
bare, in_context and system_steering prompting with the rda row
(system_steering plus thresholds tuned on a disjoint split).
"""
from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

from .agreement import ClassMetrics, MetricsReport, class_metrics
from .corpus import Post
from .labels import CATEGORIES, LabelVector
from .llm_client import (
    AnnotationOutcome,
    ConfidenceVector,
    DomainProfile,
    RequestSettings,
    annotate_batch,
)

OBJECTIVES = ("f1", "accuracy")
BENCHMARK_ROWS = ("bare", "in_context", "system_steering", "rda")


@dataclass(frozen=True)
class ThresholdProfile:
    thresholds: dict[str, float]
    objective: str = "f1"
    grid_step: float = 0.01
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}")
        if not (0 < self.grid_step <= 1):
            raise ValueError("grid_step must be in (0, 1]")
        missing = [k for k in CATEGORIES if k not in self.thresholds]
        if missing:
            raise ValueError(f"thresholds missing for {missing}")
        steps = round(1.0 / self.grid_step)
        for k, t in self.thresholds.items():
            if not (0.0 <= t <= 1.0):
                raise ValueError(f"threshold for {k!r} outside [0,1]")
            i = round(t / self.grid_step)
            if i > steps or abs(i * self.grid_step - t) > 1e-9:
                raise ValueError(f"threshold {t} for {k!r} is off the grid")

    def to_json(self) -> str:
        return json.dumps(
            {
                "thresholds": self.thresholds,
                "objective": self.objective,
                "grid_step": self.grid_step,
                "flags": list(self.flags),
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "ThresholdProfile":
        rec = json.loads(text)
        return cls(
            thresholds={k: float(v) for k, v in rec["thresholds"].items()},
            objective=rec.get("objective", "f1"),
            grid_step=float(rec.get("grid_step", 0.01)),
            flags=tuple(rec.get("flags", [])),
        )


def uniform_profile(threshold: float = 0.5, grid_step: float = 0.01) -> ThresholdProfile:
    return ThresholdProfile(
        thresholds={k: threshold for k in CATEGORIES}, grid_step=grid_step
    )


def _objective_value(
    objective: str, tp: int, fp: int, fn: int, tn: int
) -> float:
    if objective == "accuracy":
        total = tp + fp + fn + tn
        return (tp + tn) / total if total else 0.0
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    return 2 * prec * rec / (prec + rec) if prec + rec else 0.0


@dataclass(frozen=True)
class TuneResult:
    profile: ThresholdProfile
    # (category, threshold, objective) for every grid point, plot-ready
    curve: tuple[tuple[str, float, float], ...]
    best_objective: dict[str, float]

    def curve_rows(self) -> list[tuple[str, float, float]]:
        return list(self.curve)


def tune_thresholds(
    confs: Sequence[ConfidenceVector],
    gold: Sequence[LabelVector],
    objective: str = "f1",
    grid_step: float = 0.01,
) -> TuneResult:
    """Exhaustive per-category threshold sweep against gold labels.

    Grid points are i*grid_step for i in 0..round(1/grid_step); predict 1
    iff confidence >= t. Among maximizing grid values the lower-median is
    chosen. A category with no positive or no negative gold falls back to
    threshold 0.5 with a flag; confidences sitting below the negatives'
    (inverted) raise a warning and set a flag.
    """
    if not confs:
        raise ValueError("empty input")
    if len(confs) != len(gold):
        raise ValueError(f"{len(confs)} confidences vs {len(gold)} gold labels")
    if objective not in OBJECTIVES:
        raise ValueError(f"objective must be one of {OBJECTIVES}")
    steps = round(1.0 / grid_step)
    grid = [i * grid_step for i in range(steps + 1)]
    thresholds: dict[str, float] = {}
    best: dict[str, float] = {}
    flags: list[str] = []
    curve: list[tuple[str, float, float]] = []
    for key in CATEGORIES:
        c = [cv.confidence(key) for cv in confs]
        g = [lv.flag(key) for lv in gold]
        n_pos = sum(g)
        n_neg = len(g) - n_pos
        if n_pos == 0 or n_neg == 0:
            which = "no_positive" if n_pos == 0 else "no_negative"
            flags.append(f"{which}:{key}")
            thresholds[key] = 0.5
            best[key] = float("nan")
            continue
        pos_mean = sum(ci for ci, gi in zip(c, g) if gi) / n_pos
        neg_mean = sum(ci for ci, gi in zip(c, g) if not gi) / n_neg
        if pos_mean < neg_mean:
            flags.append(f"inverted_confidences:{key}")
            warnings.warn(
                f"confidences for {key!r} run opposite to gold labels",
                stacklevel=2,
            )
        scores: list[float] = []
        for t in grid:
            tp = fp = fn = tn = 0
            for ci, gi in zip(c, g):
                pred = ci >= t
                if pred and gi:
                    tp += 1
                elif pred:
                    fp += 1
                elif gi:
                    fn += 1
                else:
                    tn += 1
            scores.append(_objective_value(objective, tp, fp, fn, tn))
        curve.extend((key, t, s) for t, s in zip(grid, scores))
        top = max(scores)
        maximizers = [t for t, s in zip(grid, scores) if s == top]
        thresholds[key] = maximizers[(len(maximizers) - 1) // 2]
        best[key] = top
    profile = ThresholdProfile(
        thresholds=thresholds,
        objective=objective,
        grid_step=grid_step,
        flags=tuple(flags),
    )
    return TuneResult(profile=profile, curve=tuple(curve), best_objective=best)


def classify(conf: ConfidenceVector, profile: ThresholdProfile) -> LabelVector:
    """Threshold each category's confidence; the none flag is derived."""
    return LabelVector.from_flags(
        *(conf.confidence(k) >= profile.thresholds[k] for k in CATEGORIES)
    )


def classify_many(
    confs: Iterable[ConfidenceVector], profile: ThresholdProfile
) -> list[LabelVector]:
    return [classify(c, profile) for c in confs]


def fingerprint_posts(posts: Iterable[Post]) -> str:
    h = hashlib.sha256()
    for p in sorted(posts, key=lambda p: p.id):
        h.update(p.id.encode("utf-8"))
        h.update(b"\x00")
        h.update(p.text.encode("utf-8"))
        h.update(b"\x01")
    return h.hexdigest()


@dataclass
class BenchmarkTable:
    rows: dict[str, ClassMetrics]
    per_class: dict[str, MetricsReport]
    rda_profile: ThresholdProfile
    tune_fingerprint: str
    eval_fingerprint: str

    def csv_rows(self) -> list[tuple]:
        out = []
        for mode in BENCHMARK_ROWS:
            m = self.rows[mode]
            out.append((mode, m.accuracy, m.precision, m.recall, m.f1))
        return out


def benchmark_modes(
    tune_posts: Sequence[Post],
    tune_gold: dict[str, LabelVector],
    eval_posts: Sequence[Post],
    eval_gold: dict[str, LabelVector],
    endpoint,
    profile_by_mode: dict[str, DomainProfile],
    settings: RequestSettings | None = None,
    objective: str = "f1",
    grid_step: float = 0.01,
    concurrency_limit: int = 4,
) -> BenchmarkTable:
    """Score the three prompting modes plus rda on a held-out eval set.

    The rda row reuses the system_steering outcomes, classified with
    thresholds tuned on the tuning split. Tuning and eval posts must be
    disjoint; both gold mappings must cover their posts.
    """
    overlap = {p.id for p in tune_posts} & {p.id for p in eval_posts}
    if overlap:
        raise ValueError(f"tuning and eval splits share posts: {sorted(overlap)[:5]}")
    for name, posts, gold in (
        ("tuning", tune_posts, tune_gold),
        ("eval", eval_posts, eval_gold),
    ):
        missing = [p.id for p in posts if p.id not in gold]
        if missing:
            raise ValueError(f"{name} gold missing for posts {missing[:5]}")
    noop = lambda s: None  # mock endpoints never need real backoff
    outcomes_by_mode: dict[str, list[AnnotationOutcome]] = {}
    for mode in ("bare", "in_context", "system_steering"):
        profile = profile_by_mode[mode]
        report = annotate_batch(
            eval_posts,
            endpoint,
            profile,
            mode,
            concurrency_limit=concurrency_limit,
            settings=settings,
            sleep=noop,
        )
        if report.failed:
            raise ValueError(
                f"benchmark requires full coverage; {len(report.failed)} "
                f"posts failed in mode {mode}"
            )
        outcomes_by_mode[mode] = report.outcomes
    tune_report = annotate_batch(
        tune_posts,
        endpoint,
        profile_by_mode["system_steering"],
        "system_steering",
        concurrency_limit=concurrency_limit,
        settings=settings,
        sleep=noop,
    )
    if tune_report.failed:
        raise ValueError(
            f"benchmark requires full coverage; {len(tune_report.failed)} "
            "posts failed while annotating the tuning split"
        )
    tuned = tune_thresholds(
        [o.confidence for o in tune_report.outcomes],
        [tune_gold[o.post_id] for o in tune_report.outcomes],
        objective=objective,
        grid_step=grid_step,
    )
    rows: dict[str, ClassMetrics] = {}
    per_class: dict[str, MetricsReport] = {}
    for mode in ("bare", "in_context", "system_steering"):
        outs = outcomes_by_mode[mode]
        report = class_metrics(
            [o.labels for o in outs], [eval_gold[o.post_id] for o in outs]
        )
        rows[mode] = report.macro
        per_class[mode] = report
    steer_outs = outcomes_by_mode["system_steering"]
    rda_preds = [classify(o.confidence, tuned.profile) for o in steer_outs]
    rda_report = class_metrics(
        rda_preds, [eval_gold[o.post_id] for o in steer_outs]
    )
    rows["rda"] = rda_report.macro
    per_class["rda"] = rda_report
    return BenchmarkTable(
        rows=rows,
        per_class=per_class,
        rda_profile=tuned.profile,
        tune_fingerprint=fingerprint_posts(tune_posts),
        eval_fingerprint=fingerprint_posts(eval_posts),
    )
