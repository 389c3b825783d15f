"""Annotator-alignment gates and the training-set hand-off.

Principle 1 gates a candidate annotator against human majority-vote
gold: every per-class kappa must clear the floor and macro-F1 must clear
its floor. Principle 2 additionally bounds how far a cheaper annotator
may fall below the reference annotator on the same gold set.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from .agreement import (
    DEGENERATE_MARGINALS,
    MetricsReport,
    class_metrics,
    cohen_kappa,
)
from .labels import LABEL_KEYS, LabelVector


@dataclass(frozen=True)
class GatePolicy:
    min_kappa_per_class: float = 0.70
    min_macro_f1: float = 0.80
    max_degradation: float = 0.05

    def __post_init__(self):
        for name in ("min_kappa_per_class", "min_macro_f1", "max_degradation"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be in [0,1], got {v}")


def fingerprint_gold(gold: Sequence[LabelVector]) -> str:
    h = hashlib.sha256()
    for lv in gold:
        h.update(",".join("1" if lv.flag(k) else "0" for k in LABEL_KEYS).encode())
        h.update(b"\n")
    return h.hexdigest()


def gate_decision(
    kappas: dict[str, object],
    macro_f1: float,
    policy: GatePolicy,
    identical_classes: frozenset[str] = frozenset(),
) -> tuple[bool, tuple[str, ...]]:
    """Principle-1 rule on raw numbers.

    A DegenerateMarginals kappa passes only for classes listed in
    identical_classes (candidate equals gold there).
    """
    reasons: list[str] = []
    for key in LABEL_KEYS:
        if key not in kappas:
            raise ValueError(f"kappa missing for class {key!r}")
        k = kappas[key]
        if k is DEGENERATE_MARGINALS:
            if key not in identical_classes:
                reasons.append(
                    f"class {key!r}: degenerate marginals without identity"
                )
        elif float(k) < policy.min_kappa_per_class:
            reasons.append(
                f"class {key!r}: kappa {float(k):.4f} < {policy.min_kappa_per_class}"
            )
    if macro_f1 < policy.min_macro_f1:
        reasons.append(f"macro-F1 {macro_f1:.4f} < {policy.min_macro_f1}")
    return (not reasons, tuple(reasons))


@dataclass(frozen=True)
class AlignmentReport:
    principle: int
    per_class_kappa: dict[str, object]  # float or the DegenerateMarginals sentinel
    metrics: MetricsReport
    decision: str  # "pass" | "fail"
    reasons: tuple[str, ...]
    gold_fingerprint: str
    policy: GatePolicy
    degradation: float | None = None  # principle 2 only: hq macro-F1 − os macro-F1

    @property
    def passed(self) -> bool:
        return self.decision == "pass"

    @property
    def macro_f1(self) -> float:
        return self.metrics.macro.f1

    def to_json(self) -> str:
        return json.dumps(
            {
                "principle": self.principle,
                "decision": self.decision,
                "reasons": list(self.reasons),
                "per_class_kappa": {
                    k: (None if v is DEGENERATE_MARGINALS else float(v))
                    for k, v in self.per_class_kappa.items()
                },
                "macro_f1": self.macro_f1,
                "degradation": self.degradation,
                "gold_fingerprint": self.gold_fingerprint,
                "policy": {
                    "min_kappa_per_class": self.policy.min_kappa_per_class,
                    "min_macro_f1": self.policy.min_macro_f1,
                    "max_degradation": self.policy.max_degradation,
                },
            },
            indent=2,
        )

    def csv_rows(self) -> list[tuple]:
        rows = []
        for key, kappa, m in zip(
            LABEL_KEYS,
            (self.per_class_kappa[k] for k in LABEL_KEYS),
            (self.metrics.per_class[k] for k in LABEL_KEYS),
        ):
            kval = "" if kappa is DEGENERATE_MARGINALS else f"{float(kappa):.6g}"
            rows.append(
                (key, kval, m.accuracy, m.precision, m.recall, m.f1, m.support)
            )
        mac = self.metrics.macro
        rows.append(
            ("macro", "", mac.accuracy, mac.precision, mac.recall, mac.f1, mac.support)
        )
        return rows


def evaluate_candidate(
    candidate: Sequence[LabelVector],
    gold: Sequence[LabelVector],
    policy: GatePolicy | None = None,
) -> AlignmentReport:
    """Principle-1 gate: candidate labels vs human majority-vote gold."""
    policy = policy or GatePolicy()
    if len(candidate) != len(gold):
        raise ValueError(f"{len(candidate)} candidate labels vs {len(gold)} gold")
    if not gold:
        raise ValueError("empty gold set")
    kappas: dict[str, object] = {}
    identical: set[str] = set()
    for key in LABEL_KEYS:
        a = [1 if lv.flag(key) else 0 for lv in candidate]
        b = [1 if lv.flag(key) else 0 for lv in gold]
        kappas[key] = cohen_kappa(a, b)
        if a == b:
            identical.add(key)
    metrics = class_metrics(candidate, gold)
    ok, reasons = gate_decision(
        kappas, metrics.macro.f1, policy, frozenset(identical)
    )
    return AlignmentReport(
        principle=1,
        per_class_kappa=kappas,
        metrics=metrics,
        decision="pass" if ok else "fail",
        reasons=reasons,
        gold_fingerprint=fingerprint_gold(gold),
        policy=policy,
    )


def evaluate_degradation(
    os_report: AlignmentReport,
    hq_report: AlignmentReport,
    policy: GatePolicy | None = None,
) -> AlignmentReport:
    """Principle-2 gate: the cheaper annotator must stay within
    max_degradation of the reference's macro-F1 and pass principle 1.

    Both inputs must have been evaluated against the same gold set.
    """
    policy = policy or GatePolicy()
    if os_report.gold_fingerprint != hq_report.gold_fingerprint:
        raise ValueError(
            "reports evaluated against different gold sets "
            f"({os_report.gold_fingerprint[:12]} vs {hq_report.gold_fingerprint[:12]})"
        )
    degradation = hq_report.macro_f1 - os_report.macro_f1
    reasons = list(os_report.reasons)
    # 1e-12 guard: subtraction dust must not flip a boundary equality
    if os_report.macro_f1 < hq_report.macro_f1 - policy.max_degradation - 1e-12:
        reasons.append(
            f"macro-F1 {os_report.macro_f1:.4f} more than "
            f"{policy.max_degradation} below reference {hq_report.macro_f1:.4f}"
        )
    return AlignmentReport(
        principle=2,
        per_class_kappa=os_report.per_class_kappa,
        metrics=os_report.metrics,
        decision="pass" if not reasons else "fail",
        reasons=tuple(reasons),
        gold_fingerprint=os_report.gold_fingerprint,
        policy=policy,
        degradation=degradation,
    )


@dataclass(frozen=True)
class TrainingExample:
    post_id: str
    text: str
    labels: LabelVector
    explanation: str = ""


def export_training_set(
    examples: Iterable[TrainingExample],
    path,
    holdout_post_ids: frozenset[str] | set[str] = frozenset(),
) -> int:
    """Write the machine-annotated training JSONL.

    Any example whose post id sits in the held-out gold set is a leak
    and aborts the export.
    """
    examples = list(examples)
    leaked = sorted({e.post_id for e in examples} & set(holdout_post_ids))
    if leaked:
        raise ValueError(
            f"{len(leaked)} training examples overlap the held-out gold set: "
            f"{leaked[:5]}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        for e in examples:
            fh.write(
                json.dumps(
                    {
                        "post_id": e.post_id,
                        "text": e.text,
                        "labels": e.labels.to_mapping(),
                        "explanation": e.explanation,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    return len(examples)


def load_training_set(path) -> list[TrainingExample]:
    out: list[TrainingExample] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                labels, _ = LabelVector.from_mapping(rec["labels"])
                out.append(
                    TrainingExample(
                        post_id=str(rec.get("post_id", f"line{lineno}")),
                        text=rec["text"],
                        labels=labels,
                        explanation=rec.get("explanation", ""),
                    )
                )
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad training example: {exc}")
    return out
