"""Five-way othering label space: parsing, voting, gold-set IO.

The four category flags plus ``None`` form one label vector per post.
``None`` is derived: it is true exactly when all four category flags are
false. Machine replies violating that rule are repaired toward the four
category flags and the repair is flagged to the caller.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

CULTURE = "Threats to Culture or Identity"
SURVIVAL = "Threats to Survival or Physical Security"
VILIFICATION = "Vilification/Villainization"
DEHUMANIZATION = "Explicit Dehumanization"
NONE = "None"

#: The four substantive categories, in canonical order.
CATEGORIES = (CULTURE, SURVIVAL, VILIFICATION, DEHUMANIZATION)
#: All five keys a machine reply must carry.
LABEL_KEYS = CATEGORIES + (NONE,)

_FIELD_BY_KEY = {
    CULTURE: "culture_identity",
    SURVIVAL: "survival_security",
    VILIFICATION: "vilification",
    DEHUMANIZATION: "dehumanization",
    NONE: "none",
}

AnnotatorKind = Literal["human", "hq_llm", "os_llm"]


class ParseFailure(ValueError):
    """No brace-delimited label mapping could be found in the reply."""


class SchemaMismatch(ValueError):
    """A mapping was found but its keys or values are wrong."""

    def __init__(self, message: str, offending: Sequence[str] = ()):
        super().__init__(message)
        self.offending = tuple(offending)


@dataclass(frozen=True)
class LabelVector:
    culture_identity: bool
    survival_security: bool
    vilification: bool
    dehumanization: bool
    none: bool

    def __post_init__(self):
        if self.none != (not any(self.category_flags())):
            raise ValueError(
                "inconsistent vector: none must be true iff all four "
                "category flags are false (use from_mapping to repair)"
            )

    @classmethod
    def from_flags(
        cls,
        culture_identity: bool,
        survival_security: bool,
        vilification: bool,
        dehumanization: bool,
    ) -> "LabelVector":
        """Build a vector from the four category flags; ``none`` is derived."""
        flags = (culture_identity, survival_security, vilification, dehumanization)
        return cls(*[bool(f) for f in flags], none=not any(flags))

    @classmethod
    def from_mapping(cls, mapping: dict) -> tuple["LabelVector", bool]:
        """Build from a five-key {0,1} mapping, repairing ``none`` if needed.

        Returns (vector, repaired). The four category flags win: ``none``
        is recomputed from them and ``repaired`` reports whether the
        supplied value disagreed.
        """
        missing = [k for k in LABEL_KEYS if k not in mapping]
        extra = [k for k in mapping if k not in LABEL_KEYS]
        if missing or extra:
            raise SchemaMismatch(
                f"label mapping keys wrong; missing={missing} unknown={extra}",
                offending=missing + extra,
            )
        bad = [k for k in LABEL_KEYS if mapping[k] not in (0, 1, False, True)]
        if bad:
            raise SchemaMismatch(
                f"label values outside {{0,1}} for keys {bad}", offending=bad
            )
        vec = cls.from_flags(*[bool(mapping[k]) for k in CATEGORIES])
        repaired = bool(mapping[NONE]) != vec.none
        return vec, repaired

    def category_flags(self) -> tuple[bool, bool, bool, bool]:
        return (
            self.culture_identity,
            self.survival_security,
            self.vilification,
            self.dehumanization,
        )

    def any_othering(self) -> bool:
        return any(self.category_flags())

    def flag(self, key: str) -> bool:
        return getattr(self, _FIELD_BY_KEY[key])

    def to_mapping(self) -> dict[str, int]:
        return {k: int(self.flag(k)) for k in LABEL_KEYS}


NONE_VECTOR = LabelVector(False, False, False, False, True)


@dataclass(frozen=True)
class AnnotationEntry:
    annotator_id: str
    kind: AnnotatorKind
    labels: LabelVector
    explanation: str | None = None


@dataclass
class AnnotationSet:
    """All annotations gathered for one post."""

    post_id: str
    entries: list[AnnotationEntry] = field(default_factory=list)

    def __post_init__(self):
        if not self.entries:
            raise ValueError(f"post {self.post_id}: at least one entry required")
        ids = [e.annotator_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError(f"post {self.post_id}: duplicate annotator ids")


# A reply's mapping block: first '{' to its matching '}'. Replies carry no
# nested braces inside the mapping, so a non-greedy scan is enough.
_BRACE_RE = re.compile(r"\{[^{}]*\}", re.DOTALL)
# One entry inside the block: quoted or bare key, then a value token.
_ENTRY_RE = re.compile(
    r"""(['"])(?P<key>.*?)\1\s*:\s*(?P<q>['"]?)(?P<value>[^,'"}\s]+)(?P=q)""",
    re.DOTALL,
)


@dataclass(frozen=True)
class ParsedReply:
    labels: LabelVector
    explanation: str
    repaired: bool
    #: character span of each category's value token within the raw reply,
    #: used downstream to line label values up with token logprobs.
    value_spans: dict[str, tuple[int, int]]


def parse_reply(raw: str) -> ParsedReply:
    """Extract the first five-key label mapping from a model reply.

    Everything outside the mapping block becomes the explanation. Raises
    ParseFailure when no mapping-shaped block exists and SchemaMismatch
    when the block's keys or values are off.
    """
    match = None
    entries: list[re.Match] = []
    for candidate in _BRACE_RE.finditer(raw):
        entries = list(_ENTRY_RE.finditer(candidate.group(0)))
        if entries:
            match = candidate
            break
    if match is None:
        raise ParseFailure("no brace-delimited mapping in reply")

    mapping: dict[str, object] = {}
    spans: dict[str, tuple[int, int]] = {}
    for ent in entries:
        key = ent.group("key").strip()
        value = ent.group("value")
        mapping[key] = int(value) if value in ("0", "1") else value
        spans[key] = (
            match.start() + ent.start("value"),
            match.start() + ent.end("value"),
        )

    labels, repaired = LabelVector.from_mapping(mapping)
    explanation = (raw[: match.start()] + raw[match.end() :]).strip()
    return ParsedReply(
        labels=labels,
        explanation=explanation,
        repaired=repaired,
        value_spans={k: spans[k] for k in CATEGORIES},
    )


def parse_machine_labels(raw: str) -> tuple[LabelVector, str]:
    parsed = parse_reply(raw)
    return parsed.labels, parsed.explanation


def serialize_labels(vec: LabelVector) -> str:
    """Canonical reply-style rendering of a vector (inverse of parsing)."""
    inner = ", ".join(f"'{k}': {int(vec.flag(k))}" for k in LABEL_KEYS)
    return "{" + inner + "}"


def majority_vote(a: AnnotationSet, eligible_kinds: set[str]) -> LabelVector:
    """Per-flag strict majority over the eligible entries; ties go negative.

    The ``none`` flag is recomputed from the four category outcomes
    afterwards, so the returned vector always satisfies the invariant.
    """
    eligible = [e for e in a.entries if e.kind in eligible_kinds]
    if not eligible:
        raise ValueError(f"post {a.post_id}: no entries of kinds {sorted(eligible_kinds)}")
    half = len(eligible) / 2.0
    votes = [
        sum(e.labels.flag(key) for e in eligible) > half for key in CATEGORIES
    ]
    return LabelVector.from_flags(*votes)


def read_gold_jsonl(path) -> list[AnnotationSet]:
    """Load a gold-set file: one {post_id, annotator_id, kind, labels} per line."""
    per_post: dict[str, list[AnnotationEntry]] = {}
    order: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                labels, _ = LabelVector.from_mapping(rec["labels"])
                entry = AnnotationEntry(
                    annotator_id=str(rec["annotator_id"]),
                    kind=rec["kind"],
                    labels=labels,
                    explanation=rec.get("explanation"),
                )
                post_id = str(rec["post_id"])
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad gold record: {exc}") from exc
            if post_id not in per_post:
                order.append(post_id)
                per_post[post_id] = []
            per_post[post_id].append(entry)
    return [AnnotationSet(pid, per_post[pid]) for pid in order]


def write_gold_jsonl(path, sets: Iterable[AnnotationSet], append: bool = False) -> None:
    mode = "a" if append else "w"
    with open(path, mode, encoding="utf-8") as fh:
        for aset in sets:
            for e in aset.entries:
                rec = {
                    "post_id": aset.post_id,
                    "annotator_id": e.annotator_id,
                    "kind": e.kind,
                    "labels": e.labels.to_mapping(),
                }
                if e.explanation is not None:
                    rec["explanation"] = e.explanation
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
