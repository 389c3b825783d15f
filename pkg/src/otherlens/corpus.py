"""Corpus ingestion, validation, sampling and splitting.

Two JSONL record schemas are understood. ``telegram`` records carry
channel, timestamp, views and reference metadata. ``gab`` records carry
only text plus fear/hate flags; they are given the synthetic channel
``gab`` and the epoch timestamp so corpus invariants hold (such corpora
feed the overlap analyses, nothing time- or network-based).
"""
from __future__ import annotations

import json
import math
import random
import unicodedata
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Sequence

MORAL_DEVICES = (
    "purity", "authority", "equality", "loyalty", "care", "proportionality"
)
REF_KINDS = ("forward", "mention")
STANCES = ("pro_russia", "pro_ukraine", "other")

EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


class IngestError(ValueError):
    """Fatal ingest problem (unreadable file or too many bad lines)."""


@dataclass(frozen=True)
class MoralVector:
    purity: bool
    authority: bool
    equality: bool
    loyalty: bool
    care: bool
    proportionality: bool

    @classmethod
    def from_mapping(cls, mapping: dict) -> "MoralVector":
        extra = [k for k in mapping if k not in MORAL_DEVICES]
        missing = [k for k in MORAL_DEVICES if k not in mapping]
        if extra or missing:
            raise ValueError(
                f"moral mapping keys wrong; missing={missing} unknown={extra}"
            )
        return cls(**{k: bool(mapping[k]) for k in MORAL_DEVICES})

    def flag(self, device: str) -> bool:
        return getattr(self, device)

    def any_moral(self) -> bool:
        return any(getattr(self, d) for d in MORAL_DEVICES)

    def to_mapping(self) -> dict[str, bool]:
        return {d: getattr(self, d) for d in MORAL_DEVICES}


@dataclass(frozen=True)
class Ref:
    target: str
    kind: str

    def __post_init__(self):
        if self.kind not in REF_KINDS:
            raise ValueError(f"ref kind must be one of {REF_KINDS}")


@dataclass(frozen=True)
class Post:
    id: str
    channel_id: str
    timestamp: datetime
    text: str
    views: int | None = None
    refs: tuple[Ref, ...] = ()
    moral: MoralVector | None = None
    toxicity: float | None = None
    fear_speech: bool | None = None
    hate_speech: bool | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("post id empty")
        if self.timestamp.tzinfo is None:
            raise ValueError("post timestamp must be timezone-aware")
        if self.views is not None and self.views < 0:
            raise ValueError("views < 0")
        if self.toxicity is not None and not (0.0 <= self.toxicity <= 1.0):
            raise ValueError("toxicity outside [0,1]")


@dataclass(frozen=True)
class Channel:
    id: str
    declared_stance: str | None = None
    bio: str | None = None

    def __post_init__(self):
        if self.declared_stance is not None and self.declared_stance not in STANCES:
            raise ValueError(f"stance must be one of {STANCES}")


@dataclass(frozen=True)
class Corpus:
    posts: tuple[Post, ...]
    channels: dict[str, Channel]

    @classmethod
    def from_posts(
        cls, posts: Iterable[Post], channels: dict[str, Channel] | None = None
    ) -> "Corpus":
        ordered = tuple(sorted(posts, key=lambda p: (p.timestamp, p.id)))
        chans = dict(channels or {})
        for p in ordered:
            chans.setdefault(p.channel_id, Channel(id=p.channel_id))
        return cls(posts=ordered, channels=chans)

    def __len__(self) -> int:
        return len(self.posts)

    def subset(self, channel_ids: set[str]) -> "Corpus":
        return Corpus.from_posts(
            [p for p in self.posts if p.channel_id in channel_ids],
            {cid: ch for cid, ch in self.channels.items() if cid in channel_ids},
        )


@dataclass
class LoadReport:
    schema: str
    lines_read: int = 0
    loaded: int = 0
    rejected: list[tuple[int, str]] = field(default_factory=list)
    duplicates: list[tuple[int, str]] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": self.schema,
                "lines_read": self.lines_read,
                "loaded": self.loaded,
                "rejected": [
                    {"line": ln, "reason": reason} for ln, reason in self.rejected
                ],
                "duplicates": [
                    {"line": ln, "id": pid} for ln, pid in self.duplicates
                ],
            },
            indent=2,
        )


def _parse_ts(raw: str) -> datetime:
    text = raw.replace("Z", "+00:00") if raw.endswith("Z") else raw
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)  # naive inputs assumed UTC
    return ts.astimezone(timezone.utc)


def _telegram_post(rec: dict) -> Post:
    refs = []
    for r in rec.get("refs", []):
        refs.append(Ref(target=str(r["target"]), kind=r["kind"]))
    moral = None
    if rec.get("moral") is not None:
        moral = MoralVector.from_mapping(rec["moral"])
    views = rec.get("views")
    if views is not None:
        if not isinstance(views, int) or isinstance(views, bool):
            raise ValueError("views must be an integer")
        if views < 0:
            raise ValueError("views < 0")
    return Post(
        id=str(rec["id"]),
        channel_id=str(rec["channel_id"]),
        timestamp=_parse_ts(rec["ts"]),
        text=rec["text"],
        views=views,
        refs=tuple(refs),
        moral=moral,
        toxicity=rec.get("toxicity"),
        fear_speech=rec.get("fear_speech"),
        hate_speech=rec.get("hate_speech"),
    )


def _gab_post(rec: dict) -> Post:
    for key in ("id", "text", "fear_speech", "hate_speech", "normal"):
        if key not in rec:
            raise ValueError(f"missing key {key!r}")
    return Post(
        id=str(rec["id"]),
        channel_id="gab",
        timestamp=EPOCH,
        text=rec["text"],
        fear_speech=bool(rec["fear_speech"]),
        hate_speech=bool(rec["hate_speech"]),
    )


_PARSERS = {"telegram": _telegram_post, "gab": _gab_post}


def ingest_jsonl(path, schema: str = "telegram") -> tuple[Corpus, LoadReport]:
    """Load a JSONL corpus; bad lines are collected, not fatal.

    Duplicate ids keep the first occurrence. More than 10% rejected lines
    aborts with IngestError.
    """
    if schema not in _PARSERS:
        raise IngestError(f"unknown schema {schema!r}")
    parse = _PARSERS[schema]
    report = LoadReport(schema=schema)
    posts: dict[str, Post] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            report.lines_read += 1
            try:
                rec = json.loads(line)
                if not isinstance(rec, dict):
                    raise ValueError("record is not an object")
                post = parse(rec)
            except (ValueError, KeyError, TypeError) as exc:
                reason = str(exc) or exc.__class__.__name__
                if isinstance(exc, KeyError):
                    reason = f"missing key {exc}"
                report.rejected.append((lineno, reason))
                continue
            if post.id in posts:
                report.duplicates.append((lineno, post.id))
                continue
            posts[post.id] = post
    report.loaded = len(posts)
    if report.lines_read and len(report.rejected) > 0.10 * report.lines_read:
        raise IngestError(
            f"{len(report.rejected)}/{report.lines_read} lines rejected "
            f"(>10%); first: line {report.rejected[0][0]}: {report.rejected[0][1]}"
        )
    return Corpus.from_posts(posts.values()), report


def _ts_str(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def serialize_jsonl(c: Corpus, path, schema: str = "telegram") -> None:
    """Write the corpus back out; inverse of ingest_jsonl for loadable data."""
    with open(path, "w", encoding="utf-8") as fh:
        for p in c.posts:
            if schema == "telegram":
                rec: dict = {
                    "id": p.id,
                    "channel_id": p.channel_id,
                    "ts": _ts_str(p.timestamp),
                    "text": p.text,
                }
                if p.views is not None:
                    rec["views"] = p.views
                if p.refs:
                    rec["refs"] = [{"target": r.target, "kind": r.kind} for r in p.refs]
                if p.moral is not None:
                    rec["moral"] = p.moral.to_mapping()
                if p.toxicity is not None:
                    rec["toxicity"] = p.toxicity
                if p.fear_speech is not None:
                    rec["fear_speech"] = p.fear_speech
                if p.hate_speech is not None:
                    rec["hate_speech"] = p.hate_speech
            elif schema == "gab":
                rec = {
                    "id": p.id,
                    "text": p.text,
                    "fear_speech": bool(p.fear_speech),
                    "hate_speech": bool(p.hate_speech),
                    "normal": not (p.fear_speech or p.hate_speech),
                }
            else:
                raise ValueError(f"unknown schema {schema!r}")
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def _norm(text: str) -> str:
    return unicodedata.normalize("NFC", text).casefold()


def sample_for_annotation(
    c: Corpus,
    n_random: int,
    keywords: Sequence[str],
    n_keyword: int,
    seed: int,
) -> list[Post]:
    """Draw a keyword-matched stratum plus a random stratum, disjointly.

    Keyword matching is case-insensitive substring search after NFC
    normalization. When fewer than n_keyword posts match, all matches are
    taken and a warning is issued.
    """
    if not c.posts:
        raise ValueError("empty corpus")
    if n_keyword > 0 and not keywords:
        raise ValueError("keywords required when n_keyword > 0")
    if n_random + n_keyword > len(c.posts):
        raise ValueError(
            f"requested {n_random + n_keyword} posts from a corpus of {len(c.posts)}"
        )
    rng = random.Random(seed)
    normed = [_norm(k) for k in keywords]
    matches = [p for p in c.posts if any(k in _norm(p.text) for k in normed)]
    if n_keyword > 0 and len(matches) < n_keyword:
        warnings.warn(
            f"only {len(matches)} posts match the keywords, wanted {n_keyword}",
            stacklevel=2,
        )
    keyword_stratum = rng.sample(matches, min(n_keyword, len(matches)))
    taken = {p.id for p in keyword_stratum}
    rest = [p for p in c.posts if p.id not in taken]
    random_stratum = rng.sample(rest, n_random)
    return keyword_stratum + random_stratum


def split(items: Sequence, ratios: tuple[float, float, float], seed: int):
    """Shuffle and split into train/val/test by the given ratios.

    Sizes are floors of ratio * n; leftover units are handed out in
    descending-ratio order (ties broken train, val, test). Zero-ratio
    parts never receive leftovers.
    """
    if any(r < 0 for r in ratios):
        raise ValueError("ratios must be nonnegative")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios sum to {sum(ratios)}, expected 1")
    n = len(items)
    nonzero = sum(1 for r in ratios if r > 0)
    if n < nonzero:
        raise ValueError(f"{n} items cannot fill {nonzero} nonzero parts")
    # tiny epsilon absorbs float dust in ratio * n (e.g. 6.999999999 for 7)
    sizes = [math.floor(r * n + 1e-9) for r in ratios]
    remainder = n - sum(sizes)
    order = sorted(
        (i for i, r in enumerate(ratios) if r > 0),
        key=lambda i: (-ratios[i], i),
    )
    for i in order[:remainder]:
        sizes[i] += 1
    shuffled = list(items)
    random.Random(seed).shuffle(shuffled)
    train = shuffled[: sizes[0]]
    val = shuffled[sizes[0] : sizes[0] + sizes[1]]
    test = shuffled[sizes[0] + sizes[1] :]
    return train, val, test
