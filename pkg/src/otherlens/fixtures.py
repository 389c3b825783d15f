"""Deterministic synthetic corpus with planted effects.

Everything downstream of a seed is frozen: channel layout, post days,
which posts carry othering categories (exact counts per community and
crisis status), view lifts, moral/fear/hate flags, and the gold subset.
Pipeline runs over this corpus are reproducible byte for byte.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from itertools import combinations
from pathlib import Path

from .corpus import MORAL_DEVICES, Channel, Corpus, MoralVector, Post, Ref, serialize_jsonl
from .labels import (
    CATEGORIES,
    AnnotationEntry,
    AnnotationSet,
    LabelVector,
    write_gold_jsonl,
)
from .timeline import Event, EventRegistry, crisis_windows, in_any_window

COMMUNITY_BY_STANCE = {"pro_russia": "russian", "pro_ukraine": "ukrainian"}
STANCE_BY_COMMUNITY = {v: k for k, v in COMMUNITY_BY_STANCE.items()}

PLANTED_IN_RATE = 0.25
PLANTED_OUT_RATE = 0.10
VIEW_LIFT_SIGMA = 0.5

# P(flag | othering), P(flag | not othering)
MORAL_RATES = {
    "purity": (0.30, 0.10),
    "authority": (0.25, 0.12),
    "equality": (0.28, 0.10),
    "loyalty": (0.22, 0.11),
    "care": (0.15, 0.25),
    "proportionality": (0.18, 0.18),
}
FEAR_RATES = (0.45, 0.06)
HATE_RATES = (0.35, 0.05)

_SPAN_START = date(2022, 2, 1)
_SPAN_DAYS = 120

_TOPICS = (
    "border crossing", "aid convoy", "power grid", "grain corridor",
    "checkpoint queue", "school reopening", "draft office", "rail depot",
)
_KEYWORDS = ("refugees", "genocide")

_CATEGORY_PAIRS = tuple(combinations(range(4), 2))


@dataclass(frozen=True)
class PlantedFixture:
    corpus: Corpus
    registry: EventRegistry
    truth: dict[str, LabelVector]
    gold: tuple[AnnotationSet, ...]
    gold_ids: tuple[str, ...]
    community_by_channel: dict[str, str]
    windows: dict[str, list[tuple[datetime, datetime]]]
    in_window_ids: frozenset[str]

    def planted_rates(self) -> dict[str, float]:
        return {"in": PLANTED_IN_RATE, "out": PLANTED_OUT_RATE}

    def recovered_rates(self, labels: dict[str, LabelVector]) -> dict[str, float]:
        """Any-othering share among classified posts, split on crisis status."""
        tallies = {"in": [0, 0], "out": [0, 0]}
        for p in self.corpus.posts:
            lv = labels.get(p.id)
            if lv is None:
                continue
            bucket = tallies["in" if p.id in self.in_window_ids else "out"]
            bucket[0] += lv.any_othering()
            bucket[1] += 1
        return {k: n / d for k, (n, d) in tallies.items() if d}


def _fixture_registry() -> EventRegistry:
    rows = (
        (date(2022, 2, 24), "r1", "russian"),
        (date(2022, 4, 10), "r2", "russian"),
        (date(2022, 3, 5), "u1", "ukrainian"),
        (date(2022, 5, 1), "u2", "ukrainian"),
    )
    return EventRegistry(
        events=tuple(
            Event(date=d, description=f"planted event {key}", key=key, community=comm)
            for d, key, comm in rows
        )
    )


def _make_text(rng: random.Random, pid: str, community: str, day: date) -> str:
    topic = _TOPICS[rng.randrange(len(_TOPICS))]
    words = [f"report from the {topic} thread"]
    for kw in _KEYWORDS:
        if rng.random() < 0.08:
            words.append(f"talk of {kw} again")
    words.append(f"({community} feed, {day.isoformat()}, item {pid})")
    return ", ".join(words)


def build_planted_fixture(
    seed: int = 7, n_posts: int = 5000, n_gold: int = 240
) -> PlantedFixture:
    rng = random.Random(seed)
    channels: dict[str, Channel] = {}
    community_by_channel: dict[str, str] = {}
    by_community: dict[str, list[str]] = {"russian": [], "ukrainian": []}
    for comm, prefix in (("russian", "ru"), ("ukrainian", "uk")):
        for i in range(20):
            cid = f"{prefix}_{i:02d}"
            # first six per community carry a declared stance; the rest
            # get theirs from label propagation
            stance = STANCE_BY_COMMUNITY[comm] if i < 6 else None
            channels[cid] = Channel(id=cid, declared_stance=stance,
                                    bio=f"{comm} channel {i}")
            community_by_channel[cid] = comm
            by_community[comm].append(cid)

    registry = _fixture_registry()
    windows = {c: crisis_windows(registry, c) for c in ("russian", "ukrainian")}

    channel_mu = {
        cid: math.log(300.0) + rng.uniform(0.0, 0.8) for cid in channels
    }

    # pass 1: placement, so exact-count planting can see the slot pools
    placement = []
    slots: dict[tuple[str, str], list[int]] = {}
    for idx in range(n_posts):
        comm = "russian" if rng.random() < 0.5 else "ukrainian"
        cid = by_community[comm][rng.randrange(20)]
        day = _SPAN_START + timedelta(days=rng.randrange(_SPAN_DAYS))
        ts = datetime(day.year, day.month, day.day, tzinfo=timezone.utc) + timedelta(
            hours=rng.randrange(24), minutes=rng.randrange(60),
            seconds=rng.randrange(60),
        )
        status = "in" if in_any_window(ts, windows[comm]) else "out"
        placement.append((comm, cid, day, ts))
        slots.setdefault((comm, status), []).append(idx)

    othering_idx: set[int] = set()
    for (comm, status), pool in sorted(slots.items()):
        rate = PLANTED_IN_RATE if status == "in" else PLANTED_OUT_RATE
        othering_idx.update(rng.sample(pool, round(rate * len(pool))))

    posts = []
    truth: dict[str, LabelVector] = {}
    in_window_ids = set()
    for idx, (comm, cid, day, ts) in enumerate(placement):
        pid = f"p{idx:05d}"
        oth = idx in othering_idx
        if oth:
            pair = _CATEGORY_PAIRS[rng.randrange(len(_CATEGORY_PAIRS))]
            flags = [i in pair for i in range(4)]
            truth[pid] = LabelVector.from_flags(*flags)
        else:
            truth[pid] = LabelVector.from_flags(False, False, False, False)
        views = round(math.exp(
            channel_mu[cid] + rng.gauss(0.0, 1.0) + (VIEW_LIFT_SIGMA if oth else 0.0)
        ))
        moral = MoralVector.from_mapping({
            dev: rng.random() < MORAL_RATES[dev][0 if oth else 1]
            for dev in MORAL_DEVICES
        })
        refs = []
        for _ in range(rng.choice((0, 0, 1, 1, 2))):
            same = rng.random() < 0.95
            pool = by_community[comm if same else
                                ("ukrainian" if comm == "russian" else "russian")]
            target = pool[rng.randrange(20)]
            if target == cid:
                continue
            refs.append(Ref(target=target,
                            kind=("forward", "mention")[rng.randrange(2)]))
        posts.append(Post(
            id=pid,
            channel_id=cid,
            timestamp=ts,
            text=_make_text(rng, pid, comm, day),
            views=max(views, 0),
            refs=tuple(refs),
            moral=moral,
            toxicity=min(1.0, max(0.0, rng.gauss(0.30 + (0.25 if oth else 0.0), 0.15))),
            fear_speech=rng.random() < FEAR_RATES[0 if oth else 1],
            hate_speech=rng.random() < HATE_RATES[0 if oth else 1],
        ))
        if in_any_window(ts, windows[comm]):
            in_window_ids.add(pid)

    corpus = Corpus.from_posts(posts, channels)
    gold_ids, gold = _gold_subset(rng, truth, n_gold)
    return PlantedFixture(
        corpus=corpus,
        registry=registry,
        truth=truth,
        gold=gold,
        gold_ids=gold_ids,
        community_by_channel=community_by_channel,
        windows=windows,
        in_window_ids=frozenset(in_window_ids),
    )


def _gold_subset(
    rng: random.Random, truth: dict[str, LabelVector], n_gold: int
) -> tuple[tuple[str, ...], tuple[AnnotationSet, ...]]:
    oth = sorted(pid for pid, lv in truth.items() if lv.any_othering())
    non = sorted(pid for pid, lv in truth.items() if not lv.any_othering())
    half = n_gold // 2
    ids = sorted(rng.sample(oth, half) + rng.sample(non, n_gold - half))
    sets = []
    for pid in ids:
        lv = truth[pid]
        entries = [
            AnnotationEntry("ann_a", "human", lv, "planted gold"),
            AnnotationEntry("ann_b", "human", lv, "planted gold"),
        ]
        # third annotator disagrees on ~5% of category flags
        flags = [f != (rng.random() < 0.05) for f in lv.category_flags()]
        entries.append(AnnotationEntry(
            "ann_c", "human", LabelVector.from_flags(*flags), "planted gold"
        ))
        sets.append(AnnotationSet(post_id=pid, entries=entries))
    return tuple(ids), tuple(sets)


def write_fixture(fix: PlantedFixture, outdir) -> dict[str, Path]:
    """Materialize the fixture for CLI runs; returns the written paths."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "corpus": out / "corpus.jsonl",
        "channels": out / "channels.json",
        "gold": out / "gold.jsonl",
        "events": out / "events.csv",
        "script": out / "mock_script.json",
        "truth": out / "truth.json",
    }
    serialize_jsonl(fix.corpus, paths["corpus"], schema="telegram")
    with open(paths["channels"], "w", encoding="utf-8") as fh:
        json.dump(
            {
                cid: {"stance": ch.declared_stance, "bio": ch.bio}
                for cid, ch in sorted(fix.corpus.channels.items())
            },
            fh, indent=2,
        )
    write_gold_jsonl(paths["gold"], fix.gold)
    fix.registry.to_csv(paths["events"])
    entries = [
        {
            "text": p.text,
            "labels": fix.truth[p.id].to_mapping(),
            "explanation": f"planted rationale {p.id}",
        }
        for p in fix.corpus.posts
    ]
    with open(paths["script"], "w", encoding="utf-8") as fh:
        json.dump({"entries": entries}, fh, indent=2)
    with open(paths["truth"], "w", encoding="utf-8") as fh:
        json.dump(
            {pid: lv.to_mapping() for pid, lv in sorted(fix.truth.items())},
            fh, indent=2,
        )
    return paths
