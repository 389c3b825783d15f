"""Daily category proportions, crisis windows, and attention comparisons.

Binning is by UTC day; only days with at least one labeled post appear
(gaps stay gaps). Smoothing is a centered calendar-window mean over the
days actually present. Crisis windows are half-open [event midnight,
+7 days), merged when they overlap.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta, timezone
from typing import Iterable, Sequence

from .corpus import Corpus, Post
from .labels import CATEGORIES, LabelVector
from .network import ChannelGraph, centrality_vs_othering
from .stats import group_mean_with_se, mann_whitney_u

COMMUNITIES = ("russian", "ukrainian", "shared")

TIMELINE_HEADER = ("date",) + CATEGORIES


@dataclass(frozen=True)
class Event:
    date: date
    description: str
    key: str | None
    community: str

    def __post_init__(self):
        if self.community not in COMMUNITIES:
            raise ValueError(f"community must be one of {COMMUNITIES}")


@dataclass(frozen=True)
class EventRegistry:
    events: tuple[Event, ...]

    def __post_init__(self):
        keys = [e.key for e in self.events if e.key]
        if len(keys) != len(set(keys)):
            dupes = sorted({k for k in keys if keys.count(k) > 1})
            raise ValueError(f"duplicate event keys: {dupes}")

    @classmethod
    def from_csv(cls, path) -> "EventRegistry":
        events = []
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            expected = {"date", "description", "key", "community"}
            if reader.fieldnames is None or set(
                f.strip() for f in reader.fieldnames
            ) != expected:
                raise ValueError(
                    f"{path}: event registry header must be date,description,key,community"
                )
            for lineno, row in enumerate(reader, start=2):
                row = {k.strip(): (v or "").strip() for k, v in row.items()}
                try:
                    d = date.fromisoformat(row["date"])
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: bad date: {exc}")
                events.append(
                    Event(
                        date=d,
                        description=row["description"],
                        key=row["key"] or None,
                        community=row["community"],
                    )
                )
        return cls(events=tuple(events))

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("date", "description", "key", "community"))
            for e in self.events:
                w.writerow((e.date.isoformat(), e.description, e.key or "", e.community))

    def for_community(self, community: str) -> list[Event]:
        return [
            e for e in self.events if e.community == community or e.community == "shared"
        ]


@dataclass(frozen=True)
class DayRow:
    date: date
    counts: dict[str, int]  # flagged posts per category
    n: int  # classified posts that day

    def proportion(self, key: str) -> float:
        return self.counts[key] / self.n


@dataclass(frozen=True)
class CategorySeries:
    rows: tuple[DayRow, ...]
    smooth_window: int
    smoothed: dict[date, dict[str, float]]

    def raw_csv_rows(self) -> list[tuple]:
        return [
            (r.date.isoformat(),) + tuple(r.proportion(k) for k in CATEGORIES)
            for r in self.rows
        ]

    def smoothed_csv_rows(self) -> list[tuple]:
        return [
            (r.date.isoformat(),)
            + tuple(self.smoothed[r.date][k] for k in CATEGORIES)
            for r in self.rows
        ]


def write_series_csv(path, rows: Iterable[tuple]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TIMELINE_HEADER)
        for row in rows:
            w.writerow(row)


def proportions_over_time(
    c: Corpus,
    labels: dict[str, LabelVector],
    smooth_window: int = 7,
) -> CategorySeries:
    """Daily per-category proportions among classified posts.

    The denominator is the number of labeled posts that day; days
    without labeled posts are absent. Smoothing averages the raw value
    over the days present within the centered calendar window.
    """
    if smooth_window < 1:
        raise ValueError("smooth_window must be >= 1")
    by_day: dict[date, list[LabelVector]] = {}
    for p in c.posts:
        lv = labels.get(p.id)
        if lv is None:
            continue
        by_day.setdefault(p.timestamp.astimezone(timezone.utc).date(), []).append(lv)
    if not by_day:
        raise ValueError("no labeled posts")
    rows = []
    for d in sorted(by_day):
        lvs = by_day[d]
        counts = {k: sum(1 for lv in lvs if lv.flag(k)) for k in CATEGORIES}
        rows.append(DayRow(date=d, counts=counts, n=len(lvs)))
    lo = (smooth_window - 1) // 2
    hi = smooth_window // 2
    raw = {r.date: {k: r.proportion(k) for k in CATEGORIES} for r in rows}
    smoothed: dict[date, dict[str, float]] = {}
    for r in rows:
        window = [
            raw[r.date + timedelta(days=off)]
            for off in range(-lo, hi + 1)
            if (r.date + timedelta(days=off)) in raw
        ]
        smoothed[r.date] = {
            k: sum(w[k] for w in window) / len(window) for k in CATEGORIES
        }
    return CategorySeries(
        rows=tuple(rows), smooth_window=smooth_window, smoothed=smoothed
    )


def crisis_windows(
    reg: EventRegistry, community: str, days: int = 7
) -> list[tuple[datetime, datetime]]:
    """Half-open [event UTC midnight, +days) intervals, overlaps merged."""
    events = reg.for_community(community)
    if not events:
        raise ValueError(f"no events registered for community {community!r}")
    spans = sorted(
        (
            datetime.combine(e.date, time.min, tzinfo=timezone.utc),
            datetime.combine(e.date, time.min, tzinfo=timezone.utc)
            + timedelta(days=days),
        )
        for e in events
    )
    merged = [spans[0]]
    for start, end in spans[1:]:
        last_start, last_end = merged[-1]
        if start < last_end:
            merged[-1] = (last_start, max(last_end, end))
        else:
            merged.append((start, end))
    return merged


def in_any_window(ts: datetime, windows: Sequence[tuple[datetime, datetime]]) -> bool:
    return any(start <= ts < end for start, end in windows)


@dataclass(frozen=True)
class MeanCell:
    community: str
    window_status: str  # in | out | all
    othering: str  # othering | none
    n: int
    mean: float | None
    se: float | None
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class GapTest:
    community: str
    window_status: str
    u: float | None
    p: float | None
    method: str
    n_othering: int
    n_none: int
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class ProportionRow:
    community: str
    window_status: str
    n: int
    othering_share: float


@dataclass(frozen=True)
class SpearmanDelta:
    community: str
    metric: str
    rho_all: float
    p_all: float
    rho_in: float
    p_in: float
    delta_pct: float | None


@dataclass
class AttentionReport:
    cells: list[MeanCell] = field(default_factory=list)
    tests: list[GapTest] = field(default_factory=list)
    proportions: list[ProportionRow] = field(default_factory=list)
    spearman: list[SpearmanDelta] = field(default_factory=list)
    flags: tuple[str, ...] = ()

    def to_json(self) -> str:
        return json.dumps(
            {
                "cells": [vars(c) | {"flags": list(c.flags)} for c in self.cells],
                "tests": [vars(t) | {"flags": list(t.flags)} for t in self.tests],
                "proportions": [vars(p) for p in self.proportions],
                "spearman": [vars(s) for s in self.spearman],
                "flags": list(self.flags),
            },
            indent=2,
        )


def _group_rows(
    community: str,
    status: str,
    posts: list[Post],
    labels: dict[str, LabelVector],
    z: dict[str, float],
) -> tuple[list[MeanCell], GapTest | None, ProportionRow | None]:
    if not posts:
        return [], None, None
    oth = [p for p in posts if labels[p.id].any_othering()]
    non = [p for p in posts if not labels[p.id].any_othering()]
    cells = []
    samples: dict[str, list[float]] = {}
    for name, group in (("othering", oth), ("none", non)):
        vals = [z[p.id] for p in group if p.id in z]
        samples[name] = vals
        if vals:
            ms = group_mean_with_se(vals)
            cells.append(
                MeanCell(
                    community, status, name, len(vals), ms.mean, ms.se,
                    tuple(ms.flags),
                )
            )
        else:
            cells.append(
                MeanCell(community, status, name, 0, None, None, ("empty_group",))
            )
    test = None
    if samples["othering"] and samples["none"]:
        mw = mann_whitney_u(samples["othering"], samples["none"])
        test = GapTest(
            community, status, mw.u, mw.p, mw.method,
            len(samples["othering"]), len(samples["none"]), tuple(mw.flags),
        )
    else:
        test = GapTest(
            community, status, None, None, "skipped",
            len(samples["othering"]), len(samples["none"]), ("empty_group",),
        )
    prop = ProportionRow(community, status, len(posts), len(oth) / len(posts))
    return cells, test, prop


def _communities_of(
    posts: Sequence[Post], community_by_channel: dict[str, str] | None
) -> dict[str, list[Post]]:
    if community_by_channel is None:
        return {"all": list(posts)}
    grouped: dict[str, list[Post]] = {}
    for p in posts:
        comm = community_by_channel.get(p.channel_id)
        if comm is not None:
            grouped.setdefault(comm, []).append(p)
    return grouped


def attention_report(
    c: Corpus,
    labels: dict[str, LabelVector],
    views_normalized: dict[str, float],
    community_by_channel: dict[str, str] | None = None,
) -> AttentionReport:
    """Normalized-view means by othering status, with a rank test."""
    labeled = [p for p in c.posts if p.id in labels]
    if not labeled:
        raise ValueError("no labeled posts")
    report = AttentionReport()
    for comm in sorted(_communities_of(labeled, community_by_channel)):
        posts = _communities_of(labeled, community_by_channel)[comm]
        cells, test, prop = _group_rows(comm, "all", posts, labels, views_normalized)
        report.cells.extend(cells)
        if test:
            report.tests.append(test)
        if prop:
            report.proportions.append(prop)
    return report


def crisis_comparison(
    c: Corpus,
    labels: dict[str, LabelVector],
    windows_by_community: dict[str, list[tuple[datetime, datetime]]],
    views_normalized: dict[str, float],
    community_by_channel: dict[str, str] | None = None,
    graph: ChannelGraph | None = None,
) -> AttentionReport:
    """In-window vs out-of-window attention and othering proportions.

    Every (community, window status, othering status) cell gets a mean
    and se of normalized views; each (community, window status) gets a
    rank test of othering vs none. With a graph supplied, the
    degree-centrality Spearman is recomputed on in-window posts.
    """
    if not windows_by_community or not any(windows_by_community.values()):
        raise ValueError("no crisis windows supplied")
    labeled = [p for p in c.posts if p.id in labels]
    if not labeled:
        raise ValueError("no labeled posts")
    report = AttentionReport()
    grouped = _communities_of(labeled, community_by_channel)
    any_in = False
    for comm in sorted(grouped):
        posts = grouped[comm]
        windows = windows_by_community.get(comm, [])
        inside = [p for p in posts if in_any_window(p.timestamp, windows)]
        outside = [p for p in posts if not in_any_window(p.timestamp, windows)]
        any_in = any_in or bool(inside)
        for status, subset in (("in", inside), ("out", outside)):
            cells, test, prop = _group_rows(
                comm, status, subset, labels, views_normalized
            )
            report.cells.extend(cells)
            if test:
                report.tests.append(test)
            if prop:
                report.proportions.append(prop)
        if graph is not None and len(posts) >= 3:
            deltas = _spearman_delta(comm, posts, inside, labels, graph)
            if deltas is not None:
                report.spearman.append(deltas)
    if not any_in:
        report.flags = report.flags + ("no_in_window_posts",)
    return report


def _channel_rates(
    posts: Sequence[Post], labels: dict[str, LabelVector]
) -> dict[str, float]:
    per: dict[str, list[bool]] = {}
    for p in posts:
        per.setdefault(p.channel_id, []).append(labels[p.id].any_othering())
    return {ch: sum(v) / len(v) for ch, v in per.items()}


def _spearman_delta(
    community: str,
    all_posts: Sequence[Post],
    in_posts: Sequence[Post],
    labels: dict[str, LabelVector],
    graph: ChannelGraph,
) -> SpearmanDelta | None:
    rates_all = _channel_rates(all_posts, labels)
    rates_in = _channel_rates(in_posts, labels)
    if len(rates_all) < 3 or len(rates_in) < 3:
        return None
    try:
        corr_all = centrality_vs_othering(graph, rates_all, kind="degree")
        corr_in = centrality_vs_othering(graph, rates_in, kind="degree")
    except ValueError:
        return None
    rho_all = corr_all.correlation.rho
    rho_in = corr_in.correlation.rho
    delta = None
    if rho_all == rho_all and rho_all != 0:  # rho_all is a number, not nan
        delta = (rho_in - rho_all) / abs(rho_all) * 100.0
    return SpearmanDelta(
        community=community,
        metric="degree",
        rho_all=rho_all,
        p_all=corr_all.correlation.p,
        rho_in=rho_in,
        p_in=corr_in.correlation.p,
        delta_pct=delta,
    )
