"""Cross-tabs of moral devices against othering categories.

Each (device, category) cell is a 2x2 table over the labeled posts:
rows split on category presence, columns on device presence. Marginal
rows relate each device to any-othering and each category to any-moral,
and a headline table crosses the two ORs.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .corpus import MORAL_DEVICES, Post
from .labels import CATEGORIES, LabelVector
from .stats import (
    ChiSquaredResult,
    ContingencyTable2x2,
    chi_squared,
    log_odds_ratio,
    normal_sf,
    two_proportion_z,
)

ANY_MORAL = "any_moral"
ANY_OTHERING = "any_othering"


@dataclass(frozen=True)
class CellStat:
    table: ContingencyTable2x2
    lor: float
    se: float
    flags: tuple[str, ...] = ()

    @property
    def z(self) -> float:
        return self.lor / self.se

    @property
    def p(self) -> float:
        return min(1.0, 2.0 * normal_sf(abs(self.z)))

    def row(self, device: str, category: str) -> tuple:
        t = self.table
        return (device, category, t.a, t.b, t.c, t.d,
                self.lor, self.se, self.z, self.p)


def _cell(row_flags: Sequence[bool], col_flags: Sequence[bool]) -> CellStat:
    a = b = c = d = 0
    for r, col in zip(row_flags, col_flags):
        if r and col:
            a += 1
        elif r:
            b += 1
        elif col:
            c += 1
        else:
            d += 1
    table = ContingencyTable2x2(a=a, b=b, c=c, d=d)
    res = log_odds_ratio(table)
    return CellStat(table=table, lor=res.lor, se=res.se, flags=res.flags)


@dataclass(frozen=True)
class MoralOtheringGrid:
    cells: dict[tuple[str, str], CellStat]
    device_marginals: dict[str, CellStat]
    category_marginals: dict[str, CellStat]
    headline: CellStat
    headline_chi2: ChiSquaredResult | None
    n: int

    def csv_rows(self) -> list[tuple]:
        rows = [
            self.cells[(dev, cat)].row(dev, cat)
            for dev in MORAL_DEVICES
            for cat in CATEGORIES
        ]
        rows += [
            self.device_marginals[dev].row(dev, ANY_OTHERING)
            for dev in MORAL_DEVICES
        ]
        rows += [
            self.category_marginals[cat].row(ANY_MORAL, cat)
            for cat in CATEGORIES
        ]
        rows.append(self.headline.row(ANY_MORAL, ANY_OTHERING))
        return rows

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("device", "category", "a", "b", "c", "d",
                        "lor", "se", "z", "p"))
            for row in self.csv_rows():
                w.writerow(row)


def moral_othering_grid(
    posts: Sequence[Post], labels: Mapping[str, LabelVector]
) -> MoralOtheringGrid:
    """Build every 2x2 cell plus marginals from jointly labeled posts."""
    pairs = [(p, labels[p.id]) for p in posts if p.id in labels]
    if not pairs:
        raise ValueError("no posts carry both label kinds")
    dev_flags = {
        dev: [p.moral.flag(dev) for p, _ in pairs] for dev in MORAL_DEVICES
    }
    cat_flags = {
        cat: [lv.flag(cat) for _, lv in pairs] for cat in CATEGORIES
    }
    any_moral = [p.moral.any_moral() for p, _ in pairs]
    any_oth = [lv.any_othering() for _, lv in pairs]
    cells = {
        (dev, cat): _cell(cat_flags[cat], dev_flags[dev])
        for dev in MORAL_DEVICES
        for cat in CATEGORIES
    }
    n = len(pairs)
    for dev in MORAL_DEVICES:
        # row sums depend only on the category split
        for cat in CATEGORIES:
            t = cells[(dev, cat)].table
            present = sum(cat_flags[cat])
            if t.a + t.b != present or t.c + t.d != n - present:
                raise AssertionError("cell tables do not partition the corpus")
    headline = _cell(any_oth, any_moral)
    try:
        headline_chi2 = chi_squared(headline.table)
    except ValueError:
        headline_chi2 = None
    return MoralOtheringGrid(
        cells=cells,
        device_marginals={
            dev: _cell(any_oth, dev_flags[dev]) for dev in MORAL_DEVICES
        },
        category_marginals={
            cat: _cell(cat_flags[cat], any_moral) for cat in CATEGORIES
        },
        headline=headline,
        headline_chi2=headline_chi2,
        n=n,
    )


@dataclass(frozen=True)
class ContrastCell:
    device: str
    category: str
    z: float | None
    p: float | None
    rate_a: float | None
    rate_b: float | None
    flags: tuple[str, ...] = ()

    def row(self) -> tuple:
        return (self.device, self.category, self.z, self.p,
                self.rate_a, self.rate_b, ";".join(self.flags))


def _contrast_one(
    device: str, category: str, sa: CellStat, sb: CellStat
) -> ContrastCell:
    na, nb = sa.table.a + sa.table.b, sb.table.a + sb.table.b
    if na == 0 or nb == 0:
        return ContrastCell(device, category, None, None,
                            None if na == 0 else sa.table.a / na,
                            None if nb == 0 else sb.table.a / nb,
                            ("empty_category_group",))
    res = two_proportion_z(sa.table.a, na, sb.table.a, nb)
    z = None if math.isnan(res.z) else res.z
    p = None if math.isnan(res.p) else res.p
    return ContrastCell(device, category, z, p,
                        sa.table.a / na, sb.table.a / nb, res.flags)


def group_contrast(
    grid_a: MoralOtheringGrid, grid_b: MoralOtheringGrid
) -> list[ContrastCell]:
    """Two-proportion z on P(device | category present), a vs b, per cell."""
    if set(grid_a.cells) != set(grid_b.cells):
        raise ValueError("grids cover different device/category cells")
    out = [
        _contrast_one(dev, cat, grid_a.cells[(dev, cat)], grid_b.cells[(dev, cat)])
        for dev in MORAL_DEVICES
        for cat in CATEGORIES
    ]
    out += [
        _contrast_one(dev, ANY_OTHERING,
                      grid_a.device_marginals[dev], grid_b.device_marginals[dev])
        for dev in MORAL_DEVICES
    ]
    return out


def write_contrast_csv(path, cells: Sequence[ContrastCell]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("device", "category", "z", "p", "rate_a", "rate_b", "flags"))
        for cell in cells:
            w.writerow(cell.row())
