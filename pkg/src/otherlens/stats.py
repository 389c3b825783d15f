"""Statistical test-kit shared by the analysis modules.

Everything here is implemented from closed forms (erfc for the normal and
df=1 chi-squared tails, a regularized incomplete beta for the t tail), so
the package carries no statistics dependency. All p-values are two-sided.
Degenerate inputs come back flagged rather than raising wherever the spec
of the operation allows it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence


# --- special functions -----------------------------------------------------

def normal_sf(x: float) -> float:
    """P(Z > x) for standard normal Z."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def chi2_sf_df1(x: float) -> float:
    """Survival function of chi-squared with one degree of freedom."""
    if x < 0:
        return 1.0
    return math.erfc(math.sqrt(x / 2.0))


def _betacf(a: float, b: float, x: float) -> float:
    # Continued fraction for the incomplete beta (Lentz's method).
    max_iter = 300
    eps = 3e-15
    fpmin = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError("incomplete beta did not converge")


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf(t: float, df: float) -> float:
    """P(T > t) for Student t with df degrees of freedom."""
    p_abs = 0.5 * betainc_reg(df / 2.0, 0.5, df / (df + t * t))
    return p_abs if t >= 0 else 1.0 - p_abs


def _midranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        # tied block [i, j] shares the average rank (1-based)
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


# --- result containers ------------------------------------------------------

@dataclass(frozen=True)
class ChiSquaredResult:
    chi2: float
    p: float
    df: int = 1
    flags: tuple[str, ...] = ()

    def row(self) -> tuple:
        return ("chi_squared", self.chi2, self.p, f"pearson_df{self.df}",
                ";".join(self.flags))


@dataclass(frozen=True)
class LogOddsResult:
    lor: float
    se: float
    flags: tuple[str, ...] = ()

    def row(self) -> tuple:
        return ("log_odds_ratio", self.lor, "", "haldane_anscombe",
                ";".join(self.flags))


@dataclass(frozen=True)
class ZTestResult:
    z: float
    p: float
    flags: tuple[str, ...] = ()

    def row(self) -> tuple:
        return ("two_proportion_z", self.z, self.p, "pooled",
                ";".join(self.flags))


@dataclass(frozen=True)
class MannWhitneyResult:
    u: float
    p: float
    method: str
    flags: tuple[str, ...] = ()

    def row(self) -> tuple:
        return ("mann_whitney_u", self.u, self.p, self.method,
                ";".join(self.flags))


@dataclass(frozen=True)
class SpearmanResult:
    rho: float
    p: float
    flags: tuple[str, ...] = ()

    def row(self) -> tuple:
        return ("spearman", self.rho, self.p, "t_approximation",
                ";".join(self.flags))


@dataclass(frozen=True)
class MeanSE:
    mean: float
    se: float | None
    n: int
    flags: tuple[str, ...] = ()


@dataclass
class ZScoreResult:
    scores: dict
    excluded_groups: dict
    excluded_items: tuple

    def __iter__(self):
        # convenience: dict(result.scores)-style unpacking in callers
        return iter(self.scores.items())


@dataclass
class OverlapReport:
    region_counts: dict[frozenset, int]
    conditionals: dict[tuple[str, str], float | None]
    set_sizes: dict[str, int]
    universe_size: int

    def region_rows(self) -> list[tuple[str, int]]:
        def label(sig: frozenset) -> str:
            return "+".join(sorted(sig))

        return sorted(
            ((label(sig), n) for sig, n in self.region_counts.items()),
            key=lambda r: r[0],
        )


# --- contingency table ------------------------------------------------------

@dataclass(frozen=True)
class ContingencyTable2x2:
    """Counts with rows = condition present/absent, cols = outcome present/absent."""

    a: int  # condition present, outcome present
    b: int  # condition present, outcome absent
    c: int  # condition absent, outcome present
    d: int  # condition absent, outcome absent

    def __post_init__(self):
        if min(self.a, self.b, self.c, self.d) < 0:
            raise ValueError("negative cell count")
        if self.total == 0:
            raise ValueError("empty table")

    @property
    def total(self) -> int:
        return self.a + self.b + self.c + self.d


# --- tests -------------------------------------------------------------------

def chi_squared(t: ContingencyTable2x2, yates: bool = False) -> ChiSquaredResult:
    """Pearson chi-squared on a 2x2 table, df = 1."""
    n = t.total
    row1, row2 = t.a + t.b, t.c + t.d
    col1, col2 = t.a + t.c, t.b + t.d
    if 0 in (row1, row2, col1, col2):
        raise ValueError("zero marginal; expected counts undefined")
    chi2 = 0.0
    for obs, row, col in ((t.a, row1, col1), (t.b, row1, col2),
                          (t.c, row2, col1), (t.d, row2, col2)):
        expected = row * col / n
        diff = abs(obs - expected)
        if yates:
            diff = max(diff - 0.5, 0.0)
        chi2 += diff * diff / expected
    return ChiSquaredResult(chi2=chi2, p=chi2_sf_df1(chi2))


def log_odds_ratio(t: ContingencyTable2x2) -> LogOddsResult:
    """Log odds ratio with +0.5 smoothing on every cell."""
    flags = ("zero_cells_smoothed",) if 0 in (t.a, t.b, t.c, t.d) else ()
    a, b, c, d = t.a + 0.5, t.b + 0.5, t.c + 0.5, t.d + 0.5
    lor = math.log(a / b) - math.log(c / d)
    se = math.sqrt(1 / a + 1 / b + 1 / c + 1 / d)
    return LogOddsResult(lor=lor, se=se, flags=flags)


def two_proportion_z(x1: int, n1: int, x2: int, n2: int) -> ZTestResult:
    """Pooled two-proportion z test, two-sided."""
    if n1 < 1 or n2 < 1:
        raise ValueError("sample sizes must be >= 1")
    if not (0 <= x1 <= n1 and 0 <= x2 <= n2):
        raise ValueError("successes out of range")
    pooled = (x1 + x2) / (n1 + n2)
    if pooled in (0.0, 1.0):
        return ZTestResult(z=float("nan"), p=float("nan"),
                           flags=("degenerate_marginals",))
    se = math.sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2))
    z = (x1 / n1 - x2 / n2) / se
    return ZTestResult(z=z, p=min(1.0, 2.0 * normal_sf(abs(z))))


def _exact_u_counts(n1: int, n2: int) -> list[int]:
    """Distribution of U over all C(n1+n2, n1) labelings (no ties).

    counts[u] = number of rank interleavings with exactly u (x, y) pairs
    where x outranks y; equivalently partitions of u fitting an n1 x n2
    box, built with the Pascal-style recurrence
    G(i, j) = G(i-1, j) + q^i * G(i, j-1).
    """
    table: list[list[list[int]]] = [
        [[1] for _ in range(n2 + 1)] for _ in range(n1 + 1)
    ]
    for i in range(1, n1 + 1):
        for j in range(1, n2 + 1):
            out = [0] * (i * j + 1)
            for u, cnt in enumerate(table[i - 1][j]):
                out[u] += cnt
            for u, cnt in enumerate(table[i][j - 1]):
                out[u + i] += cnt
            table[i][j] = out
    return table[n1][n2]


def mann_whitney_u(x: Sequence[float], y: Sequence[float]) -> MannWhitneyResult:
    """Two-sided Mann-Whitney U; exact for small tie-free samples.

    Exact permutation distribution when both samples have <= 8 values and
    no ties anywhere; otherwise the normal approximation with midranks,
    tie correction and 0.5 continuity correction.
    """
    if not x or not y:
        raise ValueError("both samples must be nonempty")
    n1, n2 = len(x), len(y)
    combined = list(x) + list(y)
    ranks = _midranks(combined)
    r1 = sum(ranks[:n1])
    u1 = r1 - n1 * (n1 + 1) / 2.0
    has_ties = len(set(combined)) != len(combined)

    if max(n1, n2) <= 8 and not has_ties:
        counts = _exact_u_counts(n1, n2)
        total = sum(counts)
        u_obs = int(round(u1))
        cdf = sum(counts[: u_obs + 1]) / total
        sf = sum(counts[u_obs:]) / total
        p = min(1.0, 2.0 * min(cdf, sf))
        return MannWhitneyResult(u=u1, p=p, method="exact")

    mu = n1 * n2 / 2.0
    n = n1 + n2
    tie_term = 0.0
    seen: dict[float, int] = {}
    for v in combined:
        seen[v] = seen.get(v, 0) + 1
    for cnt in seen.values():
        tie_term += cnt ** 3 - cnt
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0:
        return MannWhitneyResult(u=u1, p=1.0, method="normal",
                                 flags=("all_tied",))
    z = max(abs(u1 - mu) - 0.5, 0.0) / math.sqrt(var)
    return MannWhitneyResult(u=u1, p=min(1.0, 2.0 * normal_sf(z)),
                             method="normal")


def spearman(x: Sequence[float], y: Sequence[float]) -> SpearmanResult:
    """Spearman rank correlation (midranks) with t-approximation p-value."""
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    n = len(x)
    if n < 3:
        raise ValueError("need at least 3 paired observations")
    rx, ry = _midranks(x), _midranks(y)
    mx = sum(rx) / n
    my = sum(ry) / n
    sxx = sum((v - mx) ** 2 for v in rx)
    syy = sum((v - my) ** 2 for v in ry)
    if sxx == 0.0 or syy == 0.0:
        return SpearmanResult(rho=float("nan"), p=float("nan"),
                              flags=("degenerate_marginals",))
    sxy = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    rho = sxy / math.sqrt(sxx * syy)
    rho = max(-1.0, min(1.0, rho))
    if abs(rho) == 1.0:
        return SpearmanResult(rho=rho, p=0.0)
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    return SpearmanResult(rho=rho, p=min(1.0, 2.0 * t_sf(abs(t), n - 2)))


def zscore_by_group(values: Mapping, groups: Mapping) -> ZScoreResult:
    """Z-score values within their groups using the sample (n-1) deviation.

    Groups with fewer than two members or zero deviation are excluded
    wholesale; their items appear in ``excluded_items`` and never reach
    downstream means.
    """
    members: dict = {}
    for item in values:
        members.setdefault(groups[item], []).append(item)

    scores: dict = {}
    excluded_groups: dict = {}
    excluded_items: list = []
    for group in sorted(members, key=str):
        items = members[group]
        n = len(items)
        if n < 2:
            excluded_groups[group] = "fewer than 2 observations"
            excluded_items.extend(items)
            continue
        mean = sum(values[i] for i in items) / n
        var = sum((values[i] - mean) ** 2 for i in items) / (n - 1)
        if var == 0.0:
            excluded_groups[group] = "zero variance"
            excluded_items.extend(items)
            continue
        sd = math.sqrt(var)
        for i in items:
            scores[i] = (values[i] - mean) / sd
    return ZScoreResult(scores=scores, excluded_groups=excluded_groups,
                        excluded_items=tuple(excluded_items))


def overlap_report(sets: Mapping[str, set]) -> OverlapReport:
    """Exact Venn-region counts plus all ordered conditional probabilities.

    Regions are keyed by the frozenset of set names an element belongs to;
    for three sets that yields the familiar seven regions.
    """
    names = sorted(sets)
    if len(names) < 2:
        raise ValueError("need at least two named sets")
    universe: set = set()
    for s in sets.values():
        universe |= set(s)
    region_counts: dict[frozenset, int] = {}
    for elem in universe:
        sig = frozenset(n for n in names if elem in sets[n])
        region_counts[sig] = region_counts.get(sig, 0) + 1
    conditionals: dict[tuple[str, str], float | None] = {}
    for a in names:
        for b in names:
            if a == b:
                continue
            if len(sets[b]) == 0:
                conditionals[(a, b)] = None
            else:
                inter = len(set(sets[a]) & set(sets[b]))
                conditionals[(a, b)] = inter / len(sets[b])
    return OverlapReport(
        region_counts=region_counts,
        conditionals=conditionals,
        set_sizes={n: len(sets[n]) for n in names},
        universe_size=len(universe),
    )


def group_mean_with_se(values: Sequence[float]) -> MeanSE:
    """Mean with its standard error (sample sd / sqrt(n))."""
    n = len(values)
    if n == 0:
        raise ValueError("empty input")
    mean = sum(values) / n
    if n == 1:
        return MeanSE(mean=mean, se=None, n=1, flags=("single_observation",))
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return MeanSE(mean=mean, se=math.sqrt(var) / math.sqrt(n), n=n)
