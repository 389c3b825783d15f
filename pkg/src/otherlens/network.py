"""Channel reference network: construction, stance propagation, centrality.

Edges come from post refs (forwards and mentions), weighted by count.
Self-references are dropped at build time but tallied. Propagation and
centrality both work on the undirected projection, where
w(u,v) = w(u->v) + w(v->u).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .corpus import Corpus
from .stats import SpearmanResult, spearman


STANCE_VALUES = ("pro_russia", "pro_ukraine", "other", "unlabeled")


@dataclass(frozen=True)
class ChannelGraph:
    nodes: tuple[str, ...]
    # directed weights keyed by (src, dst), src != dst
    edges: dict[tuple[str, str], float]
    stance: dict[str, str] = field(default_factory=dict)
    self_loops_dropped: int = 0
    auto_created: tuple[str, ...] = ()

    def __post_init__(self):
        known = set(self.nodes)
        for (u, v), w in self.edges.items():
            if u == v:
                raise ValueError(f"self loop survived construction: {u}")
            if u not in known or v not in known:
                raise ValueError(f"edge ({u}, {v}) references unknown node")
            if w <= 0:
                raise ValueError(f"edge ({u}, {v}) has nonpositive weight {w}")
        for n in self.nodes:
            self.stance.setdefault(n, "unlabeled")
        for n, s in self.stance.items():
            if n not in known:
                raise ValueError(f"stance for unknown node {n!r}")
            if s not in STANCE_VALUES:
                raise ValueError(f"stance {s!r} not one of {STANCE_VALUES}")

    def with_stance(self, stance: dict[str, str]) -> "ChannelGraph":
        return ChannelGraph(
            nodes=self.nodes,
            edges=self.edges,
            stance=dict(stance),
            self_loops_dropped=self.self_loops_dropped,
            auto_created=self.auto_created,
        )

    def undirected(self) -> dict[tuple[str, str], float]:
        """Symmetric weights keyed by sorted pair."""
        acc: dict[tuple[str, str], float] = {}
        for (u, v), w in self.edges.items():
            key = (u, v) if u <= v else (v, u)
            acc[key] = acc.get(key, 0.0) + w
        return acc

    def neighbors(self) -> dict[str, dict[str, float]]:
        adj: dict[str, dict[str, float]] = {n: {} for n in self.nodes}
        for (u, v), w in self.undirected().items():
            adj[u][v] = w
            adj[v][u] = w
        return adj

    def strength(self) -> dict[str, float]:
        """Weighted degree on the undirected projection."""
        adj = self.neighbors()
        return {n: sum(adj[n].values()) for n in self.nodes}

    def subgraph(self, keep: set[str]) -> "ChannelGraph":
        return ChannelGraph(
            nodes=tuple(n for n in self.nodes if n in keep),
            edges={
                (u, v): w
                for (u, v), w in self.edges.items()
                if u in keep and v in keep
            },
            self_loops_dropped=self.self_loops_dropped,
        )


def build_graph(c: Corpus, extra_nodes: tuple[str, ...] = ()) -> ChannelGraph:
    """Aggregate post refs into the directed channel graph.

    Nodes are every channel that posts plus every ref target; targets not
    in the corpus are auto-created with unlabeled stance and noted. Refs
    to a channel's own id are dropped (counted in self_loops_dropped).
    """
    known = set(c.channels) | set(extra_nodes)
    nodes = set(known)
    weights: dict[tuple[str, str], float] = {}
    dropped = 0
    for p in c.posts:
        for r in p.refs:
            nodes.add(r.target)
            if r.target == p.channel_id:
                dropped += 1
                continue
            key = (p.channel_id, r.target)
            weights[key] = weights.get(key, 0.0) + 1.0
    stance = {}
    for n in nodes:
        declared = c.channels[n].declared_stance if n in c.channels else None
        stance[n] = declared if declared else "unlabeled"
    return ChannelGraph(
        nodes=tuple(sorted(nodes)),
        edges=weights,
        stance=stance,
        self_loops_dropped=dropped,
        auto_created=tuple(sorted(nodes - known)),
    )


@dataclass
class PropagationResult:
    labels: dict[str, str]
    passes: int
    changed_per_pass: list[int] = field(default_factory=list)
    dropped_seeds: tuple[str, ...] = ()


def propagate_labels(
    g: ChannelGraph,
    seeds: dict[str, str],
    fill_label: str = "other",
    max_passes: int | None = None,
) -> PropagationResult:
    """Asynchronous weighted-majority label propagation with frozen seeds.

    Nodes update in ascending-id order within each pass; each update sees
    the labels as of that moment. A node takes the label with the largest
    summed neighbor weight, keeping its current assignment on a tie or
    when no labeled neighbor exists. Terminates when a pass changes
    nothing (at most |V| passes); nodes still unlabeled get fill_label.
    Seeds naming nodes outside the graph are dropped and reported.
    """
    if not seeds:
        raise ValueError("at least one seed required")
    known = set(g.nodes)
    dropped = tuple(sorted(s for s in seeds if s not in known))
    seeds = {s: lab for s, lab in seeds.items() if s in known}
    if not seeds:
        raise ValueError("no seed names a node in the graph")
    limit = max_passes if max_passes is not None else max(1, len(g.nodes))
    adj = g.neighbors()
    labels: dict[str, str | None] = {n: seeds.get(n) for n in g.nodes}
    order = sorted(n for n in g.nodes if n not in seeds)
    changed_per_pass: list[int] = []
    passes = 0
    for _ in range(limit):
        passes += 1
        changed = 0
        for n in order:
            votes: dict[str, float] = {}
            for m, w in adj[n].items():
                lab = labels[m]
                if lab is not None:
                    votes[lab] = votes.get(lab, 0.0) + w
            if not votes:
                continue
            best = max(votes.values())
            winners = [lab for lab, v in votes.items() if v == best]
            if len(winners) > 1:
                continue  # tie keeps the current label
            if labels[n] != winners[0]:
                labels[n] = winners[0]
                changed += 1
        changed_per_pass.append(changed)
        if changed == 0:
            break
    final = {n: (lab if lab is not None else fill_label) for n, lab in labels.items()}
    return PropagationResult(
        labels=final,
        passes=passes,
        changed_per_pass=changed_per_pass,
        dropped_seeds=dropped,
    )


class ConvergenceError(ArithmeticError):
    """Power iteration failed to converge; carries the last iterate."""

    def __init__(self, message: str, last_iterate: dict[str, float]):
        super().__init__(message)
        self.last_iterate = last_iterate


def degree_centrality(g: ChannelGraph) -> dict[str, float]:
    return g.strength()


def eigenvector_centrality(
    g: ChannelGraph, tol: float = 1e-10, max_iters: int = 1000
) -> dict[str, float]:
    """Principal-eigenvector scores on the undirected projection.

    Power iteration runs on A/s + I (s = max strength); the shift leaves
    eigenvectors untouched but makes the spectrum nonnegative, so
    bipartite graphs converge instead of oscillating. The returned vector
    is unit length and nonnegative, checked against the original A.
    """
    n = len(g.nodes)
    if n == 0:
        raise ValueError("empty graph")
    adj = g.neighbors()
    strengths = g.strength()
    s = max(strengths.values()) if strengths else 0.0
    if s <= 0:
        # no edges: centrality is uniform
        val = 1.0 / math.sqrt(n)
        return {node: val for node in g.nodes}
    idx = {node: i for i, node in enumerate(g.nodes)}
    vec = [1.0 / math.sqrt(n)] * n

    def apply_a(x: list[float]) -> list[float]:
        out = [0.0] * n
        for node, nbrs in adj.items():
            i = idx[node]
            acc = 0.0
            for m, w in nbrs.items():
                acc += w * x[idx[m]]
            out[i] = acc
        return out

    for _ in range(max_iters):
        ax = apply_a(vec)
        nxt = [ax[i] / s + vec[i] for i in range(n)]
        norm = math.sqrt(sum(v * v for v in nxt))
        if norm == 0:
            raise ConvergenceError(
                "power iteration collapsed to zero",
                {node: vec[idx[node]] for node in g.nodes},
            )
        nxt = [v / norm for v in nxt]
        diff = math.sqrt(sum((nxt[i] - vec[i]) ** 2 for i in range(n)))
        vec = nxt
        if diff < tol:
            break
    else:
        raise ConvergenceError(
            f"no convergence in {max_iters} iterations",
            {node: vec[idx[node]] for node in g.nodes},
        )
    # sign fix: principal eigenvector of a nonnegative matrix is nonnegative
    if sum(vec) < 0:
        vec = [-v for v in vec]
    vec = [max(v, 0.0) for v in vec]
    norm = math.sqrt(sum(v * v for v in vec))
    vec = [v / norm for v in vec]
    # residual check against the unshifted matrix
    av = apply_a(vec)
    lam = sum(av[i] * vec[i] for i in range(n))  # Rayleigh quotient
    residual = math.sqrt(sum((av[i] - lam * vec[i]) ** 2 for i in range(n)))
    if residual >= 10 * tol * max(1.0, abs(lam)):
        raise ArithmeticError(f"residual {residual:.3e} too large for tol {tol:.1e}")
    return {node: vec[idx[node]] for node in g.nodes}


@dataclass(frozen=True)
class CentralityComparison:
    centrality: str
    by_node: dict[str, tuple[float, float]]  # node -> (centrality, othering rate)
    correlation: SpearmanResult


def centrality_vs_othering(
    g: ChannelGraph,
    rates: dict[str, float],
    kind: str = "degree",
) -> CentralityComparison:
    """Spearman correlation between channel centrality and othering rate.

    Only nodes present in both the graph and the rates mapping enter the
    correlation; order is ascending node id.
    """
    if kind == "degree":
        cent = degree_centrality(g)
    elif kind == "eigenvector":
        cent = eigenvector_centrality(g)
    else:
        raise ValueError(f"unknown centrality kind {kind!r}")
    common = sorted(set(cent) & set(rates))
    if len(common) < 3:
        raise ValueError("need at least 3 channels with both centrality and rate")
    xs = [cent[n] for n in common]
    ys = [rates[n] for n in common]
    return CentralityComparison(
        centrality=kind,
        by_node={n: (cent[n], rates[n]) for n in common},
        correlation=spearman(xs, ys),
    )
