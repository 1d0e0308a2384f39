"""Maximal clique enumeration over the similarity graph."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import CliqueBudgetExceeded
from .graph import AnalysisConfig, SimilarityGraph

DEFAULT_BUDGET = 10**8


@dataclass(frozen=True)
class Clique:
    clique_id: str
    node_ids: tuple[str, ...]
    sites: frozenset[str]
    kind: str
    min_internal_score: float

    @property
    def n_sites(self) -> int:
        return len(self.sites)


@dataclass(frozen=True)
class CliqueStats:
    n_cliques: int
    mean_sites: float
    std_sites: float
    max_sites: int


def clique_id_for(node_ids: Iterable[str]) -> str:
    digest = hashlib.sha256("\n".join(sorted(node_ids)).encode("utf-8")).hexdigest()
    return f"c{digest[:12]}"


def degeneracy_order(adj: Mapping[str, set[str]]) -> list[str]:
    """Vertices in smallest-last order (repeatedly remove a min-degree vertex)."""
    degree = {v: len(ns) for v, ns in adj.items()}
    max_deg = max(degree.values(), default=0)
    buckets: list[set[str]] = [set() for _ in range(max_deg + 1)]
    for v, d in degree.items():
        buckets[d].add(v)
    removed: set[str] = set()
    order: list[str] = []
    d = 0
    for _ in range(len(adj)):
        d = max(d - 1, 0)
        while not buckets[d]:
            d += 1
        # Any min-degree vertex works; the clique set is order-independent.
        v = buckets[d].pop()
        removed.add(v)
        order.append(v)
        for u in adj[v]:
            if u not in removed:
                du = degree[u]
                buckets[du].discard(u)
                degree[u] = du - 1
                buckets[du - 1].add(u)
    return order


def maximal_cliques(adj: Mapping[str, set[str]], budget: int = DEFAULT_BUDGET) -> list[frozenset[str]]:
    """All maximal cliques (any size) of an undirected simple graph.

    Eppstein-Löffler-Strash: the outer loop walks a degeneracy ordering and
    each inner call is Tomita-pivoted Bron-Kerbosch.
    """
    steps = 0
    found: list[frozenset[str]] = []

    def frame(r: list[str], p: set[str], x: set[str]):
        nonlocal steps
        steps += 1
        if steps > budget:
            raise CliqueBudgetExceeded(
                f"maximal clique enumeration exceeded {budget} recursion steps"
            )
        if not p:
            if not x:
                found.append(frozenset(r))
            return None
        pivot = max(p | x, key=lambda u: (len(p & adj[u]), u))
        return r, p, x, sorted(p - adj[pivot], reverse=True)

    def expand(r: list[str], p: set[str], x: set[str]) -> None:
        # Explicit stack: clique sizes can exceed the interpreter recursion limit.
        stack = [f] if (f := frame(r, p, x)) else []
        while stack:
            r, p, x, todo = stack[-1]
            if not todo:
                stack.pop()
                continue
            v = todo.pop()
            child = frame(r + [v], p & adj[v], x & adj[v])
            p.discard(v)
            x.add(v)
            if child:
                stack.append(child)

    position = {v: i for i, v in enumerate(degeneracy_order(adj))}
    for v, i in sorted(position.items(), key=lambda kv: kv[1]):
        later = {u for u in adj[v] if position[u] > i}
        earlier = {u for u in adj[v] if position[u] < i}
        expand([v], later, earlier)
    return found


def enumerate_maximal_cliques(graph: SimilarityGraph, budget: int = DEFAULT_BUDGET) -> list[Clique]:
    """Maximal cliques with at least two nodes, sorted by size then node ids."""
    adj = graph.adjacency()
    scores = graph.edge_scores()
    cliques = []
    for members in maximal_cliques(adj, budget):
        if len(members) < 2:
            continue
        cliques.append(_make_clique(graph, sorted(members), scores))
    cliques.sort(key=lambda c: (-len(c.node_ids), c.node_ids))
    return cliques


def _make_clique(graph, node_ids: list[str], scores) -> Clique:
    nodes = [graph.nodes[n] for n in node_ids]
    internal = [
        scores[(a, b)] for i, a in enumerate(node_ids) for b in node_ids[i + 1 :]
    ]
    return Clique(
        clique_id=clique_id_for(node_ids),
        node_ids=tuple(node_ids),
        sites=frozenset().union(*(n.sites for n in nodes)),
        kind=nodes[0].kind,
        min_internal_score=min(internal) if internal else 1.0,
    )


def merged_node_cliques(graph: SimilarityGraph) -> list[Clique]:
    """Single-node groups for isolated nodes spanning several sites.

    Same-URL and byte-identical copies collapse into one node, so a script
    served identically to many sites forms no edges yet is still shared.
    """
    adj = graph.adjacency()
    out = []
    for node_id, node in sorted(graph.nodes.items()):
        if not adj[node_id] and len(node.sites) > 1:
            out.append(_make_clique(graph, [node_id], {}))
    return out


def filter_by_sites(cliques: Iterable[Clique], config: AnalysisConfig) -> list[Clique]:
    return [c for c in cliques if len(c.sites) >= config.min_clique_sites]


def clique_stats(cliques: Iterable[Clique]) -> CliqueStats:
    counts = [len(c.sites) for c in cliques]
    return stats_from_counts(counts)


def stats_from_counts(counts: list[int]) -> CliqueStats:
    if not counts:
        return CliqueStats(0, 0.0, 0.0, 0)
    n = len(counts)
    mean = math.fsum(counts) / n
    var = math.fsum((c - mean) ** 2 for c in counts) / n
    return CliqueStats(n, mean, math.sqrt(var), max(counts))


def find_cliques(graph: SimilarityGraph, config: AnalysisConfig, budget: int = DEFAULT_BUDGET) -> list[Clique]:
    """Enumerate, add merged-node groups, and keep those spanning enough sites."""
    cliques = enumerate_maximal_cliques(graph, budget) + merged_node_cliques(graph)
    cliques.sort(key=lambda c: (-len(c.node_ids), c.node_ids))
    return filter_by_sites(cliques, config)
