"""Script-similarity graph construction with comparison-pruning filters.

Pairs of nodes are only scored when they survive every filter:

* kind: embedded scripts are never compared with downloaded ones;
* external refs: both or neither script must reference absolute URLs;
* word count: ``max(t1, t2) / min(t1, t2) <= wordcount_ratio_max``;
* source: scripts fetched from the same URL (or byte-identical copies)
  are merged into a single node before any comparison.
"""
from __future__ import annotations

import bisect
import csv
import itertools
import re
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterator, Mapping

import numpy as np
import scipy.sparse as sp

from .corpus import DOWNLOADED, CorpusManifest
from .lexical import KeywordVector, TokenBag, cosine_similarity


@dataclass(frozen=True)
class AnalysisConfig:
    similarity_threshold: float = 0.80
    wordcount_ratio_max: float = 1.50
    min_clique_sites: int = 6
    min_tokens: int = 10

    def __post_init__(self):
        if not 0.0 <= self.similarity_threshold <= 1.0:
            raise ValueError("similarity_threshold must lie in [0, 1]")
        if not self.wordcount_ratio_max > 1.0:
            raise ValueError("wordcount_ratio_max must exceed 1")
        if self.min_clique_sites < 1:
            raise ValueError("min_clique_sites must be positive")
        if self.min_tokens < 0:
            raise ValueError("min_tokens must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping) -> "AnalysisConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class GraphNode:
    node_id: str
    member_scripts: tuple[str, ...]
    kind: str
    sites: frozenset[str]
    has_external_refs: bool

    @property
    def representative(self) -> str:
        return self.member_scripts[0]


@dataclass(frozen=True, order=True)
class SimilarityEdge:
    a: str
    b: str
    score: float


@dataclass
class SimilarityGraph:
    nodes: dict[str, GraphNode]
    edges: list[SimilarityEdge]
    threshold: float
    audit: dict[str, int] = field(default_factory=dict)

    def adjacency(self) -> dict[str, set[str]]:
        adj: dict[str, set[str]] = {n: set() for n in self.nodes}
        for e in self.edges:
            adj[e.a].add(e.b)
            adj[e.b].add(e.a)
        return adj

    def edge_scores(self) -> dict[tuple[str, str], float]:
        return {(e.a, e.b): e.score for e in self.edges}

    def at_threshold(self, threshold: float) -> "SimilarityGraph":
        """Subgraph keeping only edges scoring at least ``threshold``."""
        if threshold < self.threshold:
            raise ValueError("cannot lower the threshold of a built graph")
        edges = [e for e in self.edges if e.score >= threshold]
        audit = dict(self.audit, edges=len(edges))
        return SimilarityGraph(self.nodes, edges, threshold, audit)

    def dump_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["node_a", "node_b", "score"])
            for e in sorted(self.edges):
                writer.writerow([e.a, e.b, repr(e.score)])


# Absolute or scheme-relative URL: "//" must be followed by a hostname char.
_EXTERNAL_REF = re.compile(rb"(?:https?:)?//[A-Za-z0-9]", re.IGNORECASE)
_EXPLICIT_SCHEME = re.compile(rb"https?://", re.IGNORECASE)


def external_ref_scan(content: bytes | str) -> bool:
    if isinstance(content, str):
        content = content.encode("utf-8", errors="replace")
    if _EXPLICIT_SCHEME.search(content):
        return True
    # Scheme-relative: exclude "//" preceded by ':' (other schemes), by
    # another '/' (comment banners like "////") or by '\\' (regex escapes).
    for m in _EXTERNAL_REF.finditer(content):
        start = m.start()
        if start > 0 and content[start - 1 : start] in (b":", b"/", b"\\"):
            continue
        return True
    return False


class _UnionFind:
    def __init__(self):
        self.parent: dict[str, str] = {}

    def find(self, x: str) -> str:
        parent = self.parent.setdefault(x, x)
        if parent != x:
            parent = self.parent[x] = self.find(parent)
        return parent

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # Keep the lexicographically smallest id as root.
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


def analyzable_scripts(manifest: CorpusManifest, bags: Mapping[str, TokenBag], config: AnalysisConfig):
    for s in manifest.scripts:
        if s.too_small:
            continue
        bag = bags.get(s.id)
        if bag is None or bag.total_terms < max(config.min_tokens, 1):
            continue
        yield s


def build_nodes(
    manifest: CorpusManifest,
    vectors: Mapping[str, KeywordVector],
    config: AnalysisConfig,
    contents: Mapping[str, bytes] | None = None,
) -> list[GraphNode]:
    """Merge same-URL downloads and byte-identical copies into nodes.

    Only scripts present in ``vectors`` are considered; callers decide
    analysability (size and ``min_tokens``) when vectorising.
    """
    scripts = [s for s in manifest.scripts if s.id in vectors]
    uf = _UnionFind()
    first_by_key: dict[tuple, str] = {}
    for s in scripts:
        uf.find(s.id)
        keys = [(s.kind, "hash", s.content_hash)]
        if s.kind == DOWNLOADED and s.source_url:
            keys.append((s.kind, "url", s.source_url))
        for key in keys:
            other = first_by_key.setdefault(key, s.id)
            if other != s.id:
                uf.union(other, s.id)

    groups: dict[str, list] = defaultdict(list)
    for s in scripts:
        groups[uf.find(s.id)].append(s)

    refs_by_hash: dict[str, bool] = {}

    def has_refs(script) -> bool:
        if script.content_hash not in refs_by_hash:
            data = contents[script.id] if contents is not None else manifest.read_script(script)
            refs_by_hash[script.content_hash] = external_ref_scan(data)
        return refs_by_hash[script.content_hash]

    nodes = []
    for members in groups.values():
        members.sort(key=lambda s: s.id)
        nodes.append(
            GraphNode(
                node_id=members[0].id,
                member_scripts=tuple(s.id for s in members),
                kind=members[0].kind,
                sites=frozenset(s.site_id for s in members),
                has_external_refs=any(has_refs(s) for s in members),
            )
        )
    nodes.sort(key=lambda n: n.node_id)
    return nodes


def _node_terms(nodes, bags) -> dict[str, int]:
    return {n.node_id: bags[n.representative].total_terms for n in nodes}


def _ratio_ok(t1: int, t2: int, bound: float) -> bool:
    lo, hi = (t1, t2) if t1 <= t2 else (t2, t1)
    if lo == 0:
        return False
    return hi <= bound * lo


def _filter_groups(nodes, terms):
    groups: dict[tuple[str, bool], list[GraphNode]] = defaultdict(list)
    for n in nodes:
        if terms[n.node_id] > 0:
            groups[(n.kind, n.has_external_refs)].append(n)
    for key in groups:
        groups[key].sort(key=lambda n: (terms[n.node_id], n.node_id))
    return groups


def candidate_pairs(
    nodes: list[GraphNode], bags: Mapping[str, TokenBag], config: AnalysisConfig
) -> Iterator[tuple[str, str]]:
    """Yield node-id pairs ``(a, b)`` with ``a < b`` that survive every filter."""
    terms = _node_terms(nodes, bags)
    groups = _filter_groups(nodes, terms)
    for key in sorted(groups):
        group = groups[key]
        counts = [terms[n.node_id] for n in group]
        for i, node in enumerate(group):
            hi = bisect.bisect_right(counts, config.wordcount_ratio_max * counts[i])
            for j in range(i + 1, hi):
                other = group[j]
                if not _ratio_ok(counts[i], counts[j], config.wordcount_ratio_max):
                    continue
                a, b = sorted((node.node_id, other.node_id))
                yield a, b


def _count_ratio_survivors(counts: list[int], bound: float) -> int:
    total = 0
    for i, c in enumerate(counts):
        hi = bisect.bisect_right(counts, bound * c)
        total += max(0, hi - i - 1)
    return total


def filter_audit(nodes, bags, config, n_scripts: int | None = None) -> dict[str, int]:
    """Per-filter elimination counts, applied in order kind, refs, word count."""
    terms = _node_terms(nodes, bags)
    n = len(nodes)
    total = n * (n - 1) // 2
    by_kind: dict[str, int] = defaultdict(int)
    by_kind_refs: dict[tuple, int] = defaultdict(int)
    for node in nodes:
        by_kind[node.kind] += 1
        by_kind_refs[(node.kind, node.has_external_refs)] += 1
    same_kind = sum(c * (c - 1) // 2 for c in by_kind.values())
    same_refs = sum(c * (c - 1) // 2 for c in by_kind_refs.values())
    groups = _filter_groups(nodes, terms)
    zero = same_refs - sum(len(g) * (len(g) - 1) // 2 for g in groups.values())
    survivors = sum(
        _count_ratio_survivors([terms[x.node_id] for x in g], config.wordcount_ratio_max)
        for g in groups.values()
    )
    merged = sum(len(x.member_scripts) * (len(x.member_scripts) - 1) // 2 for x in nodes)
    audit = {
        "nodes": n,
        "node_pairs": total,
        "eliminated_kind": total - same_kind,
        "eliminated_external_refs": same_kind - same_refs,
        "eliminated_zero_terms": zero,
        "eliminated_wordcount": same_refs - zero - survivors,
        "merged_by_source": merged,
        "candidate_pairs": survivors,
    }
    if n_scripts is not None:
        audit["scripts"] = n_scripts
        audit["script_pairs"] = n_scripts * (n_scripts - 1) // 2
    return audit


def _normalized_matrix(group, vectors, vocab: dict[str, int]) -> sp.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for node in group:
        vec = vectors[node.representative]
        for term, w in vec.weights.items():
            col = vocab.setdefault(term, len(vocab))
            indices.append(col)
            data.append(w / vec.norm)
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.asarray(data, dtype=np.float64), np.asarray(indices), np.asarray(indptr)),
        shape=(len(group), max(len(vocab), 1)),
    )


# Coarse pre-screen margin; every kept edge is re-scored exactly.
_SCREEN_EPS = 1e-6


def build_graph(
    nodes: list[GraphNode],
    vectors: Mapping[str, KeywordVector],
    bags: Mapping[str, TokenBag],
    config: AnalysisConfig,
    block_rows: int = 512,
) -> SimilarityGraph:
    """Score every candidate pair and keep edges at or above the threshold.

    Candidate scoring is vectorised per filter group with sparse products;
    pairs passing the coarse screen are re-scored with
    :func:`cosine_similarity` so edge scores are exact.
    """
    threshold = config.similarity_threshold
    terms = _node_terms(nodes, bags)
    groups = _filter_groups(nodes, terms)
    edges: list[SimilarityEdge] = []
    for key in sorted(groups):
        group = groups[key]
        counts = np.array([terms[n.node_id] for n in group], dtype=np.float64)
        vocab: dict[str, int] = {}
        matrix = _normalized_matrix(group, vectors, vocab)
        matrix_t = matrix.T.tocsc()
        for start in range(0, len(group), block_rows):
            stop = min(start + block_rows, len(group))
            # Columns beyond the word-count window can never be candidates.
            col_stop = int(np.searchsorted(counts, config.wordcount_ratio_max * counts[stop - 1], side="right"))
            block = (matrix[start:stop] @ matrix_t[:, start:col_stop]).tocoo()
            rows = block.row + start
            cols = block.col + start
            keep = (cols > rows) & (block.data >= threshold - _SCREEN_EPS)
            for i, j in zip(rows[keep].tolist(), cols[keep].tolist()):
                if not _ratio_ok(int(counts[i]), int(counts[j]), config.wordcount_ratio_max):
                    continue
                a, b = group[i], group[j]
                score = cosine_similarity(vectors[a.representative], vectors[b.representative])
                if score >= threshold:
                    x, y = sorted((a.node_id, b.node_id))
                    edges.append(SimilarityEdge(x, y, score))
    edges.sort()
    audit = filter_audit(nodes, bags, config)
    audit["edges"] = len(edges)
    return SimilarityGraph({n.node_id: n for n in nodes}, edges, threshold, audit)


def brute_force_edges(nodes, vectors, threshold: float) -> list[SimilarityEdge]:
    """Unfiltered all-pairs pass; a reference for tests and benchmarks."""
    edges = []
    for a, b in itertools.combinations(sorted(nodes, key=lambda n: n.node_id), 2):
        score = cosine_similarity(vectors[a.representative], vectors[b.representative])
        if score >= threshold:
            edges.append(SimilarityEdge(a.node_id, b.node_id, score))
    return edges
