"""Shared pipeline stages: dedup, tokenise, vectorise and build graph nodes."""
from __future__ import annotations

import logging
from dataclasses import dataclass

from .cliques import Clique, find_cliques
from .corpus import CorpusManifest, dedup_scripts
from .graph import AnalysisConfig, GraphNode, SimilarityGraph, build_graph, build_nodes
from .lexical import KeywordVector, TokenBag, build_vocabulary, tfidf_vector, tokenize

log = logging.getLogger(__name__)


@dataclass
class PreparedCorpus:
    manifest: CorpusManifest
    config: AnalysisConfig
    contents: dict[str, bytes]
    bags: dict[str, TokenBag]
    vectors: dict[str, KeywordVector]
    nodes: list[GraphNode]

    def graph(self, config: AnalysisConfig | None = None) -> SimilarityGraph:
        config = config or self.config
        graph = build_graph(self.nodes, self.vectors, self.bags, config)
        graph.audit["scripts"] = len(self.manifest.scripts)
        graph.audit["analyzable_scripts"] = len(self.vectors)
        return graph

    def node_map(self) -> dict[str, GraphNode]:
        return {n.node_id: n for n in self.nodes}

    def member_contents(self, clique: Clique) -> dict[str, bytes]:
        nodes = self.node_map()
        return {s: self.contents[s] for n in clique.node_ids for s in nodes[n].member_scripts}


def prepare(manifest: CorpusManifest, config: AnalysisConfig) -> PreparedCorpus:
    """Vectorise every analysable script.

    Scripts under the size floor or with fewer than ``min_tokens`` terms are
    kept in the manifest but get no vector. Document frequencies are counted
    over analysable script records, so cross-site copies each count.
    """
    manifest = dedup_scripts(manifest)
    by_hash: dict[str, bytes] = {}
    contents: dict[str, bytes] = {}
    bags: dict[str, TokenBag] = {}
    for s in manifest.scripts:
        if s.too_small:
            continue
        if s.content_hash not in by_hash:
            by_hash[s.content_hash] = manifest.read_script(s)
        contents[s.id] = by_hash[s.content_hash]
        bags[s.id] = tokenize(contents[s.id], s.id)
    floor = max(config.min_tokens, 1)
    analyzable = [bags[s] for s in bags if bags[s].total_terms >= floor]
    vectors: dict[str, KeywordVector] = {}
    if analyzable:
        stats = build_vocabulary(analyzable)
        vectors = {bag.script_id: tfidf_vector(bag, stats) for bag in analyzable}
    nodes = build_nodes(manifest, vectors, config, contents)
    log.info(
        "prepared %d scripts (%d analysable) into %d nodes",
        len(manifest.scripts), len(vectors), len(nodes),
    )
    return PreparedCorpus(manifest, config, contents, bags, vectors, nodes)


def run_cliques(prepared: PreparedCorpus, graph: SimilarityGraph | None = None) -> tuple[SimilarityGraph, list[Clique]]:
    graph = graph or prepared.graph()
    return graph, find_cliques(graph, prepared.config)
