"""Clique report model, JSON emission, and report-derived tables."""
from __future__ import annotations

import csv
import json
import os
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .cliques import Clique, CliqueStats, stats_from_counts
from .corpus import KINDS, CorpusManifest, load_corpus
from .graph import AnalysisConfig
from .pipeline import PreparedCorpus, prepare, run_cliques
from .profile import (
    ANTI_ADBLOCKER,
    TAGS,
    CliqueProfile,
    SignatureRuleSet,
    VendorRow,
    attribute_vendors,
    classify_clique,
    profile_clique,
)

RANK_BUCKET = 1000


@dataclass(frozen=True)
class MemberScript:
    script_id: str
    site_id: str
    source_url: str | None
    content_hash: str


@dataclass(frozen=True)
class ReportClique:
    clique_id: str
    node_ids: tuple[str, ...]
    sites: tuple[str, ...]
    kind: str
    min_internal_score: float
    source_fqdns: tuple[str, ...]
    external_fqdns: tuple[str, ...]
    top_keywords: tuple[tuple[str, float], ...]
    tag: str
    tag_evidence: tuple[tuple[str, str, str], ...]
    overlaps_with: tuple[str, ...]
    members: tuple[MemberScript, ...]

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def fingerprint(self) -> tuple[str, ...]:
        return tuple(sorted({m.content_hash for m in self.members}))


@dataclass(frozen=True)
class TagSummary:
    n_cliques: int
    n_sites: int


@dataclass(frozen=True)
class CliqueReport:
    tool_version: str
    config: AnalysisConfig
    cliques: tuple[ReportClique, ...]
    stats_by_kind: dict[str, CliqueStats]
    tag_summary: dict[str, TagSummary]
    vendors: tuple[VendorRow, ...] = ()
    audit: dict[str, int] = field(default_factory=dict)
    rules_version: str = ""
    rank_buckets: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "CliqueReport":
        cliques = []
        for c in data["cliques"]:
            cliques.append(
                ReportClique(
                    clique_id=c["clique_id"],
                    node_ids=tuple(c["node_ids"]),
                    sites=tuple(c["sites"]),
                    kind=c["kind"],
                    min_internal_score=c["min_internal_score"],
                    source_fqdns=tuple(c["source_fqdns"]),
                    external_fqdns=tuple(c["external_fqdns"]),
                    top_keywords=tuple((t, w) for t, w in c["top_keywords"]),
                    tag=c["tag"],
                    tag_evidence=tuple(tuple(e) for e in c["tag_evidence"]),
                    overlaps_with=tuple(c["overlaps_with"]),
                    members=tuple(MemberScript(**m) for m in c["members"]),
                )
            )
        return cls(
            tool_version=data["tool_version"],
            config=AnalysisConfig.from_dict(data["config"]),
            cliques=tuple(cliques),
            stats_by_kind={k: CliqueStats(**v) for k, v in data["stats_by_kind"].items()},
            tag_summary={k: TagSummary(**v) for k, v in data["tag_summary"].items()},
            vendors=tuple(
                VendorRow(v["domain"], v["n_sites"], tuple(v["clique_ids"])) for v in data.get("vendors", ())
            ),
            audit=dict(data.get("audit", {})),
            rules_version=data.get("rules_version", ""),
            rank_buckets=dict(data.get("rank_buckets", {})),
        )

    @classmethod
    def from_json(cls, text: str) -> "CliqueReport":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "CliqueReport":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    def write(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")


def _overlaps(cliques: list[Clique]) -> dict[str, tuple[str, ...]]:
    by_node: dict[str, list[str]] = {}
    for c in cliques:
        for n in c.node_ids:
            by_node.setdefault(n, []).append(c.clique_id)
    out = {}
    for c in cliques:
        others = {o for n in c.node_ids for o in by_node[n] if o != c.clique_id}
        out[c.clique_id] = tuple(sorted(others))
    return out


def _rank_buckets(manifest: CorpusManifest, sites: set[str]) -> dict[str, int]:
    ranks: dict[str, int] = {}
    for p in manifest.pages:
        if p.rank is not None:
            ranks[p.site_id] = min(p.rank, ranks.get(p.site_id, p.rank))
    if not ranks:
        return {}
    counts: Counter[int] = Counter()
    for site in sites:
        if site in ranks:
            counts[(ranks[site] - 1) // RANK_BUCKET] += 1
    last = (max(ranks.values()) - 1) // RANK_BUCKET
    return {
        f"{b * RANK_BUCKET + 1}-{(b + 1) * RANK_BUCKET}": counts.get(b, 0) for b in range(last + 1)
    }


def build_report(
    prepared: PreparedCorpus,
    rules: SignatureRuleSet,
    dump_graph: str | os.PathLike | None = None,
) -> CliqueReport:
    graph, cliques = run_cliques(prepared)
    if dump_graph is not None:
        graph.dump_csv(dump_graph)
    manifest = prepared.manifest
    nodes = prepared.node_map()
    overlaps = _overlaps(cliques)
    entries = []
    for clique in cliques:
        contents = prepared.member_contents(clique)
        profile = profile_clique(clique, manifest, nodes, prepared.vectors, prepared.contents)
        profile = classify_clique(profile, contents, rules)
        members = tuple(
            MemberScript(r.id, r.site_id, r.source_url, r.content_hash)
            for r in (manifest.script_by_id[s] for s in sorted(contents))
        )
        entries.append(_merge(clique, profile, overlaps[clique.clique_id], members))

    stats_by_kind = {k: stats_from_counts([c.n_sites for c in entries if c.kind == k]) for k in KINDS}
    tag_summary = {}
    for tag in TAGS:
        tagged = [c for c in entries if c.tag == tag]
        tag_summary[tag] = TagSummary(len(tagged), len(set().union(*(c.sites for c in tagged))))
    anti_sites = set().union(*(c.sites for c in entries if c.tag == ANTI_ADBLOCKER))
    vendors = attribute_vendors(entries, {c.clique_id: c.sites for c in entries})
    return CliqueReport(
        tool_version=__version__,
        config=prepared.config,
        cliques=tuple(entries),
        stats_by_kind=stats_by_kind,
        tag_summary=tag_summary,
        vendors=tuple(vendors),
        audit=dict(sorted(graph.audit.items())),
        rules_version=rules.version,
        rank_buckets=_rank_buckets(manifest, anti_sites),
    )


def _merge(clique: Clique, profile: CliqueProfile, overlaps, members) -> ReportClique:
    return ReportClique(
        clique_id=clique.clique_id,
        node_ids=clique.node_ids,
        sites=tuple(sorted(clique.sites)),
        kind=clique.kind,
        min_internal_score=clique.min_internal_score,
        source_fqdns=profile.source_fqdns,
        external_fqdns=profile.external_fqdns,
        top_keywords=profile.top_keywords,
        tag=profile.tag,
        tag_evidence=profile.tag_evidence,
        overlaps_with=overlaps,
        members=members,
    )


def analyze(
    corpus_dir,
    config: AnalysisConfig | None = None,
    rules_path=None,
    out_path=None,
    dump_graph=None,
) -> CliqueReport:
    """Run the whole pipeline on a corpus directory and optionally write JSON."""
    config = config or AnalysisConfig()
    rules = SignatureRuleSet.load(rules_path)
    manifest = load_corpus(corpus_dir)
    report = build_report(prepare(manifest, config), rules, dump_graph)
    if out_path is not None:
        report.write(out_path)
    return report


@dataclass(frozen=True)
class CategoryTable:
    rows: tuple[tuple[str, float], ...]
    basis: str
    n_uncategorized: int = 0


def read_category_map(path) -> dict[str, str]:
    mapping = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or not row[0].strip() or row[0].startswith("#"):
                continue
            if i == 0 and row[0].strip().lower() == "site_id":
                continue
            if len(row) < 2:
                raise ValueError(f"{path}: line {i + 1} needs site_id,category")
            mapping[row[0].strip().lower()] = row[1].strip()
    return mapping


def categorize(report: CliqueReport, category_map_path) -> CategoryTable:
    """Category distribution of sites hosting anti-adblock cliques.

    Unmapped sites are left out of the percentage basis and counted apart.
    """
    mapping = read_category_map(category_map_path)
    sites = set().union(*(c.sites for c in report.cliques if c.tag == ANTI_ADBLOCKER))
    counts = Counter(mapping[s] for s in sites if s in mapping)
    total = sum(counts.values())
    rows = tuple(
        sorted(((cat, 100.0 * n / total) for cat, n in counts.items()), key=lambda r: (-r[1], r[0]))
    )
    return CategoryTable(rows, "anti_adblock_sites", len(sites) - total)


@dataclass(frozen=True)
class TopClique:
    clique_id: str
    n_sites: int
    kind: str
    tag: str
    source_fqdns: tuple[str, ...]
    keywords: tuple[str, ...]


def top_cliques(report: CliqueReport, k: int) -> list[TopClique]:
    if k < 0:
        raise ValueError("k must be nonnegative")
    ranked = sorted(report.cliques, key=lambda c: (-c.n_sites, c.clique_id))[:k]
    return [
        TopClique(c.clique_id, c.n_sites, c.kind, c.tag, c.source_fqdns, tuple(t for t, _ in c.top_keywords[:5]))
        for c in ranked
    ]

