"""Per-clique provenance features and signature-based functionality tags."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Iterable, Mapping

from .cliques import Clique
from .corpus import CorpusManifest
from .domains import is_valid_hostname, registrable_domain, url_host
from .errors import InvalidArgument
from .lexical import KeywordVector, iter_terms

ANTI_ADBLOCKER = "anti_adblocker"
TRACKER = "tracker"
OTHER = "other"
TAGS = (ANTI_ADBLOCKER, TRACKER, OTHER)
UNATTRIBUTED = "unattributed"
TOP_KEYWORDS = 25


@dataclass(frozen=True)
class CliqueProfile:
    clique_id: str
    source_fqdns: tuple[str, ...]
    external_fqdns: tuple[str, ...]
    top_keywords: tuple[tuple[str, float], ...]
    tag: str = OTHER
    tag_evidence: tuple[tuple[str, str, str], ...] = ()


@dataclass(frozen=True)
class SignatureRuleSet:
    version: str
    anti_adblock_terms: Mapping[str, float]
    tracker_terms: Mapping[str, float]
    thresholds: Mapping[str, float]
    # (family, lowercase term) -> (term as configured, weight)
    _index: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        index = {}
        for family, terms in (
            (ANTI_ADBLOCKER, self.anti_adblock_terms),
            (TRACKER, self.tracker_terms),
        ):
            for term, weight in terms.items():
                if not weight > 0:
                    raise InvalidArgument(f"signature term {term!r} needs a positive weight")
                key = term.lower()
                if (family, key) in index:
                    raise InvalidArgument(f"duplicate signature term {term!r}")
                index[(family, key)] = (term, float(weight))
        for tag in (ANTI_ADBLOCKER, TRACKER):
            value = self.thresholds.get(tag)
            if value is None or not value > 0:
                raise InvalidArgument(f"ruleset needs a positive threshold for {tag!r}")
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_dict(cls, data: Mapping) -> "SignatureRuleSet":
        try:
            return cls(
                version=str(data["version"]),
                anti_adblock_terms=dict(data["anti_adblock_terms"]),
                tracker_terms=dict(data["tracker_terms"]),
                thresholds=dict(data["thresholds"]),
            )
        except KeyError as exc:
            raise InvalidArgument(f"ruleset is missing key {exc.args[0]!r}") from exc

    @classmethod
    def load(cls, path=None) -> "SignatureRuleSet":
        if path is None:
            text = resources.files("scriptclique").joinpath("data/default_rules.json").read_text("utf-8")
        else:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        return cls.from_dict(json.loads(text))


def default_rules() -> SignatureRuleSet:
    return SignatureRuleSet.load()


# Absolute http(s) URLs and scheme-relative "//host" references.
_URL = re.compile(
    r"(?:https?:|(?<![:/]))//([A-Za-z0-9][A-Za-z0-9.-]*)",
    re.IGNORECASE,
)


def extract_fqdns(content: bytes | str) -> set[str]:
    if isinstance(content, bytes):
        content = content.decode("utf-8", errors="replace")
    hosts = set()
    for m in _URL.finditer(content):
        host = m.group(1).rstrip(".").lower()
        if is_valid_hostname(host):
            hosts.add(host)
    return hosts


def profile_clique(
    clique: Clique,
    manifest: CorpusManifest,
    nodes: Mapping,
    vectors: Mapping[str, KeywordVector],
    contents: Mapping[str, bytes] | None = None,
) -> CliqueProfile:
    """Source hosts, referenced hosts and mean-weight keywords of a clique.

    ``nodes`` maps node id to :class:`GraphNode`; every member script of
    every node contributes.
    """
    script_ids = member_scripts(clique, nodes)
    records = [manifest.script_by_id[s] for s in script_ids]
    source = {url_host(r.source_url) for r in records if r.source_url}
    source.discard(None)
    external: set[str] = set()
    seen_hashes: set[str] = set()
    for r in records:
        if r.content_hash in seen_hashes:
            continue
        seen_hashes.add(r.content_hash)
        data = contents[r.id] if contents is not None else manifest.read_script(r)
        external |= extract_fqdns(data)

    members = [vectors[s] for s in script_ids if s in vectors]
    totals: dict[str, float] = {}
    for vec in members:
        for term, w in vec.weights.items():
            totals[term] = totals.get(term, 0.0) + w
    ranked = sorted(((t, w / len(members)) for t, w in totals.items()), key=lambda tw: (-tw[1], tw[0]))
    return CliqueProfile(
        clique_id=clique.clique_id,
        source_fqdns=tuple(sorted(source)),
        external_fqdns=tuple(sorted(external)),
        top_keywords=tuple(ranked[:TOP_KEYWORDS]),
    )


def member_scripts(clique: Clique, nodes: Mapping) -> list[str]:
    return sorted(s for n in clique.node_ids for s in nodes[n].member_scripts)


def signature_matches(content: bytes | str, rules: SignatureRuleSet) -> dict[str, list[tuple[str, str, float]]]:
    """Distinct signature terms found among a script's tokens.

    Returns family -> [(signature term, token as written, weight)]. Matching
    is case-insensitive; the cited token is the first spelling in the text.
    """
    if isinstance(content, bytes):
        content = content.decode("utf-8", errors="replace")
    first_spelling: dict[str, str] = {}
    for token in iter_terms(content):
        first_spelling.setdefault(token.lower(), token)
    out: dict[str, list] = {ANTI_ADBLOCKER: [], TRACKER: []}
    for (family, key), (term, weight) in sorted(rules._index.items()):
        spelled = first_spelling.get(key)
        if spelled is not None:
            out[family].append((term, spelled, weight))
    return out


def classify_clique(
    profile: CliqueProfile,
    contents: Mapping[str, bytes],
    rules: SignatureRuleSet,
) -> CliqueProfile:
    """Tag a profile from its members' contents (script id -> bytes).

    Each member is scored separately; the clique takes the anti-adblock tag
    if any member reaches that threshold, else the tracker tag likewise.
    """
    best = {ANTI_ADBLOCKER: 0.0, TRACKER: 0.0}
    evidence = []
    for script_id in sorted(contents):
        found = signature_matches(contents[script_id], rules)
        for family, hits in found.items():
            best[family] = max(best[family], sum(w for _, _, w in hits))
            for term, spelled, _ in hits:
                evidence.append((f"{family}:{term}", spelled, script_id))
    if best[ANTI_ADBLOCKER] >= rules.thresholds[ANTI_ADBLOCKER]:
        tag = ANTI_ADBLOCKER
    elif best[TRACKER] >= rules.thresholds[TRACKER]:
        tag = TRACKER
    else:
        tag = OTHER
    return replace(profile, tag=tag, tag_evidence=tuple(evidence))


@dataclass(frozen=True)
class VendorRow:
    domain: str
    n_sites: int
    clique_ids: tuple[str, ...]


def vendor_domains(profile: CliqueProfile) -> list[str]:
    """Registrable domains a clique is attributed to (possibly unattributed)."""
    if profile.source_fqdns:
        return sorted({registrable_domain(h) for h in profile.source_fqdns})
    domains = {registrable_domain(h) for h in profile.external_fqdns}
    if len(domains) == 1:
        return sorted(domains)
    return [UNATTRIBUTED]


def attribute_vendors(
    profiles: Iterable[CliqueProfile],
    sites_by_clique: Mapping[str, Iterable[str]],
) -> list[VendorRow]:
    """Group anti-adblock cliques by vendor registrable domain.

    Sites are counted once per vendor across all of its cliques. Rows are
    sorted by site count, then domain.
    """
    sites: dict[str, set[str]] = {}
    ids: dict[str, list[str]] = {}
    for p in profiles:
        if p.tag != ANTI_ADBLOCKER:
            continue
        for domain in vendor_domains(p):
            sites.setdefault(domain, set()).update(sites_by_clique[p.clique_id])
            ids.setdefault(domain, []).append(p.clique_id)
    rows = [VendorRow(d, len(sites[d]), tuple(sorted(ids[d]))) for d in sites]
    rows.sort(key=lambda r: (-r.n_sites, r.domain))
    return rows
