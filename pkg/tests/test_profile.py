import math

import pytest

from scriptclique.cliques import Clique, clique_id_for
from scriptclique.corpus import DOWNLOADED, EMBEDDED, CorpusWriter
from scriptclique.errors import InvalidArgument
from scriptclique.graph import AnalysisConfig
from scriptclique.lexical import KeywordVector
from scriptclique.pipeline import prepare, run_cliques
from scriptclique.profile import (
    ANTI_ADBLOCKER,
    OTHER,
    TRACKER,
    UNATTRIBUTED,
    CliqueProfile,
    SignatureRuleSet,
    attribute_vendors,
    classify_clique,
    default_rules,
    extract_fqdns,
    profile_clique,
    signature_matches,
    vendor_domains,
)
from scriptclique.synthetic import ANTI_ADBLOCK_SNIPPET, TRACKER_SNIPPET


def test_extract_fqdns():
    text = b"""
    a("https://cdn.a.com/x.js"); b("http://cdn.a.com/y.js");
    c("//static.b.net/z.js"); d('https://B.org/'); e("http://c.io:8080/p");
    f("https://static.b.net/again");
    // a comment, and "ftp://nope.com/" and "x://nope2.com"
    """
    assert extract_fqdns(text) == {"cdn.a.com", "static.b.net", "b.org", "c.io"}


def test_extract_fqdns_none():
    assert extract_fqdns(b"var a = b / c; // nothing here") == set()


def _vec(sid, weights):
    return KeywordVector(sid, weights, math.sqrt(sum(w * w for w in weights.values())))


class _Node:
    def __init__(self, members):
        self.member_scripts = tuple(members)


def _corpus(tmp_path, kind, n=3):
    w = CorpusWriter(tmp_path)
    ids = []
    for i in range(n):
        url = f"https://cdn{i % 2}.vendor.com/a.js?s={i}" if kind == DOWNLOADED else None
        body = f'load("https://api.vendor.com/v1"); var adsbox{i} = 1; // site {i}'.encode()
        ids.append(w.add_script(f"site{i}.com", body, kind, url).id)
        w.add_page(f"site{i}.com", f"https://site{i}.com/", b"", [ids[-1]])
    return w.close(), ids


def test_profile_sources_and_keywords(tmp_path):
    m, ids = _corpus(tmp_path, DOWNLOADED)
    vectors = {
        ids[0]: _vec(ids[0], {"adsbox": 0.9, "util": 0.1}),
        ids[1]: _vec(ids[1], {"adsbox": 0.8, "util": 0.3}),
        ids[2]: _vec(ids[2], {"adsbox": 0.7, "other": 0.5}),
    }
    nodes = {i: _Node([i]) for i in ids}
    clique = Clique(clique_id_for(ids), tuple(ids), frozenset(), DOWNLOADED, 0.9)
    p = profile_clique(clique, m, nodes, vectors)
    assert p.source_fqdns == ("cdn0.vendor.com", "cdn1.vendor.com")
    assert p.external_fqdns == ("api.vendor.com",)
    assert p.top_keywords[0][0] == "adsbox"
    assert p.top_keywords[0][1] == pytest.approx(0.8)
    assert [t for t, _ in p.top_keywords] == ["adsbox", "other", "util"]


def test_profile_embedded_has_no_sources(tmp_path):
    m, ids = _corpus(tmp_path, EMBEDDED)
    nodes = {i: _Node([i]) for i in ids}
    clique = Clique(clique_id_for(ids), tuple(ids), frozenset(), EMBEDDED, 0.9)
    p = profile_clique(clique, m, nodes, {})
    assert p.source_fqdns == ()
    assert p.external_fqdns == ("api.vendor.com",)


def _blank(cid="c1"):
    return CliqueProfile(cid, (), (), ())


def test_classify_anti_adblock():
    rules = default_rules()
    p = classify_clique(_blank(), {"s/0": ANTI_ADBLOCK_SNIPPET.encode()}, rules)
    assert p.tag == ANTI_ADBLOCKER
    anti = [e for e in p.tag_evidence if e[0].startswith(ANTI_ADBLOCKER)]
    assert len(anti) >= 3
    assert all(e[2] == "s/0" for e in anti)
    assert ("anti_adblocker:offsetHeight", "offsetHeight", "s/0") in p.tag_evidence


def test_classify_tracker_and_other():
    rules = default_rules()
    assert classify_clique(_blank(), {"s/0": TRACKER_SNIPPET.encode()}, rules).tag == TRACKER
    plain = b"function add(a, b) { return a + b; } var total = add(1, 2);"
    p = classify_clique(_blank(), {"s/0": plain}, rules)
    assert p.tag == OTHER
    assert p.tag_evidence == ()


def test_classify_is_case_insensitive_and_token_based():
    rules = default_rules()
    shouted = b"ADSBOX OFFSETHEIGHT BlockAdBlock"
    assert classify_clique(_blank(), {"s": shouted}, rules).tag == ANTI_ADBLOCKER
    # substrings inside longer identifiers do not count
    glued = b"myadsboxthing xoffsetHeightx blockadblocker2"
    assert classify_clique(_blank(), {"s": glued}, rules).tag == OTHER


def test_anti_adblock_checked_before_tracker():
    both = (ANTI_ADBLOCK_SNIPPET + TRACKER_SNIPPET).encode()
    assert classify_clique(_blank(), {"s": both}, default_rules()).tag == ANTI_ADBLOCKER


def test_members_scored_separately():
    rules = SignatureRuleSet("t", {"alpha": 2.0, "beta": 2.0}, {"zzz": 1.0}, {ANTI_ADBLOCKER: 3.0, TRACKER: 3.0})
    split = {"a": b"alpha here", "b": b"beta here"}
    assert classify_clique(_blank(), split, rules).tag == OTHER
    together = {"a": b"alpha beta"}
    assert classify_clique(_blank(), together, rules).tag == ANTI_ADBLOCKER


def _scores(content, rules):
    found = signature_matches(content, rules)
    return {family: sum(w for _, _, w in hits) for family, hits in found.items()}


def test_adding_terms_never_lowers_scores():
    rules = default_rules()
    text = b"var a = 1;"
    prev = _scores(text, rules)
    was_anti = False
    for extra in [b" adsbox", b" cookie", b" offsetHeight", b" uid", b" bait", b" pixel", b" whatever"]:
        text += extra
        now = _scores(text, rules)
        assert all(now[f] >= prev[f] for f in prev)
        tag = classify_clique(_blank(), {"s": text}, rules).tag
        if was_anti:
            assert tag == ANTI_ADBLOCKER
        was_anti = tag == ANTI_ADBLOCKER
        prev = now
    assert was_anti


def test_ruleset_validation():
    with pytest.raises(InvalidArgument):
        SignatureRuleSet("t", {"a": 0}, {}, {ANTI_ADBLOCKER: 1, TRACKER: 1})
    with pytest.raises(InvalidArgument):
        SignatureRuleSet("t", {"a": 1, "A": 1}, {}, {ANTI_ADBLOCKER: 1, TRACKER: 1})
    with pytest.raises(InvalidArgument):
        SignatureRuleSet("t", {"a": 1}, {}, {ANTI_ADBLOCKER: 1})
    with pytest.raises(InvalidArgument):
        SignatureRuleSet.from_dict({"version": "x"})


def test_default_rules_load():
    rules = default_rules()
    assert rules.version
    assert rules.thresholds[ANTI_ADBLOCKER] > 0


def _anti(cid, sources=(), external=()):
    return CliqueProfile(cid, tuple(sources), tuple(external), (), ANTI_ADBLOCKER)


def test_attribute_vendors_counts_sites_once():
    profiles = [
        _anti("c1", ["asset.pagefair.com"]),
        _anti("c2", ["asset.pagefair.net", "cdn.pagefair.com"]),
    ]
    sites = {"c1": [f"s{i}" for i in range(15)], "c2": [f"s{i}" for i in range(10, 20)]}
    rows = attribute_vendors(profiles, sites)
    by = {r.domain: r for r in rows}
    assert by["pagefair.com"].n_sites == 20
    assert by["pagefair.com"].clique_ids == ("c1", "c2")
    assert by["pagefair.net"].n_sites == 10
    assert rows[0].domain == "pagefair.com"


def test_attribute_vendors_subdomains_merge():
    profiles = [_anti("c1", ["a.x.com"]), _anti("c2", ["b.x.com"])]
    rows = attribute_vendors(profiles, {"c1": ["1", "2", "3"], "c2": ["4", "5", "6"]})
    assert [(r.domain, r.n_sites) for r in rows] == [("x.com", 6)]


def test_attribute_vendors_skips_other_tags_and_empty():
    other = CliqueProfile("c1", ("a.x.com",), (), (), OTHER)
    assert attribute_vendors([other], {"c1": ["s"]}) == []
    assert attribute_vendors([], {}) == []


def test_vendor_domains_embedded():
    assert vendor_domains(_anti("c", external=["a.v.com", "b.v.com"])) == ["v.com"]
    assert vendor_domains(_anti("c", external=["a.v.com", "w.org"])) == [UNATTRIBUTED]
    assert vendor_domains(_anti("c")) == [UNATTRIBUTED]


def test_planted_tags(planted):
    p = prepare(planted.manifest, AnalysisConfig())
    _, cliques = run_cliques(p)
    rules = default_rules()
    nodes = p.node_map()
    fam_of = {sid: f.index for f in planted.families for sid in f.script_ids}
    tags = {}
    for c in cliques:
        prof = classify_clique(profile_clique(c, planted.manifest, nodes, p.vectors, p.contents), p.member_contents(c), rules)
        fams = {fam_of[s] for s in p.member_contents(c)}
        assert len(fams) == 1
        tags[fams.pop()] = prof
    assert tags[0].tag == ANTI_ADBLOCKER
    assert tags[0].source_fqdns == ("asset.pagefair.com",)
    assert tags[3].tag == TRACKER
    assert {tags[i].tag for i in (1, 2, 4)} == {OTHER}
