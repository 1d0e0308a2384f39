import random
from types import SimpleNamespace

import pytest

from scriptclique.filters import (
    ALLOWED,
    BLOCK,
    BLOCKED,
    DOMAIN_ANCHOR,
    EXCEPTION,
    NO_ANCHOR,
    NOT_APPLICABLE,
    START_ANCHOR,
    RequestContext,
    RuleOptions,
    UnsupportedRule,
    counterblock_report,
    decide,
    matches,
    parse_filter_list,
    parse_rule,
)
from oracles import oracle_decide, oracle_match, rand_rule, rand_url
from scriptclique.profile import ANTI_ADBLOCKER, OTHER


def test_parse_examples():
    r = parse_rule("||pagefair.com^$script,third-party")
    assert (r.action, r.anchor, r.pattern) == (BLOCK, DOMAIN_ANCHOR, ("pagefair.com", "^"))
    assert r.options == RuleOptions(script_only=True, third_party=True)
    r = parse_rule("@@||cdn.example.com/ads.js$domain=a.com|~b.a.com")
    assert r.action == EXCEPTION
    assert r.options.include_domains == {"a.com"}
    assert r.options.exclude_domains == {"b.a.com"}
    r = parse_rule("|https://x.net/*/ad^")
    assert (r.anchor, r.pattern) == (START_ANCHOR, ("https://x.net/", "*", "/ad", "^"))
    r = parse_rule("/adblock-detect.")
    assert (r.anchor, r.pattern) == (NO_ANCHOR, ("/adblock-detect.",))
    assert parse_rule("a**b").pattern == ("a", "*", "b")
    assert parse_rule("||ExAmple.COM/Path").pattern == ("example.com/Path",)


@pytest.mark.parametrize(
    "line",
    [
        "/ads[0-9]+/",
        "||x.com^$popup",
        "||x.com^$third-party,~third-party",
        "adbanner.gif|",
        "||",
        "a|b",
        "$domain=~",
    ],
)
def test_unsupported(line):
    with pytest.raises(UnsupportedRule):
        parse_rule(line)


EXCERPT = """[Adblock Plus 2.0]
! Title: Excerpt
! Expires: 4 days

! *** network rules ***
||pagefair.com^$third-party
||pagefair.net^$third-party
||blockadblock.com^
||adblockanalytics.com^$script
||detectadblock.example^$script,third-party
/adblock-detect.js
/blockadblock.
-anti-adblock.
/fuckadblock.js
|https://cdn.adsafe.example/
|http://ads.
||ads.example.org/*/banner^
||track.example.net^$~third-party
||cdn.site.example/ab.js$domain=news.example|~sports.news.example
.com/adframe.
_adblock_detect_
*/abd/*.js$script
||counter.example^$3p
||metrics.example^$1p
adsbox
! exceptions
@@||pagefair.com/static/allowed.js
@@||ads.example.org/safe/$script
@@|https://cdn.adsafe.example/ok
@@/adblock-detect.js$domain=trusted.example

! *** unsupported ***
/ads[0-9]+\\.js/
||popunder.example^$popup
||x.example^$csp=script-src 'self'
||img.example^$image
||font.example^$font,third-party
||redir.example^$redirect=noopjs
adbanner.gif|
||y.example^$third-party,~third-party
||match-case.example/Ad$match-case

! *** cosmetic ***
##.ad-banner
example.com##.sponsored
example.com#@#.ad
example.com#?#div:-abp-has(.ad)
example.com#$#abort-on-property-read canRunAds
##+js(nobab)
news.example##div[id^="adblock"]

! trailing
||last.example^
@@||last.example/ok^
"""


def test_excerpt_counts():
    rules, skipped = parse_filter_list(EXCERPT)
    reasons = {}
    for _, reason in skipped:
        key = reason.split(" ")[0]
        reasons[key] = reasons.get(key, 0) + 1
    assert len(rules) == 26
    assert sum(r.action == EXCEPTION for r in rules) == 5
    assert reasons["comment"] == 7
    assert reasons["section"] == 1
    assert reasons["element"] == 7
    assert len(skipped) == 7 + 1 + 7 + 9
    assert not any("csp" in r.raw for r in rules)
    lines = EXCERPT.splitlines()
    for line_no, reason in skipped:
        assert lines[line_no - 1].strip()
        if reason == "comment":
            assert lines[line_no - 1].startswith("!")


def test_blank_lines_ignored():
    rules, skipped = parse_filter_list("\n\n   \n||a.com^\n\n")
    assert len(rules) == 1 and skipped == []
    assert parse_filter_list("") == ([], [])
    assert parse_filter_list(b"||a.com^\n")[0][0].pattern == ("a.com", "^")


# (rule, url, page_site, resource_type, expected match), audited by hand.
VECTORS = [
    ("||pagefair.com^", "https://asset.pagefair.com/ads.js", "news.com", "script", True),
    ("||pagefair.com^", "https://pagefair.com/x.js", "news.com", "script", True),
    ("||pagefair.com^", "https://notpagefair.com/x.js", "news.com", "script", False),
    ("||pagefair.com^", "https://pagefair.com.evil.net/x.js", "news.com", "script", False),
    ("||pagefair.com^", "https://pagefair.community/x.js", "news.com", "script", False),
    ("||pagefair.com^", "https://x.net/?u=pagefair.com", "news.com", "script", False),
    ("||PageFair.COM^", "https://ASSET.PAGEFAIR.COM/a.js", "news.com", "script", True),
    ("||cdn.x.com/Ads.js", "https://cdn.x.com/ads.js", "news.com", "script", False),
    ("||cdn.x.com/Ads.js", "https://cdn.x.com/Ads.js", "news.com", "script", True),
    ("|https://ads.", "https://ads.x.com/a.js", "news.com", "script", True),
    ("|https://ads.", "https://www.ads.x.com/a.js", "news.com", "script", False),
    ("/adblock-detect.", "https://x.com/js/adblock-detect.min.js", "news.com", "script", True),
    ("ad^", "https://x.com/ad?x=1", "news.com", "script", True),
    ("ad^", "https://x.com/ad", "news.com", "script", True),
    ("ad^", "https://x.com/adx", "news.com", "script", False),
    ("x.com/*/b^", "https://x.com/a/c/b/", "news.com", "script", True),
    ("||t.com^$third-party", "https://t.com/a.js", "t.com", "script", False),
    ("||t.com^$third-party", "https://cdn.t.com/a.js", "news.com", "script", True),
    ("||t.com^$~third-party", "https://cdn.t.com/a.js", "t.com", "script", True),
    ("||t.com^$script", "https://t.com/a.png", "news.com", "other", False),
    ("||t.com^$domain=news.com", "https://t.com/a.js", "news.com", "script", True),
    ("||t.com^$domain=news.com", "https://t.com/a.js", "blog.com", "script", False),
    ("||t.com^$domain=~news.com", "https://t.com/a.js", "news.com", "script", False),
    ("||t.com^$domain=~news.com", "https://t.com/a.js", "blog.com", "script", True),
]


@pytest.mark.parametrize("rule, url, site, rtype, expected", VECTORS)
def test_hand_vectors(rule, url, site, rtype, expected):
    assert matches(parse_rule(rule), RequestContext(url, site, rtype)) is expected


def test_decide_examples():
    block = parse_rule("||pagefair.com^")
    allow = parse_rule("@@||pagefair.com/ok.js")
    hit = RequestContext("https://pagefair.com/x.js", "n.com")
    ok = RequestContext("https://pagefair.com/ok.js", "n.com")
    miss = RequestContext("https://other.com/x.js", "n.com")
    assert decide([block, allow], hit).outcome == BLOCKED
    assert decide([block, allow], hit).witness == block
    d = decide([block, allow], ok)
    assert d.outcome == ALLOWED and d.witness == allow
    d = decide([block, allow], miss)
    assert d.outcome == ALLOWED and d.witness is None
    assert decide([], hit).outcome == ALLOWED
    assert decide([allow], ok).witness is None


def test_request_context_scheme():
    with pytest.raises(ValueError):
        RequestContext("ftp://x.com/a.js", "n.com")


def test_matches_agrees_with_oracle():
    rng = random.Random(12)
    for _ in range(1000):
        rule = rand_rule(rng)
        url = rand_url(rng)
        site = rng.choice(["x.com", "ad.net", "pf.com", "t.com"])
        rtype = rng.choice(["script", "script", "other"])
        ctx = RequestContext(url, site, rtype)
        assert matches(rule, ctx) is oracle_match(rule, url, site, rtype), (rule.raw, url, site, rtype)


def test_decide_agrees_with_oracle():
    rng = random.Random(15)
    for _ in range(1000):
        rules = [rand_rule(rng) for _ in range(rng.randrange(0, 8))]
        url = rand_url(rng)
        site = rng.choice(["x.com", "ad.net", "pf.com"])
        assert decide(rules, RequestContext(url, site)).blocked is oracle_decide(rules, url, site)


def test_exception_precedence_and_monotonicity():
    rng = random.Random(13)
    for _ in range(500):
        rules = [rand_rule(rng) for _ in range(rng.randrange(1, 12))]
        ctx = RequestContext(rand_url(rng), rng.choice(["x.com", "pf.com"]))
        d = decide(rules, ctx)
        if any(r.is_exception and matches(r, ctx) for r in rules):
            assert d.outcome == ALLOWED
        extra = rand_rule(rng)
        d2 = decide(rules + [extra], ctx)
        if extra.is_exception:
            assert not (d.outcome == ALLOWED and d2.outcome == BLOCKED)
        else:
            assert not (d.outcome == BLOCKED and d2.outcome == ALLOWED)


def test_reparse_is_stable():
    rng = random.Random(14)
    for _ in range(300):
        rule = rand_rule(rng)
        assert parse_rule(rule.raw) == rule


def _clique(tag, sources, members, external=()):
    return SimpleNamespace(
        tag=tag,
        source_fqdns=tuple(sources),
        external_fqdns=tuple(external),
        members=tuple(SimpleNamespace(site_id=s, source_url=u) for s, u in members),
    )


def test_counterblock_report():
    anti = _clique(ANTI_ADBLOCKER, ["asset.pagefair.com"], [("a.com", "https://asset.pagefair.com/m.js"), ("b.com", "https://asset.pagefair.com/m.js")])
    embedded = _clique(ANTI_ADBLOCKER, [], [("a.com", None)], external=["api.detector.net"])
    other = _clique(OTHER, ["cdn.x.com"], [("a.com", "https://cdn.x.com/x.js")])
    lists = {
        "easylist": parse_filter_list("||pagefair.com^$third-party\n")[0],
        "empty": [],
    }
    rows = counterblock_report([anti, embedded, other], lists)
    table = {(r.vendor_domain, r.list_name): (r.decision, r.witness_rule) for r in rows}
    assert table == {
        ("detector.net", "easylist"): (NOT_APPLICABLE, ""),
        ("detector.net", "empty"): (NOT_APPLICABLE, ""),
        ("pagefair.com", "easylist"): (BLOCKED, "||pagefair.com^$third-party"),
        ("pagefair.com", "empty"): (ALLOWED, ""),
    }


def test_counterblock_report_exception_witness():
    anti = _clique(ANTI_ADBLOCKER, ["asset.pagefair.com"], [("a.com", "https://asset.pagefair.com/m.js")])
    rules = parse_filter_list("||pagefair.com^\n@@||asset.pagefair.com/m.js\n")[0]
    (row,) = counterblock_report([anti], {"l": rules})
    assert (row.decision, row.witness_rule) == (ALLOWED, "@@||asset.pagefair.com/m.js")


def test_counterblock_needs_lists():
    with pytest.raises(ValueError):
        counterblock_report([], {})
    assert counterblock_report([], {"l": []}) == []
