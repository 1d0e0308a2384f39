"""Adblock filter-list parsing and request blocking decisions.

Supported network-rule syntax: plain substrings, ``|`` start anchor, ``||``
domain anchor, ``*`` wildcard, ``^`` separator, ``@@`` exceptions and the
options ``script``, ``third-party``, ``~third-party`` and ``domain=``.
Anything else is reported as skipped, never approximated.
"""
from __future__ import annotations

import functools
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping
from urllib.parse import urlsplit

from .domains import registrable_domain
from .profile import ANTI_ADBLOCKER, vendor_domains

BLOCK = "block"
EXCEPTION = "exception"

NO_ANCHOR = "none"
DOMAIN_ANCHOR = "domain_anchor"
START_ANCHOR = "start_anchor"

WILDCARD = "*"
SEPARATOR = "^"

SCRIPT = "script"
OTHER = "other"

BLOCKED = "blocked"
ALLOWED = "allowed"
NOT_APPLICABLE = "not_applicable"

_SEPARATOR_RE = r"(?:[^A-Za-z0-9_\-.%]|$)"
# "$" starts an options block when an option name follows it.
_OPTIONS_RE = re.compile(r"^~?[A-Za-z0-9_\-]+(?:=|,|$)")
_COSMETIC_MARKERS = ("##", "#@#", "#?#", "#$#", "#%#")


@dataclass(frozen=True)
class RuleOptions:
    script_only: bool = False
    third_party: bool = False
    first_party: bool = False
    include_domains: frozenset[str] = frozenset()
    exclude_domains: frozenset[str] = frozenset()


@dataclass(frozen=True)
class FilterRule:
    raw: str
    action: str
    anchor: str
    pattern: tuple[str, ...]
    options: RuleOptions = RuleOptions()
    _regex: re.Pattern = field(default=None, compare=False, repr=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "_regex", _compile(self.pattern))

    @property
    def is_exception(self) -> bool:
        return self.action == EXCEPTION


@dataclass(frozen=True)
class RequestContext:
    url: str
    page_site: str
    resource_type: str = SCRIPT

    def __post_init__(self):
        if urlsplit(self.url).scheme.lower() not in ("http", "https"):
            raise ValueError(f"request URL must be http(s): {self.url!r}")


@dataclass(frozen=True)
class Decision:
    outcome: str
    witness: FilterRule | None = None

    @property
    def blocked(self) -> bool:
        return self.outcome == BLOCKED


class UnsupportedRule(ValueError):
    pass


def _compile(pattern: tuple[str, ...]) -> re.Pattern:
    parts = []
    for atom in pattern:
        if atom == WILDCARD:
            parts.append(".*")
        elif atom == SEPARATOR:
            parts.append(_SEPARATOR_RE)
        else:
            parts.append(re.escape(atom))
    return re.compile("".join(parts), re.DOTALL)


def _split_atoms(text: str) -> tuple[str, ...]:
    atoms: list[str] = []
    for piece in re.split(r"([*^])", text):
        if not piece:
            continue
        if piece == WILDCARD and atoms and atoms[-1] == WILDCARD:
            continue
        atoms.append(piece)
    return tuple(atoms)


def _parse_options(text: str) -> RuleOptions:
    script_only = third = first = False
    include: set[str] = set()
    exclude: set[str] = set()
    for opt in text.split(","):
        opt = opt.strip()
        name = opt.lower()
        if name == "script":
            script_only = True
        elif name in ("third-party", "3p"):
            third = True
        elif name in ("~third-party", "first-party", "1p"):
            first = True
        elif name.startswith("domain="):
            for d in name[len("domain="):].split("|"):
                if d.startswith("~") and len(d) > 1:
                    exclude.add(d[1:])
                elif d and not d.startswith("~"):
                    include.add(d)
                else:
                    raise UnsupportedRule(f"malformed domain option {opt!r}")
        else:
            raise UnsupportedRule(f"unsupported option {opt!r}")
    if third and first:
        raise UnsupportedRule("contradictory party options")
    return RuleOptions(script_only, third, first, frozenset(include), frozenset(exclude))


def parse_rule(line: str) -> FilterRule:
    """Parse one network rule; raise :class:`UnsupportedRule` otherwise."""
    raw = line.strip()
    text = raw
    action = BLOCK
    if text.startswith("@@"):
        action = EXCEPTION
        text = text[2:]

    options = RuleOptions()
    dollar = text.rfind("$")
    if dollar >= 0 and dollar + 1 < len(text) and _OPTIONS_RE.match(text[dollar + 1 :]):
        options = _parse_options(text[dollar + 1 :])
        text = text[:dollar]

    if len(text) > 1 and text.startswith("/") and text.endswith("/"):
        raise UnsupportedRule("regular-expression rules are unsupported")
    if text.startswith("||"):
        anchor = DOMAIN_ANCHOR
        text = text[2:]
        # Host part is case-insensitive.
        cut = len(text)
        for ch in "/^*?:":
            idx = text.find(ch)
            if idx >= 0:
                cut = min(cut, idx)
        text = text[:cut].lower() + text[cut:]
        if not text:
            raise UnsupportedRule("domain anchor without a domain")
    elif text.startswith("|"):
        anchor = START_ANCHOR
        text = text[1:]
    else:
        anchor = NO_ANCHOR
    if text.endswith("|"):
        raise UnsupportedRule("end anchor is unsupported")
    if "|" in text:
        raise UnsupportedRule("stray '|' inside pattern")
    pattern = _split_atoms(text)
    if not pattern and options == RuleOptions():
        raise UnsupportedRule("rule matches every request")
    return FilterRule(raw=raw, action=action, anchor=anchor, pattern=pattern, options=options)


def parse_filter_list(text: bytes | str) -> tuple[list[FilterRule], list[tuple[int, str]]]:
    """Parse a filter list into rules plus ``(line_no, reason)`` skips.

    Line numbers are 1-based. Blank lines are neither rules nor skips.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    rules: list[FilterRule] = []
    skipped: list[tuple[int, str]] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("!"):
            skipped.append((line_no, "comment"))
        elif stripped.startswith("[") and stripped.endswith("]"):
            skipped.append((line_no, "section header"))
        elif any(marker in stripped for marker in _COSMETIC_MARKERS):
            skipped.append((line_no, "element hiding rule"))
        else:
            try:
                rules.append(parse_rule(stripped))
            except UnsupportedRule as exc:
                skipped.append((line_no, str(exc)))
    return rules, skipped


@functools.lru_cache(maxsize=65536)
def _normalise_url(url: str) -> tuple[str, int, int]:
    """URL with a lowercased scheme and authority, plus the host span."""
    scheme_end = url.index("://") + 3
    rest = url[scheme_end:]
    end = len(rest)
    for ch in "/?#":
        idx = rest.find(ch)
        if idx >= 0:
            end = min(end, idx)
    authority = rest[:end].lower()
    normalised = url[:scheme_end].lower() + authority + rest[end:]
    host_start = scheme_end + authority.rfind("@") + 1
    host = authority[authority.rfind("@") + 1 :]
    if host.startswith("["):
        host_end = host_start + host.find("]") + 1
    else:
        colon = host.find(":")
        host_end = host_start + (colon if colon >= 0 else len(host))
    return normalised, host_start, host_end


def _host_matches(domain: str, site: str) -> bool:
    return site == domain or site.endswith("." + domain)


def _options_match(options: RuleOptions, ctx: RequestContext, host: str) -> bool:
    if options.script_only and ctx.resource_type != SCRIPT:
        return False
    if options.third_party or options.first_party:
        third = registrable_domain(host) != ctx.page_site
        if options.third_party != third:
            return False
    if options.include_domains and not any(_host_matches(d, ctx.page_site) for d in options.include_domains):
        return False
    if any(_host_matches(d, ctx.page_site) for d in options.exclude_domains):
        return False
    return True


def matches(rule: FilterRule, ctx: RequestContext) -> bool:
    url, host_start, host_end = _normalise_url(ctx.url)
    host = url[host_start:host_end]
    if not _options_match(rule.options, ctx, host):
        return False
    regex = rule._regex
    if rule.anchor == START_ANCHOR:
        return regex.match(url) is not None
    if rule.anchor == NO_ANCHOR:
        return regex.search(url) is not None
    # Domain anchor: the pattern must start at the host or a label boundary in it.
    starts = [host_start] + [host_start + i + 1 for i, c in enumerate(host) if c == "."]
    return any(regex.match(url, pos) is not None for pos in starts)


def decide(rules: Iterable[FilterRule], ctx: RequestContext) -> Decision:
    """Blocked iff some block rule and no exception rule matches.

    The witness is the first matching exception when an exception overrides
    a block, otherwise the first matching block rule.
    """
    rules = list(rules)
    block = next((r for r in rules if not r.is_exception and matches(r, ctx)), None)
    if block is None:
        return Decision(ALLOWED)
    exception = next((r for r in rules if r.is_exception and matches(r, ctx)), None)
    if exception is not None:
        return Decision(ALLOWED, exception)
    return Decision(BLOCKED, block)


@dataclass(frozen=True)
class CounterblockRow:
    vendor_domain: str
    list_name: str
    decision: str
    witness_rule: str


def counterblock_report(cliques: Iterable, lists: Mapping[str, list[FilterRule]]) -> list[CounterblockRow]:
    """Decision matrix of vendor domain x filter list for anti-adblock cliques.

    ``cliques`` are report entries exposing ``tag``, ``source_fqdns``,
    ``external_fqdns`` and ``members`` (each with ``site_id`` and
    ``source_url``). A vendor is blocked by a list when any request for any
    member script of any of its cliques is blocked; vendors with no script
    requests at all (embedded only) are not applicable.
    """
    if not lists:
        raise ValueError("at least one filter list is required")
    requests: dict[str, list[RequestContext]] = {}
    for clique in cliques:
        if clique.tag != ANTI_ADBLOCKER:
            continue
        for vendor in vendor_domains(clique):
            bucket = requests.setdefault(vendor, [])
            for m in clique.members:
                if m.source_url:
                    bucket.append(RequestContext(m.source_url, m.site_id, SCRIPT))

    rows = []
    for vendor in sorted(requests):
        contexts = sorted(set(requests[vendor]), key=lambda c: (c.url, c.page_site))
        for list_name in sorted(lists):
            if not contexts:
                rows.append(CounterblockRow(vendor, list_name, NOT_APPLICABLE, ""))
                continue
            outcome, witness = ALLOWED, ""
            for ctx in contexts:
                decision = decide(lists[list_name], ctx)
                if decision.blocked:
                    outcome, witness = BLOCKED, decision.witness.raw
                    break
                if decision.witness is not None and not witness:
                    witness = decision.witness.raw
            rows.append(CounterblockRow(vendor, list_name, outcome, witness))
    return rows
