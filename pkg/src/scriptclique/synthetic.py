"""Synthetic corpora with planted script families, for tests and benchmarks.

Each family is a template script over its own private vocabulary; every
site that carries the family gets a copy in which a small fraction of
tokens is replaced by site-specific identifiers. Noise scripts mix a small
shared vocabulary of common identifiers with unique names.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import DOWNLOADED, EMBEDDED, CorpusManifest, CorpusWriter

_SYLLABLES = "ba be bi bo bu ka ke ki ko ku la le li lo lu ma me mi mo mu na ne ni no nu ra re ri ro ru ta te ti to tu za ze zi zo zu".split()

COMMON_IDENTIFIERS = (
    "window", "document", "length", "push", "prototype", "call", "apply",
    "indexOf", "slice", "join", "split", "replace", "toString", "parseInt",
    "setTimeout", "addEventListener", "getElementById", "querySelector",
    "innerHTML", "style", "Math", "floor", "random", "JSON", "stringify",
    "parse", "Object", "keys", "Array", "isArray", "console", "log",
)

ANTI_ADBLOCK_SNIPPET = """
var bait = document.createElement("div");
bait.className = "adsbox pub_300x250 text-ad";
bait.style.height = "10px";
document.body.appendChild(bait);
window.setTimeout(function () {
  if (bait.offsetHeight === 0 || bait.offsetParent === null) {
    showNotice("It looks like you are using an adblocker. Please disable your adblocker or whitelist this site.");
  }
}, 100);
"""

TRACKER_SNIPPET = """
var storage = "cookie";
var uid = readCookie("uid") || makeUid();
writeCookie("uid", uid, 365);
var pixel = new Image();
pixel.src = "https://collect.metricsvendor.net/pixel.gif?uid=" + uid + "&ref=" + encodeURIComponent(location.href);
"""


def pseudo_word(rng: random.Random, n_syllables: int = 3) -> str:
    return "".join(rng.choice(_SYLLABLES) for _ in range(n_syllables))


def family_vocabulary(rng: random.Random, family: int, size: int) -> list[str]:
    words: list[str] = []
    seen: set[str] = set()
    while len(words) < size:
        word = f"f{family}{pseudo_word(rng)}"
        if word not in seen:
            seen.add(word)
            words.append(word)
    return words


def render_script(tokens: list[str], rng: random.Random) -> str:
    """Lay tokens out as JavaScript-looking statements."""
    lines = []
    i = 0
    while i < len(tokens):
        shape = rng.randrange(4)
        if shape == 0 and i + 2 <= len(tokens):
            lines.append(f"var {tokens[i]} = {tokens[i + 1]};")
            i += 2
        elif shape == 1 and i + 3 <= len(tokens):
            lines.append(f"function {tokens[i]}({tokens[i + 1]}) {{ return {tokens[i + 2]}; }}")
            i += 3
        elif shape == 2 and i + 3 <= len(tokens):
            lines.append(f"if ({tokens[i]}.{tokens[i + 1]}) {{ {tokens[i + 2]}(); }}")
            i += 3
        else:
            lines.append(f"{tokens[i]}();")
            i += 1
    return "\n".join(lines) + "\n"


def make_template(rng: random.Random, vocab: list[str], n_tokens: int) -> list[str]:
    # Zipf-like term frequencies, as in real code.
    weights = [1.0 / (rank + 1) for rank in range(len(vocab))]
    return rng.choices(vocab, weights=weights, k=n_tokens)


def mutate(tokens: list[str], rate: float, tag: str, rng: random.Random) -> list[str]:
    """Replace ``floor(rate * len(tokens))`` positions with unique names."""
    out = list(tokens)
    k = int(rate * len(tokens))
    for n, pos in enumerate(sorted(rng.sample(range(len(tokens)), k))):
        out[pos] = f"{tag}v{n}"
    return out


@dataclass
class Family:
    index: int
    kind: str
    flavor: str
    sites: list[str]
    script_ids: list[str] = field(default_factory=list)
    source_host: str | None = None


@dataclass
class SyntheticCorpus:
    manifest: CorpusManifest
    families: list[Family]
    noise_ids: list[str]

    @property
    def anti_adblock_family(self) -> Family | None:
        return next((f for f in self.families if f.flavor == "anti_adblock"), None)


def site_name(i: int) -> str:
    return f"site{i:04d}.example"


def _family_script(template: list[str], flavor: str, source_host: str | None, rng, tag: str, rate: float, family: int) -> bytes:
    body = render_script(mutate(template, rate, tag, rng), rng)
    if flavor == "anti_adblock":
        body = ANTI_ADBLOCK_SNIPPET + body
    elif flavor == "tracker":
        body = TRACKER_SNIPPET + body
    if source_host is not None:
        body = f'var f{family}endpoint = "https://{source_host}/";\n' + body
    return body.encode("utf-8")


def _noise_script(rng: random.Random, tag: str, n_tokens: int) -> bytes:
    n_common = n_tokens // 4
    tokens = rng.choices(COMMON_IDENTIFIERS, k=n_common)
    tokens += [f"{tag}u{n}" for n in range(n_tokens - n_common)]
    rng.shuffle(tokens)
    return render_script(tokens, rng).encode("utf-8")


def build_corpus(
    root: str | Path,
    family_specs: list[dict],
    n_sites: int,
    noise_per_site: int | list[int] = 2,
    mutation_rate: float = 0.05,
    seed: int = 0,
    shared_urls: list[tuple[str, list[str]]] = (),
) -> SyntheticCorpus:
    """Write a corpus with planted families.

    ``family_specs`` entries: ``{"kind", "sites", "n_tokens", "flavor"}``
    where ``sites`` is a list of site indices; ``flavor`` is ``plain``,
    ``anti_adblock`` or ``tracker``. ``shared_urls`` are identical
    downloaded scripts served to many sites from one URL.
    ``noise_per_site`` may be a per-site list.
    """
    rng = random.Random(seed)
    writer = CorpusWriter(root, created_by="scriptclique synthetic")
    per_site: dict[str, list[tuple]] = {site_name(i): [] for i in range(n_sites)}
    families = []
    for f, spec in enumerate(family_specs):
        vocab = family_vocabulary(rng, f, spec.get("vocab_size", 80))
        template = make_template(rng, vocab, spec.get("n_tokens", 300))
        kind = spec.get("kind", EMBEDDED)
        flavor = spec.get("flavor", "plain")
        host = spec.get("source_host") or (f"cdn.fam{f}.example" if kind == DOWNLOADED else None)
        fam = Family(f, kind, flavor, [site_name(i) for i in spec["sites"]], source_host=host)
        families.append(fam)
        for site in fam.sites:
            content = _family_script(template, flavor, host, rng, f"{site.split('.')[0]}f{f}", mutation_rate, f)
            url = f"https://{host}/lib{f}.js?site={site}" if kind == DOWNLOADED else None
            per_site[site].append((fam, kind, content, url))
    shared_by_site: dict[str, list[tuple[str, bytes]]] = {}
    for j, (url, sites) in enumerate(shared_urls):
        content = render_script(make_template(rng, family_vocabulary(rng, 900 + j, 120), 500), rng)
        for i in sites:
            shared_by_site.setdefault(site_name(i), []).append((url, content.encode("utf-8")))

    noise_ids = []
    for i in range(n_sites):
        site = site_name(i)
        ids = []
        for fam, kind, content, url in per_site[site]:
            record = writer.add_script(site, content, kind, url)
            fam.script_ids.append(record.id)
            ids.append(record.id)
        for url, content in shared_by_site.get(site, ()):
            ids.append(writer.add_script(site, content, DOWNLOADED, url).id)
        n_noise = noise_per_site[i] if isinstance(noise_per_site, list) else noise_per_site
        for n in range(n_noise):
            kind = EMBEDDED if n % 2 == 0 else DOWNLOADED
            url = f"https://{site}/static/app{n}.js" if kind == DOWNLOADED else None
            content = _noise_script(rng, f"{site.split('.')[0]}n{n}", rng.randrange(40, 600))
            record = writer.add_script(site, content, kind, url)
            noise_ids.append(record.id)
            ids.append(record.id)
        html = f"<html><body>{site}</body></html>".encode()
        writer.add_page(site, f"https://www.{site}/", html, ids, fetched_at="2026-01-01T00:00:00Z", rank=i + 1)
    manifest = writer.close()
    return SyntheticCorpus(manifest, families, noise_ids)


def planted_five(root: str | Path, seed: int = 0, noise_per_site: int = 2, mutation_rate: float = 0.05) -> SyntheticCorpus:
    """Five vocabulary-disjoint families on the same ten sites.

    Family 0 is anti-adblock flavoured and downloaded; families 1 and 2 are
    embedded; family 3 is a downloaded tracker; family 4 is embedded.
    """
    sites = list(range(10))
    specs = [
        {"kind": DOWNLOADED, "flavor": "anti_adblock", "sites": sites, "source_host": "asset.pagefair.com"},
        {"kind": EMBEDDED, "sites": sites, "n_tokens": 250},
        {"kind": EMBEDDED, "sites": sites, "n_tokens": 400},
        {"kind": DOWNLOADED, "flavor": "tracker", "sites": sites, "n_tokens": 350},
        {"kind": EMBEDDED, "sites": sites, "n_tokens": 200},
    ]
    return build_corpus(root, specs, n_sites=10, noise_per_site=noise_per_site, mutation_rate=mutation_rate, seed=seed)


def scale_corpus(root: str | Path, n_sites: int = 500, n_scripts: int = 5000, n_families: int = 40, seed: int = 1) -> SyntheticCorpus:
    """A corpus of roughly ``n_scripts`` scripts over ``n_sites`` sites."""
    rng = random.Random(seed)
    specs = []
    family_scripts = 0
    for f in range(n_families):
        size = rng.randrange(8, 60)
        specs.append(
            {
                "kind": DOWNLOADED if f % 3 == 0 else EMBEDDED,
                "flavor": "anti_adblock" if f % 10 == 0 else ("tracker" if f % 7 == 0 else "plain"),
                "sites": rng.sample(range(n_sites), size),
                "n_tokens": rng.randrange(100, 800),
            }
        )
        family_scripts += size
    shared = [(f"https://cdn.sharedlib{j}.example/lib.min.js", rng.sample(range(n_sites), rng.randrange(20, 200))) for j in range(3)]
    family_scripts += sum(len(s) for _, s in shared)
    base, extra = divmod(max(0, n_scripts - family_scripts), n_sites)
    noise = [base + (1 if i < extra else 0) for i in range(n_sites)]
    return build_corpus(root, specs, n_sites, noise_per_site=noise, seed=seed, shared_urls=shared)
