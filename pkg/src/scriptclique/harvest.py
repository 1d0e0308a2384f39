"""Static page fetcher: pulls each site's HTML, its inline scripts and the
scripts it references, and writes a corpus.

Nothing is executed; scripts injected at runtime are therefore missed.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from html.parser import HTMLParser
from pathlib import Path
from urllib.parse import urljoin, urlsplit

import requests

from . import __version__
from .corpus import DOWNLOADED, EMBEDDED, CorpusManifest, CorpusWriter, http_error, utc_now
from .domains import site_of_url

log = logging.getLogger(__name__)

DEFAULT_USER_AGENT = f"scriptclique/{__version__}"


@dataclass(frozen=True)
class HarvestConfig:
    url_list_path: Path
    out_dir: Path
    timeout_secs: int = 30
    max_parallel_sites: int = 8
    max_script_bytes: int = 5_242_880
    user_agent: str = DEFAULT_USER_AGENT
    follow_redirects: int = 5

    def __post_init__(self):
        if self.timeout_secs < 1:
            raise ValueError("timeout_secs must be at least 1")
        if self.max_parallel_sites < 1:
            raise ValueError("max_parallel_sites must be at least 1")
        if self.max_script_bytes < 1:
            raise ValueError("max_script_bytes must be positive")
        if self.follow_redirects < 0:
            raise ValueError("follow_redirects must be nonnegative")


class _ScriptExtractor(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.embedded: list[str] = []
        self.sources: list[str] = []
        self.base_href: str | None = None
        self._in_script = False
        self._src: str | None = None
        self._body: list[str] = []

    def handle_starttag(self, tag, attrs):
        if tag == "base" and self.base_href is None:
            href = dict(attrs).get("href")
            if href:
                self.base_href = href.strip()
        elif tag == "script":
            self._in_script = True
            src = dict(attrs).get("src")
            self._src = src.strip() if src is not None else None
            self._body = []

    def handle_startendtag(self, tag, attrs):
        self.handle_starttag(tag, attrs)
        if tag == "script":
            self.handle_endtag(tag)

    def handle_data(self, data):
        if self._in_script:
            self._body.append(data)

    def handle_endtag(self, tag):
        if tag != "script" or not self._in_script:
            return
        self._finish()

    def _finish(self):
        body = "".join(self._body)
        if self._src is not None:
            if self._src:
                self.sources.append(self._src)
        elif body.strip():
            self.embedded.append(body)
        self._in_script = False
        self._src = None
        self._body = []

    def close(self):
        super().close()
        if self._in_script:
            # Unterminated <script>: the rest of the document is its body.
            self._body.append(self.rawdata)
            self.rawdata = ""
            self._finish()


def extract_script_tags(html: bytes, base_url: str) -> tuple[list[bytes], list[str]]:
    """Inline script bodies and resolved external script URLs of a page.

    Bytes are decoded with ``surrogateescape`` so inline bodies come back
    byte-for-byte. External URLs are deduplicated in document order; only
    http(s) targets are kept.
    """
    text = html.decode("utf-8", errors="surrogateescape")
    parser = _ScriptExtractor()
    try:
        parser.feed(text)
        parser.close()
    except Exception:  # noqa: BLE001 - markup errors degrade to best effort
        log.debug("HTML parser gave up on %s", base_url, exc_info=True)
    base = urljoin(base_url, parser.base_href) if parser.base_href else base_url
    embedded = [body.encode("utf-8", errors="surrogateescape") for body in parser.embedded]
    external: list[str] = []
    for src in parser.sources:
        try:
            url = urljoin(base, src)
            scheme = urlsplit(url).scheme.lower()
        except ValueError:
            continue
        if scheme in ("http", "https") and url not in external:
            external.append(url)
    return embedded, external


def read_url_list(path) -> list[str]:
    urls = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                urls.append(line)
    return urls


def _failure_status(exc: requests.RequestException) -> str:
    if isinstance(exc, requests.Timeout):
        return "timeout"
    # Name-resolution, refused and reset connections all mean "unreachable".
    return "dns_failure"


def _fetch(session: requests.Session, url: str, config: HarvestConfig) -> tuple[requests.Response, bytes, bool]:
    """GET with a byte cap; returns (response, body, truncated)."""
    with session.get(url, timeout=config.timeout_secs, stream=True, allow_redirects=True) as resp:
        chunks = []
        size = 0
        truncated = False
        for chunk in resp.iter_content(chunk_size=65536):
            if size + len(chunk) > config.max_script_bytes:
                chunks.append(chunk[: config.max_script_bytes - size])
                truncated = True
                break
            chunks.append(chunk)
            size += len(chunk)
        return resp, b"".join(chunks), truncated


@dataclass
class _SiteResult:
    url: str
    site_id: str
    status: str
    fetched_at: str
    html: bytes | None = None
    # (kind, source_url, content, truncated)
    scripts: list[tuple[str, str | None, bytes, bool]] = field(default_factory=list)


def _harvest_site(url: str, config: HarvestConfig) -> _SiteResult:
    result = _SiteResult(url, site_of_url(url), "ok", utc_now())
    with requests.Session() as session:
        session.max_redirects = config.follow_redirects
        session.headers["User-Agent"] = config.user_agent
        try:
            resp, html, _ = _fetch(session, url, config)
        except requests.RequestException as exc:
            result.status = _failure_status(exc)
            log.warning("page fetch failed for %s: %s", url, result.status)
            return result
        if not 200 <= resp.status_code < 300:
            result.status = http_error(resp.status_code)
            return result
        result.html = html
        # Relative srcs resolve against the post-redirect URL.
        embedded, external = extract_script_tags(html, resp.url)
        for body in embedded:
            result.scripts.append((EMBEDDED, None, body, False))
        for src in external:
            try:
                sresp, body, truncated = _fetch(session, src, config)
            except requests.RequestException as exc:
                log.info("script fetch failed for %s: %s", src, exc)
                continue
            if not 200 <= sresp.status_code < 300:
                log.info("script fetch for %s returned HTTP %d", src, sresp.status_code)
                continue
            if truncated:
                log.warning("script %s truncated at %d bytes", src, config.max_script_bytes)
            result.scripts.append((DOWNLOADED, src, body, truncated))
    return result


def harvest(config: HarvestConfig) -> CorpusManifest:
    out_dir = Path(config.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise PermissionError(f"cannot create output directory {out_dir}: {exc}") from exc
    if not os.access(out_dir, os.W_OK):
        raise PermissionError(f"output directory {out_dir} is not writable")
    urls = []
    for url in read_url_list(config.url_list_path):
        if urlsplit(url).scheme.lower() in ("http", "https") and urlsplit(url).hostname:
            urls.append(url)
        else:
            log.warning("skipping malformed URL %r", url)
    writer = CorpusWriter(out_dir)
    with ThreadPoolExecutor(max_workers=config.max_parallel_sites) as pool:
        # map() preserves input order, keeping ids stable across runs.
        for result in pool.map(lambda u: _harvest_site(u, config), urls):
            ids = [
                writer.add_script(result.site_id, body, kind, src, truncated).id
                for kind, src, body, truncated in result.scripts
            ]
            writer.add_page(
                result.site_id,
                result.url,
                result.html,
                ids,
                fetch_status=result.status,
                fetched_at=result.fetched_at,
            )
    return writer.close()
