"""On-disk corpus layout and the in-memory data model for harvested pages.

Layout::

    <root>/manifest.json
    <root>/pages/<site_id>/<n>.html
    <root>/scripts/<content_hash>.js
"""
from __future__ import annotations

import dataclasses
import functools
import hashlib
import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

from . import __version__
from .errors import CorpusNotFound, IntegrityError, SchemaError

CORPUS_VERSION = 1
MANIFEST_NAME = "manifest.json"
# Scripts below this size are stored but never analysed.
MIN_SCRIPT_BYTES = 8

EMBEDDED = "embedded"
DOWNLOADED = "downloaded"
KINDS = (EMBEDDED, DOWNLOADED)


def content_digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def utc_now() -> str:
    return format_timestamp(datetime.now(timezone.utc))


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _parse_timestamp(value: str) -> datetime:
    try:
        ts = datetime.fromisoformat(value.replace("Z", "+00:00"))
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"bad RFC 3339 timestamp: {value!r}") from exc
    if ts.tzinfo is None or ts.utcoffset().total_seconds() != 0:
        raise SchemaError(f"timestamp is not UTC: {value!r}")
    return ts


# fetch_status values: "ok", "timeout", "dns_failure", "http_error:<code>"
def http_error(code: int) -> str:
    return f"http_error:{code}"


def is_valid_fetch_status(status: str) -> bool:
    if status in ("ok", "timeout", "dns_failure"):
        return True
    prefix, _, code = status.partition(":")
    return prefix == "http_error" and code.isdigit()


def is_valid_site_id(site_id: str) -> bool:
    return (
        bool(site_id)
        and site_id == site_id.lower()
        and "://" not in site_id
        and "/" not in site_id
        and not any(c.isspace() for c in site_id)
    )


@dataclass(frozen=True)
class ScriptRecord:
    id: str
    site_id: str
    kind: str
    source_url: str | None
    content_path: str
    content_hash: str
    byte_len: int
    truncated: bool = False

    @property
    def too_small(self) -> bool:
        return self.byte_len < MIN_SCRIPT_BYTES


@dataclass(frozen=True)
class PageSnapshot:
    site_id: str
    page_url: str
    fetched_at: str
    html_path: str | None
    script_ids: tuple[str, ...]
    fetch_status: str
    rank: int | None = None


@dataclass(frozen=True)
class CorpusManifest:
    corpus_version: int
    pages: tuple[PageSnapshot, ...]
    scripts: tuple[ScriptRecord, ...]
    created_by: str
    root: Path | None = field(default=None, compare=False, repr=False)

    @functools.cached_property
    def script_by_id(self) -> dict[str, ScriptRecord]:
        return {s.id: s for s in self.scripts}

    @property
    def site_ids(self) -> set[str]:
        return {p.site_id for p in self.pages} | {s.site_id for s in self.scripts}

    def read_script(self, script: ScriptRecord | str) -> bytes:
        if isinstance(script, str):
            script = self.script_by_id[script]
        if self.root is None:
            raise CorpusNotFound("manifest is not bound to a corpus directory")
        return (self.root / script.content_path).read_bytes()

    def url_groups(self) -> dict[str, list[str]]:
        """Downloaded script ids grouped by source_url (same-identity sets)."""
        groups: dict[str, list[str]] = {}
        for s in self.scripts:
            if s.kind == DOWNLOADED and s.source_url:
                groups.setdefault(s.source_url, []).append(s.id)
        return groups


# -- serialisation -----------------------------------------------------------

def _script_to_dict(s: ScriptRecord) -> dict:
    d = dataclasses.asdict(s)
    if not s.truncated:
        del d["truncated"]
    return d


def _page_to_dict(p: PageSnapshot) -> dict:
    d = dataclasses.asdict(p)
    d["script_ids"] = list(p.script_ids)
    if p.rank is None:
        del d["rank"]
    return d


def manifest_to_dict(manifest: CorpusManifest) -> dict:
    return {
        "corpus_version": manifest.corpus_version,
        "created_by": manifest.created_by,
        "pages": [_page_to_dict(p) for p in manifest.pages],
        "scripts": [_script_to_dict(s) for s in manifest.scripts],
    }


def _require(d: dict, key: str, types, where: str):
    if key not in d:
        raise SchemaError(f"{where}: missing field {key!r}")
    value = d[key]
    if not isinstance(value, types) or isinstance(value, bool) and bool not in (
        types if isinstance(types, tuple) else (types,)
    ):
        raise SchemaError(f"{where}: field {key!r} has wrong type")
    return value


def _script_from_dict(d: dict) -> ScriptRecord:
    where = f"script {d.get('id', '?')!r}"
    return ScriptRecord(
        id=_require(d, "id", str, where),
        site_id=_require(d, "site_id", str, where),
        kind=_require(d, "kind", str, where),
        source_url=_require(d, "source_url", (str, type(None)), where),
        content_path=_require(d, "content_path", str, where),
        content_hash=_require(d, "content_hash", str, where),
        byte_len=_require(d, "byte_len", int, where),
        truncated=bool(d.get("truncated", False)),
    )


def _page_from_dict(d: dict) -> PageSnapshot:
    where = f"page {d.get('page_url', '?')!r}"
    script_ids = _require(d, "script_ids", list, where)
    rank = d.get("rank")
    if rank is not None and (not isinstance(rank, int) or isinstance(rank, bool)):
        raise SchemaError(f"{where}: rank must be an integer")
    return PageSnapshot(
        site_id=_require(d, "site_id", str, where),
        page_url=_require(d, "page_url", str, where),
        fetched_at=_require(d, "fetched_at", str, where),
        html_path=_require(d, "html_path", (str, type(None)), where),
        script_ids=tuple(script_ids),
        fetch_status=_require(d, "fetch_status", str, where),
        rank=rank,
    )


def manifest_from_dict(data: dict, root: Path | None = None) -> CorpusManifest:
    if not isinstance(data, dict):
        raise SchemaError("manifest must be a JSON object")
    version = _require(data, "corpus_version", int, "manifest")
    if version != CORPUS_VERSION:
        raise SchemaError(f"unsupported corpus_version {version}")
    pages = _require(data, "pages", list, "manifest")
    scripts = _require(data, "scripts", list, "manifest")
    for entry in pages + scripts:
        if not isinstance(entry, dict):
            raise SchemaError("manifest entries must be JSON objects")
    return CorpusManifest(
        corpus_version=version,
        pages=tuple(_page_from_dict(p) for p in pages),
        scripts=tuple(_script_from_dict(s) for s in scripts),
        created_by=str(data.get("created_by", "")),
        root=root,
    )


# -- validation --------------------------------------------------------------

def validate_manifest(manifest: CorpusManifest, check_files: bool = True) -> None:
    """Check every manifest invariant; raise on the first violation."""
    seen: set[str] = set()
    for s in manifest.scripts:
        if s.id in seen:
            raise SchemaError(f"duplicate script id {s.id!r}")
        seen.add(s.id)
        if not is_valid_site_id(s.site_id):
            raise SchemaError(f"script {s.id!r}: invalid site_id {s.site_id!r}")
        if s.kind not in KINDS:
            raise SchemaError(f"script {s.id!r}: unknown kind {s.kind!r}")
        if (s.kind == DOWNLOADED) != (s.source_url is not None):
            raise SchemaError(
                f"script {s.id!r}: source_url must be present iff kind=downloaded"
            )
        if len(s.content_hash) != 64 or s.content_hash != s.content_hash.lower() or any(
            c not in "0123456789abcdef" for c in s.content_hash
        ):
            raise SchemaError(f"script {s.id!r}: content_hash is not lowercase sha256 hex")
        if s.byte_len < 0:
            raise SchemaError(f"script {s.id!r}: negative byte_len")
    for p in manifest.pages:
        if not is_valid_site_id(p.site_id):
            raise SchemaError(f"page {p.page_url!r}: invalid site_id {p.site_id!r}")
        if not is_valid_fetch_status(p.fetch_status):
            raise SchemaError(f"page {p.page_url!r}: bad fetch_status {p.fetch_status!r}")
        _parse_timestamp(p.fetched_at)
        for sid in p.script_ids:
            if sid not in seen:
                raise SchemaError(f"page {p.page_url!r}: dangling script id {sid!r}")

    if not check_files or manifest.root is None:
        return
    root = manifest.root
    for p in manifest.pages:
        if p.html_path is not None and not (root / p.html_path).is_file():
            raise SchemaError(f"page {p.page_url!r}: missing file {p.html_path}")
    verified: dict[str, str] = {}
    for s in manifest.scripts:
        path = root / s.content_path
        if not path.is_file():
            raise IntegrityError(s.id, f"missing content file {s.content_path}")
        digest = verified.get(s.content_path)
        if digest is None:
            data = path.read_bytes()
            digest = verified[s.content_path] = content_digest(data)
            if len(data) != s.byte_len:
                raise IntegrityError(s.id, "byte_len does not match content file")
        if digest != s.content_hash:
            raise IntegrityError(s.id, "content digest mismatch")


def load_corpus(root_dir: str | os.PathLike) -> CorpusManifest:
    root = Path(root_dir)
    path = root / MANIFEST_NAME
    if not path.is_file():
        raise CorpusNotFound(f"no {MANIFEST_NAME} under {root}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    manifest = manifest_from_dict(data, root=root)
    validate_manifest(manifest)
    return manifest


def write_corpus(manifest: CorpusManifest, root_dir: str | os.PathLike) -> Path:
    """Write the manifest document. Content files must already be in place."""
    root = Path(root_dir)
    root.mkdir(parents=True, exist_ok=True)
    path = root / MANIFEST_NAME
    tmp = path.with_suffix(".json.tmp")
    tmp.write_text(
        json.dumps(manifest_to_dict(manifest), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    os.replace(tmp, path)
    return path


class CorpusWriter:
    """Single writer that lays out content files and accumulates a manifest.

    Script bodies are stored once per digest, so rewriting identical content
    is a no-op.
    """

    def __init__(self, root_dir: str | os.PathLike, created_by: str | None = None):
        self.root = Path(root_dir)
        (self.root / "scripts").mkdir(parents=True, exist_ok=True)
        (self.root / "pages").mkdir(parents=True, exist_ok=True)
        self.created_by = created_by or f"scriptclique {__version__}"
        self.pages: list[PageSnapshot] = []
        self.scripts: list[ScriptRecord] = []
        self._page_counter: dict[str, int] = {}
        self._script_counter: dict[str, int] = {}

    def add_script(
        self,
        site_id: str,
        content: bytes,
        kind: str,
        source_url: str | None = None,
        truncated: bool = False,
    ) -> ScriptRecord:
        digest = content_digest(content)
        rel = f"scripts/{digest}.js"
        path = self.root / rel
        if not path.exists():
            path.write_bytes(content)
        n = self._script_counter.get(site_id, 0)
        self._script_counter[site_id] = n + 1
        record = ScriptRecord(
            id=f"{site_id}/{n}",
            site_id=site_id,
            kind=kind,
            source_url=source_url if kind == DOWNLOADED else None,
            content_path=rel,
            content_hash=digest,
            byte_len=len(content),
            truncated=truncated,
        )
        self.scripts.append(record)
        return record

    def add_page(
        self,
        site_id: str,
        page_url: str,
        html: bytes | None,
        script_ids: Iterable[str],
        fetch_status: str = "ok",
        fetched_at: str | None = None,
        rank: int | None = None,
    ) -> PageSnapshot:
        html_path = None
        if html is not None:
            n = self._page_counter.get(site_id, 0)
            self._page_counter[site_id] = n + 1
            html_path = f"pages/{site_id}/{n}.html"
            (self.root / "pages" / site_id).mkdir(parents=True, exist_ok=True)
            (self.root / html_path).write_bytes(html)
        page = PageSnapshot(
            site_id=site_id,
            page_url=page_url,
            fetched_at=fetched_at or utc_now(),
            html_path=html_path,
            script_ids=tuple(script_ids),
            fetch_status=fetch_status,
            rank=rank,
        )
        self.pages.append(page)
        return page

    def manifest(self) -> CorpusManifest:
        return CorpusManifest(
            corpus_version=CORPUS_VERSION,
            pages=tuple(self.pages),
            scripts=tuple(self.scripts),
            created_by=self.created_by,
            root=self.root,
        )

    def close(self) -> CorpusManifest:
        manifest = self.manifest()
        write_corpus(manifest, self.root)
        return manifest


def dedup_scripts(manifest: CorpusManifest) -> CorpusManifest:
    """Collapse records sharing (site_id, content_hash, kind) to the first one.

    Cross-site copies are kept: they are the signal. Page script_ids are
    remapped to the surviving records.
    """
    survivor: dict[tuple[str, str, str], str] = {}
    remap: dict[str, str] = {}
    kept: list[ScriptRecord] = []
    for s in manifest.scripts:
        key = (s.site_id, s.content_hash, s.kind)
        if key in survivor:
            remap[s.id] = survivor[key]
            continue
        survivor[key] = s.id
        remap[s.id] = s.id
        kept.append(s)
    if len(kept) == len(manifest.scripts):
        return manifest
    pages = []
    for p in manifest.pages:
        ids = tuple(dict.fromkeys(remap[i] for i in p.script_ids))
        pages.append(dataclasses.replace(p, script_ids=ids))
    return dataclasses.replace(manifest, pages=tuple(pages), scripts=tuple(kept))
