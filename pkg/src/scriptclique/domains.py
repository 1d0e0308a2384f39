"""Hostname helpers: FQDN normalisation and registrable-domain lookup."""
from __future__ import annotations

import functools
import ipaddress
import re
from urllib.parse import urlsplit

import tldextract

# Bundled public suffix snapshot only; never fetch the live list.
_EXTRACT = tldextract.TLDExtract(suffix_list_urls=(), cache_dir=None)

_LABEL = re.compile(r"^(?!-)[a-z0-9-]{1,63}(?<!-)$")


def is_valid_hostname(host: str) -> bool:
    if not host or len(host) > 253:
        return False
    try:
        ipaddress.ip_address(host)
        return True
    except ValueError:
        pass
    labels = host.rstrip(".").split(".")
    if len(labels) < 2 and host != "localhost":
        return False
    return all(_LABEL.match(label) for label in labels)


def url_host(url: str) -> str | None:
    """Lowercased hostname of an absolute or scheme-relative URL."""
    try:
        parts = urlsplit(url)
        host = parts.hostname
    except ValueError:
        return None
    if not host:
        return None
    return host.rstrip(".").lower()


@functools.lru_cache(maxsize=65536)
def registrable_domain(host: str) -> str:
    """Public-suffix-plus-one of ``host``.

    Hosts without a registrable part (IP literals, ``localhost``, bare
    suffixes) map to themselves so that every host has a site identity.
    """
    host = host.rstrip(".").lower()
    ext = _EXTRACT(host)
    if ext.domain and ext.suffix:
        return f"{ext.domain}.{ext.suffix}"
    return host


def site_of_url(url: str) -> str:
    host = url_host(url)
    if host is None:
        raise ValueError(f"URL has no host: {url!r}")
    return registrable_domain(host)
