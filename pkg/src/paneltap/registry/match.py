"""URL-to-entry matching.

A URL matches an entry when its host equals one of the entry's hosts or sits
under one as a parent-domain suffix; the longest matching host wins so
"sub.example.org" beats "example.org" when both are listed. Only entries at
stage participants_informed (and not vetoed) are eligible - everything else is
invisible to the proxy.
"""

from __future__ import annotations

from dataclasses import dataclass
from urllib.parse import urlsplit

from ..errors import MalformedUrlError
from .model import WhitelistEntry, is_valid_hostname


@dataclass(frozen=True)
class SplitUrl:
    scheme: str
    host: str
    port: int | None
    path: str
    query: str


def split_url(url: str) -> SplitUrl:
    """Split and canonicalize; raises MalformedUrlError, never returns junk."""
    try:
        parts = urlsplit(url)
    except ValueError as exc:
        raise MalformedUrlError(f"unparseable URL {url!r}: {exc}") from None
    if parts.scheme not in ("http", "https"):
        raise MalformedUrlError(f"URL {url!r} must be http(s)")
    try:
        hostname = parts.hostname
        port = parts.port
    except ValueError as exc:
        raise MalformedUrlError(f"URL {url!r}: {exc}") from None
    if not hostname:
        raise MalformedUrlError(f"URL {url!r} has no host")
    host = hostname.lower()
    if not is_valid_hostname(host):
        raise MalformedUrlError(f"URL {url!r} has an invalid host {host!r}")
    return SplitUrl(
        scheme=parts.scheme,
        host=host,
        port=port,
        path=parts.path or "/",
        query=parts.query,
    )


@dataclass(frozen=True)
class MatchResult:
    entry: WhitelistEntry
    matched_host: str
    path: str


def host_matches(request_host: str, entry_host: str) -> bool:
    return request_host == entry_host or request_host.endswith("." + entry_host)


def match_host(host: str, entries) -> tuple[WhitelistEntry, str] | None:
    """Longest-suffix host match over matchable entries; None when unlisted."""
    best: tuple[WhitelistEntry, str] | None = None
    for entry in entries:
        if not entry.approval.matchable:
            continue
        for entry_host in entry.hosts:
            if host_matches(host, entry_host):
                if best is None or len(entry_host) > len(best[1]):
                    best = (entry, entry_host)
    return best


def match(url: str, snapshot) -> MatchResult | None:
    parts = split_url(url)
    found = match_host(parts.host, snapshot.entries)
    if found is None:
        return None
    entry, matched_host = found
    return MatchResult(entry=entry, matched_host=matched_host, path=parts.path)


def path_under(path: str, prefixes) -> bool:
    """Prefix match on URL paths; a bare "/" or the site-wide marker covers all."""
    from .model import SITE_WIDE

    for prefix in prefixes:
        if prefix == SITE_WIDE or prefix == "/":
            return True
        if path == prefix or path.startswith(prefix.rstrip("/") + "/"):
            return True
    return False
