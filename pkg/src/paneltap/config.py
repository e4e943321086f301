"""Deployment configuration: one JSON file, environment overrides for secrets.

Key material never lives in the config file itself - only paths to key files,
and those paths can be supplied entirely via PANELTAP_STORAGE_KEY_FILE /
PANELTAP_PSEUDONYM_KEY_FILE so the config can be world-readable.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

from . import DEFAULT_PURPOSE
from .errors import ConfigurationError

ENV_STORAGE_KEY = "PANELTAP_STORAGE_KEY_FILE"
ENV_PSEUDONYM_KEY = "PANELTAP_PSEUDONYM_KEY_FILE"

DEFAULT_MAX_STORED_BODY = 2 * 1024 * 1024  # stored copy cap, not a forwarding limit
DEFAULT_QUEUE_DEPTH = 256
DEFAULT_K_MIN = 5


def _parse_addr(value: str, what: str) -> tuple[str, int]:
    host, sep, port = value.rpartition(":")
    if not sep or not host:
        raise ConfigurationError(f"{what}: expected host:port, got {value!r}")
    try:
        return host, int(port)
    except ValueError:
        raise ConfigurationError(f"{what}: bad port in {value!r}") from None


@dataclass
class ProxyConfig:
    listen: tuple[str, int] = ("127.0.0.1", 8899)
    upstream_timeout: float = 15.0
    max_stored_body: int = DEFAULT_MAX_STORED_BODY
    queue_depth: int = DEFAULT_QUEUE_DEPTH
    # host -> (address, port) routing override; hosts not listed use DNS
    resolve: dict[str, tuple[str, int]] = field(default_factory=dict)


@dataclass
class TlsConfig:
    root_cert_file: Path | None = None
    root_key_file: Path | None = None
    upstream_ca_file: Path | None = None  # None = system trust store


@dataclass
class RetentionConfig:
    horizon_years: int = 5
    anchor: str = "last_publication_date"  # or "capture_date"
    anchor_date: date | None = None


@dataclass
class Config:
    data_dir: Path
    purpose: str = DEFAULT_PURPOSE
    proxy: ProxyConfig = field(default_factory=ProxyConfig)
    admin_listen: tuple[str, int] = ("127.0.0.1", 8900)
    tls: TlsConfig = field(default_factory=TlsConfig)
    storage_key_file: Path | None = None
    pseudonym_key_file: Path | None = None
    identity_dir: Path | None = None
    retention: RetentionConfig = field(default_factory=RetentionConfig)
    k_min: int = DEFAULT_K_MIN
    notice_file: Path | None = None
    correspondence_paths: tuple[str, ...] = ()
    log_file: Path | None = None

    # Derived layout under data_dir.
    @property
    def whitelist_dir(self) -> Path:
        return self.data_dir / "whitelist"

    @property
    def entries_dir(self) -> Path:
        return self.whitelist_dir / "entries"

    @property
    def taxonomy_file(self) -> Path:
        return self.whitelist_dir / "taxonomy.yaml"

    @property
    def snapshots_dir(self) -> Path:
        return self.whitelist_dir / "snapshots"

    @property
    def rules_dir(self) -> Path:
        return self.data_dir / "rules"

    @property
    def consent_ledger_file(self) -> Path:
        return self.data_dir / "consent" / "ledger.jsonl"

    @property
    def captures_dir(self) -> Path:
        return self.data_dir / "captures"

    @property
    def mapping_dir(self) -> Path:
        # Pseudonym mapping lives outside the capture store's directory tree.
        return self.identity_dir if self.identity_dir else self.data_dir / "identity"

    @property
    def ops_log_file(self) -> Path:
        return self.data_dir / "ops.log"

    @property
    def proxy_log_file(self) -> Path:
        return self.log_file if self.log_file else self.data_dir / "proxy.log"


def _opt_path(raw: dict, key: str, base: Path) -> Path | None:
    value = raw.get(key)
    if value is None:
        return None
    path = Path(value)
    return path if path.is_absolute() else base / path


def load_config(path: str | Path) -> Config:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file {path} is not valid JSON: {exc}") from None

    base = path.parent.resolve()
    if "data_dir" not in raw:
        raise ConfigurationError("config: data_dir is required")
    data_dir = Path(raw["data_dir"])
    if not data_dir.is_absolute():
        data_dir = base / data_dir

    praw = raw.get("proxy", {})
    proxy = ProxyConfig(
        listen=_parse_addr(praw.get("listen", "127.0.0.1:8899"), "proxy.listen"),
        upstream_timeout=float(praw.get("upstream_timeout", 15.0)),
        max_stored_body=int(praw.get("max_stored_body", DEFAULT_MAX_STORED_BODY)),
        queue_depth=int(praw.get("queue_depth", DEFAULT_QUEUE_DEPTH)),
        resolve={
            host: _parse_addr(addr, f"proxy.resolve[{host}]")
            for host, addr in praw.get("resolve", {}).items()
        },
    )
    if proxy.max_stored_body <= 0 or proxy.queue_depth <= 0:
        raise ConfigurationError("proxy.max_stored_body and proxy.queue_depth must be positive")

    traw = raw.get("tls", {})
    tls = TlsConfig(
        root_cert_file=_opt_path(traw, "root_cert_file", base),
        root_key_file=_opt_path(traw, "root_key_file", base),
        upstream_ca_file=_opt_path(traw, "upstream_ca_file", base),
    )

    kraw = raw.get("keys", {})
    storage_key = os.environ.get(ENV_STORAGE_KEY) or kraw.get("storage_key_file")
    pseudonym_key = os.environ.get(ENV_PSEUDONYM_KEY) or kraw.get("pseudonym_key_file")

    rraw = raw.get("retention", {})
    anchor = rraw.get("anchor", "last_publication_date")
    if anchor not in ("last_publication_date", "capture_date"):
        raise ConfigurationError(f"retention.anchor: unknown anchor {anchor!r}")
    anchor_date = None
    if rraw.get("anchor_date"):
        try:
            anchor_date = date.fromisoformat(rraw["anchor_date"])
        except ValueError:
            raise ConfigurationError(
                f"retention.anchor_date: expected YYYY-MM-DD, got {rraw['anchor_date']!r}"
            ) from None
    horizon = int(rraw.get("horizon_years", 5))
    if horizon < 1:
        raise ConfigurationError("retention.horizon_years must be >= 1")

    return Config(
        data_dir=data_dir,
        purpose=raw.get("purpose", DEFAULT_PURPOSE),
        proxy=proxy,
        admin_listen=_parse_addr(raw.get("admin", {}).get("listen", "127.0.0.1:8900"), "admin.listen"),
        tls=tls,
        storage_key_file=Path(storage_key) if storage_key else None,
        pseudonym_key_file=Path(pseudonym_key) if pseudonym_key else None,
        identity_dir=_opt_path(raw, "identity_dir", base),
        retention=RetentionConfig(horizon_years=horizon, anchor=anchor, anchor_date=anchor_date),
        k_min=int(raw.get("export", {}).get("k_min", DEFAULT_K_MIN)),
        notice_file=_opt_path(raw, "notice_file", base),
        correspondence_paths=tuple(raw.get("correspondence_paths", [])),
        log_file=_opt_path(raw, "log_file", base),
    )
