"""Runtime assembly: builds the module graph from one Config.

Used by the CLI and by tests; components are constructed lazily so read-only
commands never touch key material they don't need.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from functools import cached_property

from .config import Config
from .errors import ConfigurationError
from .exchange import utc_now
from .filters import builtin_global_rules, compile_rules, load_rules_dir
from .gatekeeper import Gatekeeper, PseudonymVault
from .gatekeeper.http_api import AdminApi
from .pipeline import CapturePipeline
from .proxy import CaptureProxy, CredentialAuthority, Metrics, PipelineWorker, Tap
from .proxy.tlsmint import upstream_context
from .registry import SnapshotStore, default_taxonomy, load_entries_dir, load_taxonomy_file
from .store import CaptureStore


class Runtime:
    def __init__(self, config: Config):
        self.config = config
        self.metrics = Metrics()
        self._rules_lock = threading.Lock()
        self._rules = None

    # -- registry ---------------------------------------------------------

    @cached_property
    def taxonomy(self):
        if self.config.taxonomy_file.exists():
            return load_taxonomy_file(self.config.taxonomy_file)
        return default_taxonomy()

    @cached_property
    def snapshots(self) -> SnapshotStore:
        return SnapshotStore(self.config.snapshots_dir)

    def load_entries(self):
        if not self.config.entries_dir.exists():
            return []
        return load_entries_dir(self.config.entries_dir)

    # -- gatekeeper ---------------------------------------------------------

    @cached_property
    def notice_text(self) -> str | None:
        if self.config.notice_file is None:
            return None
        try:
            return self.config.notice_file.read_text()
        except FileNotFoundError:
            raise ConfigurationError(
                f"notice file not found: {self.config.notice_file}"
            ) from None

    @cached_property
    def gatekeeper(self) -> Gatekeeper:
        return Gatekeeper(
            self.config.consent_ledger_file, self.snapshots, notice_text=self.notice_text
        )

    @cached_property
    def vault(self) -> PseudonymVault:
        return PseudonymVault(self.config.pseudonym_key_file, self.config.mapping_dir)

    # -- store ---------------------------------------------------------------

    @cached_property
    def store(self) -> CaptureStore:
        return CaptureStore(
            self.config.captures_dir, self.config.storage_key_file, self.config.purpose
        )

    def category_resolver(self):
        cache: dict[int, dict[str, str]] = {}

        def category_of(entry_id: str, version: int) -> str | None:
            if version not in cache:
                snapshot = self.snapshots.get(version)
                cache[version] = (
                    {e.entry_id: e.category_id for e in snapshot.entries} if snapshot else {}
                )
            return cache[version].get(entry_id)

        return category_of

    # -- filters ---------------------------------------------------------------

    def compile_rule_set(self):
        rules = builtin_global_rules(self.config.correspondence_paths)
        rules.extend(load_rules_dir(self.config.rules_dir))
        return compile_rules(rules)

    def rule_set(self):
        """Current compiled rule set; swapped atomically on reload."""
        with self._rules_lock:
            if self._rules is None:
                self._rules = self.compile_rule_set()
            return self._rules

    def reload_rules(self):
        fresh = self.compile_rule_set()
        with self._rules_lock:
            self._rules = fresh
        return fresh

    # -- ops log -----------------------------------------------------------------

    def log_operation(self, role: str, command: str, detail: dict | None = None) -> None:
        self.config.data_dir.mkdir(parents=True, exist_ok=True)
        event = {"ts": utc_now().isoformat(), "role": role, "command": command}
        if detail:
            event["detail"] = detail
        with open(self.config.ops_log_file, "a") as handle:
            handle.write(json.dumps(event, sort_keys=True) + "\n")
            handle.flush()
            os.fsync(handle.fileno())


class ProxyStack:
    """Everything `proxy serve` runs: tap, pipeline worker, proxy, admin API."""

    def __init__(self, runtime: Runtime):
        self.runtime = runtime
        config = runtime.config

        self.tap = Tap(runtime.metrics, depth=config.proxy.queue_depth)
        self.pipeline = CapturePipeline(
            rules_ref=runtime.rule_set,
            gate=runtime.gatekeeper,
            vault=runtime.vault,
            store=runtime.store,
            metrics=runtime.metrics,
            purpose=config.purpose,
        )
        self.worker = PipelineWorker(self.tap, self.pipeline)

        if config.tls.root_cert_file and config.tls.root_key_file:
            authority = CredentialAuthority.load_or_generate(
                config.tls.root_cert_file, config.tls.root_key_file
            )
        else:
            authority = CredentialAuthority.generate()
        self.authority = authority

        self.proxy = CaptureProxy(
            listen=config.proxy.listen,
            snapshot_ref=runtime.snapshots.active,
            gate=runtime.gatekeeper,
            tap=self.tap,
            metrics=runtime.metrics,
            authority=authority,
            upstream_tls_context=upstream_context(config.tls.upstream_ca_file),
            resolve=config.proxy.resolve,
            max_stored_body=config.proxy.max_stored_body,
            upstream_timeout=config.proxy.upstream_timeout,
        )
        self.admin = AdminApi(
            runtime.gatekeeper,
            runtime.snapshots,
            runtime.metrics,
            notice_text=runtime.notice_text or "",
        )

    def start(self) -> dict:
        self.worker.start()
        proxy_addr = self.proxy.start()
        admin_addr = self.admin.start(self.runtime.config.admin_listen)
        return {"proxy": proxy_addr, "admin": admin_addr}

    def stop(self) -> None:
        self.proxy.stop()
        self.admin.stop()
        self.worker.stop()


def setup_proxy_logging(config: Config) -> None:
    """File logging for the serving stack. URLs and hosts are never logged by
    design; this only captures operational events."""
    config.data_dir.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(config.proxy_log_file)
    handler.setFormatter(logging.Formatter("%(asctime)s %(name)s %(levelname)s %(message)s"))
    for name in ("paneltap.proxy", "paneltap.pipeline", "paneltap.admin"):
        log = logging.getLogger(name)
        log.setLevel(logging.INFO)
        log.addHandler(handler)
