"""Capture pipeline: filter the copy, re-check consent, pseudonymize, store.

Runs strictly off the forwarding path. The consent gate is re-checked at
store time so a revocation that lands mid-exchange still stops storage: the
participant gets their page, the archive gets nothing. A filter failure on
an entry-scoped rule is fail-closed - counted, never persisted unfiltered.
"""

from __future__ import annotations

import logging

from .errors import StorageError
from .filters import apply as filter_apply
from .proxy.metrics import (
    CAPTURES_STORED,
    CAPTURES_TRUNCATED,
    DROPS_FILTER_ERROR,
    DROPS_REVOKED,
    DROPS_STORE_ERROR,
    Metrics,
)
from .proxy.tap import TapJob
from .store.records import CaptureRecord

logger = logging.getLogger("paneltap.pipeline")


class CapturePipeline:
    def __init__(self, rules_ref, gate, vault, store, metrics: Metrics, purpose: str):
        """`rules_ref` is a zero-arg callable returning the current compiled
        RuleSet - swapped atomically with snapshot publication."""
        self.rules_ref = rules_ref
        self.gate = gate
        self.vault = vault
        self.store = store
        self.metrics = metrics
        self.purpose = purpose

    def process(self, job: TapJob) -> str | None:
        """Returns the stored record id, or None when the capture was dropped."""
        exchange, decision = job.exchange, job.decision

        gate = self.gate.check_gate(exchange.participant_id, decision.whitelist_version)
        if not gate:
            self.metrics.inc(DROPS_REVOKED)
            return None

        try:
            rules = self.rules_ref().for_entry(decision.entry_id)
            filtered, report = filter_apply(exchange, rules)
        except Exception:
            logger.exception("irrecoverable filter error (capture dropped, not stored)")
            self.metrics.inc(DROPS_FILTER_ERROR)
            return None

        pseudonym = self.vault.pseudonymize(exchange.participant_id)
        record = CaptureRecord(
            pseudonym=pseudonym,
            ts=exchange.ts,
            entry_id=decision.entry_id,
            whitelist_version=decision.whitelist_version,
            url=filtered.url,
            method=exchange.method,
            status=exchange.status,
            request_headers=filtered.request_headers,
            request_body=filtered.request_body,
            response_headers=filtered.response_headers,
            response_body=filtered.response_body,
            redaction_report=report.to_document(),
            purpose_tag=self.purpose,
            tls=exchange.tls,
        )
        try:
            record_id = self.store.append(record)
        except StorageError:
            logger.exception("store append failed (capture dropped)")
            self.metrics.inc(DROPS_STORE_ERROR)
            return None
        self.metrics.inc(CAPTURES_STORED)
        if report.truncated:
            self.metrics.inc(CAPTURES_TRUNCATED)
        return record_id
