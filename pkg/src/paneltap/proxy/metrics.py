"""Aggregate counters - the only trace non-whitelisted traffic ever leaves."""

from __future__ import annotations

import threading

PASS_NOT_WHITELISTED = "pass_through.not_whitelisted"
PASS_NO_CONSENT = "pass_through.no_consent"
PASS_COMMS_EXCLUDED = "pass_through.comms_excluded"
CAPTURES_TAPPED = "captures.tapped"
CAPTURES_STORED = "captures.stored"
CAPTURES_TRUNCATED = "captures.truncated"
DROPS_QUEUE = "captures.dropped_queue_full"
DROPS_REVOKED = "captures.dropped_consent_revoked"
DROPS_FILTER_ERROR = "captures.dropped_filter_error"
DROPS_STORE_ERROR = "captures.dropped_store_error"
RELAY_TUNNELS = "relay.tunnels"
RELAY_TLS_UNDECLARED = "relay.tls_undeclared"
UPSTREAM_ERRORS = "upstream.errors"
INTERCEPTED_SESSIONS = "tls.intercepted_sessions"

ALL_COUNTERS = (
    PASS_NOT_WHITELISTED,
    PASS_NO_CONSENT,
    PASS_COMMS_EXCLUDED,
    CAPTURES_TAPPED,
    CAPTURES_STORED,
    CAPTURES_TRUNCATED,
    DROPS_QUEUE,
    DROPS_REVOKED,
    DROPS_FILTER_ERROR,
    DROPS_STORE_ERROR,
    RELAY_TUNNELS,
    RELAY_TLS_UNDECLARED,
    UPSTREAM_ERRORS,
    INTERCEPTED_SESSIONS,
)


class Metrics:
    def __init__(self):
        self._lock = threading.Lock()
        self._counters = {name: 0 for name in ALL_COUNTERS}

    def inc(self, name: str, amount: int = 1) -> None:
        with self._lock:
            self._counters[name] = self._counters.get(name, 0) + amount

    def get(self, name: str) -> int:
        with self._lock:
            return self._counters.get(name, 0)

    def snapshot(self) -> dict[str, int]:
        with self._lock:
            return dict(self._counters)

    def render_text(self) -> str:
        lines = [f"{name} {value}" for name, value in sorted(self.snapshot().items())]
        return "\n".join(lines) + "\n"
