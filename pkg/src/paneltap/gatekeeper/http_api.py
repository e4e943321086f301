"""Consent and metrics HTTP endpoints.

Serves the consent client: the privacy notice plus category summary for a
snapshot version (GET), consent grants and revocations (POST). CORS is wide
open because the caller is a browser extension, not a same-origin page; the
endpoints expose nothing participant-specific to readers.
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlsplit

from ..errors import ValidationError
from ..registry.snapshot import participant_summary
from .consent import Gatekeeper, notice_hash_of

logger = logging.getLogger("paneltap.admin")


class AdminApi:
    def __init__(self, gatekeeper: Gatekeeper, snapshots, metrics, notice_text: str):
        self.gatekeeper = gatekeeper
        self.snapshots = snapshots
        self.metrics = metrics
        self.notice_text = notice_text
        self._server: ThreadingHTTPServer | None = None

    # -- request handlers ---------------------------------------------------

    def handle_get(self, path: str, query: dict):
        if path == "/api/health":
            return 200, {"ok": True}
        if path == "/api/snapshot":
            return 200, {"active_version": self.snapshots.latest_version()}
        if path == "/api/notice":
            version = query.get("version", [None])[0]
            if version is None:
                resolved = self.snapshots.latest_version()
            else:
                try:
                    resolved = int(version)
                except ValueError:
                    return 400, {"error": "version must be an integer"}
            snapshot = self.snapshots.get(resolved)
            if snapshot is None:
                return 404, {"error": f"no snapshot v{resolved}"}
            return 200, {
                "version": snapshot.version,
                "notice_text": self.notice_text,
                "notice_hash": notice_hash_of(self.notice_text),
                "summary": participant_summary(snapshot),
            }
        if path == "/metrics":
            return 200, self.metrics.render_text()
        return 404, {"error": "unknown endpoint"}

    def handle_post(self, path: str, payload: dict):
        if path == "/api/consent":
            try:
                record = self.gatekeeper.grant_consent(
                    participant_id=str(payload.get("participant_id", "")),
                    whitelist_version=int(payload.get("version", 0)),
                    notice_hash=str(payload.get("notice_hash", "")),
                    explicit_ack=bool(payload.get("ack", False)),
                )
            except ValidationError as exc:
                return 400, {"error": str(exc)}
            return 200, {
                "granted": True,
                "participant_id": record.participant_id,
                "version": record.whitelist_version,
                "granted_at": record.granted_at.isoformat(),
            }
        if path == "/api/revoke":
            participant = str(payload.get("participant_id", ""))
            if not participant:
                return 400, {"error": "participant_id required"}
            record = self.gatekeeper.revoke_consent(participant)
            if record is None:
                return 200, {"revoked": False, "noop": True, "note": "no active consent"}
            return 200, {"revoked": True, "noop": False, "revoked_at": record.revoked_at.isoformat()}
        return 404, {"error": "unknown endpoint"}

    # -- server plumbing ------------------------------------------------------

    def start(self, listen: tuple[str, int]) -> tuple[str, int]:
        api = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, fmt, *args):  # quiet; ops logging is elsewhere
                pass

            def _send(self, status: int, content) -> None:
                if isinstance(content, str):
                    body = content.encode()
                    content_type = "text/plain; charset=utf-8"
                else:
                    body = json.dumps(content).encode()
                    content_type = "application/json"
                self.send_response(status)
                self.send_header("Content-Type", content_type)
                self.send_header("Content-Length", str(len(body)))
                self.send_header("Access-Control-Allow-Origin", "*")
                self.send_header("Access-Control-Allow-Headers", "Content-Type")
                self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
                self.end_headers()
                self.wfile.write(body)

            def do_OPTIONS(self):
                self._send(204, "")

            def do_GET(self):
                parts = urlsplit(self.path)
                try:
                    status, content = api.handle_get(parts.path, parse_qs(parts.query))
                except Exception:
                    logger.exception("admin GET failed")
                    status, content = 500, {"error": "internal error"}
                self._send(status, content)

            def do_POST(self):
                length = int(self.headers.get("Content-Length", "0") or 0)
                raw = self.rfile.read(length) if length else b"{}"
                try:
                    payload = json.loads(raw.decode("utf-8")) if raw.strip() else {}
                except (json.JSONDecodeError, UnicodeDecodeError):
                    self._send(400, {"error": "body must be JSON"})
                    return
                parts = urlsplit(self.path)
                try:
                    status, content = api.handle_post(parts.path, payload)
                except Exception:
                    logger.exception("admin POST failed")
                    status, content = 500, {"error": "internal error"}
                self._send(status, content)

        server = ThreadingHTTPServer(listen, Handler)
        self._server = server
        threading.Thread(target=server.serve_forever, name="paneltap-admin", daemon=True).start()
        return server.server_address

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
