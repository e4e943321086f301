"""Deterministic fixture origin server for tests and lab deployments.

Every route's response is a pure function of the request, so a direct fetch
and a proxied fetch of the same URL can be compared byte for byte.
"""

from __future__ import annotations

import hashlib
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlsplit


_LETTERS = bytes.maketrans(b"0123456789", b"ghijklmnop")


def deterministic_text(seed: str, size: int = 512) -> bytes:
    """Repeatable pseudo-text derived from a seed string. Letters only, so
    fixture bodies can never trip digit-run or address detectors."""
    out = bytearray()
    counter = 0
    while len(out) < size:
        digest = hashlib.sha256(f"{seed}:{counter}".encode()).hexdigest()
        out += digest.encode().translate(_LETTERS)
        out += b" "
        counter += 1
    return bytes(out[:size])


class FixtureOrigin:
    """Routes:
    /doc/<name>         deterministic text derived from the path
    /big?bytes=N        N deterministic bytes
    /status/<code>      empty-ish body with that status code
    /echo               POST: response body equals the request body
    /form               POST: fixed acknowledgement body (never echoes)
    /inbox/* /messages/*  deterministic "conversation" text
    /set-cookie         responds with a Set-Cookie header
    anything else       404 with a deterministic body
    """

    def __init__(self, tls_context=None):
        self.tls_context = tls_context
        self._server: ThreadingHTTPServer | None = None
        self.address: tuple[str, int] | None = None

    def start(self, listen: tuple[str, int] = ("127.0.0.1", 0)) -> tuple[str, int]:
        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, fmt, *args):
                pass

            def _reply(self, status: int, body: bytes, extra_headers=()):
                self.send_response(status)
                self.send_header("Content-Type", "text/plain; charset=utf-8")
                self.send_header("Content-Length", str(len(body)))
                for name, value in extra_headers:
                    self.send_header(name, value)
                self.end_headers()
                self.wfile.write(body)

            def do_GET(self):
                parts = urlsplit(self.path)
                path = parts.path
                if path.startswith("/status/"):
                    try:
                        code = int(path.rsplit("/", 1)[1])
                    except ValueError:
                        code = 400
                    self._reply(code, f"status {code}\n".encode())
                    return
                if path == "/big":
                    size = int(parse_qs(parts.query).get("bytes", ["1048576"])[0])
                    self._reply(200, deterministic_text(path + parts.query, size))
                    return
                if path == "/set-cookie":
                    self._reply(
                        200,
                        deterministic_text(path, 128),
                        extra_headers=[("Set-Cookie", "tracker=fixture-cookie-value; Path=/")],
                    )
                    return
                body = deterministic_text(f"{self.headers.get('Host', '')}{self.path}")
                status = 404 if not self._known(path) else 200
                self._reply(status, body)
                return

            def _known(self, path: str) -> bool:
                return (
                    path.startswith("/doc/")
                    or path.startswith("/inbox")
                    or path.startswith("/messages")
                    or path.startswith("/search")
                    or path.startswith("/account")
                    or path == "/"
                )

            def do_POST(self):
                length = int(self.headers.get("Content-Length", "0") or 0)
                body = self.rfile.read(length) if length else b""
                parts = urlsplit(self.path)
                if parts.path == "/echo":
                    self._reply(200, body)
                    return
                if parts.path == "/form":
                    self._reply(200, b"form accepted\n")
                    return
                self._reply(404, b"unknown post target\n")

        server = ThreadingHTTPServer(listen, Handler)
        if self.tls_context is not None:
            server.socket = self.tls_context.wrap_socket(server.socket, server_side=True)
        self._server = server
        threading.Thread(target=server.serve_forever, name="fixture-origin", daemon=True).start()
        self.address = server.server_address
        return self.address

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
