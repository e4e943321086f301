"""The enhanced transparent forward proxy.

Forwarding rules, in order of importance:

* the client always receives the origin's bytes - filtering touches only the
  stored copy, and the tap is an asynchronous handoff the forwarding path
  never waits on;
* non-whitelisted traffic is relayed blind: TLS stays opaque end to end, and
  nothing about it is logged beyond aggregate counters (this logger never
  writes hosts or URLs, for any traffic);
* interception happens only for whitelisted TLS hosts with a consenting
  participant, using a leaf minted under the research root, and the upstream
  leg always validates the origin certificate - an invalid origin is refused,
  never downgraded.
"""

from __future__ import annotations

import base64
import http.client
import logging
import select
import socket
import ssl
import threading
from dataclasses import dataclass
from urllib.parse import urlsplit

from ..exchange import TRUNCATION_MARKER, Exchange, utc_now
from ..registry.match import match_host
from .decision import (
    COMMS_EXCLUDED,
    NO_CONSENT,
    NOT_WHITELISTED,
    decide_capture,
)
from .metrics import (
    INTERCEPTED_SESSIONS,
    PASS_COMMS_EXCLUDED,
    PASS_NO_CONSENT,
    PASS_NOT_WHITELISTED,
    RELAY_TLS_UNDECLARED,
    RELAY_TUNNELS,
    UPSTREAM_ERRORS,
    Metrics,
)

logger = logging.getLogger("paneltap.proxy")

HOP_BY_HOP = {
    "connection",
    "keep-alive",
    "proxy-authenticate",
    "proxy-authorization",
    "proxy-connection",
    "te",
    "trailers",
    "transfer-encoding",
    "upgrade",
    "expect",
}

CHUNK = 65536
# Request bodies up to this size are spooled (enables transparent retry on a
# stale keep-alive connection); larger identity-framed bodies stream through.
SPOOL_LIMIT = 1024 * 1024
MAX_BUFFERED_REQUEST = 64 * 1024 * 1024  # sanity bound for chunked request bodies

_PASS_METRIC = {
    NOT_WHITELISTED: PASS_NOT_WHITELISTED,
    NO_CONSENT: PASS_NO_CONSENT,
    COMMS_EXCLUDED: PASS_COMMS_EXCLUDED,
}


class _BadRequest(Exception):
    pass


class _SockReader:
    """Minimal buffered reader over a socket whose leftover buffer we own -
    needed so a blind relay can forward bytes a client pipelined behind its
    CONNECT head."""

    def __init__(self, sock):
        self.sock = sock
        self.buffer = b""

    def _fill(self) -> bool:
        data = self.sock.recv(CHUNK)
        if not data:
            return False
        self.buffer += data
        return True

    def readline(self, limit: int = 65536) -> bytes:
        while b"\n" not in self.buffer:
            if len(self.buffer) > limit:
                raise _BadRequest("header line too long")
            if not self._fill():
                line, self.buffer = self.buffer, b""
                return line
        index = self.buffer.index(b"\n") + 1
        line, self.buffer = self.buffer[:index], self.buffer[index:]
        return line

    def read_exact(self, n: int) -> bytes:
        while len(self.buffer) < n:
            if not self._fill():
                break
        data, self.buffer = self.buffer[:n], self.buffer[n:]
        return data

    def drain_buffer(self) -> bytes:
        data, self.buffer = self.buffer, b""
        return data


def _read_head(reader: _SockReader):
    """Read one request head; None on clean EOF before any bytes."""
    line = reader.readline()
    if not line:
        return None
    try:
        text = line.decode("latin-1").rstrip("\r\n")
        method, target, version = text.split(" ", 2)
    except (UnicodeDecodeError, ValueError):
        raise _BadRequest("malformed request line") from None
    headers: list[tuple[str, str]] = []
    while True:
        raw = reader.readline()
        if raw in (b"\r\n", b"\n", b""):
            break
        decoded = raw.decode("latin-1").rstrip("\r\n")
        name, sep, value = decoded.partition(":")
        if not sep:
            raise _BadRequest("malformed header line")
        headers.append((name.strip(), value.strip()))
    return method, target, version, headers


def _header(headers, name: str) -> str | None:
    for key, value in headers:
        if key.lower() == name.lower():
            return value
    return None


def _read_body(reader: _SockReader, headers) -> bytes:
    """Request body per framing headers (identity Content-Length or chunked)."""
    transfer = (_header(headers, "transfer-encoding") or "").lower()
    if "chunked" in transfer:
        body = bytearray()
        while True:
            size_line = reader.readline(1024)
            try:
                size = int(size_line.strip().split(b";")[0], 16)
            except ValueError:
                raise _BadRequest("bad chunk size") from None
            if size == 0:
                while True:  # trailers until blank line
                    trailer = reader.readline()
                    if trailer in (b"\r\n", b"\n", b""):
                        break
                break
            if len(body) + size > MAX_BUFFERED_REQUEST:
                raise _BadRequest("request body too large")
            body += reader.read_exact(size)
            reader.read_exact(2)  # CRLF after chunk
        return bytes(body)
    length = _header(headers, "content-length")
    if length is None:
        return b""
    try:
        total = int(length)
    except ValueError:
        raise _BadRequest("bad content-length") from None
    if total > MAX_BUFFERED_REQUEST:
        raise _BadRequest("request body too large")
    return reader.read_exact(total)


class _RequestBodyPlan:
    """How a request body travels upstream: spooled when small or chunked
    (retryable), streamed chunk-by-chunk when large - the stored copy is
    capped either way, so forwarding never depends on full buffering."""

    def __init__(self, reader: _SockReader, headers, cap: int):
        transfer = (_header(headers, "transfer-encoding") or "").lower()
        length_header = _header(headers, "content-length")
        length = int(length_header) if length_header and length_header.isdigit() else None
        self.copy = b""
        self.truncated = False
        self.stream = None
        self.spooled = b""
        if "chunked" in transfer or length is None or length <= SPOOL_LIMIT:
            spooled = _read_body(reader, headers)
            self.spooled = spooled
            self.copy = spooled[:cap]
            self.truncated = len(spooled) > len(self.copy)
            if self.truncated:
                self.copy += TRUNCATION_MARKER
        else:
            def stream(send):
                remaining = length
                copy = bytearray()
                sent = 0
                while remaining > 0:
                    chunk = reader.read_exact(min(CHUNK, remaining))
                    if not chunk:
                        break
                    send(chunk)
                    sent += len(chunk)
                    remaining -= len(chunk)
                    if len(copy) < cap:
                        copy += chunk[: cap - len(copy)]
                self.truncated = sent > len(copy)
                if self.truncated:
                    copy += TRUNCATION_MARKER
                self.copy = bytes(copy)

            self.stream = stream


def participant_from_headers(headers) -> str | None:
    """Participant identity is bound to the session via proxy auth (Basic;
    the username is the opaque panel id)."""
    value = _header(headers, "proxy-authorization")
    if not value:
        return None
    scheme, _, payload = value.partition(" ")
    if scheme.lower() != "basic":
        return None
    try:
        decoded = base64.b64decode(payload.strip()).decode("utf-8")
    except Exception:
        return None
    return decoded.split(":", 1)[0] or None


def _forwardable(headers) -> list[tuple[str, str]]:
    named = {h.strip().lower() for h in (_header(headers, "connection") or "").split(",") if h.strip()}
    return [
        (name, value)
        for name, value in headers
        if name.lower() not in HOP_BY_HOP and name.lower() not in named
    ]


def _capture_headers(headers) -> list[tuple[str, str]]:
    """Headers as stored in the raw tap: everything except the proxy-hop
    credential that carries the participant's session identity."""
    return [
        (name, value)
        for name, value in headers
        if name.lower() not in ("proxy-authorization", "proxy-connection")
    ]


@dataclass
class _UpstreamResponse:
    status: int
    reason: str
    headers: list[tuple[str, str]]
    raw: http.client.HTTPResponse
    will_close: bool


class _UpstreamSession:
    """One logical origin connection, transparently re-established when the
    origin closes it between requests."""

    def __init__(self, host, port, addr, tls_context, timeout):
        self.host = host
        self.port = port
        self.addr = addr
        self.tls_context = tls_context
        self.timeout = timeout
        self._conn: http.client.HTTPConnection | None = None

    def connect(self) -> None:
        sock = socket.create_connection(self.addr, timeout=self.timeout)
        if self.tls_context is not None:
            sock = self.tls_context.wrap_socket(sock, server_hostname=self.host)
        conn = http.client.HTTPConnection(self.host, self.port, timeout=self.timeout)
        conn.sock = sock
        self._conn = conn

    def request(self, method, path, headers, body: bytes, body_stream=None) -> _UpstreamResponse:
        """Forward one request. `body_stream(send)` streams a large body
        through `send` without buffering it; streamed requests always run on
        a fresh connection (they cannot be replayed on a stale one)."""
        if body_stream is not None:
            self.close()
        attempts = 1 if body_stream is not None or self._conn is None else 2
        for attempt in range(attempts):
            if self._conn is None:
                self.connect()
            conn = self._conn
            try:
                conn.putrequest(method, path, skip_host=True, skip_accept_encoding=True)
                seen_host = seen_length = False
                for name, value in headers:
                    lowered = name.lower()
                    seen_host = seen_host or lowered == "host"
                    seen_length = seen_length or lowered == "content-length"
                    conn.putheader(name, value)
                if not seen_host:
                    default = 443 if self.tls_context is not None else 80
                    suffix = "" if self.port == default else f":{self.port}"
                    conn.putheader("Host", f"{self.host}{suffix}")
                if body and not seen_length:
                    conn.putheader("Content-Length", str(len(body)))
                conn.endheaders()
                if body_stream is not None:
                    body_stream(conn.send)
                else:
                    for start in range(0, len(body), CHUNK):
                        conn.send(body[start : start + CHUNK])
                raw = conn.getresponse()
            except (OSError, http.client.HTTPException):
                self.close()
                if attempt + 1 < attempts:
                    continue
                raise
            return _UpstreamResponse(
                status=raw.status,
                reason=raw.reason,
                headers=list(raw.getheaders()),
                raw=raw,
                will_close=raw.will_close,
            )
        raise OSError("unreachable")

    def finish_response(self, response: _UpstreamResponse) -> None:
        if response.will_close:
            self.close()

    def close(self) -> None:
        if self._conn is not None:
            try:
                self._conn.close()
            except OSError:
                pass
            self._conn = None


class CaptureProxy:
    def __init__(
        self,
        *,
        listen=("127.0.0.1", 0),
        snapshot_ref,
        gate,
        tap,
        metrics: Metrics,
        authority=None,
        upstream_tls_context=None,
        resolve=None,
        max_stored_body: int,
        upstream_timeout: float = 15.0,
    ):
        self.listen_addr = listen
        self.snapshot_ref = snapshot_ref
        self.gate = gate
        self.tap = tap
        self.metrics = metrics
        self.authority = authority
        self.upstream_tls_context = upstream_tls_context or ssl.create_default_context()
        self.resolve = resolve or {}
        self.max_stored_body = max_stored_body
        self.upstream_timeout = upstream_timeout
        self.bound_addr: tuple[str, int] | None = None
        self._server_sock: socket.socket | None = None
        self._running = threading.Event()

    # -- lifecycle --------------------------------------------------------

    def start(self) -> tuple[str, int]:
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind(self.listen_addr)
        sock.listen(128)
        self._server_sock = sock
        self._running.set()
        threading.Thread(target=self._accept_loop, name="paneltap-accept", daemon=True).start()
        self.bound_addr = sock.getsockname()
        logger.info("proxy listening on port %d", self.bound_addr[1])
        return self.bound_addr

    def stop(self) -> None:
        self._running.clear()
        if self._server_sock is not None:
            try:
                self._server_sock.close()
            except OSError:
                pass

    def _accept_loop(self) -> None:
        while self._running.is_set():
            try:
                client, _ = self._server_sock.accept()
            except OSError:
                break
            threading.Thread(target=self._handle_client, args=(client,), daemon=True).start()

    # -- connection handling ----------------------------------------------

    def _resolve(self, host: str, port: int) -> tuple[str, int]:
        return self.resolve.get(host, (host, port))

    def _handle_client(self, client: socket.socket) -> None:
        client.settimeout(self.upstream_timeout)
        try:
            reader = _SockReader(client)
            head = _read_head(reader)
            if head is None:
                return
            method, target, _version, headers = head
            if method.upper() == "CONNECT":
                self._handle_connect(client, reader, target, headers)
            else:
                self._handle_plain(client, reader, method, target, headers)
        except (_BadRequest, OSError, ssl.SSLError):
            logger.debug("connection aborted", exc_info=True)
        finally:
            try:
                client.close()
            except OSError:
                pass

    # -- plain http proxying ------------------------------------------------

    def _handle_plain(self, client, reader, method, target, headers) -> None:
        parts = urlsplit(target)
        if parts.scheme != "http" or not parts.hostname:
            _send_simple(client, 400, "absolute http URL required")
            return
        host = parts.hostname.lower()
        port = parts.port or 80
        path = parts.path or "/"
        if parts.query:
            path += "?" + parts.query
        url = f"http://{host}{'' if port == 80 else f':{port}'}{path}"

        participant = participant_from_headers(headers)
        decision = decide_capture(url, participant, self.snapshot_ref(), self.gate)
        if not decision.capture:
            self.metrics.inc(_PASS_METRIC[decision.reason])

        plan = _RequestBodyPlan(reader, headers, self.max_stored_body)
        session = _UpstreamSession(
            host, port, self._resolve(host, port), None, self.upstream_timeout
        )
        try:
            try:
                response = session.request(
                    method, path, _forwardable(headers), plan.spooled, body_stream=plan.stream
                )
            except (OSError, http.client.HTTPException):
                self.metrics.inc(UPSTREAM_ERRORS)
                _send_simple(client, 502, "upstream unreachable")
                return
            response_copy, response_truncated, _ = self._relay_response(
                client, response, keep_alive=False
            )
            if decision.capture:
                self._tap_exchange(
                    participant,
                    url,
                    method,
                    headers,
                    plan,
                    response,
                    response_copy,
                    response_truncated,
                    decision,
                    tls=False,
                )
        finally:
            session.close()

    def _relay_response(self, client, response: _UpstreamResponse, keep_alive: bool):
        """Stream the response to the client; returns (copy, truncated, persist)."""
        has_length = _header(response.headers, "content-length") is not None
        persist = keep_alive and has_length
        head_lines = [f"HTTP/1.1 {response.status} {response.reason}\r\n"]
        for name, value in _forwardable(response.headers):
            head_lines.append(f"{name}: {value}\r\n")
        head_lines.append("Connection: keep-alive\r\n" if persist else "Connection: close\r\n")
        head_lines.append("\r\n")
        client.sendall("".join(head_lines).encode("latin-1"))

        copy = bytearray()
        total = 0
        while True:
            chunk = response.raw.read(CHUNK)
            if not chunk:
                break
            client.sendall(chunk)
            total += len(chunk)
            if len(copy) < self.max_stored_body:
                copy += chunk[: self.max_stored_body - len(copy)]
        truncated = total > len(copy)
        if truncated:
            copy += TRUNCATION_MARKER
        return bytes(copy), truncated, persist

    def _tap_exchange(
        self,
        participant,
        url,
        method,
        req_headers,
        plan: _RequestBodyPlan,
        response: _UpstreamResponse,
        response_copy: bytes,
        response_truncated: bool,
        decision,
        *,
        tls: bool,
    ) -> None:
        exchange = Exchange(
            participant_id=participant,
            url=url,
            method=method,
            ts=utc_now(),
            request_headers=_capture_headers(req_headers),
            request_body=plan.copy,
            status=response.status,
            response_headers=list(response.headers),
            response_body=response_copy,
            tls=tls,
            request_truncated=plan.truncated,
            response_truncated=response_truncated,
        )
        self.tap.offer(exchange, decision)

    # -- connect handling ----------------------------------------------------

    def _handle_connect(self, client, reader, target, headers) -> None:
        host, _, port_text = target.partition(":")
        host = host.lower()
        try:
            port = int(port_text) if port_text else 443
        except ValueError:
            _send_simple(client, 400, "bad CONNECT target")
            return

        participant = participant_from_headers(headers)
        snapshot = self.snapshot_ref()
        entry = None
        if snapshot is not None:
            found = match_host(host, snapshot.entries)
            if found is not None:
                entry = found[0]

        intercept = False
        if entry is None:
            self.metrics.inc(PASS_NOT_WHITELISTED)
        elif not participant or not self.gate.check_gate(participant, snapshot.version):
            self.metrics.inc(PASS_NO_CONSENT)
        elif not entry.uses_tls:
            self.metrics.inc(RELAY_TLS_UNDECLARED)
        else:
            intercept = True

        if intercept:
            self._intercept(client, host, port, participant)
        else:
            self._blind_relay(client, reader, host, port)

    def _blind_relay(self, client, reader: _SockReader, host, port) -> None:
        """Opaque tunnel: nothing decrypted, nothing logged beyond a counter."""
        try:
            upstream = socket.create_connection(
                self._resolve(host, port), timeout=self.upstream_timeout
            )
        except OSError:
            self.metrics.inc(UPSTREAM_ERRORS)
            _send_simple(client, 502, "upstream unreachable")
            return
        self.metrics.inc(RELAY_TUNNELS)
        client.sendall(b"HTTP/1.1 200 Connection Established\r\n\r\n")
        pending = reader.drain_buffer()
        if pending:
            upstream.sendall(pending)
        try:
            while True:
                readable, _, _ = select.select([client, upstream], [], [], self.upstream_timeout)
                if not readable:
                    break
                closed = False
                for sock in readable:
                    try:
                        data = sock.recv(CHUNK)
                    except OSError:
                        closed = True
                        break
                    if not data:
                        closed = True
                        break
                    (upstream if sock is client else client).sendall(data)
                if closed:
                    break
        finally:
            try:
                upstream.close()
            except OSError:
                pass

    def _intercept(self, client, host, port, participant) -> None:
        # Upstream first: if the origin's certificate does not validate, the
        # client sees a gateway error and nothing is ever decrypted.
        session = _UpstreamSession(
            host,
            port,
            self._resolve(host, port),
            self.upstream_tls_context,
            self.upstream_timeout,
        )
        try:
            session.connect()
        except (ssl.SSLError, ssl.CertificateError, OSError):
            self.metrics.inc(UPSTREAM_ERRORS)
            _send_simple(client, 502, "upstream TLS validation failed")
            return

        client.sendall(b"HTTP/1.1 200 Connection Established\r\n\r\n")
        try:
            tls_client = self.authority.server_context(host).wrap_socket(client, server_side=True)
        except (ssl.SSLError, OSError):
            session.close()
            return
        self.metrics.inc(INTERCEPTED_SESSIONS)
        tls_client.settimeout(self.upstream_timeout)

        reader = _SockReader(tls_client)
        try:
            while True:
                head = _read_head(reader)
                if head is None:
                    break
                method, target, _version, req_headers = head
                path = target if target.startswith("/") else "/" + target
                url = f"https://{host}{'' if port == 443 else f':{port}'}{path}"
                plan = _RequestBodyPlan(reader, req_headers, self.max_stored_body)

                decision = decide_capture(url, participant, self.snapshot_ref(), self.gate)
                if not decision.capture:
                    self.metrics.inc(_PASS_METRIC[decision.reason])

                try:
                    response = session.request(
                        method,
                        path,
                        _forwardable(req_headers),
                        plan.spooled,
                        body_stream=plan.stream,
                    )
                except (OSError, http.client.HTTPException):
                    self.metrics.inc(UPSTREAM_ERRORS)
                    _send_simple(tls_client, 502, "upstream unreachable")
                    break

                wants_close = "close" in (_header(req_headers, "connection") or "").lower()
                response_copy, response_truncated, persisted = self._relay_response(
                    tls_client, response, keep_alive=not wants_close
                )
                session.finish_response(response)

                if decision.capture:
                    self._tap_exchange(
                        participant,
                        url,
                        method,
                        req_headers,
                        plan,
                        response,
                        response_copy,
                        response_truncated,
                        decision,
                        tls=True,
                    )
                if not persisted:
                    break
        except (ssl.SSLError, OSError, _BadRequest):
            logger.debug("intercepted session aborted", exc_info=True)
        finally:
            session.close()
            try:
                tls_client.close()
            except OSError:
                pass


def _send_simple(sock, status: int, text: str) -> None:
    reasons = {400: "Bad Request", 502: "Bad Gateway"}
    body = (text + "\n").encode()
    head = (
        f"HTTP/1.1 {status} {reasons.get(status, 'Error')}\r\n"
        f"Content-Type: text/plain\r\n"
        f"Content-Length: {len(body)}\r\n"
        f"Connection: close\r\n\r\n"
    ).encode("latin-1")
    try:
        sock.sendall(head + body)
    except OSError:
        pass
