"""One observed request/response pair.

The proxy forwards bodies in chunks and never buffers a full stream to keep
the client path independent of capture; an Exchange is assembled after the
fact from the teed copy (already capped at the configured stored-body limit),
so the bytes held here are the capture candidate, not the forwarding buffer.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from datetime import datetime, timezone

Headers = list[tuple[str, str]]

TRUNCATION_MARKER = b"[TRUNCATED]"


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


@dataclass
class Exchange:
    participant_id: str
    url: str
    method: str = "GET"
    ts: datetime = field(default_factory=utc_now)
    request_headers: Headers = field(default_factory=list)
    request_body: bytes = b""
    status: int = 0
    response_headers: Headers = field(default_factory=list)
    response_body: bytes = b""
    tls: bool = False
    request_truncated: bool = False
    response_truncated: bool = False

    def copy(self) -> "Exchange":
        return copy.deepcopy(self)

    def header(self, name: str, direction: str = "request") -> str | None:
        pairs = self.request_headers if direction == "request" else self.response_headers
        for key, value in pairs:
            if key.lower() == name.lower():
                return value
        return None
