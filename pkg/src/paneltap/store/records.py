"""The stored capture record: filtered, pseudonymous, purpose-tagged."""

from __future__ import annotations

import base64
import uuid
from dataclasses import dataclass, field
from datetime import datetime

from ..exchange import Headers


def new_record_id() -> str:
    return uuid.uuid4().hex


@dataclass
class CaptureRecord:
    pseudonym: str
    ts: datetime
    entry_id: str
    whitelist_version: int
    url: str  # already filtered of flagged query params
    method: str
    status: int
    request_headers: Headers
    request_body: bytes
    response_headers: Headers
    response_body: bytes
    redaction_report: dict
    purpose_tag: str
    tls: bool = False
    record_id: str = field(default_factory=new_record_id)

    def to_document(self) -> dict:
        return {
            "record_id": self.record_id,
            "pseudonym": self.pseudonym,
            "ts": self.ts.isoformat(),
            "entry_id": self.entry_id,
            "whitelist_version": self.whitelist_version,
            "url": self.url,
            "method": self.method,
            "status": self.status,
            "request_headers": [[n, v] for n, v in self.request_headers],
            "request_body": base64.b64encode(self.request_body).decode(),
            "response_headers": [[n, v] for n, v in self.response_headers],
            "response_body": base64.b64encode(self.response_body).decode(),
            "redaction_report": self.redaction_report,
            "purpose_tag": self.purpose_tag,
            "tls": self.tls,
        }

    @classmethod
    def from_document(cls, doc: dict) -> "CaptureRecord":
        return cls(
            record_id=doc["record_id"],
            pseudonym=doc["pseudonym"],
            ts=datetime.fromisoformat(doc["ts"]),
            entry_id=doc["entry_id"],
            whitelist_version=doc["whitelist_version"],
            url=doc["url"],
            method=doc["method"],
            status=doc["status"],
            request_headers=[(n, v) for n, v in doc["request_headers"]],
            request_body=base64.b64decode(doc["request_body"]),
            response_headers=[(n, v) for n, v in doc["response_headers"]],
            response_body=base64.b64decode(doc["response_body"]),
            redaction_report=doc["redaction_report"],
            purpose_tag=doc["purpose_tag"],
            tls=doc.get("tls", False),
        )
