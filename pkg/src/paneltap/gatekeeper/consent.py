"""Consent ledger and gate.

No byte is captured without a valid, current, explicit consent record. The
ledger is append-only (grants and revocations are events, never edits) so the
whole history can be replayed for audit. Gate checks are linearizable per
participant: once a revoke lands, every subsequent check sees it.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

from ..errors import ValidationError
from ..exchange import utc_now
from ..registry.snapshot import WhitelistSnapshot


def notice_hash_of(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ConsentRecord:
    participant_id: str
    whitelist_version: int
    granted_at: datetime
    notice_hash: str
    explicit_ack: bool
    revoked_at: datetime | None = None

    @property
    def active(self) -> bool:
        return self.explicit_ack and self.revoked_at is None


@dataclass(frozen=True)
class GateDecision:
    eligible: bool
    reason: str = ""

    def __bool__(self) -> bool:
        return self.eligible


def snapshot_scope(snapshot: WhitelistSnapshot) -> tuple[frozenset[str], frozenset[str]]:
    """(categories that actually hold entries, union of sensitive flags)."""
    categories = frozenset(entry.category_id for entry in snapshot.entries)
    flags = frozenset(flag for entry in snapshot.entries for flag in entry.sensitive_flags)
    return categories, flags


def consent_covers(consented: WhitelistSnapshot, active: WhitelistSnapshot) -> tuple[bool, str]:
    """Consent carries over iff the active snapshot added no category and no
    sensitive flag relative to the consented one; new entries inside
    already-consented categories do not require renewal."""
    if consented.version == active.version:
        return True, ""
    consented_cats, consented_flags = snapshot_scope(consented)
    active_cats, active_flags = snapshot_scope(active)
    new_cats = active_cats - consented_cats
    if new_cats:
        return False, f"re-consent required: new categories {sorted(new_cats)}"
    new_flags = active_flags - consented_flags
    if new_flags:
        return False, f"re-consent required: new sensitive flags {sorted(new_flags)}"
    return True, ""


class Gatekeeper:
    """Consent decisions for capture. `snapshots` is any object providing
    get(version) and latest_version() - normally the registry SnapshotStore."""

    def __init__(self, ledger_file: str | Path, snapshots, notice_text: str | None = None):
        self.ledger_file = Path(ledger_file)
        self.ledger_file.parent.mkdir(parents=True, exist_ok=True)
        self.snapshots = snapshots
        self.notice_text = notice_text
        self._lock = threading.RLock()
        self._state: dict[str, ConsentRecord] = {}
        self._replay()

    @property
    def notice_hash(self) -> str | None:
        return notice_hash_of(self.notice_text) if self.notice_text is not None else None

    def _replay(self) -> None:
        if not self.ledger_file.exists():
            return
        for line in self.ledger_file.read_text().splitlines():
            if not line.strip():
                continue
            event = json.loads(line)
            if event["event"] == "grant":
                self._state[event["participant_id"]] = ConsentRecord(
                    participant_id=event["participant_id"],
                    whitelist_version=event["whitelist_version"],
                    granted_at=datetime.fromisoformat(event["at"]),
                    notice_hash=event["notice_hash"],
                    explicit_ack=event["explicit_ack"],
                )
            elif event["event"] == "revoke":
                current = self._state.get(event["participant_id"])
                if current is not None and current.revoked_at is None:
                    self._state[event["participant_id"]] = ConsentRecord(
                        participant_id=current.participant_id,
                        whitelist_version=current.whitelist_version,
                        granted_at=current.granted_at,
                        notice_hash=current.notice_hash,
                        explicit_ack=current.explicit_ack,
                        revoked_at=datetime.fromisoformat(event["at"]),
                    )

    def _append(self, event: dict) -> None:
        with open(self.ledger_file, "a") as handle:
            handle.write(json.dumps(event, sort_keys=True) + "\n")
            handle.flush()
            os.fsync(handle.fileno())

    def grant_consent(
        self,
        participant_id: str,
        whitelist_version: int,
        notice_hash: str,
        explicit_ack: bool,
    ) -> ConsentRecord:
        if not explicit_ack:
            raise ValidationError(
                "explicit affirmative action required: tacit or pre-checked consent is not consent"
            )
        if not participant_id.strip():
            raise ValidationError("participant_id required")
        if not notice_hash.strip():
            raise ValidationError("notice_hash required: consent must bind to the notice shown")
        with self._lock:
            if self.snapshots.get(whitelist_version) is None:
                raise ValidationError(f"whitelist version {whitelist_version} was never published")
            expected = self.notice_hash
            if expected is not None and notice_hash != expected:
                raise ValidationError(
                    "notice hash mismatch: the consent form shown is not the current notice"
                )
            record = ConsentRecord(
                participant_id=participant_id,
                whitelist_version=whitelist_version,
                granted_at=utc_now(),
                notice_hash=notice_hash,
                explicit_ack=True,
            )
            self._append(
                {
                    "event": "grant",
                    "participant_id": participant_id,
                    "whitelist_version": whitelist_version,
                    "at": record.granted_at.isoformat(),
                    "notice_hash": notice_hash,
                    "explicit_ack": True,
                }
            )
            self._state[participant_id] = record
            return record

    def revoke_consent(self, participant_id: str) -> ConsentRecord | None:
        """Idempotent; returns the revoked record, or None when there was no
        active consent (a no-op, with notice left to the caller)."""
        with self._lock:
            current = self._state.get(participant_id)
            if current is None or current.revoked_at is not None:
                return None
            revoked = ConsentRecord(
                participant_id=current.participant_id,
                whitelist_version=current.whitelist_version,
                granted_at=current.granted_at,
                notice_hash=current.notice_hash,
                explicit_ack=current.explicit_ack,
                revoked_at=utc_now(),
            )
            self._append(
                {
                    "event": "revoke",
                    "participant_id": participant_id,
                    "at": revoked.revoked_at.isoformat(),
                }
            )
            self._state[participant_id] = revoked
            return revoked

    def consent_state(self, participant_id: str) -> ConsentRecord | None:
        with self._lock:
            return self._state.get(participant_id)

    def check_gate(self, participant_id: str, active_whitelist_version: int) -> GateDecision:
        with self._lock:
            record = self._state.get(participant_id)
        if record is None:
            return GateDecision(False, "no consent")
        if record.revoked_at is not None:
            return GateDecision(False, "consent revoked")
        if not record.explicit_ack:
            return GateDecision(False, "consent not explicit")
        if record.whitelist_version == active_whitelist_version:
            return GateDecision(True)
        consented = self.snapshots.get(record.whitelist_version)
        active = self.snapshots.get(active_whitelist_version)
        if consented is None or active is None:
            return GateDecision(False, "unknown snapshot version")
        covered, why = consent_covers(consented, active)
        if not covered:
            return GateDecision(False, why)
        return GateDecision(True)

    def ledger_events(self) -> list[dict]:
        if not self.ledger_file.exists():
            return []
        return [
            json.loads(line)
            for line in self.ledger_file.read_text().splitlines()
            if line.strip()
        ]
