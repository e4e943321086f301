"""Gate-soundness audit: replay the consent ledger and verify every stored
record was captured inside a consent window covering its whitelist version."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime

from .consent import consent_covers


@dataclass(frozen=True)
class ConsentWindow:
    whitelist_version: int
    granted_at: datetime
    revoked_at: datetime | None  # None = still open


@dataclass(frozen=True)
class AuditViolation:
    record_id: str
    pseudonym: str
    detail: str


@dataclass
class AuditReport:
    checked: int = 0
    violations: list[AuditViolation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_document(self) -> dict:
        return {
            "ok": self.ok,
            "checked": self.checked,
            "violations": [
                {"record_id": v.record_id, "pseudonym": v.pseudonym, "detail": v.detail}
                for v in self.violations
            ],
        }


def consent_windows(events) -> dict[str, list[ConsentWindow]]:
    """Replay grant/revoke events into per-participant consent intervals."""
    windows: dict[str, list[ConsentWindow]] = {}
    open_window: dict[str, ConsentWindow] = {}
    for event in events:
        participant = event["participant_id"]
        at = datetime.fromisoformat(event["at"])
        if event["event"] == "grant":
            if not event.get("explicit_ack"):
                continue
            previous = open_window.pop(participant, None)
            if previous is not None:
                windows.setdefault(participant, []).append(
                    ConsentWindow(previous.whitelist_version, previous.granted_at, at)
                )
            open_window[participant] = ConsentWindow(event["whitelist_version"], at, None)
        elif event["event"] == "revoke":
            current = open_window.pop(participant, None)
            if current is not None:
                windows.setdefault(participant, []).append(
                    ConsentWindow(current.whitelist_version, current.granted_at, at)
                )
    for participant, current in open_window.items():
        windows.setdefault(participant, []).append(current)
    return windows


def audit_capture_consent(records, events, reverse_mapping, snapshots) -> AuditReport:
    """`reverse_mapping` is pseudonym -> participant_id from the mapping store;
    `snapshots` resolves versions for the coverage rule."""
    report = AuditReport()
    windows = consent_windows(events)
    for record in records:
        report.checked += 1
        participant = reverse_mapping.get(record.pseudonym)
        if participant is None:
            report.violations.append(
                AuditViolation(
                    record.record_id, record.pseudonym, "pseudonym has no mapping entry"
                )
            )
            continue
        covered = False
        for window in windows.get(participant, []):
            if record.ts < window.granted_at:
                continue
            if window.revoked_at is not None and record.ts >= window.revoked_at:
                continue
            if window.whitelist_version == record.whitelist_version:
                covered = True
                break
            consented = snapshots.get(window.whitelist_version)
            active = snapshots.get(record.whitelist_version)
            if consented is not None and active is not None:
                ok, _ = consent_covers(consented, active)
                if ok:
                    covered = True
                    break
        if not covered:
            report.violations.append(
                AuditViolation(
                    record.record_id,
                    record.pseudonym,
                    f"no consent window covers capture at {record.ts.isoformat()}"
                    f" under whitelist v{record.whitelist_version}",
                )
            )
    return report
