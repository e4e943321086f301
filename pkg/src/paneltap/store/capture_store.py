"""Encrypted, append-only capture store.

There is no update or overwrite operation anywhere on this class; the only
removal path is purge, which rewrites segments without the purged frames and
leaves content-free tombstones behind for audit. Raw-record reads are gated
by role and logged before any data is returned.
"""

from __future__ import annotations

import fcntl
import hashlib
import json
import os
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

from ..errors import AuthorizationError, StorageError, ValidationError
from ..exchange import utc_now
from . import frames
from .records import CaptureRecord
from .retention import RetentionPolicy, purge_due

RAW_ACCESS_ROLES = frozenset({"working_group", "steering_committee"})

SEGMENT_ROLL_BYTES = 8 * 1024 * 1024


@dataclass
class PurgeReport:
    swept_at: str
    policy_version: str
    record_ids: list[str] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.record_ids)

    def to_document(self) -> dict:
        return {
            "swept_at": self.swept_at,
            "policy_version": self.policy_version,
            "count": self.count,
            "record_ids": self.record_ids,
        }


class CaptureStore:
    def __init__(self, directory: str | Path, key_file: str | Path | None, purpose: str):
        if key_file is None:
            raise StorageError("capture store is locked: no storage key file configured")
        self.directory = Path(directory)
        self.segments_dir = self.directory / "segments"
        self.segments_dir.mkdir(parents=True, exist_ok=True)
        self.tombstones_file = self.directory / "tombstones.jsonl"
        self.access_log_file = self.directory / "access.log"
        self.purpose = purpose
        self.key = frames.load_key(key_file, what="storage key")
        self._lock = threading.Lock()
        self._index: dict[str, tuple[str, int]] = {}
        self._tombstoned: set[str] = set()
        self._load()

    # -- bookkeeping ---------------------------------------------------

    def _load(self) -> None:
        self._index.clear()
        self._tombstoned.clear()
        if self.tombstones_file.exists():
            for line in self.tombstones_file.read_text().splitlines():
                if line.strip():
                    self._tombstoned.add(json.loads(line)["record_id"])
        for segment in self._segment_paths():
            for offset, plaintext in frames.iter_frames(segment, self.key):
                doc = json.loads(plaintext)
                self._index[doc["record_id"]] = (segment.name, offset)

    def _segment_paths(self) -> list[Path]:
        return sorted(self.segments_dir.glob("seg-*.seg"))

    def _current_segment(self) -> Path:
        paths = self._segment_paths()
        if paths and paths[-1].stat().st_size < SEGMENT_ROLL_BYTES:
            return paths[-1]
        number = 1
        if paths:
            number = int(paths[-1].stem.split("-")[1]) + 1
        path = self.segments_dir / f"seg-{number:06d}.seg"
        frames.new_segment(path)
        return path

    @contextmanager
    def _os_lock(self):
        lock_path = self.directory / ".lock"
        with open(lock_path, "w") as handle:
            fcntl.flock(handle, fcntl.LOCK_EX)
            try:
                yield
            finally:
                fcntl.flock(handle, fcntl.LOCK_UN)

    # -- writes ---------------------------------------------------------

    def append(self, record: CaptureRecord) -> str:
        if not record.redaction_report:
            raise ValidationError(
                "record rejected: no redaction report - captures must pass the filters first"
            )
        if record.purpose_tag != self.purpose:
            raise ValidationError(
                f"record rejected: purpose tag {record.purpose_tag!r} does not match"
                f" the configured purpose {self.purpose!r}"
            )
        if not record.pseudonym:
            raise ValidationError("record rejected: missing pseudonym")
        with self._lock, self._os_lock():
            if record.record_id in self._index or record.record_id in self._tombstoned:
                raise StorageError(f"duplicate record_id {record.record_id}")
            segment = self._current_segment()
            payload = json.dumps(record.to_document(), sort_keys=True).encode()
            offset = frames.append_frame(segment, self.key, payload)
            self._index[record.record_id] = (segment.name, offset)
        return record.record_id

    def _append_tombstone(self, record_id: str, policy_version: str) -> None:
        line = json.dumps(
            {
                "record_id": record_id,
                "purged_at": utc_now().isoformat(),
                "policy_version": policy_version,
            },
            sort_keys=True,
        )
        with open(self.tombstones_file, "a") as handle:
            handle.write(line + "\n")
            handle.flush()
            os.fsync(handle.fileno())

    def purge(self, record_ids, policy_version: str = "manual") -> PurgeReport:
        """Rewrite segments without the named records; tombstones carry no content."""
        report = PurgeReport(swept_at=utc_now().isoformat(), policy_version=policy_version)
        doomed = {rid for rid in record_ids if rid in self._index}
        if not doomed:
            return report
        with self._lock, self._os_lock():
            affected = {self._index[rid][0] for rid in doomed}
            for name in sorted(affected):
                segment = self.segments_dir / name
                kept: list[bytes] = []
                for _, plaintext in frames.iter_frames(segment, self.key):
                    doc = json.loads(plaintext)
                    if doc["record_id"] not in doomed:
                        kept.append(plaintext)
                tmp = segment.with_suffix(".tmp")
                if tmp.exists():
                    tmp.unlink()
                frames.new_segment(tmp)
                for plaintext in kept:
                    frames.append_frame(tmp, self.key, plaintext)
                os.replace(tmp, segment)
            for rid in sorted(doomed):
                del self._index[rid]
                self._tombstoned.add(rid)
                self._append_tombstone(rid, policy_version)
                report.record_ids.append(rid)
            self._load()
        return report

    def sweep_retention(self, policy: RetentionPolicy, now: date) -> PurgeReport:
        policy.validate()
        due = [
            record.record_id
            for record in self.records()
            if purge_due(policy, record.ts.date(), now)
        ]
        return self.purge(due, policy_version=policy.policy_version)

    def purge_for_pseudonym(self, pseudonym: str) -> PurgeReport:
        """Explicit erasure request: remove every record of one pseudonym."""
        doomed = [r.record_id for r in self.records() if r.pseudonym == pseudonym]
        return self.purge(doomed, policy_version="erasure-request")

    # -- reads ----------------------------------------------------------

    def records(self):
        """Internal full scan (audits, reports, aggregation)."""
        for segment in self._segment_paths():
            for _, plaintext in frames.iter_frames(segment, self.key):
                doc = json.loads(plaintext)
                if doc["record_id"] in self._tombstoned:
                    continue
                yield CaptureRecord.from_document(doc)

    def get(self, record_id: str) -> CaptureRecord | None:
        location = self._index.get(record_id)
        if location is None:
            return None
        for record in self.records():
            if record.record_id == record_id:
                return record
        return None

    def _log_access(self, role: str, pseudonym: str, action: str, granted: bool) -> None:
        line = json.dumps(
            {
                "ts": utc_now().isoformat(),
                "role": role,
                "pseudonym": pseudonym,
                "action": action,
                "granted": granted,
            },
            sort_keys=True,
        )
        with open(self.access_log_file, "a") as handle:
            handle.write(line + "\n")
            handle.flush()
            os.fsync(handle.fileno())

    def assert_raw_access(self, role: str, action: str) -> None:
        """Authorization gate for whole-store reads (audits, reports); the
        attempt is logged either way."""
        granted = role in RAW_ACCESS_ROLES
        self._log_access(role=role, pseudonym="*", action=action, granted=granted)
        if not granted:
            raise AuthorizationError(
                f"role {role!r} may not run {action}"
                f" (allowed: {', '.join(sorted(RAW_ACCESS_ROLES))})"
            )

    def query_records(self, pseudonym: str, role: str) -> list[CaptureRecord]:
        """Raw-record access for one pseudonym; logged before returning data."""
        granted = role in RAW_ACCESS_ROLES
        self._log_access(role=role, pseudonym=pseudonym, action="query_records", granted=granted)
        if not granted:
            raise AuthorizationError(
                f"role {role!r} may not read raw records"
                f" (allowed: {', '.join(sorted(RAW_ACCESS_ROLES))})"
            )
        return [record for record in self.records() if record.pseudonym == pseudonym]

    def record_ids(self) -> set[str]:
        return set(self._index)

    def tombstone_count(self) -> int:
        return len(self._tombstoned)

    def raw_files(self) -> list[Path]:
        """Every file the store writes - the surface for at-rest scans."""
        files = list(self._segment_paths())
        for path in (self.tombstones_file, self.access_log_file):
            if path.exists():
                files.append(path)
        return files

    def content_state_hash(self) -> str:
        digest = hashlib.sha256()
        for path in sorted(self.raw_files()):
            digest.update(path.name.encode())
            digest.update(path.read_bytes())
        return digest.hexdigest()
