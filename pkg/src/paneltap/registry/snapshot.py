"""Snapshot publication: immutable, versioned, content-hashed whitelist states.

Consent binds to a snapshot version, so published snapshots are never edited;
a correction is a new version. The on-disk store keeps one JSON document per
version plus a `latest` pointer, and serializes writers with an OS file lock.
"""

from __future__ import annotations

import fcntl
import hashlib
import json
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

from ..errors import StorageError, ValidationError
from ..exchange import utc_now
from .model import ApprovalState, CategoryDef, StageEvent, WhitelistEntry, validate_entry


@dataclass(frozen=True)
class WhitelistSnapshot:
    version: int
    entries: tuple[WhitelistEntry, ...]
    categories: tuple[CategoryDef, ...]
    published_at: datetime
    content_hash: str

    def category(self, category_id: str) -> CategoryDef | None:
        for cat in self.categories:
            if cat.id == category_id:
                return cat
        return None

    def entry(self, entry_id: str) -> WhitelistEntry | None:
        for entry in self.entries:
            if entry.entry_id == entry_id:
                return entry
        return None


def _entry_doc(entry: WhitelistEntry) -> dict:
    return {
        "url": entry.url,
        "aliases": list(entry.aliases),
        "category_id": entry.category_id,
        "reason": entry.reason,
        "uses_tls": entry.uses_tls,
        "has_private_comms": entry.has_private_comms,
        "private_comms_paths": list(entry.private_comms_paths),
        "has_third_party_data": entry.has_third_party_data,
        "sensitive_flags": sorted(entry.sensitive_flags),
        "flag_paths": {flag: list(paths) for flag, paths in sorted(entry.flag_paths.items())},
        "measures": entry.measures,
        "whitelist_version": entry.whitelist_version,
        "approval": {
            "stage": entry.approval.stage,
            "vetoed": entry.approval.vetoed,
            "veto_reason": entry.approval.veto_reason,
            "author": entry.approval.author,
            "history": [
                {"stage": ev.stage, "actor_role": ev.actor_role, "at": ev.at.isoformat()}
                for ev in entry.approval.history
            ],
        },
    }


def _entry_from_doc(doc: dict) -> WhitelistEntry:
    approval_doc = doc.get("approval", {})
    approval = ApprovalState(
        stage=approval_doc.get("stage", "drafted"),
        vetoed=approval_doc.get("vetoed", False),
        veto_reason=approval_doc.get("veto_reason", ""),
        author=approval_doc.get("author", ""),
        history=tuple(
            StageEvent(ev["stage"], ev["actor_role"], datetime.fromisoformat(ev["at"]))
            for ev in approval_doc.get("history", [])
        ),
    )
    return WhitelistEntry(
        url=doc["url"],
        aliases=tuple(doc.get("aliases", [])),
        category_id=doc["category_id"],
        reason=doc.get("reason", ""),
        uses_tls=doc.get("uses_tls", False),
        has_private_comms=doc.get("has_private_comms", False),
        private_comms_paths=tuple(doc.get("private_comms_paths", [])),
        has_third_party_data=doc.get("has_third_party_data", False),
        sensitive_flags=frozenset(doc.get("sensitive_flags", [])),
        flag_paths={flag: tuple(paths) for flag, paths in doc.get("flag_paths", {}).items()},
        measures=doc.get("measures", ""),
        approval=approval,
        whitelist_version=doc.get("whitelist_version"),
    )


def snapshot_to_document(snapshot: WhitelistSnapshot) -> dict:
    return {
        "version": snapshot.version,
        "published_at": snapshot.published_at.isoformat(),
        "content_hash": snapshot.content_hash,
        "categories": [
            {
                "id": cat.id,
                "name": cat.name,
                "sub_categories": list(cat.sub_categories),
                "capacity": cat.capacity,
                "description": cat.description,
            }
            for cat in snapshot.categories
        ],
        "entries": [_entry_doc(entry) for entry in snapshot.entries],
    }


def snapshot_from_document(doc: dict) -> WhitelistSnapshot:
    return WhitelistSnapshot(
        version=doc["version"],
        published_at=datetime.fromisoformat(doc["published_at"]),
        content_hash=doc["content_hash"],
        categories=tuple(
            CategoryDef(
                id=c["id"],
                name=c["name"],
                sub_categories=tuple(c.get("sub_categories", [])),
                capacity=c["capacity"],
                description=c.get("description", ""),
            )
            for c in doc["categories"]
        ),
        entries=tuple(_entry_from_doc(e) for e in doc["entries"]),
    )


def compute_content_hash(version: int, entries, categories, published_at: datetime) -> str:
    material = {
        "version": version,
        "published_at": published_at.isoformat(),
        "categories": [
            {
                "id": c.id,
                "name": c.name,
                "sub_categories": list(c.sub_categories),
                "capacity": c.capacity,
                "description": c.description,
            }
            for c in categories
        ],
        "entries": [_entry_doc(e) for e in sorted(entries, key=lambda e: e.url)],
    }
    blob = json.dumps(material, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def publish_snapshot(
    entries: list[WhitelistEntry],
    categories: list[CategoryDef],
    previous_version: int = 0,
    published_at: datetime | None = None,
) -> WhitelistSnapshot:
    """Build version previous+1 from fully approved entries.

    Refuses unapproved or invalid entries and any category over capacity.
    The caller decides which entries go in; this only enforces the gate.
    """
    published_at = published_at or utc_now()
    by_id = {cat.id: cat for cat in categories}
    problems: list[str] = []

    for entry in entries:
        report = validate_entry(entry, categories=by_id, peers=entries)
        for violation in report:
            problems.append(f"{entry.entry_id}: {violation.rule}: {violation.message}")
        if not entry.approval.matchable:
            state = "vetoed" if entry.approval.vetoed else f"stage={entry.approval.stage}"
            problems.append(f"{entry.entry_id}: unapproved entry included ({state})")

    counts: dict[str, int] = {}
    for entry in entries:
        counts[entry.category_id] = counts.get(entry.category_id, 0) + 1
    for category_id, count in sorted(counts.items()):
        cat = by_id.get(category_id)
        if cat is not None and count > cat.capacity:
            problems.append(
                f"category {category_id!r}: capacity exceeded ({count} entries, capacity {cat.capacity})"
            )

    if problems:
        raise ValidationError("snapshot refused:\n" + "\n".join(problems))

    version = previous_version + 1
    stamped = []
    for entry in entries:
        if entry.whitelist_version is None:
            clone = entry.with_approval(entry.approval)
            clone.whitelist_version = version
            stamped.append(clone)
        else:
            stamped.append(entry)

    ordered = tuple(sorted(stamped, key=lambda e: e.url))
    cats = tuple(sorted(categories, key=lambda c: c.id))
    content_hash = compute_content_hash(version, ordered, cats, published_at)
    return WhitelistSnapshot(
        version=version,
        entries=ordered,
        categories=cats,
        published_at=published_at,
        content_hash=content_hash,
    )


def participant_summary(snapshot: WhitelistSnapshot) -> dict:
    """Category-level view shown to participants: names, rationale, counts.

    Deterministic (ordered by category id), and deliberately free of
    per-entry sensitivity details.
    """
    counts: dict[str, int] = {}
    for entry in snapshot.entries:
        counts[entry.category_id] = counts.get(entry.category_id, 0) + 1
    rows = []
    for cat in sorted(snapshot.categories, key=lambda c: c.id):
        if counts.get(cat.id, 0) == 0:
            continue
        rows.append(
            {
                "category_id": cat.id,
                "name": cat.name,
                "description": cat.description,
                "entries": counts[cat.id],
            }
        )
    return {"version": snapshot.version, "categories": rows}


@contextmanager
def _dir_lock(directory: Path):
    lock_path = directory / ".lock"
    with open(lock_path, "w") as handle:
        fcntl.flock(handle, fcntl.LOCK_EX)
        try:
            yield
        finally:
            fcntl.flock(handle, fcntl.LOCK_UN)


class SnapshotStore:
    """One JSON document per published version; published files never change."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, version: int) -> Path:
        return self.directory / f"v{version}.json"

    def latest_version(self) -> int:
        versions = self.versions()
        return versions[-1] if versions else 0

    def versions(self) -> list[int]:
        found = []
        for path in self.directory.glob("v*.json"):
            try:
                found.append(int(path.stem[1:]))
            except ValueError:
                continue
        return sorted(found)

    def get(self, version: int) -> WhitelistSnapshot | None:
        path = self._path(version)
        if not path.exists():
            return None
        return snapshot_from_document(json.loads(path.read_text()))

    def active(self) -> WhitelistSnapshot | None:
        latest = self.latest_version()
        return self.get(latest) if latest else None

    def publish(
        self,
        entries: list[WhitelistEntry],
        categories: list[CategoryDef],
        published_at: datetime | None = None,
    ) -> WhitelistSnapshot:
        with _dir_lock(self.directory):
            snapshot = publish_snapshot(
                entries, categories, previous_version=self.latest_version(), published_at=published_at
            )
            path = self._path(snapshot.version)
            if path.exists():
                raise StorageError(f"snapshot v{snapshot.version} already exists")
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(snapshot_to_document(snapshot), indent=2, sort_keys=True))
            tmp.rename(path)
            return snapshot
