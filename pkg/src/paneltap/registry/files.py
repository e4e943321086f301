"""Whitelist file formats: one YAML justification document per entry, plus the
taxonomy file. Field names follow docs/whitelist_entry_schema.md.
"""

from __future__ import annotations

import importlib.resources
from datetime import datetime
from pathlib import Path

import yaml

from ..errors import ValidationError
from .model import ApprovalState, CategoryDef, StageEvent, WhitelistEntry

# File keys for the five sensitive-data blocks -> internal flag names.
PERSONAL_DATA_KEYS = {
    "username_password": "credentials",
    "sensitive_personal_data": "sensitive-personal",
    "financial_information": "financial",
    "email_addresses": "email",
    "other": "other",
}
FLAG_TO_KEY = {flag: key for key, flag in PERSONAL_DATA_KEYS.items()}


def _present_block(raw) -> tuple[bool, tuple[str, ...]]:
    if raw is None:
        return False, ()
    if isinstance(raw, bool):
        return raw, ()
    if not isinstance(raw, dict):
        raise ValidationError(f"expected a mapping with present/pages, got {raw!r}")
    return bool(raw.get("present", False)), tuple(raw.get("pages", []) or [])


def entry_from_mapping(doc: dict, source: str = "<mapping>") -> WhitelistEntry:
    if not isinstance(doc, dict):
        raise ValidationError(f"{source}: entry document must be a mapping")
    for required in ("url", "generic_category"):
        if required not in doc:
            raise ValidationError(f"{source}: missing required field {required!r}")

    comms_present, comms_pages = _present_block(doc.get("bi_plurilateral_communications"))

    flags: set[str] = set()
    flag_paths: dict[str, tuple[str, ...]] = {}
    personal = doc.get("personal_data", {}) or {}
    unknown = set(personal) - set(PERSONAL_DATA_KEYS)
    if unknown:
        raise ValidationError(f"{source}: unknown personal_data keys {sorted(unknown)}")
    for key, flag in PERSONAL_DATA_KEYS.items():
        present, pages = _present_block(personal.get(key))
        if present:
            flags.add(flag)
            flag_paths[flag] = pages

    approval_doc = doc.get("approval", {}) or {}
    history = tuple(
        StageEvent(
            stage=ev["stage"],
            actor_role=ev["role"],
            at=datetime.fromisoformat(str(ev["at"])),
        )
        for ev in approval_doc.get("history", []) or []
    )
    approval = ApprovalState(
        stage=approval_doc.get("stage", "drafted"),
        history=history,
        vetoed=bool(approval_doc.get("vetoed", False)),
        veto_reason=approval_doc.get("veto_reason", "") or "",
        author=approval_doc.get("author", "") or "",
    )

    return WhitelistEntry(
        url=str(doc["url"]).strip().lower(),
        aliases=tuple(str(a).strip().lower() for a in doc.get("aliases", []) or []),
        category_id=str(doc["generic_category"]),
        reason=str(doc.get("reason_for_inclusion", "") or ""),
        uses_tls=bool(doc.get("ssl", False)),
        has_private_comms=comms_present,
        private_comms_paths=comms_pages,
        has_third_party_data=bool(doc.get("third_party_data", False)),
        sensitive_flags=frozenset(flags),
        flag_paths=flag_paths,
        measures=str(doc.get("measures", "") or ""),
        approval=approval,
        whitelist_version=doc.get("whitelist_version"),
    )


def entry_to_mapping(entry: WhitelistEntry) -> dict:
    personal = {}
    for key, flag in PERSONAL_DATA_KEYS.items():
        present = flag in entry.sensitive_flags
        personal[key] = {
            "present": present,
            "pages": list(entry.flag_paths.get(flag, ())) if present else [],
        }
    return {
        "url": entry.url,
        "aliases": list(entry.aliases),
        "generic_category": entry.category_id,
        "reason_for_inclusion": entry.reason,
        "ssl": entry.uses_tls,
        "bi_plurilateral_communications": {
            "present": entry.has_private_comms,
            "pages": list(entry.private_comms_paths),
        },
        "third_party_data": entry.has_third_party_data,
        "personal_data": personal,
        "measures": entry.measures,
        "whitelist_version": entry.whitelist_version,
        "approval": {
            "author": entry.approval.author,
            "stage": entry.approval.stage,
            "vetoed": entry.approval.vetoed,
            "veto_reason": entry.approval.veto_reason,
            "history": [
                {"stage": ev.stage, "role": ev.actor_role, "at": ev.at.isoformat()}
                for ev in entry.approval.history
            ],
        },
    }


def load_entry_file(path: str | Path) -> WhitelistEntry:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ValidationError(f"{path}: not valid YAML: {exc}") from None
    return entry_from_mapping(doc, source=str(path))


def load_entries_dir(directory: str | Path) -> list[WhitelistEntry]:
    directory = Path(directory)
    entries = []
    for path in sorted(directory.glob("*.yaml")):
        entries.append(load_entry_file(path))
    return entries


def dump_entry(entry: WhitelistEntry, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(entry_to_mapping(entry), sort_keys=False))


def _taxonomy_from_doc(doc: dict, source: str) -> list[CategoryDef]:
    if not isinstance(doc, dict) or "categories" not in doc:
        raise ValidationError(f"{source}: taxonomy file needs a top-level 'categories' list")
    categories = []
    seen: set[str] = set()
    for raw in doc["categories"]:
        cat = CategoryDef(
            id=str(raw["id"]),
            name=str(raw["name"]),
            sub_categories=tuple(raw.get("sub_categories", []) or []),
            capacity=int(raw["capacity"]),
            description=str(raw.get("description", "") or "").strip(),
        )
        if cat.capacity < 1:
            raise ValidationError(f"{source}: category {cat.id!r} capacity must be positive")
        if cat.id in seen:
            raise ValidationError(f"{source}: duplicate category id {cat.id!r}")
        seen.add(cat.id)
        categories.append(cat)
    return categories


def load_taxonomy_file(path: str | Path) -> list[CategoryDef]:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ValidationError(f"{path}: not valid YAML: {exc}") from None
    return _taxonomy_from_doc(doc, source=str(path))


def default_taxonomy() -> list[CategoryDef]:
    """The taxonomy shipped with the package."""
    text = importlib.resources.files("paneltap.data").joinpath("default_taxonomy.yaml").read_text()
    return _taxonomy_from_doc(yaml.safe_load(text), source="default_taxonomy.yaml")
