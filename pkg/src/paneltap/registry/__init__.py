"""Whitelist registry: category taxonomy, justified entries, approval workflow,
snapshot publication and URL matching."""

from .model import (
    SENSITIVE_FLAGS,
    SITE_WIDE,
    STAGES,
    ApprovalState,
    CategoryDef,
    StageEvent,
    Violation,
    WhitelistEntry,
    validate_entry,
)
from .workflow import ROLE_GRANTS, VETO_ROLES, advance_stage, veto
from .match import MatchResult, match, split_url
from .snapshot import (
    SnapshotStore,
    WhitelistSnapshot,
    participant_summary,
    publish_snapshot,
)
from .files import (
    default_taxonomy,
    load_entry_file,
    load_entries_dir,
    load_taxonomy_file,
    dump_entry,
)

__all__ = [
    "SENSITIVE_FLAGS",
    "SITE_WIDE",
    "STAGES",
    "ApprovalState",
    "CategoryDef",
    "StageEvent",
    "Violation",
    "WhitelistEntry",
    "validate_entry",
    "ROLE_GRANTS",
    "VETO_ROLES",
    "advance_stage",
    "veto",
    "MatchResult",
    "match",
    "split_url",
    "SnapshotStore",
    "WhitelistSnapshot",
    "participant_summary",
    "publish_snapshot",
    "default_taxonomy",
    "load_entry_file",
    "load_entries_dir",
    "load_taxonomy_file",
    "dump_entry",
]
