"""Domain types for the whitelist registry and their validation rules.

Validation never throws: `validate_entry` returns a report, one Violation per
broken rule, so an operator sees everything wrong with a justification file in
one pass.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from datetime import datetime

STAGES = (
    "drafted",
    "submitted",
    "approved_by_pis",
    "approved_by_partner",
    "included",
    "participants_informed",
)

SENSITIVE_FLAGS = ("credentials", "sensitive-personal", "financial", "email", "other")

# Marker usable in a flag's page list when the whole site is affected.
SITE_WIDE = "site-wide"

_HOST_LABEL_RE = re.compile(r"^(?!-)[a-z0-9-]{1,63}(?<!-)$")


def is_valid_hostname(host: str) -> bool:
    """Canonical host: lowercase DNS name, no scheme, port or path."""
    if not host or len(host) > 253 or host != host.lower():
        return False
    if host.endswith("."):
        return False
    return all(_HOST_LABEL_RE.match(label) for label in host.split("."))


@dataclass(frozen=True)
class CategoryDef:
    id: str
    name: str
    sub_categories: tuple[str, ...]
    capacity: int
    description: str


@dataclass(frozen=True)
class StageEvent:
    stage: str
    actor_role: str
    at: datetime


@dataclass(frozen=True)
class ApprovalState:
    stage: str = "drafted"
    history: tuple[StageEvent, ...] = ()
    vetoed: bool = False
    veto_reason: str = ""
    author: str = ""

    @property
    def matchable(self) -> bool:
        return self.stage == "participants_informed" and not self.vetoed


@dataclass
class WhitelistEntry:
    url: str
    category_id: str
    reason: str
    aliases: tuple[str, ...] = ()
    uses_tls: bool = False
    has_private_comms: bool = False
    private_comms_paths: tuple[str, ...] = ()
    has_third_party_data: bool = False
    sensitive_flags: frozenset[str] = frozenset()
    flag_paths: dict[str, tuple[str, ...]] = field(default_factory=dict)
    measures: str = ""
    approval: ApprovalState = field(default_factory=ApprovalState)
    whitelist_version: int | None = None  # snapshot it first appeared in

    @property
    def entry_id(self) -> str:
        return self.url

    @property
    def hosts(self) -> tuple[str, ...]:
        return (self.url, *self.aliases)

    def with_approval(self, approval: ApprovalState) -> "WhitelistEntry":
        clone = replace(self)
        clone.approval = approval
        return clone


@dataclass(frozen=True)
class Violation:
    field: str
    rule: str
    message: str


def validate_entry(
    entry: WhitelistEntry,
    categories: dict[str, CategoryDef] | None = None,
    peers: list[WhitelistEntry] | None = None,
) -> list[Violation]:
    """Check every entry invariant; empty report means the entry is sound.

    `categories` enables the category-reference check, `peers` the host
    uniqueness check; both are optional so a single file can be linted in
    isolation.
    """
    violations: list[Violation] = []

    if not entry.reason.strip():
        violations.append(Violation("reason", "reason non-empty", "a justification text is required"))

    unknown = set(entry.sensitive_flags) - set(SENSITIVE_FLAGS)
    for flag in sorted(unknown):
        violations.append(
            Violation("sensitive_flags", "known flag", f"unknown sensitive flag {flag!r}")
        )

    if entry.sensitive_flags and not entry.measures.strip():
        violations.append(
            Violation(
                "measures",
                "measures required",
                "entries declaring sensitive data must describe protective measures",
            )
        )

    for flag in sorted(entry.sensitive_flags & set(SENSITIVE_FLAGS)):
        pages = entry.flag_paths.get(flag, ())
        if not pages:
            violations.append(
                Violation(
                    "flag_paths",
                    "flag pages required",
                    f"flag {flag!r} needs at least one page path or the {SITE_WIDE!r} marker",
                )
            )
        else:
            for page in pages:
                if page != SITE_WIDE and not page.startswith("/"):
                    violations.append(
                        Violation(
                            "flag_paths",
                            "path prefix",
                            f"flag {flag!r} page {page!r} must be a /-rooted path prefix or {SITE_WIDE!r}",
                        )
                    )

    for host in entry.hosts:
        if not is_valid_hostname(host):
            violations.append(
                Violation("url", "valid hostname", f"{host!r} is not a canonical hostname")
            )

    seen: set[str] = set()
    for host in entry.hosts:
        if host in seen:
            violations.append(
                Violation("aliases", "unique hosts", f"host {host!r} listed twice on this entry")
            )
        seen.add(host)

    for path in entry.private_comms_paths:
        if not path.startswith("/"):
            violations.append(
                Violation(
                    "private_comms_paths",
                    "path prefix",
                    f"communications page {path!r} must be a /-rooted path prefix",
                )
            )
    if entry.has_private_comms and not entry.private_comms_paths:
        violations.append(
            Violation(
                "private_comms_paths",
                "comms pages required",
                "entries with bi-/plurilateral communications must list where they happen",
            )
        )

    if categories is not None and entry.category_id not in categories:
        violations.append(
            Violation("category_id", "category exists", f"unknown category {entry.category_id!r}")
        )

    if peers:
        own = set(entry.hosts)
        for peer in peers:
            if peer is entry or peer.entry_id == entry.entry_id:
                continue
            overlap = own & set(peer.hosts)
            for host in sorted(overlap):
                violations.append(
                    Violation(
                        "url",
                        "unique hosts",
                        f"host {host!r} already claimed by entry {peer.entry_id!r}",
                    )
                )

    return violations
