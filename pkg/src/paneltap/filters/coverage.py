"""Coverage gate and staleness probes.

Coverage: every sensitivity an entry declares must be serviced by at least
one rule whose reach intersects the declared pages - a snapshot failing this
is refused for serving. Staleness: replay a recorded fixture with planted
sentinels; a surviving sentinel means the site drifted out from under its
rules.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..exchange import Exchange
from ..registry.model import SITE_WIDE, WhitelistEntry
from ..registry.snapshot import WhitelistSnapshot
from .engine import apply
from .model import CompiledRule, RuleSet


@dataclass(frozen=True)
class CoverageViolation:
    entry_id: str
    flag: str
    detail: str


@dataclass
class CoverageReport:
    violations: list[CoverageViolation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_document(self) -> dict:
        return {
            "ok": self.ok,
            "violations": [
                {"entry_id": v.entry_id, "flag": v.flag, "detail": v.detail}
                for v in self.violations
            ],
        }


def _paths_intersect(rule_paths, flag_paths) -> bool:
    if not rule_paths:
        return True  # site-wide rule reaches everything
    if not flag_paths or SITE_WIDE in flag_paths:
        return True
    for rule_path in rule_paths:
        if rule_path == SITE_WIDE:
            return True
        for flag_path in flag_paths:
            if rule_path.startswith(flag_path) or flag_path.startswith(rule_path):
                return True
    return False


def _services(compiled: CompiledRule, entry: WhitelistEntry, flag: str) -> bool:
    rule = compiled.rule
    if rule.flag != flag:
        return False
    if rule.scope not in ("global", entry.entry_id):
        return False
    return _paths_intersect(rule.path_scope, entry.flag_paths.get(flag, ()))


def coverage_check(snapshot: WhitelistSnapshot, rules: RuleSet) -> CoverageReport:
    """Empty report iff every declared sensitivity (and third-party exposure)
    has at least one servicing rule in reach."""
    report = CoverageReport()
    for entry in snapshot.entries:
        required = set(entry.sensitive_flags)
        for flag in sorted(required):
            if not any(_services(c, entry, flag) for c in rules.rules):
                report.violations.append(
                    CoverageViolation(
                        entry_id=entry.entry_id,
                        flag=flag,
                        detail=f"no rule services flag {flag!r} on its declared pages",
                    )
                )
        if entry.has_third_party_data:
            scoped = [
                c
                for c in rules.rules
                if c.rule.flag == "third-party" and c.rule.scope == entry.entry_id
            ]
            if not scoped:
                report.violations.append(
                    CoverageViolation(
                        entry_id=entry.entry_id,
                        flag="third-party",
                        detail="entry exposes third-party personal data but has no"
                        " entry-scoped third-party rule",
                    )
                )
    return report


@dataclass(frozen=True)
class ProbeResult:
    status: str  # "ok" | "stale" | "missing"
    surviving: tuple[str, ...] = ()
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def staleness_probe(
    entry: WhitelistEntry,
    fixture: tuple[Exchange, list[str]] | None,
    rules: RuleSet,
) -> ProbeResult:
    """Replay a recorded exchange with planted sentinels; any survivor in the
    filtered output marks the entry's rules stale."""
    if not entry.sensitive_flags and not entry.has_third_party_data:
        return ProbeResult(status="ok", detail="entry declares no sensitive data")
    if fixture is None:
        return ProbeResult(status="missing", detail=f"no fixture recorded for {entry.entry_id}")
    exchange, sentinels = fixture
    filtered, _ = apply(exchange, rules.for_entry(entry.entry_id))
    haystacks = [
        filtered.url.encode(),
        filtered.request_body,
        filtered.response_body,
    ]
    for name, value in filtered.request_headers + filtered.response_headers:
        haystacks.append(f"{name}: {value}".encode())
    survivors = tuple(
        sentinel
        for sentinel in sentinels
        if any(sentinel.encode() in haystack for haystack in haystacks)
    )
    if survivors:
        return ProbeResult(
            status="stale",
            surviving=survivors,
            detail="planted sentinels survived filtering; site layout likely changed",
        )
    return ProbeResult(status="ok")
