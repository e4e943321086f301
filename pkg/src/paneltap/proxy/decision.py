"""The capture decision: whitelist match, consent gate, comms exclusion -
in that order, total over every syntactically valid URL."""

from __future__ import annotations

from dataclasses import dataclass

from ..registry.match import match, path_under
from ..registry.snapshot import WhitelistSnapshot

NOT_WHITELISTED = "not_whitelisted"
NO_CONSENT = "no_consent"
COMMS_EXCLUDED = "comms_excluded"


@dataclass(frozen=True)
class CaptureDecision:
    outcome: str  # "capture" | "pass_through"
    reason: str = ""  # pass_through only
    entry_id: str = ""
    category_id: str = ""
    whitelist_version: int = 0

    @property
    def capture(self) -> bool:
        return self.outcome == "capture"


def decide_capture(
    url: str,
    participant_id: str | None,
    snapshot: WhitelistSnapshot | None,
    gate,
) -> CaptureDecision:
    """`gate` is the Gatekeeper (or anything with check_gate). URL must be
    syntactically valid; the decision itself never raises."""
    if snapshot is None:
        return CaptureDecision(outcome="pass_through", reason=NOT_WHITELISTED)
    found = match(url, snapshot)
    if found is None:
        return CaptureDecision(outcome="pass_through", reason=NOT_WHITELISTED)
    if not participant_id or not gate.check_gate(participant_id, snapshot.version):
        return CaptureDecision(outcome="pass_through", reason=NO_CONSENT)
    if path_under(found.path, found.entry.private_comms_paths):
        return CaptureDecision(outcome="pass_through", reason=COMMS_EXCLUDED)
    return CaptureDecision(
        outcome="capture",
        entry_id=found.entry.entry_id,
        category_id=found.entry.category_id,
        whitelist_version=snapshot.version,
    )
