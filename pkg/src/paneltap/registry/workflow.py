"""Approval state machine: staged human review with a terminal veto.

Stages advance strictly one step at a time and each step is reserved for a
role; a veto is allowed from any live stage and is final.
"""

from __future__ import annotations

from datetime import datetime

from ..errors import AuthorizationError, ValidationError
from .model import STAGES, ApprovalState, StageEvent

# Which roles may move an entry INTO each stage.
ROLE_GRANTS: dict[str, frozenset[str]] = {
    "submitted": frozenset({"researcher"}),
    "approved_by_pis": frozenset({"pi"}),
    "approved_by_partner": frozenset({"partner"}),
    "included": frozenset({"working_group"}),
    "participants_informed": frozenset({"partner", "working_group"}),
}

VETO_ROLES = frozenset({"partner", "steering_committee"})


def _now(at: datetime | None) -> datetime:
    from ..exchange import utc_now

    return at if at is not None else utc_now()


def advance_stage(
    state: ApprovalState, target_stage: str, actor_role: str, at: datetime | None = None
) -> ApprovalState:
    """Advance by exactly one stage; raises on skips, vetoed entries and
    unauthorized roles."""
    if state.vetoed:
        raise ValidationError(f"entry is vetoed ({state.veto_reason}); no further transitions")
    if target_stage not in STAGES:
        raise ValidationError(f"unknown stage {target_stage!r}")
    current = STAGES.index(state.stage)
    target = STAGES.index(target_stage)
    if target != current + 1:
        raise ValidationError(
            f"stage-skip: {state.stage} -> {target_stage} is not a single forward step"
        )
    allowed = ROLE_GRANTS.get(target_stage, frozenset())
    if actor_role not in allowed:
        raise AuthorizationError(
            f"role {actor_role!r} may not move an entry to {target_stage!r}"
            f" (allowed: {', '.join(sorted(allowed))})"
        )
    event = StageEvent(stage=target_stage, actor_role=actor_role, at=_now(at))
    return ApprovalState(
        stage=target_stage,
        history=state.history + (event,),
        vetoed=False,
        veto_reason="",
        author=state.author,
    )


def veto(
    state: ApprovalState, actor_role: str, reason: str, at: datetime | None = None
) -> ApprovalState:
    """Terminal veto from any stage; a reason is mandatory."""
    if state.vetoed:
        raise ValidationError("entry is already vetoed")
    if actor_role not in VETO_ROLES:
        raise AuthorizationError(
            f"role {actor_role!r} has no veto power (allowed: {', '.join(sorted(VETO_ROLES))})"
        )
    if not reason.strip():
        raise ValidationError("a veto requires a reason")
    event = StageEvent(stage="vetoed", actor_role=actor_role, at=_now(at))
    return ApprovalState(
        stage=state.stage,
        history=state.history + (event,),
        vetoed=True,
        veto_reason=reason,
        author=state.author,
    )
