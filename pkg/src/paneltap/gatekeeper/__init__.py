"""Consent ledger, gate checks and pseudonymization."""

from .consent import (
    ConsentRecord,
    GateDecision,
    Gatekeeper,
    consent_covers,
    notice_hash_of,
    snapshot_scope,
)
from .pseudonym import PseudonymVault
from .audit import AuditReport, AuditViolation, audit_capture_consent, consent_windows

__all__ = [
    "ConsentRecord",
    "GateDecision",
    "Gatekeeper",
    "consent_covers",
    "notice_hash_of",
    "snapshot_scope",
    "PseudonymVault",
    "AuditReport",
    "AuditViolation",
    "audit_capture_consent",
    "consent_windows",
]
