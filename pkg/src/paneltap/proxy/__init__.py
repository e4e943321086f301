"""Forward proxy with consent-gated capture tap."""

from .decision import (
    COMMS_EXCLUDED,
    NO_CONSENT,
    NOT_WHITELISTED,
    CaptureDecision,
    decide_capture,
)
from .metrics import Metrics
from .server import CaptureProxy, participant_from_headers
from .tap import PipelineWorker, Tap, TapJob
from .tlsmint import CredentialAuthority, upstream_context

__all__ = [
    "COMMS_EXCLUDED",
    "NO_CONSENT",
    "NOT_WHITELISTED",
    "CaptureDecision",
    "decide_capture",
    "Metrics",
    "CaptureProxy",
    "participant_from_headers",
    "PipelineWorker",
    "Tap",
    "TapJob",
    "CredentialAuthority",
    "upstream_context",
]
