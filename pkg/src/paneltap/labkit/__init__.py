"""Lab fixtures: deterministic origin server and synthetic sentinel corpus."""

from .corpus import RequestSpec, Sentinel, mixed_traffic, sentinel_requests, make_card_number
from .origin import FixtureOrigin, deterministic_text

__all__ = [
    "RequestSpec",
    "Sentinel",
    "mixed_traffic",
    "sentinel_requests",
    "make_card_number",
    "FixtureOrigin",
    "deterministic_text",
]
