"""Consent-gated capture proxy for research panels.

Only whitelisted, justified sites are ever observed; captured copies are
filtered of sensitive data, pseudonymized, encrypted at rest, swept by a
retention policy, and leave the store as k-thresholded aggregates only.
"""

__version__ = "0.1.0"

DEFAULT_PURPOSE = "research into the effects of personalized communication"
