"""Detection primitives for the built-in redaction categories.

Payment cards are digit runs of 13-19 (separators tolerated) that pass the
mod-10 check; bank account numbers use the IBAN mod-97 check. Both checks
bound false positives on arbitrary digit runs; thresholds are deliberately
conservative and documented as tunable in docs/rules_schema.md.
"""

from __future__ import annotations

import re

EMAIL_RE = re.compile(rb"[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}")

# 13-19 digits, optionally separated by single spaces or dashes.
CARD_CANDIDATE_RE = re.compile(rb"(?<![0-9])[0-9](?:[ -]?[0-9]){12,18}(?![0-9])")

IBAN_CANDIDATE_RE = re.compile(rb"(?<![A-Z0-9])[A-Z]{2}[0-9]{2}[A-Z0-9]{10,30}(?![A-Z0-9])")


def luhn_valid(digits: str) -> bool:
    """Mod-10 checksum over a pure digit string."""
    if not digits.isdigit() or not 13 <= len(digits) <= 19:
        return False
    total = 0
    for position, char in enumerate(reversed(digits)):
        value = int(char)
        if position % 2 == 1:
            value *= 2
            if value > 9:
                value -= 9
        total += value
    return total % 10 == 0


def card_match_valid(raw: bytes) -> bool:
    digits = bytes(b for b in raw if b in b"0123456789").decode()
    return luhn_valid(digits)


def iban_valid(candidate: str) -> bool:
    """Mod-97 check: move the country+check prefix to the end, map letters to
    numbers (A=10..Z=35); valid iff the resulting integer % 97 == 1."""
    compact = candidate.replace(" ", "").upper()
    if len(compact) < 15 or len(compact) > 34:
        return False
    if not (compact[:2].isalpha() and compact[2:4].isdigit()):
        return False
    rearranged = compact[4:] + compact[:4]
    digits = []
    for char in rearranged:
        if char.isdigit():
            digits.append(char)
        elif char.isalpha():
            digits.append(str(ord(char) - ord("A") + 10))
        else:
            return False
    return int("".join(digits)) % 97 == 1


def iban_match_valid(raw: bytes) -> bool:
    try:
        return iban_valid(raw.decode("ascii"))
    except UnicodeDecodeError:
        return False


# Named pattern library for body_pattern targets. Each entry: candidate regex
# plus an optional validator deciding whether a given match really is a hit.
NAMED_PATTERNS: dict[str, tuple[re.Pattern[bytes], object]] = {
    "email": (EMAIL_RE, None),
    "payment-card": (CARD_CANDIDATE_RE, card_match_valid),
    "iban": (IBAN_CANDIDATE_RE, iban_match_valid),
}

# Generic patterns a degraded structured rule can fall back to, per flag.
FLAG_FALLBACK_PATTERNS: dict[str, tuple[str, ...]] = {
    "email": ("email",),
    "financial": ("payment-card", "iban"),
}
