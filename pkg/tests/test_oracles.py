"""Self-checks for the independent oracles, and the frozen values the rest of
the suite relies on - computed here first, then asserted elsewhere."""

from __future__ import annotations

import random

from .oracles import iban_oracle, luhn_oracle, suffix_match_oracle

# Frozen by running the oracles over the canonical examples.
KNOWN_VALID_CARD = "4111111111111111"
KNOWN_INVALID_CARD = "4111111111111112"
KNOWN_VALID_IBAN = "NL91ABNA0417164300"


def test_luhn_oracle_frozen_pair():
    assert luhn_oracle(KNOWN_VALID_CARD) is True
    assert luhn_oracle(KNOWN_INVALID_CARD) is False


def test_luhn_oracle_separator_stripping_is_callers_job():
    digits = KNOWN_VALID_CARD
    spaced = " ".join(digits[i : i + 4] for i in range(0, 16, 4))
    assert luhn_oracle(spaced.replace(" ", "")) is True
    assert luhn_oracle(spaced) is False  # oracle takes pure digit strings


def test_luhn_oracle_flips_on_any_single_digit_change():
    rng = random.Random(7)
    for _ in range(50):
        position = rng.randrange(len(KNOWN_VALID_CARD))
        original = int(KNOWN_VALID_CARD[position])
        replacement = (original + rng.randrange(1, 10)) % 10
        mutated = (
            KNOWN_VALID_CARD[:position] + str(replacement) + KNOWN_VALID_CARD[position + 1 :]
        )
        assert luhn_oracle(mutated) is False


def test_iban_oracle_frozen_example():
    assert iban_oracle(KNOWN_VALID_IBAN) is True
    assert iban_oracle("NL91ABNA0417164301") is False
    assert iban_oracle("XX00") is False


def test_iban_oracle_check_digit_uniqueness():
    # Only one check-digit pair can be valid for a fixed body.
    body = "ABNA0417164300"
    valid = [f"NL{i:02d}{body}" for i in range(100) if iban_oracle(f"NL{i:02d}{body}")]
    assert valid == [KNOWN_VALID_IBAN]


def test_suffix_match_oracle_longest_wins():
    hosts = ["example.org", "sub.example.org"]
    assert suffix_match_oracle("sub.example.org", hosts) == "sub.example.org"
    assert suffix_match_oracle("a.sub.example.org", hosts) == "sub.example.org"
    assert suffix_match_oracle("other.example.org", hosts) == "example.org"
    assert suffix_match_oracle("example.org", hosts) == "example.org"
    assert suffix_match_oracle("unrelated.net", hosts) is None
    assert suffix_match_oracle("notexample.org", hosts) is None  # suffix, not substring


# The category taxonomy's published per-category counts, added independently:
# the taxonomy shipped with the package must agree with this sum.
TAXONOMY_COUNT_COLUMN = [117, 10, 32, 17, 39, 11, 57, 16, 18, 6]
TAXONOMY_TOTAL = 323


def test_taxonomy_count_column_addition():
    total = 0
    for count in TAXONOMY_COUNT_COLUMN:
        total += count
    assert total == TAXONOMY_TOTAL
