from __future__ import annotations

import pytest

from paneltap.errors import ConfigurationError, ValidationError
from paneltap.gatekeeper import (
    Gatekeeper,
    PseudonymVault,
    audit_capture_consent,
    consent_covers,
    notice_hash_of,
)
from paneltap.keys import generate_key_file
from paneltap.registry import SnapshotStore, default_taxonomy

from .conftest import NOTICE_TEXT, build_entry, political_entry, standard_entries
from .oracles import category_delta_oracle


@pytest.fixture
def snapshots(tmp_path) -> SnapshotStore:
    store = SnapshotStore(tmp_path / "snaps")
    store.publish(standard_entries(), default_taxonomy())
    return store


@pytest.fixture
def gate(tmp_path, snapshots) -> Gatekeeper:
    return Gatekeeper(tmp_path / "ledger.jsonl", snapshots, notice_text=NOTICE_TEXT)


HASH = notice_hash_of(NOTICE_TEXT)


# -- granting --------------------------------------------------------------


def test_tacit_consent_rejected(gate):
    with pytest.raises(ValidationError, match="affirmative"):
        gate.grant_consent("p-1", 1, HASH, explicit_ack=False)


def test_unknown_version_rejected(gate):
    with pytest.raises(ValidationError, match="never published"):
        gate.grant_consent("p-1", 7, HASH, explicit_ack=True)


def test_notice_hash_must_match_current_notice(gate):
    with pytest.raises(ValidationError, match="notice hash"):
        gate.grant_consent("p-1", 1, "0" * 64, explicit_ack=True)
    with pytest.raises(ValidationError, match="notice_hash"):
        gate.grant_consent("p-1", 1, "", explicit_ack=True)


def test_grant_then_gate_eligible(gate):
    gate.grant_consent("p-1", 1, HASH, explicit_ack=True)
    decision = gate.check_gate("p-1", 1)
    assert decision.eligible


def test_no_record_not_eligible(gate):
    decision = gate.check_gate("p-unknown", 1)
    assert not decision.eligible
    assert decision.reason == "no consent"


# -- revocation --------------------------------------------------------------


def test_revoke_stops_gate(gate):
    gate.grant_consent("p-1", 1, HASH, explicit_ack=True)
    assert gate.check_gate("p-1", 1)
    record = gate.revoke_consent("p-1")
    assert record.revoked_at is not None and record.revoked_at >= record.granted_at
    decision = gate.check_gate("p-1", 1)
    assert not decision.eligible and decision.reason == "consent revoked"


def test_revoke_is_idempotent(gate):
    gate.grant_consent("p-1", 1, HASH, explicit_ack=True)
    assert gate.revoke_consent("p-1") is not None
    assert gate.revoke_consent("p-1") is None  # second call: no-op with notice
    assert gate.revoke_consent("p-never") is None


def test_regrant_after_revoke(gate):
    gate.grant_consent("p-1", 1, HASH, explicit_ack=True)
    gate.revoke_consent("p-1")
    gate.grant_consent("p-1", 1, HASH, explicit_ack=True)
    assert gate.check_gate("p-1", 1)


def test_ledger_is_append_only_and_replayable(gate, tmp_path, snapshots):
    gate.grant_consent("p-1", 1, HASH, explicit_ack=True)
    gate.revoke_consent("p-1")
    gate.grant_consent("p-2", 1, HASH, explicit_ack=True)
    events = gate.ledger_events()
    assert [e["event"] for e in events] == ["grant", "revoke", "grant"]
    reloaded = Gatekeeper(gate.ledger_file, snapshots, notice_text=NOTICE_TEXT)
    assert not reloaded.check_gate("p-1", 1).eligible
    assert reloaded.check_gate("p-2", 1).eligible


# -- version compatibility ------------------------------------------------------


def test_new_entries_in_consented_categories_do_not_require_renewal(tmp_path):
    snapshots = SnapshotStore(tmp_path / "snaps")
    snapshots.publish(standard_entries(), default_taxonomy())
    gate = Gatekeeper(tmp_path / "ledger.jsonl", snapshots, notice_text=NOTICE_TEXT)
    gate.grant_consent("p-1", 1, HASH, explicit_ack=True)

    extra_news = build_entry("extra-news.example", "news")
    snapshots.publish(standard_entries() + [extra_news], default_taxonomy())

    consented = snapshots.get(1)
    active = snapshots.get(2)
    assert category_delta_oracle(consented.entries, active.entries) == set()
    assert gate.check_gate("p-1", 2).eligible


def test_new_category_requires_renewal(tmp_path):
    snapshots = SnapshotStore(tmp_path / "snaps")
    snapshots.publish(standard_entries(), default_taxonomy())
    gate = Gatekeeper(tmp_path / "ledger.jsonl", snapshots, notice_text=NOTICE_TEXT)
    gate.grant_consent("p-1", 1, HASH, explicit_ack=True)

    snapshots.publish(standard_entries() + [political_entry()], default_taxonomy())
    consented, active = snapshots.get(1), snapshots.get(2)
    assert category_delta_oracle(consented.entries, active.entries) == {"political-parties"}
    decision = gate.check_gate("p-1", 2)
    assert not decision.eligible and "re-consent" in decision.reason

    gate.grant_consent("p-1", 2, HASH, explicit_ack=True)
    assert gate.check_gate("p-1", 2).eligible


def test_new_sensitive_flag_requires_renewal(tmp_path):
    snapshots = SnapshotStore(tmp_path / "snaps")
    entries = [build_entry("plain.example", "news")]
    snapshots.publish(entries, default_taxonomy())
    flagged = build_entry(
        "plain.example",
        "news",
        sensitive_flags=frozenset({"email"}),
        flag_paths={"email": ("site-wide",)},
        measures="addresses redacted",
    )
    snapshots.publish([flagged], default_taxonomy())
    covered, reason = consent_covers(snapshots.get(1), snapshots.get(2))
    assert not covered and "sensitive flags" in reason


# -- pseudonymization --------------------------------------------------------------


def test_pseudonym_deterministic_and_distinct(tmp_path):
    key = tmp_path / "keys" / "pseudonym.key"
    generate_key_file(key)
    vault = PseudonymVault(key, tmp_path / "identity")
    one = vault.pseudonymize("p-00001")
    again = vault.pseudonymize("p-00001")
    other = vault.pseudonymize("p-00002")
    assert one == again
    assert one != other


def test_missing_key_is_hard_failure(tmp_path):
    with pytest.raises(ConfigurationError):
        PseudonymVault(tmp_path / "nope.key", tmp_path / "identity")
    with pytest.raises(ConfigurationError):
        PseudonymVault(None, tmp_path / "identity")


def test_pseudonyms_never_contain_participant_id_over_corpus(tmp_path):
    key = tmp_path / "keys" / "pseudonym.key"
    generate_key_file(key)
    vault = PseudonymVault(key, tmp_path / "identity")
    violations = 0
    seen = set()
    for i in range(10_000):
        participant = f"p-{i:05d}"
        pseudonym = vault.pseudonymize(participant)
        if participant in pseudonym:
            violations += 1
        seen.add(pseudonym)
    assert violations == 0
    assert len(seen) == 10_000  # distinctness over the corpus


def test_rekeying_changes_pseudonyms_but_preserves_distinctness(tmp_path):
    key_a = tmp_path / "a.key"
    key_b = tmp_path / "b.key"
    generate_key_file(key_a)
    generate_key_file(key_b)
    vault_a = PseudonymVault(key_a, tmp_path / "map-a")
    vault_b = PseudonymVault(key_b, tmp_path / "map-b")
    ids = [f"p-{i:04d}" for i in range(500)]
    under_a = [vault_a.pseudonymize(p) for p in ids]
    under_b = [vault_b.pseudonymize(p) for p in ids]
    assert all(a != b for a, b in zip(under_a, under_b))
    assert len(set(under_b)) == len(ids)


def test_mapping_recorded_in_separate_store_only(tmp_path):
    key = tmp_path / "k.key"
    generate_key_file(key)
    mapping_dir = tmp_path / "identity"
    vault = PseudonymVault(key, mapping_dir)
    pseudonym = vault.pseudonymize("p-42")
    mapping_text = (mapping_dir / "pseudonyms.jsonl").read_text()
    assert "p-42" in mapping_text and pseudonym in mapping_text
    assert vault.reverse_mapping()[pseudonym] == "p-42"


# -- audit helper ---------------------------------------------------------------------


def test_audit_flags_record_predating_consent(tmp_path, snapshots, gate):
    from datetime import datetime, timezone

    from paneltap.store.records import CaptureRecord

    gate.grant_consent("p-1", 1, HASH, explicit_ack=True)
    granted_at = gate.consent_state("p-1").granted_at

    def record_at(ts, record_id):
        return CaptureRecord(
            pseudonym="ps-abc",
            ts=ts,
            entry_id="news.example",
            whitelist_version=1,
            url="http://news.example/doc/1",
            method="GET",
            status=200,
            request_headers=[],
            request_body=b"",
            response_headers=[],
            response_body=b"",
            redaction_report={"hits": []},
            purpose_tag="x",
            record_id=record_id,
        )

    before = record_at(datetime(2000, 1, 1, tzinfo=timezone.utc), "r-before")
    after = record_at(granted_at, "r-after")
    report = audit_capture_consent(
        [before, after],
        gate.ledger_events(),
        {"ps-abc": "p-1"},
        snapshots,
    )
    assert report.checked == 2
    assert [v.record_id for v in report.violations] == ["r-before"]
