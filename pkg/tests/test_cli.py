from __future__ import annotations

import json
from datetime import datetime, timezone

import pytest
import yaml

from paneltap.cli import main
from paneltap.keys import generate_key_file
from paneltap.registry.files import dump_entry
from paneltap.store.records import CaptureRecord

from .conftest import NOTICE_TEXT, build_entry, political_entry, standard_entries


@pytest.fixture
def deployment(tmp_path):
    """A config file plus an entries directory ready for CLI runs."""
    data_dir = tmp_path / "data"
    entries_dir = data_dir / "whitelist" / "entries"
    entries_dir.mkdir(parents=True)
    for entry in standard_entries():
        dump_entry(entry, entries_dir / f"{entry.url}.yaml")

    keys_dir = tmp_path / "keys"
    generate_key_file(keys_dir / "storage.key")
    generate_key_file(keys_dir / "pseudonym.key")
    notice = tmp_path / "notice.txt"
    notice.write_text(NOTICE_TEXT)

    config_path = tmp_path / "config.json"
    config_path.write_text(
        json.dumps(
            {
                "data_dir": str(data_dir),
                "keys": {
                    "storage_key_file": str(keys_dir / "storage.key"),
                    "pseudonym_key_file": str(keys_dir / "pseudonym.key"),
                },
                "identity_dir": str(tmp_path / "identity"),
                "notice_file": str(notice),
                "retention": {
                    "horizon_years": 5,
                    "anchor": "last_publication_date",
                    "anchor_date": "2020-01-01",
                },
                "export": {"k_min": 5},
            }
        )
    )
    return config_path


def run(config_path, *argv, role="working_group", fmt="text"):
    args = ["--config", str(config_path), "--format", fmt]
    if role:
        args += ["--role", role]
    return main(args + list(argv))


def test_unknown_subcommand_exits_nonzero(deployment, capsys):
    with pytest.raises(SystemExit) as info:
        run(deployment, "frobnicate")
    assert info.value.code == 2


def test_missing_config_is_configuration_error(tmp_path, capsys):
    code = main(["--config", str(tmp_path / "absent.json"), "whitelist", "validate"])
    assert code == 4


def test_validate_approve_publish_summary_flow(deployment, capsys):
    assert run(deployment, "whitelist", "validate") == 0
    assert run(deployment, "whitelist", "publish") == 0
    out = capsys.readouterr().out
    assert "published v1" in out
    assert run(deployment, "whitelist", "summary") == 0
    out = capsys.readouterr().out
    assert "news websites" in out


def test_validate_reports_violations_with_exit_2(deployment, capsys):
    entries_dir = deployment.parent / "data" / "whitelist" / "entries"
    bad = build_entry(
        "bad.example",
        "news",
        reason="",
    )
    dump_entry(bad, entries_dir / "bad.example.yaml")
    assert run(deployment, "whitelist", "validate") == 2
    out = capsys.readouterr().out
    assert "reason non-empty" in out


def test_publish_refused_without_coverage_rule(deployment, capsys):
    entries_dir = deployment.parent / "data" / "whitelist" / "entries"
    dump_entry(political_entry(), entries_dir / "party.example.yaml")
    assert run(deployment, "whitelist", "publish") == 2
    out = capsys.readouterr().out
    assert "COVERAGE" in out and "party.example" in out

    rules_dir = deployment.parent / "data" / "rules"
    rules_dir.mkdir(parents=True, exist_ok=True)
    (rules_dir / "party.example.yaml").write_text(
        yaml.safe_dump(
            {
                "scope": "party.example",
                "rules": [
                    {
                        "id": "party-authors",
                        "target": {"kind": "structured_path", "param": "comments[*].author"},
                        "action": "drop_field",
                        "flag": "third-party",
                    },
                    {
                        "id": "party-profile",
                        "target": {"kind": "structured_path", "param": "profile.*"},
                        "action": "redact_span",
                        "flag": "sensitive-personal",
                    },
                ],
            }
        )
    )
    assert run(deployment, "whitelist", "publish") == 0
    assert run(deployment, "filters", "coverage") == 0


def test_approve_enforces_roles_and_stage_order(deployment, capsys):
    entries_dir = deployment.parent / "data" / "whitelist" / "entries"
    draft = build_entry("draft.example", "news")
    from paneltap.registry import ApprovalState

    draft.approval = ApprovalState(author="r.tester")
    dump_entry(draft, entries_dir / "draft.example.yaml")

    assert (
        run(deployment, "whitelist", "approve", "--entry", "draft.example", "--to", "submitted",
            role="researcher")
        == 0
    )
    # skipping straight to included: validation error
    assert (
        run(deployment, "whitelist", "approve", "--entry", "draft.example", "--to", "included",
            role="working_group")
        == 2
    )
    # wrong role for the next stage: authorization error
    assert (
        run(deployment, "whitelist", "approve", "--entry", "draft.example", "--to",
            "approved_by_pis", role="researcher")
        == 3
    )
    # veto with reason, by the partner
    assert (
        run(deployment, "whitelist", "approve", "--entry", "draft.example", "--veto",
            "--reason", "panel burden too high", role="partner")
        == 0
    )


def test_consent_grant_requires_ack(deployment, capsys):
    run(deployment, "whitelist", "publish")
    code = run(deployment, "consent", "grant", "--participant", "p-1", "--version", "1")
    assert code == 2  # no --ack
    code = run(deployment, "consent", "grant", "--participant", "p-1", "--version", "1", "--ack")
    assert code == 0
    code = run(deployment, "consent", "revoke", "--participant", "p-1")
    assert code == 0


def test_consent_audit_flags_handbuilt_violation(deployment, capsys):
    from paneltap.app import Runtime
    from paneltap.config import load_config

    run(deployment, "whitelist", "publish")
    run(deployment, "consent", "grant", "--participant", "p-1", "--version", "1", "--ack")

    runtime = Runtime(load_config(deployment))
    pseudonym = runtime.vault.pseudonymize("p-1")

    def record(record_id, ts):
        return CaptureRecord(
            pseudonym=pseudonym,
            ts=ts,
            entry_id="news.example",
            whitelist_version=1,
            url="http://news.example/doc/1",
            method="GET",
            status=200,
            request_headers=[],
            request_body=b"",
            response_headers=[],
            response_body=b"ok",
            redaction_report={"hits": []},
            purpose_tag=runtime.config.purpose,
            record_id=record_id,
        )

    # one record inside the consent window, one predating it
    granted_at = runtime.gatekeeper.consent_state("p-1").granted_at
    runtime.store.append(record("r-good", granted_at))
    runtime.store.append(record("r-early", datetime(2001, 1, 1, tzinfo=timezone.utc)))

    code = run(deployment, "consent", "audit")
    assert code == 2
    out = capsys.readouterr().out
    assert out.count("VIOLATION") == 1
    assert "r-early" in out


def test_consent_audit_requires_authorized_role(deployment, capsys):
    run(deployment, "whitelist", "publish")
    assert run(deployment, "consent", "audit", role="researcher") == 3
    assert run(deployment, "consent", "audit", role=None) == 3


def test_store_sweep_and_boundaries(deployment, capsys):
    from paneltap.app import Runtime
    from paneltap.config import load_config

    run(deployment, "whitelist", "publish")
    runtime = Runtime(load_config(deployment))
    for i in range(3):
        runtime.store.append(
            CaptureRecord(
                pseudonym="ps-x",
                ts=datetime(2023, 5, 1, tzinfo=timezone.utc),
                entry_id="news.example",
                whitelist_version=1,
                url="http://news.example/doc",
                method="GET",
                status=200,
                request_headers=[],
                request_body=b"",
                response_headers=[],
                response_body=b"",
                redaction_report={"hits": []},
                purpose_tag=runtime.config.purpose,
                record_id=f"r-{i}",
            )
        )
    assert run(deployment, "store", "sweep", "--now", "2024-12-31", fmt="json-lines") == 0
    report = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert report["count"] == 0
    assert run(deployment, "store", "sweep", "--now", "2025-01-02", fmt="json-lines") == 0
    report = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert report["count"] == 3


def test_store_export_csv(deployment, capsys, tmp_path):
    from paneltap.app import Runtime
    from paneltap.config import load_config

    run(deployment, "whitelist", "publish")
    runtime = Runtime(load_config(deployment))
    for participant in range(6):
        runtime.store.append(
            CaptureRecord(
                pseudonym=f"ps-{participant}",
                ts=datetime(2024, 2, 5, tzinfo=timezone.utc),
                entry_id="news.example",
                whitelist_version=1,
                url="http://news.example/doc",
                method="GET",
                status=200,
                request_headers=[],
                request_body=b"",
                response_headers=[],
                response_body=b"",
                redaction_report={"hits": []},
                purpose_tag=runtime.config.purpose,
                record_id=f"r-{participant}",
            )
        )
    out_file = tmp_path / "agg.csv"
    assert (
        run(deployment, "store", "export", "--dims", "category,month", "--out", str(out_file))
        == 0
    )
    lines = out_file.read_text().splitlines()
    assert lines[0] == "category,month,captures"
    assert lines[1] == "news,2024-02,6"
    # disallowed dimension
    assert run(deployment, "store", "export", "--dims", "pseudonym") == 2


def test_store_report_is_read_only(deployment, capsys):
    from paneltap.app import Runtime
    from paneltap.config import load_config

    run(deployment, "whitelist", "publish")
    run(deployment, "consent", "grant", "--participant", "p-1", "--version", "1", "--ack")
    runtime = Runtime(load_config(deployment))
    pseudonym = runtime.vault.pseudonymize("p-1")
    runtime.store.append(
        CaptureRecord(
            pseudonym=pseudonym,
            ts=runtime.gatekeeper.consent_state("p-1").granted_at,
            entry_id="news.example",
            whitelist_version=1,
            url="http://news.example/doc",
            method="GET",
            status=200,
            request_headers=[],
            request_body=b"",
            response_headers=[],
            response_body=b"",
            redaction_report={"hits": []},
            purpose_tag=runtime.config.purpose,
            record_id="r-1",
        )
    )
    segments_before = {
        path.name: path.read_bytes() for path in runtime.store._segment_paths()
    }
    assert run(deployment, "store", "report", fmt="json-lines") == 0
    report = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert report["snapshot_version"] == 1
    assert report["coverage"]["ok"] is True
    assert report["consent_audit"]["ok"] is True
    assert report["store_scan"]["separation_ok"] is True
    segments_after = {
        path.name: path.read_bytes() for path in runtime.store._segment_paths()
    }
    assert segments_after == segments_before  # zero mutations to stored content


def test_filters_probe_cli(deployment, capsys, tmp_path):
    run(deployment, "whitelist", "publish")
    fixture = tmp_path / "fixture.json"
    fixture.write_text(
        json.dumps(
            {
                "url": "https://news.example/letters",
                "method": "POST",
                "request_headers": [["Content-Type", "text/plain"]],
                "request_body": "write to sentinel.reader@example.net today",
                "response_body": "ok",
                "sentinels": ["sentinel.reader@example.net"],
            }
        )
    )
    assert (
        run(deployment, "filters", "probe", "--entry", "news.example", "--fixture", str(fixture))
        == 0
    )
    out = capsys.readouterr().out
    assert "ok" in out


def test_mutating_commands_write_ops_log(deployment):
    run(deployment, "whitelist", "publish")
    run(deployment, "consent", "grant", "--participant", "p-1", "--version", "1", "--ack")
    ops_log = deployment.parent / "data" / "ops.log"
    events = [json.loads(line) for line in ops_log.read_text().splitlines()]
    commands = [event["command"] for event in events]
    assert "whitelist publish" in commands
    assert "consent grant" in commands
    assert all("ts" in event and "role" in event for event in events)
