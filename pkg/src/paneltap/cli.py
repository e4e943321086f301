"""Operator command line.

Exit codes: 0 ok, 2 validation, 3 authorization, 4 configuration, 5 storage.
Every mutating command appends who did what, and when, to the ops log.
"""

from __future__ import annotations

import argparse
import base64
import json
import signal
import sys
from datetime import date

from .app import ProxyStack, Runtime, setup_proxy_logging
from .config import load_config
from .errors import AuthorizationError, PaneltapError, ValidationError
from .exchange import Exchange, utc_now
from .filters.coverage import coverage_check, staleness_probe
from .gatekeeper import audit_capture_consent
from .registry import validate_entry
from .registry.files import dump_entry, load_entry_file
from .registry.snapshot import participant_summary, publish_snapshot
from .registry.workflow import advance_stage, veto
from .store import AggregateQuery, RetentionPolicy, export_aggregate


class Emitter:
    def __init__(self, fmt: str):
        self.fmt = fmt

    def emit(self, obj: dict, text: str | None = None) -> None:
        if self.fmt == "json-lines":
            print(json.dumps(obj, sort_keys=True, default=str))
        else:
            print(text if text is not None else json.dumps(obj, sort_keys=True, default=str))


def _require_role(role: str | None) -> str:
    if not role:
        raise AuthorizationError("this command requires --role")
    return role


# -- whitelist ---------------------------------------------------------------


def cmd_whitelist_validate(runtime: Runtime, args, out: Emitter) -> int:
    entries = runtime.load_entries()
    categories = {c.id: c for c in runtime.taxonomy}
    failures = 0
    for entry in entries:
        report = validate_entry(entry, categories=categories, peers=entries)
        for violation in report:
            failures += 1
            out.emit(
                {
                    "entry": entry.entry_id,
                    "field": violation.field,
                    "rule": violation.rule,
                    "message": violation.message,
                },
                text=f"FAIL {entry.entry_id}: [{violation.rule}] {violation.message}",
            )
        if not report:
            out.emit({"entry": entry.entry_id, "ok": True}, text=f"ok   {entry.entry_id}")
    if failures:
        raise ValidationError(f"{failures} violation(s) across {len(entries)} entries")
    return 0


def _entry_file_for(runtime: Runtime, entry_id: str):
    for path in sorted(runtime.config.entries_dir.glob("*.yaml")):
        entry = load_entry_file(path)
        if entry.entry_id == entry_id:
            return path, entry
    raise ValidationError(f"no entry file for {entry_id!r} in {runtime.config.entries_dir}")


def cmd_whitelist_approve(runtime: Runtime, args, out: Emitter) -> int:
    role = _require_role(args.role)
    path, entry = _entry_file_for(runtime, args.entry)
    if args.veto:
        if not args.reason:
            raise ValidationError("--veto requires --reason")
        entry.approval = veto(entry.approval, role, args.reason)
        action = "veto"
    else:
        if not args.to:
            raise ValidationError("either --to STAGE or --veto is required")
        entry.approval = advance_stage(entry.approval, args.to, role)
        action = f"advance:{args.to}"
    dump_entry(entry, path)
    runtime.log_operation(role, f"whitelist approve {action}", {"entry": entry.entry_id})
    out.emit(
        {
            "entry": entry.entry_id,
            "stage": entry.approval.stage,
            "vetoed": entry.approval.vetoed,
        },
        text=f"{entry.entry_id}: stage={entry.approval.stage} vetoed={entry.approval.vetoed}",
    )
    return 0


def cmd_whitelist_publish(runtime: Runtime, args, out: Emitter) -> int:
    role = _require_role(args.role)
    entries = runtime.load_entries()
    ready = [e for e in entries if e.approval.matchable]
    skipped = [e for e in entries if not e.approval.matchable]
    for entry in skipped:
        out.emit(
            {"entry": entry.entry_id, "skipped": True, "stage": entry.approval.stage},
            text=f"skip {entry.entry_id} (stage={entry.approval.stage}"
            f"{', vetoed' if entry.approval.vetoed else ''})",
        )
    if not ready:
        raise ValidationError("no approved entries to publish")

    candidate = publish_snapshot(
        ready, runtime.taxonomy, previous_version=runtime.snapshots.latest_version()
    )
    rules = runtime.reload_rules()
    coverage = coverage_check(candidate, rules)
    if not coverage.ok:
        for violation in coverage.violations:
            out.emit(
                {"entry": violation.entry_id, "flag": violation.flag, "detail": violation.detail},
                text=f"COVERAGE {violation.entry_id} [{violation.flag}]: {violation.detail}",
            )
        raise ValidationError(
            f"snapshot refused: {len(coverage.violations)} coverage violation(s)"
        )

    snapshot = runtime.snapshots.publish(ready, runtime.taxonomy)
    runtime.log_operation(role, "whitelist publish", {"version": snapshot.version})
    out.emit(
        {
            "version": snapshot.version,
            "entries": len(snapshot.entries),
            "content_hash": snapshot.content_hash,
        },
        text=f"published v{snapshot.version} ({len(snapshot.entries)} entries,"
        f" hash {snapshot.content_hash[:16]}...)",
    )
    return 0


def cmd_whitelist_summary(runtime: Runtime, args, out: Emitter) -> int:
    version = args.snapshot or runtime.snapshots.latest_version()
    snapshot = runtime.snapshots.get(version) if version else None
    if snapshot is None:
        raise ValidationError(f"no published snapshot{f' v{version}' if version else ''}")
    summary = participant_summary(snapshot)
    if out.fmt == "json-lines":
        out.emit(summary)
    else:
        print(f"whitelist v{summary['version']}")
        for row in summary["categories"]:
            print(f"  {row['name']}: {row['entries']} site(s)")
            print(f"    {row['description']}")
    return 0


# -- proxy ----------------------------------------------------------------------


def cmd_proxy_serve(runtime: Runtime, args, out: Emitter) -> int:
    role = _require_role(args.role)
    setup_proxy_logging(runtime.config)
    snapshot = runtime.snapshots.active()
    if snapshot is None:
        raise ValidationError("no published snapshot; publish a whitelist before serving")
    rules = runtime.rule_set()
    coverage = coverage_check(snapshot, rules)
    if not coverage.ok:
        raise ValidationError(
            f"refusing to serve snapshot v{snapshot.version}:"
            f" {len(coverage.violations)} coverage violation(s)"
        )
    stack = ProxyStack(runtime)
    addresses = stack.start()
    runtime.log_operation(role, "proxy serve", {"snapshot": snapshot.version})
    out.emit(
        {
            "proxy": list(addresses["proxy"]),
            "admin": list(addresses["admin"]),
            "snapshot": snapshot.version,
        },
        text=f"serving snapshot v{snapshot.version}:"
        f" proxy {addresses['proxy'][0]}:{addresses['proxy'][1]},"
        f" admin {addresses['admin'][0]}:{addresses['admin'][1]}",
    )
    stop = [False]

    def _stop(signum, frame):
        stop[0] = True

    signal.signal(signal.SIGTERM, _stop)
    signal.signal(signal.SIGINT, _stop)
    try:
        while not stop[0]:
            signal.pause()
    finally:
        stack.stop()
    return 0


# -- filters ----------------------------------------------------------------------


def cmd_filters_coverage(runtime: Runtime, args, out: Emitter) -> int:
    version = args.snapshot or runtime.snapshots.latest_version()
    snapshot = runtime.snapshots.get(version) if version else None
    if snapshot is None:
        raise ValidationError("no published snapshot to check")
    report = coverage_check(snapshot, runtime.rule_set())
    for violation in report.violations:
        out.emit(
            {"entry": violation.entry_id, "flag": violation.flag, "detail": violation.detail},
            text=f"COVERAGE {violation.entry_id} [{violation.flag}]: {violation.detail}",
        )
    if not report.ok:
        raise ValidationError(f"{len(report.violations)} coverage violation(s)")
    out.emit({"ok": True, "snapshot": snapshot.version}, text=f"coverage ok (v{snapshot.version})")
    return 0


def _load_fixture(path: str) -> tuple[Exchange, list[str]]:
    doc = json.loads(open(path).read())

    def body(key: str) -> bytes:
        if f"{key}_b64" in doc:
            return base64.b64decode(doc[f"{key}_b64"])
        return str(doc.get(key, "")).encode()

    exchange = Exchange(
        participant_id="probe",
        url=doc["url"],
        method=doc.get("method", "GET"),
        request_headers=[(n, v) for n, v in doc.get("request_headers", [])],
        request_body=body("request_body"),
        status=int(doc.get("status", 200)),
        response_headers=[(n, v) for n, v in doc.get("response_headers", [])],
        response_body=body("response_body"),
    )
    return exchange, [str(s) for s in doc.get("sentinels", [])]


def cmd_filters_probe(runtime: Runtime, args, out: Emitter) -> int:
    version = args.snapshot or runtime.snapshots.latest_version()
    snapshot = runtime.snapshots.get(version) if version else None
    if snapshot is None:
        raise ValidationError("no published snapshot")
    entry = snapshot.entry(args.entry)
    if entry is None:
        raise ValidationError(f"entry {args.entry!r} is not in snapshot v{snapshot.version}")
    fixture = None
    if args.fixture:
        try:
            fixture = _load_fixture(args.fixture)
        except FileNotFoundError:
            fixture = None
    result = staleness_probe(entry, fixture, runtime.rule_set())
    out.emit(
        {
            "entry": entry.entry_id,
            "status": result.status,
            "surviving": list(result.surviving),
            "detail": result.detail,
        },
        text=f"{entry.entry_id}: {result.status}"
        + (f" - surviving: {', '.join(result.surviving)}" if result.surviving else ""),
    )
    if result.status == "stale":
        raise ValidationError(f"stale filters for {entry.entry_id}")
    return 0


# -- consent ----------------------------------------------------------------------


def cmd_consent_grant(runtime: Runtime, args, out: Emitter) -> int:
    role = _require_role(args.role)
    notice_hash = args.notice_hash or runtime.gatekeeper.notice_hash or ""
    record = runtime.gatekeeper.grant_consent(
        participant_id=args.participant,
        whitelist_version=args.version,
        notice_hash=notice_hash,
        explicit_ack=args.ack,
    )
    runtime.log_operation(
        role, "consent grant", {"participant": args.participant, "version": args.version}
    )
    out.emit(
        {
            "participant": record.participant_id,
            "version": record.whitelist_version,
            "granted_at": record.granted_at.isoformat(),
        },
        text=f"consent recorded: {record.participant_id} -> v{record.whitelist_version}",
    )
    return 0


def cmd_consent_revoke(runtime: Runtime, args, out: Emitter) -> int:
    role = _require_role(args.role)
    record = runtime.gatekeeper.revoke_consent(args.participant)
    runtime.log_operation(role, "consent revoke", {"participant": args.participant})
    if record is None:
        out.emit(
            {"participant": args.participant, "revoked": False, "noop": True},
            text=f"{args.participant}: no active consent (no-op)",
        )
    else:
        out.emit(
            {"participant": args.participant, "revoked": True},
            text=f"{args.participant}: consent revoked, capture stops now",
        )
    return 0


def cmd_consent_audit(runtime: Runtime, args, out: Emitter) -> int:
    role = _require_role(args.role)
    runtime.store.assert_raw_access(role, "consent_audit")
    report = audit_capture_consent(
        runtime.store.records(),
        runtime.gatekeeper.ledger_events(),
        runtime.vault.reverse_mapping(),
        runtime.snapshots,
    )
    for violation in report.violations:
        out.emit(
            {
                "record_id": violation.record_id,
                "pseudonym": violation.pseudonym,
                "detail": violation.detail,
            },
            text=f"VIOLATION {violation.record_id}: {violation.detail}",
        )
    out.emit(
        {"checked": report.checked, "violations": len(report.violations), "ok": report.ok},
        text=f"audited {report.checked} record(s): "
        + ("all covered by consent" if report.ok else f"{len(report.violations)} violation(s)"),
    )
    if not report.ok:
        raise ValidationError(f"{len(report.violations)} record(s) lack covering consent")
    return 0


# -- store ----------------------------------------------------------------------


def _policy_from(runtime: Runtime, anchor_date_arg: str | None) -> RetentionPolicy:
    retention = runtime.config.retention
    anchor_date = retention.anchor_date
    if anchor_date_arg:
        anchor_date = date.fromisoformat(anchor_date_arg)
    return RetentionPolicy(
        horizon_years=retention.horizon_years,
        anchor=retention.anchor,
        anchor_date=anchor_date,
    )


def cmd_store_sweep(runtime: Runtime, args, out: Emitter) -> int:
    role = _require_role(args.role)
    if args.erase_pseudonym:
        report = runtime.store.purge_for_pseudonym(args.erase_pseudonym)
        runtime.log_operation(role, "store sweep erase-pseudonym", {"purged": report.count})
        out.emit(report.to_document(), text=f"erased {report.count} record(s)")
        return 0
    policy = _policy_from(runtime, args.anchor_date)
    now = date.fromisoformat(args.now) if args.now else utc_now().date()
    report = runtime.store.sweep_retention(policy, now)
    runtime.log_operation(
        role, "store sweep", {"purged": report.count, "now": now.isoformat()}
    )
    out.emit(
        report.to_document(),
        text=f"sweep at {now.isoformat()}: purged {report.count} record(s),"
        f" {runtime.store.tombstone_count()} tombstone(s) total",
    )
    return 0


def cmd_store_export(runtime: Runtime, args, out: Emitter) -> int:
    dims = tuple(d.strip() for d in args.dims.split(",") if d.strip())
    query = AggregateQuery(dimensions=dims, k_min=args.k_min or runtime.config.k_min)
    table = export_aggregate(
        runtime.store.records(),
        query,
        k_floor=runtime.config.k_min,
        category_of=runtime.category_resolver(),
    )
    csv_text = table.to_csv()
    if args.out:
        with open(args.out, "w") as handle:
            handle.write(csv_text)
        out.emit(
            {"rows": len(table.rows), "suppressed": table.suppressed_groups, "out": args.out},
            text=f"wrote {len(table.rows)} row(s) to {args.out}"
            f" ({table.suppressed_groups} suppressed)",
        )
    else:
        sys.stdout.write(csv_text)
    return 0


def cmd_store_report(runtime: Runtime, args, out: Emitter) -> int:
    role = _require_role(args.role)
    runtime.store.assert_raw_access(role, "compliance_report")

    version = runtime.snapshots.latest_version()
    snapshot = runtime.snapshots.get(version) if version else None
    coverage = (
        coverage_check(snapshot, runtime.rule_set()).to_document()
        if snapshot
        else {"ok": False, "violations": [], "note": "no published snapshot"}
    )
    mapping = runtime.vault.reverse_mapping()
    audit = audit_capture_consent(
        runtime.store.records(),
        runtime.gatekeeper.ledger_events(),
        mapping,
        runtime.snapshots,
    ).to_document()

    policy = _policy_from(runtime, None)
    due = 0
    total = 0
    if policy.anchor != "last_publication_date" or policy.anchor_date is not None:
        from .store.retention import purge_due

        today = utc_now().date()
        for record in runtime.store.records():
            total += 1
            if purge_due(policy, record.ts.date(), today):
                due += 1
    else:
        total = sum(1 for _ in runtime.store.records())

    leaked = []
    raw_blobs = [path.read_bytes() for path in runtime.store.raw_files()]
    for participant_id in mapping.values():
        needle = participant_id.encode()
        if any(needle in blob for blob in raw_blobs):
            leaked.append(participant_id)

    report = {
        "generated_at": utc_now().isoformat(),
        "snapshot_version": version,
        "coverage": coverage,
        "consent_audit": audit,
        "retention": {
            "policy": {
                "horizon_years": policy.horizon_years,
                "anchor": policy.anchor,
                "anchor_date": policy.anchor_date.isoformat() if policy.anchor_date else None,
            },
            "records": total,
            "due_for_purge": due,
            "tombstones": runtime.store.tombstone_count(),
        },
        "store_scan": {
            "segment_files": len(list(runtime.store.raw_files())),
            "separation_ok": not leaked,
            "leaked_identities": len(leaked),
        },
    }
    out.emit(
        report,
        text=(
            f"compliance report @ {report['generated_at']}\n"
            f"  snapshot: v{version}\n"
            f"  coverage: {'ok' if report['coverage']['ok'] else 'VIOLATIONS'}\n"
            f"  consent audit: {'ok' if audit['ok'] else 'VIOLATIONS'}"
            f" ({audit['checked']} checked)\n"
            f"  retention: {total} record(s), {due} due for purge,"
            f" {report['retention']['tombstones']} tombstone(s)\n"
            f"  separation scan: {'ok' if not leaked else 'RAW IDENTITY FOUND'}"
        ),
    )
    return 0


# -- argument surface ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="paneltap",
        description="Consent-gated research capture proxy: whitelist, filter, store, export.",
    )
    parser.add_argument("--config", required=True, help="path to the deployment config (JSON)")
    parser.add_argument("--role", default=None, help="actor role for authorization and audit")
    parser.add_argument("--format", choices=("text", "json-lines"), default="text")
    groups = parser.add_subparsers(dest="group", required=True)

    whitelist = groups.add_parser("whitelist").add_subparsers(dest="command", required=True)
    whitelist.add_parser("validate").set_defaults(func=cmd_whitelist_validate)
    approve = whitelist.add_parser("approve")
    approve.add_argument("--entry", required=True)
    approve.add_argument("--to", default=None, help="target stage (one step forward)")
    approve.add_argument("--veto", action="store_true")
    approve.add_argument("--reason", default="")
    approve.set_defaults(func=cmd_whitelist_approve)
    whitelist.add_parser("publish").set_defaults(func=cmd_whitelist_publish)
    summary = whitelist.add_parser("summary")
    summary.add_argument("--snapshot", type=int, default=None)
    summary.set_defaults(func=cmd_whitelist_summary)

    proxy = groups.add_parser("proxy").add_subparsers(dest="command", required=True)
    proxy.add_parser("serve").set_defaults(func=cmd_proxy_serve)

    filters = groups.add_parser("filters").add_subparsers(dest="command", required=True)
    coverage = filters.add_parser("coverage")
    coverage.add_argument("--snapshot", type=int, default=None)
    coverage.set_defaults(func=cmd_filters_coverage)
    probe = filters.add_parser("probe")
    probe.add_argument("--entry", required=True)
    probe.add_argument("--fixture", default=None)
    probe.add_argument("--snapshot", type=int, default=None)
    probe.set_defaults(func=cmd_filters_probe)

    consent = groups.add_parser("consent").add_subparsers(dest="command", required=True)
    grant = consent.add_parser("grant")
    grant.add_argument("--participant", required=True)
    grant.add_argument("--version", type=int, required=True)
    grant.add_argument("--notice-hash", default=None)
    grant.add_argument("--ack", action="store_true", help="explicit affirmative action recorded")
    grant.set_defaults(func=cmd_consent_grant)
    revoke = consent.add_parser("revoke")
    revoke.add_argument("--participant", required=True)
    revoke.set_defaults(func=cmd_consent_revoke)
    consent.add_parser("audit").set_defaults(func=cmd_consent_audit)

    store = groups.add_parser("store").add_subparsers(dest="command", required=True)
    sweep = store.add_parser("sweep")
    sweep.add_argument("--now", default=None, help="sweep as of this date (YYYY-MM-DD)")
    sweep.add_argument("--anchor-date", default=None)
    sweep.add_argument("--erase-pseudonym", default=None)
    sweep.set_defaults(func=cmd_store_sweep)
    export = store.add_parser("export")
    export.add_argument("--dims", required=True, help="comma-separated dimensions")
    export.add_argument("--k-min", type=int, default=None)
    export.add_argument("--out", default=None)
    export.set_defaults(func=cmd_store_export)
    store.add_parser("report").set_defaults(func=cmd_store_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Emitter(args.format)
    try:
        runtime = Runtime(load_config(args.config))
        return args.func(runtime, args, out)
    except PaneltapError as exc:
        error = {"error": str(exc), "exit_code": exc.exit_code}
        if args.format == "json-lines":
            print(json.dumps(error, sort_keys=True), file=sys.stderr)
        else:
            print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
