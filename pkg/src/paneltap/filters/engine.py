"""The redaction engine: apply a compiled rule set to a captured exchange.

apply() is pure - it edits a deep copy and reports every change it made. All
body edits are exact span replacements on the original bytes, so a byte-level
diff of input vs output maps one-to-one onto the reported hits. Storing an
unfiltered body is the one forbidden outcome: when a structured rule cannot
parse its body the rule degrades to a pattern scan (or redacts the body
outright when its category has no generic pattern).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from ..exchange import Exchange
from ..registry.match import path_under, split_url
from .jsonspan import JsonSpanError, walk
from .model import CompiledRule, RedactionReport
from .patterns import FLAG_FALLBACK_PATTERNS, NAMED_PATTERNS

FORM_CONTENT_TYPE = "application/x-www-form-urlencoded"
JSON_CONTENT_TYPES = ("application/json", "+json")


@dataclass
class _Edit:
    start: int
    end: int
    replacement: bytes
    rule_id: str
    target: str


def _merge_edits(edits: list[_Edit]) -> list[_Edit]:
    """Drop overlapping edits: earliest start wins, longer span on ties."""
    kept: list[_Edit] = []
    last_end = -1
    for edit in sorted(edits, key=lambda e: (e.start, -(e.end - e.start))):
        if edit.start < last_end:
            continue
        kept.append(edit)
        last_end = edit.end
    return kept


def _apply_edits(data: bytes, edits: list[_Edit], report: RedactionReport) -> bytes:
    real = [e for e in _merge_edits(edits) if data[e.start : e.end] != e.replacement]
    for edit in sorted(real, key=lambda e: e.start, reverse=True):
        data = data[: edit.start] + edit.replacement + data[edit.end :]
        report.add(edit.rule_id, edit.target, 1)
    return data


def _content_type(headers) -> str:
    for name, value in headers:
        if name.lower() == "content-type":
            return value.lower()
    return ""


def _looks_like_form(body: bytes) -> bool:
    if not body or b"=" not in body:
        return False
    sample = body[:2048]
    return all(32 <= b < 127 or b in (9,) for b in sample) and b"\n" not in sample


def _form_segments(body: bytes):
    """Yield (start, end, name) for each name=value segment of a form body."""
    offset = 0
    for segment in body.split(b"&"):
        end = offset + len(segment)
        name = segment.split(b"=", 1)[0]
        yield offset, end, name
        offset = end + 1


def _form_edits(body: bytes, rules: list[CompiledRule]) -> list[_Edit]:
    edits: list[_Edit] = []
    segments = list(_form_segments(body))
    for index, (start, end, raw_name) in enumerate(segments):
        try:
            name = raw_name.decode("utf-8")
        except UnicodeDecodeError:
            continue
        for compiled in rules:
            if not compiled.name_re.search(name):
                continue
            target = f"form:{name}"
            if compiled.rule.action == "drop_field":
                if index < len(segments) - 1:
                    edits.append(_Edit(start, end + 1, b"", compiled.id, target))
                elif index > 0:
                    edits.append(_Edit(start - 1, end, b"", compiled.id, target))
                else:
                    edits.append(_Edit(start, end, b"", compiled.id, target))
            else:
                value_start = start + len(raw_name) + 1
                if value_start <= end:
                    edits.append(_Edit(value_start, end, compiled.token, compiled.id, target))
            break  # first matching rule owns the field
    return edits


def _pattern_edits(body: bytes, compiled: CompiledRule) -> list[_Edit]:
    edits = []
    label = compiled.rule.target_param
    for match in compiled.body_re.finditer(body):
        if compiled.body_validator is not None and not compiled.body_validator(match.group(0)):
            continue
        replacement = b"" if compiled.rule.action == "drop_field" else compiled.token
        edits.append(_Edit(match.start(), match.end(), replacement, compiled.id, f"body:{label}"))
    return edits


def _fallback_pattern_edits(body: bytes, compiled: CompiledRule) -> list[_Edit] | None:
    """Degraded structured rule: scan with the flag's generic patterns, or
    None when the flag has no generic pattern (caller redacts the body)."""
    names = FLAG_FALLBACK_PATTERNS.get(compiled.flag)
    if not names:
        return None
    edits: list[_Edit] = []
    for name in names:
        candidate, validator = NAMED_PATTERNS[name]
        for match in candidate.finditer(body):
            if validator is not None and not validator(match.group(0)):
                continue
            edits.append(
                _Edit(
                    match.start(),
                    match.end(),
                    compiled.token,
                    compiled.id,
                    f"degraded:{name}",
                )
            )
    return edits


def _structured_edits(
    body: bytes, compiled: CompiledRule, report: RedactionReport
) -> list[_Edit]:
    try:
        text = body.decode("utf-8")
        json.loads(text)
        nodes = walk(text)
    except (UnicodeDecodeError, json.JSONDecodeError, JsonSpanError):
        report.degraded += (compiled.id,)
        fallback = _fallback_pattern_edits(body, compiled)
        if fallback is None:
            return [_Edit(0, len(body), compiled.token, compiled.id, "degraded:whole-body")]
        return fallback

    # Spans are character offsets; map to bytes via encoded prefix lengths.
    def byte_offset(char_offset: int) -> int:
        return len(text[:char_offset].encode("utf-8"))

    edits = []
    label = compiled.rule.target_param
    token_json = json.dumps(compiled.token.decode()).encode()
    for node in nodes:
        if not compiled.path_expr.matches(node.path):
            continue
        if compiled.rule.action == "drop_field" and node.member_start is not None:
            start, end = node.member_start, node.member_end
            replacement = b""
        else:
            start, end = node.value_start, node.value_end
            replacement = token_json
        edits.append(
            _Edit(byte_offset(start), byte_offset(end), replacement, compiled.id, f"json:{label}")
        )
    return edits


def _query_edits(query: bytes, rules: list[CompiledRule]) -> list[_Edit]:
    edits = []
    segments = list(_form_segments(query))
    for index, (start, end, raw_name) in enumerate(segments):
        try:
            name = raw_name.decode("utf-8")
        except UnicodeDecodeError:
            continue
        for compiled in rules:
            if not compiled.name_re.search(name):
                continue
            target = f"query:{name}"
            if compiled.rule.action == "drop_field":
                if index < len(segments) - 1:
                    edits.append(_Edit(start, end + 1, b"", compiled.id, target))
                elif index > 0:
                    edits.append(_Edit(start - 1, end, b"", compiled.id, target))
                else:
                    edits.append(_Edit(start, end, b"", compiled.id, target))
            else:
                value_start = start + len(raw_name) + 1
                if value_start <= end:
                    edits.append(_Edit(value_start, end, compiled.token, compiled.id, target))
            break
    return edits


def _filter_headers(headers, rules: list[CompiledRule], report: RedactionReport):
    kept = []
    for name, value in headers:
        action = None
        for compiled in rules:
            if compiled.name_re.fullmatch(name.lower()):
                action = compiled
                break
        if action is None:
            kept.append((name, value))
            continue
        target = f"header:{name.lower()}"
        if action.rule.action == "drop_field":
            report.add(action.id, target, 1)
        else:
            token = action.token.decode()
            if value != token:
                kept.append((name, token))
                report.add(action.id, target, 1)
            else:
                kept.append((name, value))
    return kept


def apply(exchange: Exchange, rules) -> tuple[Exchange, RedactionReport]:
    """Filter a captured copy; returns (filtered exchange, report).

    The input exchange is never modified. Deterministic for identical inputs.
    """
    filtered = exchange.copy()
    report = RedactionReport(
        truncated=exchange.request_truncated or exchange.response_truncated
    )

    parts = split_url(exchange.url)
    path = parts.path

    def applicable(compiled: CompiledRule) -> bool:
        if compiled.rule.target_kind == "url_path_prefix":
            return True  # its prefixes are the target, checked at use
        if not compiled.rule.path_scope:
            return True
        return path_under(path, compiled.rule.path_scope)

    active = [c for c in rules if applicable(c)]

    header_rules = [c for c in active if c.rule.target_kind == "header"]
    form_rules = [c for c in active if c.rule.target_kind == "request_form_field"]
    query_rules = [c for c in active if c.rule.target_kind == "url_query_param"]
    pattern_rules = [c for c in active if c.rule.target_kind == "body_pattern"]
    structured_rules = [c for c in active if c.rule.target_kind == "structured_path"]
    path_rules = [c for c in active if c.rule.target_kind == "url_path_prefix"]

    # Correspondence defense: bodies on excluded paths are not stored at all.
    body_blanked = False
    for compiled in path_rules:
        if path_under(path, compiled.rule.path_scope):
            for direction in ("request_body", "response_body"):
                body = getattr(filtered, direction)
                if body and body != compiled.token:
                    setattr(filtered, direction, compiled.token)
                    report.add(compiled.id, f"path:{direction}", 1)
            body_blanked = True
            break

    filtered.request_headers = _filter_headers(filtered.request_headers, header_rules, report)
    filtered.response_headers = _filter_headers(filtered.response_headers, header_rules, report)

    if query_rules and parts.query:
        query = parts.query.encode("utf-8")
        new_query = _apply_edits(query, _query_edits(query, query_rules), report)
        if new_query != query:
            base, _, _ = exchange.url.partition("?")
            fragmentless = new_query.decode("utf-8")
            filtered.url = base + ("?" + fragmentless if fragmentless else "")

    if not body_blanked:
        request_edits: list[_Edit] = []
        response_edits: list[_Edit] = []

        content_type = _content_type(filtered.request_headers)
        if form_rules and filtered.request_body and (
            FORM_CONTENT_TYPE in content_type
            or (not content_type and _looks_like_form(filtered.request_body))
        ):
            request_edits.extend(_form_edits(filtered.request_body, form_rules))

        for compiled in pattern_rules:
            request_edits.extend(_pattern_edits(filtered.request_body, compiled))
            response_edits.extend(_pattern_edits(filtered.response_body, compiled))

        for compiled in structured_rules:
            if filtered.request_body:
                request_edits.extend(_structured_edits(filtered.request_body, compiled, report))
            if filtered.response_body:
                response_edits.extend(_structured_edits(filtered.response_body, compiled, report))

        filtered.request_body = _apply_edits(filtered.request_body, request_edits, report)
        filtered.response_body = _apply_edits(filtered.response_body, response_edits, report)

    return filtered, report
