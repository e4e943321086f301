"""Redaction rule model and compilation.

A rule set compiles up front - bad regexes, unknown pattern names or
malformed path expressions are configuration errors, and a pipeline refuses
to start on any of them rather than running with holes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..errors import ValidationError
from .jsonspan import PathExpr, parse_path_expr
from .patterns import NAMED_PATTERNS

TARGET_KINDS = (
    "request_form_field",
    "header",
    "body_pattern",
    "structured_path",
    "url_query_param",
    "url_path_prefix",  # built-in correspondence defense only
)

ACTIONS = ("drop_field", "redact_span")

# Service tags: the five sensitive flags plus the two extra protections.
SERVICE_FLAGS = (
    "credentials",
    "sensitive-personal",
    "financial",
    "email",
    "other",
    "third-party",
    "correspondence",
)

GLOBAL_SCOPE = "global"


def redaction_token(flag: str) -> bytes:
    return f"[REDACTED:{flag}]".encode()


@dataclass(frozen=True)
class FilterRule:
    id: str
    scope: str  # GLOBAL_SCOPE or an entry id
    target_kind: str
    target_param: str
    action: str
    flag: str
    # Optional URL path prefixes limiting where the rule applies ("" = site-wide).
    path_scope: tuple[str, ...] = ()


@dataclass(frozen=True)
class CompiledRule:
    rule: FilterRule
    name_re: re.Pattern[str] | None = None  # form field / header / query param
    body_re: re.Pattern[bytes] | None = None  # body_pattern candidate
    body_validator: object = None  # optional match validator
    path_expr: PathExpr | None = None  # structured_path

    @property
    def id(self) -> str:
        return self.rule.id

    @property
    def flag(self) -> str:
        return self.rule.flag

    @property
    def token(self) -> bytes:
        return redaction_token(self.rule.flag)


def compile_rule(rule: FilterRule) -> CompiledRule:
    if rule.target_kind not in TARGET_KINDS:
        raise ValidationError(f"rule {rule.id!r}: unknown target kind {rule.target_kind!r}")
    if rule.action not in ACTIONS:
        raise ValidationError(f"rule {rule.id!r}: unknown action {rule.action!r}")
    if rule.flag not in SERVICE_FLAGS:
        raise ValidationError(f"rule {rule.id!r}: unknown flag {rule.flag!r}")
    if not rule.id:
        raise ValidationError("rule without an id")

    if rule.target_kind in ("request_form_field", "url_query_param"):
        try:
            return CompiledRule(rule=rule, name_re=re.compile(rule.target_param))
        except re.error as exc:
            raise ValidationError(f"rule {rule.id!r}: bad name pattern: {exc}") from None

    if rule.target_kind == "header":
        name = rule.target_param.strip().lower()
        if not name:
            raise ValidationError(f"rule {rule.id!r}: header rule needs a header name")
        return CompiledRule(rule=rule, name_re=re.compile(re.escape(name), re.IGNORECASE))

    if rule.target_kind == "body_pattern":
        param = rule.target_param
        if param.startswith("re:"):
            try:
                return CompiledRule(rule=rule, body_re=re.compile(param[3:].encode()))
            except re.error as exc:
                raise ValidationError(f"rule {rule.id!r}: bad body regex: {exc}") from None
        if param not in NAMED_PATTERNS:
            raise ValidationError(
                f"rule {rule.id!r}: unknown pattern {param!r}"
                f" (known: {', '.join(sorted(NAMED_PATTERNS))}, or re:<regex>)"
            )
        candidate, validator = NAMED_PATTERNS[param]
        return CompiledRule(rule=rule, body_re=candidate, body_validator=validator)

    if rule.target_kind == "structured_path":
        return CompiledRule(rule=rule, path_expr=parse_path_expr(rule.target_param))

    # url_path_prefix: the prefixes live in path_scope.
    if not rule.path_scope:
        raise ValidationError(f"rule {rule.id!r}: url_path_prefix rule needs path_scope prefixes")
    return CompiledRule(rule=rule)


@dataclass(frozen=True)
class RuleSet:
    """Immutable compiled rule collection, shareable across pipeline workers."""

    rules: tuple[CompiledRule, ...]

    def for_entry(self, entry_id: str | None) -> tuple[CompiledRule, ...]:
        return tuple(
            compiled
            for compiled in self.rules
            if compiled.rule.scope == GLOBAL_SCOPE or compiled.rule.scope == entry_id
        )

    def global_rules(self) -> tuple[CompiledRule, ...]:
        return tuple(c for c in self.rules if c.rule.scope == GLOBAL_SCOPE)


def compile_rules(rules) -> RuleSet:
    compiled = []
    seen: set[str] = set()
    for rule in rules:
        if rule.id in seen:
            raise ValidationError(f"duplicate rule id {rule.id!r}")
        seen.add(rule.id)
        compiled.append(compile_rule(rule))
    return RuleSet(rules=tuple(compiled))


@dataclass
class Hit:
    rule_id: str
    target: str
    count: int


@dataclass
class RedactionReport:
    hits: list[Hit] = field(default_factory=list)
    truncated: bool = False
    degraded: tuple[str, ...] = ()
    errors: tuple[str, ...] = ()

    def add(self, rule_id: str, target: str, count: int = 1) -> None:
        if count <= 0:
            return
        for hit in self.hits:
            if hit.rule_id == rule_id and hit.target == target:
                hit.count += count
                return
        self.hits.append(Hit(rule_id=rule_id, target=target, count=count))

    @property
    def total_hits(self) -> int:
        return sum(hit.count for hit in self.hits)

    def to_document(self) -> dict:
        return {
            "hits": [
                {"rule_id": hit.rule_id, "target": hit.target, "count": hit.count}
                for hit in self.hits
            ],
            "truncated": self.truncated,
            "degraded": list(self.degraded),
            "errors": list(self.errors),
        }

    @classmethod
    def from_document(cls, doc: dict) -> "RedactionReport":
        report = cls(
            truncated=doc.get("truncated", False),
            degraded=tuple(doc.get("degraded", [])),
            errors=tuple(doc.get("errors", [])),
        )
        for hit in doc.get("hits", []):
            report.hits.append(Hit(hit["rule_id"], hit["target"], hit["count"]))
        return report
