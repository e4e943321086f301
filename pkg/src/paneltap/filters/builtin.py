"""The always-on global rule set.

Covers the categories every deployment must strip regardless of per-site
rules: credentials (form fields, query params, auth headers), payment cards
and bank account numbers, email addresses, and - as defense in depth, these
paths are normally excluded before capture - configured correspondence paths.
"""

from __future__ import annotations

from .model import GLOBAL_SCOPE, FilterRule, RuleSet, compile_rules

CREDENTIAL_FIELD_PATTERN = r"(?i)(password|passwd|passphrase|pwd|\bpin\b|^pin$|secret|api[-_]?key|auth[-_]?token)"

AUTH_HEADERS = ("authorization", "proxy-authorization", "x-api-key", "x-auth-token")


def builtin_global_rules(correspondence_paths=()) -> list[FilterRule]:
    rules = [
        FilterRule(
            id="global-credentials-form",
            scope=GLOBAL_SCOPE,
            target_kind="request_form_field",
            target_param=CREDENTIAL_FIELD_PATTERN,
            action="drop_field",
            flag="credentials",
        ),
        FilterRule(
            id="global-credentials-query",
            scope=GLOBAL_SCOPE,
            target_kind="url_query_param",
            target_param=CREDENTIAL_FIELD_PATTERN,
            action="drop_field",
            flag="credentials",
        ),
    ]
    for header in AUTH_HEADERS:
        rules.append(
            FilterRule(
                id=f"global-credentials-header-{header}",
                scope=GLOBAL_SCOPE,
                target_kind="header",
                target_param=header,
                action="drop_field",
                flag="credentials",
            )
        )
    rules.extend(
        [
            FilterRule(
                id="global-financial-card",
                scope=GLOBAL_SCOPE,
                target_kind="body_pattern",
                target_param="payment-card",
                action="redact_span",
                flag="financial",
            ),
            FilterRule(
                id="global-financial-iban",
                scope=GLOBAL_SCOPE,
                target_kind="body_pattern",
                target_param="iban",
                action="redact_span",
                flag="financial",
            ),
            FilterRule(
                id="global-email",
                scope=GLOBAL_SCOPE,
                target_kind="body_pattern",
                target_param="email",
                action="redact_span",
                flag="email",
            ),
        ]
    )
    if correspondence_paths:
        rules.append(
            FilterRule(
                id="global-correspondence-paths",
                scope=GLOBAL_SCOPE,
                target_kind="url_path_prefix",
                target_param="",
                action="redact_span",
                flag="correspondence",
                path_scope=tuple(correspondence_paths),
            )
        )
    return rules


def builtin_rule_set(correspondence_paths=()) -> RuleSet:
    return compile_rules(builtin_global_rules(correspondence_paths))
