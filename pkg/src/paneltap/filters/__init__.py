"""Sensitive-data filtering of captured copies before storage."""

from .model import (
    GLOBAL_SCOPE,
    FilterRule,
    Hit,
    RedactionReport,
    RuleSet,
    compile_rules,
    redaction_token,
)
from .engine import apply
from .builtin import builtin_global_rules, builtin_rule_set
from .coverage import CoverageReport, ProbeResult, coverage_check, staleness_probe
from .files import load_rules_dir, load_rules_file, rules_from_mapping
from .patterns import iban_valid, luhn_valid

__all__ = [
    "GLOBAL_SCOPE",
    "FilterRule",
    "Hit",
    "RedactionReport",
    "RuleSet",
    "compile_rules",
    "redaction_token",
    "apply",
    "builtin_global_rules",
    "builtin_rule_set",
    "CoverageReport",
    "ProbeResult",
    "coverage_check",
    "staleness_probe",
    "load_rules_dir",
    "load_rules_file",
    "rules_from_mapping",
    "iban_valid",
    "luhn_valid",
]
