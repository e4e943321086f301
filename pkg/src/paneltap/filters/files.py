"""Rule file loading. One YAML document per scope; see docs/rules_schema.md."""

from __future__ import annotations

from pathlib import Path

import yaml

from ..errors import ValidationError
from .model import GLOBAL_SCOPE, FilterRule


def rules_from_mapping(doc: dict, source: str = "<mapping>") -> list[FilterRule]:
    if not isinstance(doc, dict) or "scope" not in doc or "rules" not in doc:
        raise ValidationError(f"{source}: rule file needs 'scope' and 'rules'")
    scope = str(doc["scope"])
    if scope != GLOBAL_SCOPE and not scope:
        raise ValidationError(f"{source}: scope must be 'global' or an entry id")
    rules = []
    for raw in doc["rules"]:
        target = raw.get("target", {})
        if not isinstance(target, dict) or "kind" not in target:
            raise ValidationError(f"{source}: rule {raw.get('id')!r} needs target.kind")
        rules.append(
            FilterRule(
                id=str(raw.get("id", "")),
                scope=scope,
                target_kind=str(target["kind"]),
                target_param=str(target.get("param", "")),
                action=str(raw.get("action", "redact_span")),
                flag=str(raw.get("flag", "")),
                path_scope=tuple(raw.get("paths", []) or []),
            )
        )
    return rules


def load_rules_file(path: str | Path) -> list[FilterRule]:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ValidationError(f"{path}: not valid YAML: {exc}") from None
    return rules_from_mapping(doc, source=str(path))


def load_rules_dir(directory: str | Path) -> list[FilterRule]:
    directory = Path(directory)
    rules: list[FilterRule] = []
    if not directory.exists():
        return rules
    for path in sorted(directory.glob("*.yaml")):
        rules.extend(load_rules_file(path))
    return rules
