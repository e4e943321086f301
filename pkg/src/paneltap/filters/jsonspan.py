"""Span-tracking JSON walker.

Structured-path redaction must not re-serialize the document (that would
perturb bytes far away from the redacted field), so this module locates the
exact character span of each value, and of each object member, in the
original text. It is only ever run on text that json.loads already accepted.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from ..errors import ValidationError


class JsonSpanError(Exception):
    """Walker disagreed with the text; callers treat the body as unparseable."""


ANY = "*"
DEEP = "**"

_NUMBER_RE = re.compile(r"-?(?:0|[1-9][0-9]*)(?:\.[0-9]+)?(?:[eE][+-]?[0-9]+)?")
_WS = " \t\n\r"


@dataclass(frozen=True)
class PathExpr:
    segments: tuple[object, ...]  # str key | int index | ANY
    deep: bool = False

    def matches(self, path: tuple) -> bool:
        if self.deep:
            want = len(self.segments)
            if len(path) < want:
                return False
            path = path[-want:]
        elif len(path) != len(self.segments):
            return False
        for pattern, actual in zip(self.segments, path):
            if pattern == ANY:
                continue
            if isinstance(pattern, int):
                if not isinstance(actual, int) or actual != pattern:
                    return False
            elif not isinstance(actual, str) or actual != pattern:
                return False
        return True


_SEGMENT_RE = re.compile(r"^(?P<key>[^\[\]]*)(?P<indices>(?:\[(?:\*|\d+)\])*)$")


def parse_path_expr(expr: str) -> PathExpr:
    """Parse "comments[*].author", "*.email", "items[0]", "**.password"."""
    expr = expr.strip()
    if not expr:
        raise ValidationError("empty structured path expression")
    deep = False
    if expr.startswith("**"):
        deep = True
        expr = expr[2:].lstrip(".")
        if not expr:
            raise ValidationError("deep wildcard needs a trailing path")
    segments: list[object] = []
    for part in expr.split("."):
        matched = _SEGMENT_RE.match(part)
        if not matched:
            raise ValidationError(f"bad path segment {part!r} in {expr!r}")
        key = matched.group("key")
        if key:
            segments.append(ANY if key == "*" else key)
        elif not matched.group("indices"):
            raise ValidationError(f"empty path segment in {expr!r}")
        for index in re.findall(r"\[(\*|\d+)\]", matched.group("indices")):
            segments.append(ANY if index == "*" else int(index))
    return PathExpr(segments=tuple(segments), deep=deep)


@dataclass(frozen=True)
class Node:
    path: tuple
    value_start: int
    value_end: int
    # For object members: span that removes "key": value plus one separator.
    member_start: int | None = None
    member_end: int | None = None


def _skip_ws(text: str, i: int) -> int:
    while i < len(text) and text[i] in _WS:
        i += 1
    return i


def _string_end(text: str, i: int) -> int:
    # text[i] is the opening quote; returns index just past the closing quote.
    j = i + 1
    while j < len(text):
        char = text[j]
        if char == "\\":
            j += 2
            continue
        if char == '"':
            return j + 1
        j += 1
    raise JsonSpanError("unterminated string")


def walk(text: str) -> list[Node]:
    """All value nodes with their spans; object members carry removal spans."""
    nodes: list[Node] = []

    def parse_value(i: int, path: tuple) -> int:
        i = _skip_ws(text, i)
        if i >= len(text):
            raise JsonSpanError("unexpected end of document")
        char = text[i]
        if char == "{":
            return parse_object(i, path)
        if char == "[":
            return parse_array(i, path)
        start = i
        if char == '"':
            end = _string_end(text, i)
        elif text.startswith("true", i):
            end = i + 4
        elif text.startswith("false", i):
            end = i + 5
        elif text.startswith("null", i):
            end = i + 4
        else:
            matched = _NUMBER_RE.match(text, i)
            if not matched:
                raise JsonSpanError(f"unexpected character {char!r} at {i}")
            end = matched.end()
        nodes.append(Node(path=path, value_start=start, value_end=end))
        return end

    def parse_object(i: int, path: tuple) -> int:
        open_at = i
        i += 1
        members: list[dict] = []
        while True:
            i = _skip_ws(text, i)
            if i < len(text) and text[i] == "}":
                i += 1
                break
            key_start = i
            key_end = _string_end(text, i)
            key = json.loads(text[key_start:key_end])
            i = _skip_ws(text, key_end)
            if i >= len(text) or text[i] != ":":
                raise JsonSpanError(f"expected ':' at {i}")
            value_end = parse_value(i + 1, path + (key,))
            members.append(
                {"key": key, "key_start": key_start, "value_end": value_end, "comma_after": None}
            )
            i = _skip_ws(text, value_end)
            if i < len(text) and text[i] == ",":
                members[-1]["comma_after"] = i
                i += 1
            elif i < len(text) and text[i] == "}":
                i += 1
                break
            else:
                raise JsonSpanError(f"expected ',' or '}}' at {i}")
        for position, member in enumerate(members):
            if position > 0:
                member_start = members[position - 1]["comma_after"]
                member_end = member["value_end"]
            elif member["comma_after"] is not None:
                member_start = member["key_start"]
                member_end = member["comma_after"] + 1
            else:
                member_start = member["key_start"]
                member_end = member["value_end"]
            # Re-tag the value node for this member with its removal span.
            for index in range(len(nodes) - 1, -1, -1):
                node = nodes[index]
                if node.path == path + (member["key"],) and node.value_end == member["value_end"]:
                    nodes[index] = Node(
                        path=node.path,
                        value_start=node.value_start,
                        value_end=node.value_end,
                        member_start=member_start,
                        member_end=member_end,
                    )
                    break
        nodes.append(Node(path=path, value_start=open_at, value_end=i))
        return i

    def parse_array(i: int, path: tuple) -> int:
        open_at = i
        i += 1
        index = 0
        while True:
            i = _skip_ws(text, i)
            if i < len(text) and text[i] == "]":
                i += 1
                break
            i = parse_value(i, path + (index,))
            index += 1
            i = _skip_ws(text, i)
            if i < len(text) and text[i] == ",":
                i += 1
            elif i < len(text) and text[i] == "]":
                i += 1
                break
            else:
                raise JsonSpanError(f"expected ',' or ']' at {i}")
        nodes.append(Node(path=path, value_start=open_at, value_end=i))
        return i

    end = parse_value(0, ())
    if _skip_ws(text, end) != len(text):
        raise JsonSpanError("trailing content after document")
    return nodes
