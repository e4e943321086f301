"""Aggregate-only export: the single way data leaves the store.

Rows group by vetted dimensions only, every row must aggregate at least k_min
distinct pseudonyms, and output never carries pseudonyms, paths or bodies.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

from ..errors import ValidationError
from .records import CaptureRecord

ALLOWED_DIMENSIONS = ("category", "entry", "day", "week", "month", "status_class")


@dataclass(frozen=True)
class AggregateQuery:
    dimensions: tuple[str, ...]
    k_min: int

    def validate(self, k_floor: int) -> None:
        if not self.dimensions:
            raise ValidationError("aggregate query needs at least one dimension")
        for dim in self.dimensions:
            if dim not in ALLOWED_DIMENSIONS:
                raise ValidationError(
                    f"dimension {dim!r} is not exportable"
                    f" (allowed: {', '.join(ALLOWED_DIMENSIONS)})"
                )
        if self.k_min < k_floor:
            raise ValidationError(f"k_min {self.k_min} is below the configured floor {k_floor}")


def _dimension_value(record: CaptureRecord, dim: str, category_of) -> str:
    if dim == "category":
        return category_of(record.entry_id, record.whitelist_version) or "unknown"
    if dim == "entry":
        return record.entry_id
    if dim == "day":
        return record.ts.date().isoformat()
    if dim == "week":
        year, week, _ = record.ts.isocalendar()
        return f"{year}-W{week:02d}"
    if dim == "month":
        return f"{record.ts.year:04d}-{record.ts.month:02d}"
    if dim == "status_class":
        return f"{record.status // 100}xx"
    raise ValidationError(f"dimension {dim!r} is not exportable")


@dataclass
class AggregateTable:
    dimensions: tuple[str, ...]
    rows: list[tuple[tuple[str, ...], int]]  # (dimension values, capture count)
    suppressed_groups: int

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(",".join(self.dimensions + ("captures",)) + "\n")
        for values, count in self.rows:
            out.write(",".join(values + (str(count),)) + "\n")
        return out.getvalue()


def export_aggregate(
    records,
    query: AggregateQuery,
    k_floor: int,
    category_of=lambda entry_id, version: None,
) -> AggregateTable:
    """Grouped capture counts with k-anonymity suppression.

    `category_of` resolves an entry to its category via the snapshot that
    version belongs to; the store itself keeps no such mapping.
    """
    query.validate(k_floor)
    groups: dict[tuple[str, ...], tuple[int, set[str]]] = {}
    for record in records:
        key = tuple(_dimension_value(record, dim, category_of) for dim in query.dimensions)
        count, pseudonyms = groups.get(key, (0, set()))
        pseudonyms.add(record.pseudonym)
        groups[key] = (count + 1, pseudonyms)

    rows = []
    suppressed = 0
    for key in sorted(groups):
        count, pseudonyms = groups[key]
        if len(pseudonyms) < query.k_min:
            suppressed += 1
            continue
        rows.append((key, count))
    return AggregateTable(dimensions=query.dimensions, rows=rows, suppressed_groups=suppressed)
