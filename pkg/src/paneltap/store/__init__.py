"""Encrypted append-only persistence, retention and aggregate export."""

from .records import CaptureRecord, new_record_id
from .capture_store import RAW_ACCESS_ROLES, CaptureStore, PurgeReport
from .retention import RetentionPolicy, add_years, purge_due
from .aggregate import ALLOWED_DIMENSIONS, AggregateQuery, AggregateTable, export_aggregate
from .frames import generate_key_file, load_key

__all__ = [
    "CaptureRecord",
    "new_record_id",
    "RAW_ACCESS_ROLES",
    "CaptureStore",
    "PurgeReport",
    "RetentionPolicy",
    "add_years",
    "purge_due",
    "ALLOWED_DIMENSIONS",
    "AggregateQuery",
    "AggregateTable",
    "export_aggregate",
    "generate_key_file",
    "load_key",
]
