"""Batch figure generation from edgeform simulation CSV logs."""

from .schema import RunTable, SchemaError, envelope_violations, parse_csv

__all__ = ["RunTable", "SchemaError", "envelope_violations", "parse_csv"]
