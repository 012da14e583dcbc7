"""Tabular results with validated rows and CSV/JSON export.

Rows hold plain floats only. Everything descriptive (config digest, tool
version, wall time, peak summaries) rides in ``metadata`` and never in the
rows, so identical configurations produce byte-identical files.

NaN anywhere in a row aborts table construction with a diagnostic naming
the column and row. Infinity is banned too, except in columns explicitly
whitelisted via ``allow_inf`` (the divergence sentinel of the effective
parameter sweep); CSV renders it as the literal token ``inf`` and JSON as
the string ``"inf"``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping

__all__ = ["TableError", "ResultTable"]


class TableError(ValueError):
    """A result table violated its own contract."""


def format_value(x: float) -> str:
    """One cell: 17 significant digits, round-trip exact for doubles."""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _jsonable(value):
    # floats need the inf -> "inf" treatment; containers recurse
    if isinstance(value, float):
        if math.isnan(value):
            raise TableError("NaN is not representable in JSON output")
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, (str, int, bool)) or value is None:
        return value
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    try:
        return _jsonable(float(value))  # numpy scalars
    except (TypeError, ValueError):
        raise TableError(f"metadata value {value!r} is not serializable")


@dataclass(frozen=True)
class ResultTable:
    """Rectangular table of real values plus provenance metadata."""

    columns: tuple[str, ...]
    rows: tuple[tuple[float, ...], ...]
    metadata: dict = field(default_factory=dict)
    allow_inf: tuple[str, ...] = ()

    def __post_init__(self):
        columns = tuple(str(c) for c in self.columns)
        object.__setattr__(self, "columns", columns)
        if not columns:
            raise TableError("table needs at least one column")
        if len(set(columns)) != len(columns):
            raise TableError(f"duplicate column names in {columns}")
        unknown = set(self.allow_inf) - set(columns)
        if unknown:
            raise TableError(f"allow_inf names unknown columns {sorted(unknown)}")
        inf_ok = [c in self.allow_inf for c in columns]
        rows = []
        for i, row in enumerate(self.rows):
            vals = tuple(float(v) for v in row)
            if len(vals) != len(columns):
                raise TableError(
                    f"row {i} has {len(vals)} values, expected {len(columns)}"
                )
            for c, v in enumerate(vals):
                if math.isnan(v):
                    raise TableError(f"NaN in column {columns[c]!r} at row {i}")
                if math.isinf(v) and not inf_ok[c]:
                    raise TableError(
                        f"infinity in column {columns[c]!r} at row {i}"
                    )
            rows.append(vals)
        object.__setattr__(self, "rows", tuple(rows))
        object.__setattr__(self, "allow_inf", tuple(self.allow_inf))

    def column(self, name: str) -> tuple[float, ...]:
        try:
            k = self.columns.index(name)
        except ValueError:
            raise KeyError(f"no column {name!r}; have {self.columns}") from None
        return tuple(row[k] for row in self.rows)

    # -- export ------------------------------------------------------------

    def to_csv(self) -> str:
        """Header plus data lines. Metadata is deliberately not included."""
        lines = [",".join(self.columns)]
        lines.extend(",".join(format_value(v) for v in row) for row in self.rows)
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "columns": list(self.columns),
            "rows": [[_jsonable(v) for v in row] for row in self.rows],
            "metadata": _jsonable(self.metadata),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, allow_nan=False) + "\n"

    def write(self, path, fmt: str = "csv") -> None:
        if fmt not in ("csv", "json"):
            raise TableError(f"unknown output format {fmt!r}")
        text = self.to_csv() if fmt == "csv" else self.to_json()
        with open(path, "w", encoding="ascii") as fh:
            fh.write(text)


def parse_json_value(value):
    """Undo the JSON inf encoding for a single cell."""
    if value == "inf":
        return math.inf
    if value == "-inf":
        return -math.inf
    return float(value)


def table_from_json_dict(doc: Mapping) -> ResultTable:
    """Rebuild a table from ``to_json_dict`` output (service responses)."""
    columns = tuple(str(c) for c in doc["columns"])
    rows = tuple(
        tuple(parse_json_value(v) for v in row) for row in doc["rows"]
    )
    inf_cols = tuple(
        c for k, c in enumerate(columns)
        if any(math.isinf(row[k]) for row in rows)
    )
    return ResultTable(columns=columns, rows=rows,
                       metadata=dict(doc.get("metadata") or {}),
                       allow_inf=inf_cols)
