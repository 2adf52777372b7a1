"""Report rows and their CSV / JSON serialization."""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from fractions import Fraction

CSV_FIELDS = (
    "monomial",
    "N",
    "M",
    "estimator",
    "value_re",
    "value_im",
    "stderr",
    "abs_error_vs_limit",
    "runtime_ms",
)
ESTIMATORS = ("limit", "exact", "exact-sampled", "mc", "error")


@dataclass(frozen=True)
class ReportRow:
    monomial: str
    N: int | None
    M: int | None
    estimator: str
    value_re: float | None = None
    value_im: float | None = None
    stderr: float | None = None
    abs_error_vs_limit: float | None = None
    runtime_ms: float = 0.0
    exact: Fraction | None = None
    error: str | None = None

    def sort_key(self):
        return (self.monomial, -1 if self.N is None else self.N, ESTIMATORS.index(self.estimator))

    def as_dict(self) -> dict:
        out = {name: getattr(self, name) for name in CSV_FIELDS}
        if self.exact is not None:
            out["exact"] = f"{self.exact.numerator}/{self.exact.denominator}"
        if self.error is not None:
            out["error"] = self.error
        return out


def sort_rows(rows) -> list[ReportRow]:
    return sorted(rows, key=ReportRow.sort_key)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return format(value, ".17g")
    return str(value)


def to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for row in rows:
        writer.writerow([_cell(getattr(row, name)) for name in CSV_FIELDS])
    return buf.getvalue()


def _json_value(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def to_json(rows) -> str:
    payload = [{k: _json_value(v) for k, v in row.as_dict().items()} for row in rows]
    return json.dumps(payload, indent=2) + "\n"


def emit_report(rows, fmt: str = "csv", path=None) -> str:
    """Serialize rows; write to ``path`` (stdout when None or "-"). Returns the text."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown report format {fmt!r}")
    text = to_csv(rows) if fmt == "csv" else to_json(rows)
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def _parse_cell(name: str, raw: str):
    if raw == "":
        return None
    if name in ("N", "M"):
        return int(raw)
    if name in ("monomial", "estimator"):
        return raw
    return float(raw)


def read_csv(text: str) -> list[dict]:
    reader = csv.DictReader(io.StringIO(text))
    return [{name: _parse_cell(name, rec[name]) for name in CSV_FIELDS} for rec in reader]
