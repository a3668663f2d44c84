"""Reading balance sheets and exposures, writing results."""
from __future__ import annotations

import csv
import hashlib
import json
import math
import re
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import NonPositiveEquity, ParseError, ValidationError
from .model import BankRecord, ExposureMatrix

BALANCE_COLUMNS = [
    "bank_id",
    "name",
    "equity",
    "external_assets",
    "external_liabilities",
    "interbank_assets",
    "interbank_liabilities",
    "total_assets",
]
EDGE_COLUMNS = ["lender_id", "borrower_id", "exposure"]
RANKING_COLUMNS = [
    "bank_id",
    "name",
    "total_assets",
    "impact",
    "vulnerability",
    "impact_rank",
    "vulnerability_rank",
]

_NUMBER = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


def _number(text: str, line: int, column: str, path) -> float:
    s = text.strip()
    if not _NUMBER.match(s):
        raise ParseError(line, column, f"not a plain decimal number: {text!r}", path)
    return float(s)


def _rows(path, expected: Sequence[str]):
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(1, None, "empty file", path) from None
        header = [h.strip() for h in header]
        if header != list(expected):
            raise ParseError(1, None, f"expected header {','.join(expected)}", path)
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(expected):
                raise ParseError(reader.line_num, None, f"expected {len(expected)} fields, got {len(row)}", path)
            yield reader.line_num, dict(zip(expected, row))


def read_balance_sheets(path) -> list[BankRecord]:
    """Parse the balance-sheet CSV.  An empty ``total_assets`` cell is derived."""
    records = []
    seen = set()
    for line, row in _rows(path, BALANCE_COLUMNS):
        bank_id = row["bank_id"].strip()
        if not bank_id:
            raise ParseError(line, "bank_id", "empty bank id", path)
        if bank_id in seen:
            raise ParseError(line, "bank_id", f"duplicate bank id {bank_id!r}", path)
        seen.add(bank_id)
        vals = {c: _number(row[c], line, c, path) for c in BALANCE_COLUMNS[2:7]}
        ta = row["total_assets"].strip()
        if vals["equity"] <= 0:
            raise NonPositiveEquity(bank_id, vals["equity"])
        try:
            records.append(
                BankRecord(
                    id=bank_id,
                    name=row["name"].strip(),
                    equity0=vals["equity"],
                    external_assets=vals["external_assets"],
                    external_liabilities=vals["external_liabilities"],
                    interbank_assets_total=vals["interbank_assets"],
                    interbank_liabilities_total=vals["interbank_liabilities"],
                    total_assets=_number(ta, line, "total_assets", path) if ta else None,
                )
            )
        except ValidationError as exc:
            raise ValidationError(f"line {line}: {exc}") from exc
    if not records:
        raise ParseError(2, None, "no banks found", path)
    return records


def read_edge_list(path, ids: Sequence[str]) -> ExposureMatrix:
    index = {b: k for k, b in enumerate(ids)}
    a = np.zeros((len(ids), len(ids)))
    for line, row in _rows(path, EDGE_COLUMNS):
        ends = []
        for col in ("lender_id", "borrower_id"):
            b = row[col].strip()
            if b not in index:
                raise ParseError(line, col, f"unknown bank id {b!r}", path)
            ends.append(index[b])
        i, j = ends
        if i == j:
            raise ParseError(line, "borrower_id", f"self exposure for bank {ids[i]!r}", path)
        x = _number(row["exposure"], line, "exposure", path)
        if not x > 0:
            raise ParseError(line, "exposure", f"exposure must be strictly positive, got {x!r}", path)
        if a[i, j]:
            raise ParseError(line, "borrower_id", f"duplicate pair ({ids[i]!r}, {ids[j]!r})", path)
        a[i, j] = x
    return ExposureMatrix(a)


def load_inputs(balance_csv, exposures_csv=None):
    """Records and, when an edge list is given, the exposure matrix (else ``None``)."""
    records = read_balance_sheets(balance_csv)
    exposures = None
    if exposures_csv is not None:
        exposures = read_edge_list(exposures_csv, [r.id for r in records])
    return records, exposures


# -- writers ----------------------------------------------------------------


def fmt(x) -> str:
    """Shortest round-trip text for a number; empty for NaN."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "" if math.isnan(x) else repr(float(x))
    return str(x)


def write_csv(path, columns: Sequence[str], rows: Iterable[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(row[c]) for c in columns])


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def write_edge_list(path, exposures: ExposureMatrix, ids: Sequence[str]) -> None:
    a = exposures.a
    rows = (
        {"lender_id": ids[i], "borrower_id": ids[j], "exposure": float(a[i, j])}
        for i, j in zip(*np.nonzero(a))
    )
    write_csv(path, EDGE_COLUMNS, rows)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
