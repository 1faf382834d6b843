from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

from .schema import FeatureSchema

Value = Optional[Union[float, str]]
MISSING_MARKERS = frozenset({"", "NA", "NaN", "nan", "null"})


class CsvFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class RawRecord:
    record_id: str
    values: tuple[Value, ...]  # aligned with schema.columns; None marks a missing cell

    @property
    def missing(self) -> tuple[bool, ...]:
        return tuple(v is None for v in self.values)


def load_csv(path, schema: FeatureSchema) -> list[RawRecord]:
    """Parse a header-led CSV into records ordered as in the file.

    The header must contain the schema's id column and every feature column
    (any order); unknown columns are rejected.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_csv(fh, schema)


def parse_csv(fh: Iterable[str], schema: FeatureSchema) -> list[RawRecord]:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise CsvFormatError("file is empty (no header)", line=1) from None
    header = [h.strip() for h in header]
    expected = set(schema.names) | {schema.id_column}
    unknown = [h for h in header if h not in expected]
    if unknown:
        raise CsvFormatError(f"unknown column(s) {unknown}", line=1)
    absent = sorted(expected - set(header))
    if absent:
        raise CsvFormatError(f"missing column(s) {absent}", line=1)
    if len(set(header)) != len(header):
        raise CsvFormatError("duplicate column in header", line=1)

    id_pos = header.index(schema.id_column)
    positions = [header.index(name) for name in schema.names]
    kinds = [c.kind for c in schema.columns]
    allow_missing = [c.missing for c in schema.columns]
    records: list[RawRecord] = []
    seen: set[str] = set()
    for row in reader:
        line = reader.line_num
        if not row:
            continue
        if len(row) != len(header):
            raise CsvFormatError(f"expected {len(header)} fields, got {len(row)}", line=line)
        rid = row[id_pos].strip()
        if not rid:
            raise CsvFormatError("empty record id", line=line)
        if rid in seen:
            raise CsvFormatError(f"duplicate record id {rid!r}", line=line)
        seen.add(rid)
        values: list[Value] = []
        for pos, kind, name, ok_missing in zip(positions, kinds, schema.names, allow_missing):
            cell = row[pos].strip()
            if cell in MISSING_MARKERS:
                if not ok_missing:
                    raise CsvFormatError(f"missing value in column {name!r}", line=line)
                values.append(None)
            elif kind == "numeric":
                try:
                    values.append(float(cell))
                except ValueError:
                    raise CsvFormatError(f"non-numeric value {cell!r} in column {name!r}", line=line) from None
            else:
                values.append(cell)
        records.append(RawRecord(rid, tuple(values)))
    return records


def format_records(records: Sequence[RawRecord], schema: FeatureSchema) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([schema.id_column] + schema.names)
    for r in records:
        writer.writerow([r.record_id] + ["" if v is None else (repr(v) if isinstance(v, float) else v) for v in r.values])
    return out.getvalue()


def write_csv(path, records: Sequence[RawRecord], schema: FeatureSchema) -> None:
    from ..io_utils import atomic_write_text

    atomic_write_text(path, format_records(records, schema))
