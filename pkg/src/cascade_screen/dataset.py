"""CSV ingestion, the in-memory labeled dataset and stratified fold assignment."""

import csv
import io
import os
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import (
    EmptyDatasetError,
    InsufficientClassError,
    RowError,
    SchemaError,
)
from .questionnaire import (
    BEHAVIORAL_ITEMS,
    BINARY_MASK,
    CANONICAL_ACE_ITEMS,
    DEFAULT_EXTRA_ACE_ITEMS,
    FEATURE_NAMES,
    FeatureVector,
    ParticipantRecord,
    encode_record,
    validate_record,
)

ACE_COLUMNS = tuple(f"ace_{name}" for name in CANONICAL_ACE_ITEMS + DEFAULT_EXTRA_ACE_ITEMS)
WHO5_COLUMNS = tuple(f"who5_q{i}" for i in range(1, 6))
MDI_COLUMNS = tuple(f"mdi_q{i:02d}" for i in range(1, 13))
GAD7_COLUMNS = tuple(f"gad7_q{i}" for i in range(1, 8))
ISI_COLUMNS = tuple(f"isi_q{i}" for i in range(1, 8))
LABEL_COLUMN = "suicidal_behavior"

CSV_COLUMNS = (
    ("id",)
    + ACE_COLUMNS
    + WHO5_COLUMNS
    + MDI_COLUMNS
    + GAD7_COLUMNS
    + ISI_COLUMNS
    + BEHAVIORAL_ITEMS
    + (LABEL_COLUMN,)
)
ITEM_COLUMNS = CSV_COLUMNS[1:-1]


class LoadMode(str, Enum):
    STRICT = "STRICT"
    IMPUTE_MODE = "IMPUTE_MODE"


@dataclass(frozen=True, eq=False)
class Dataset:
    """Labeled feature matrix.

    ``X`` is ``(n, d)`` float64, ``y`` is ``(n,)`` int in {0, 1}. ``records``
    holds the raw participant records when the dataset came from a CSV.
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple = FEATURE_NAMES
    binary_mask: tuple = BINARY_MASK
    ids: Optional[tuple] = None
    records: Optional[tuple] = None

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64, copy=True)
        y = np.array(self.y, dtype=np.int64, copy=True)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise SchemaError(f"inconsistent shapes X{X.shape} y{y.shape}")
        if X.shape[1] != len(self.feature_names) or len(self.binary_mask) != X.shape[1]:
            raise SchemaError("feature_names / binary_mask do not match X columns")
        if y.size and not np.isin(y, (0, 1)).all():
            raise SchemaError("labels must be 0/1")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "binary_mask", tuple(bool(b) for b in self.binary_mask))
        if self.ids is None:
            object.__setattr__(self, "ids", tuple(str(i) for i in range(X.shape[0])))

    @property
    def n(self):
        return int(self.X.shape[0])

    @property
    def positive_count(self):
        return int(self.y.sum())

    @property
    def prevalence(self):
        return self.positive_count / self.n if self.n else float("nan")

    @property
    def rows(self):
        return [
            FeatureVector(tuple(float(v) for v in x), int(label), self.feature_names)
            for x, label in zip(self.X, self.y)
        ]

    @classmethod
    def from_records(cls, records):
        records = tuple(records)
        if not records:
            raise EmptyDatasetError("no records")
        vectors = [encode_record(r) for r in records]
        return cls(
            X=np.array([v.values for v in vectors], dtype=np.float64),
            y=np.array([v.label for v in vectors], dtype=np.int64),
            ids=tuple(r.id for r in records),
            records=records,
        )

    def subset(self, rows):
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(
            self.X[rows], self.y[rows], self.feature_names, self.binary_mask,
            ids=tuple(self.ids[i] for i in rows),
            records=None if self.records is None else tuple(self.records[i] for i in rows),
        )

    def with_labels(self, y):
        """Same features, replaced labels (raw records are dropped)."""
        return Dataset(self.X, y, self.feature_names, self.binary_mask, ids=self.ids)

    def equals(self, other):
        return (
            self.feature_names == other.feature_names
            and self.binary_mask == other.binary_mask
            and self.ids == other.ids
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
        )


def record_from_row(cells):
    """Build a record from a mapping column -> int-or-None."""
    ace = {col[len("ace_"):]: cells[col] for col in ACE_COLUMNS}
    return ParticipantRecord(
        id=cells["id"],
        ace_items=ace,
        who5_items=tuple(cells[c] for c in WHO5_COLUMNS),
        mdi_items=tuple(cells[c] for c in MDI_COLUMNS),
        gad7_items=tuple(cells[c] for c in GAD7_COLUMNS),
        isi_items=tuple(cells[c] for c in ISI_COLUMNS),
        behavioral={name: cells[name] for name in BEHAVIORAL_ITEMS},
        label=cells[LABEL_COLUMN],
    )


def record_to_row(record):
    ace = dict(record.ace_items)
    values = [record.id]
    values += [ace[col[len("ace_"):]] for col in ACE_COLUMNS]
    values += list(record.who5_items) + list(record.mdi_items)
    values += list(record.gad7_items) + list(record.isi_items)
    values += [record.behavioral[name] for name in BEHAVIORAL_ITEMS]
    values.append(record.label)
    return ["" if v is None else str(v) for v in values]


def _open_text(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="utf-8", newline=""), True
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8"), newline=""), True
    if isinstance(source, io.TextIOBase):
        return source, False
    return io.TextIOWrapper(source, encoding="utf-8", newline=""), False


def _parse_cell(text):
    text = text.strip()
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        raise ValueError(f"not an integer: {text!r}") from None


def read_records(source, mode=LoadMode.STRICT):
    """Parse a cohort CSV into participant records (see :func:`load_csv`)."""
    mode = LoadMode(mode)
    stream, owned = _open_text(source)
    try:
        reader = csv.reader(stream)
        header = next(reader, None)
        if header is None:
            raise EmptyDatasetError("empty file (no header row)")
        header = [h.strip() for h in header]
        if header and header[0].startswith("﻿"):
            header[0] = header[0][1:]
        if tuple(header) != CSV_COLUMNS:
            missing = [c for c in CSV_COLUMNS if c not in header]
            extra = [c for c in header if c not in CSV_COLUMNS]
            raise SchemaError(
                f"header does not match schema (missing={missing[:5]}, "
                f"unexpected={extra[:5]}, or columns out of order)"
            )
        parsed = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(CSV_COLUMNS):
                raise RowError(line_no, None, f"expected {len(CSV_COLUMNS)} cells, got {len(row)}")
            cells = {"id": row[0].strip()}
            if not cells["id"]:
                raise RowError(line_no, "id", "missing id")
            for col, text in zip(CSV_COLUMNS[1:], row[1:]):
                try:
                    cells[col] = _parse_cell(text)
                except ValueError as exc:
                    raise RowError(line_no, col, str(exc)) from None
            parsed.append((line_no, cells))
    finally:
        if owned:
            stream.close()

    if not parsed:
        raise EmptyDatasetError("file has a header but no data rows")

    if mode is LoadMode.STRICT:
        for line_no, cells in parsed:
            for col in CSV_COLUMNS[1:]:
                if cells[col] is None:
                    raise RowError(line_no, col, "missing value")
    else:
        for line_no, cells in parsed:
            if cells[LABEL_COLUMN] is None:
                raise RowError(line_no, LABEL_COLUMN, "missing label cannot be imputed")
        complete = [c for _, c in parsed if all(c[col] is not None for col in ITEM_COLUMNS)]
        needs = any(c[col] is None for _, c in parsed for col in ITEM_COLUMNS)
        if needs and not complete:
            raise EmptyDatasetError("no complete rows to impute from")
        modes = {}
        for col in ITEM_COLUMNS:
            if complete:
                counts = Counter(c[col] for c in complete)
                top = max(counts.values())
                modes[col] = min(v for v, cnt in counts.items() if cnt == top)
        for _, cells in parsed:
            for col in ITEM_COLUMNS:
                if cells[col] is None:
                    cells[col] = modes[col]

    records = []
    for line_no, cells in parsed:
        record = record_from_row(cells)
        violations = validate_record(record)
        if violations:
            v = violations[0]
            raise RowError(line_no, _column_for(v.field), str(v))
        records.append(record)
    return records


def _column_for(field_name):
    if field_name.startswith("ace."):
        return "ace_" + field_name[4:]
    for prefix, cols in (("who5", WHO5_COLUMNS), ("mdi", MDI_COLUMNS),
                         ("gad7", GAD7_COLUMNS), ("isi", ISI_COLUMNS)):
        if field_name.startswith(prefix + "["):
            return cols[int(field_name[len(prefix) + 1:-1])]
    return LABEL_COLUMN if field_name == "label" else field_name


@dataclass(frozen=True)
class CsvIssue:
    line: Optional[int]
    column: Optional[str]
    message: str

    def __str__(self):
        where = "header" if self.line is None else f"line {self.line}"
        col = f", column {self.column!r}" if self.column else ""
        return f"{where}{col}: {self.message}"


def validate_csv(source) -> list:
    """Every problem in a cohort CSV, in file order; empty for a clean file.

    Unlike :func:`read_records` this keeps going after the first bad row.
    Blank cells are reported as missing values.
    """
    stream, owned = _open_text(source)
    issues = []
    try:
        reader = csv.reader(stream)
        header = next(reader, None)
        if header is None:
            return [CsvIssue(None, None, "empty file (no header row)")]
        header = [h.strip() for h in header]
        if header and header[0].startswith("\ufeff"):
            header[0] = header[0][1:]
        if tuple(header) != CSV_COLUMNS:
            missing = [c for c in CSV_COLUMNS if c not in header]
            extra = [c for c in header if c not in CSV_COLUMNS]
            return [CsvIssue(None, None, f"header does not match schema (missing={missing}, "
                                         f"unexpected={extra}, or columns out of order)")]
        n_rows = 0
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            n_rows += 1
            if len(row) != len(CSV_COLUMNS):
                issues.append(CsvIssue(line_no, None,
                                       f"expected {len(CSV_COLUMNS)} cells, got {len(row)}"))
                continue
            cells = {"id": row[0].strip()}
            if not cells["id"]:
                issues.append(CsvIssue(line_no, "id", "missing id"))
            bad = False
            for col, text in zip(CSV_COLUMNS[1:], row[1:]):
                try:
                    cells[col] = _parse_cell(text)
                except ValueError as exc:
                    issues.append(CsvIssue(line_no, col, str(exc)))
                    bad = True
            if bad:
                continue
            for v in validate_record(record_from_row(cells)):
                issues.append(CsvIssue(line_no, _column_for(v.field), str(v)))
        if n_rows == 0:
            issues.append(CsvIssue(None, None, "file has a header but no data rows"))
    finally:
        if owned:
            stream.close()
    return issues


def load_csv(source, mode=LoadMode.STRICT) -> Dataset:
    """Load a cohort CSV.

    Args:
        source: path, bytes, or a binary/text stream.
        mode: ``STRICT`` rejects any blank or invalid cell; ``IMPUTE_MODE``
            fills blank item cells with that column's mode over complete rows
            (smallest value on ties). Labels are never imputed.

    Raises:
        SchemaError: header missing columns or out of order.
        RowError: a bad row (carries ``line`` and ``column``).
        EmptyDatasetError: no header or no data rows.
    """
    return Dataset.from_records(read_records(source, mode))


def write_csv(records, dest):
    """Serialize records in the cohort CSV schema to a path or text stream."""
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            write_csv(records, fh)
        return
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for record in records:
        writer.writerow(record_to_row(record))


def records_to_csv_text(records):
    buf = io.StringIO()
    write_csv(records, buf)
    return buf.getvalue()


@dataclass(frozen=True, eq=False)
class FoldAssignment:
    k: int
    assignment: np.ndarray
    seed: int

    def __post_init__(self):
        a = np.array(self.assignment, dtype=np.int64, copy=True)
        a.flags.writeable = False
        object.__setattr__(self, "assignment", a)

    def test_indices(self, fold):
        return np.flatnonzero(self.assignment == fold)

    def train_indices(self, fold):
        return np.flatnonzero(self.assignment != fold)

    def splits(self):
        for fold in range(self.k):
            yield self.train_indices(fold), self.test_indices(fold)

    def fold_sizes(self):
        return np.bincount(self.assignment, minlength=self.k)


def stratified_kfold(y, k, seed, stratify=True) -> FoldAssignment:
    """Assign rows to ``k`` folds.

    Positives and negatives are shuffled separately with a generator seeded
    by ``seed``, then dealt round-robin: positives first, negatives continuing
    from the fold after the last positive. Fold sizes therefore differ by at
    most one and each fold's positive count is floor or ceil of ``n_pos / k``.

    ``y`` may be a label vector or a :class:`Dataset`. With ``stratify=False``
    all rows are shuffled together and dealt round-robin.
    """
    labels = np.asarray(y.y if isinstance(y, Dataset) else y, dtype=np.int64)
    k = int(k)
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)
    assignment = np.empty(labels.size, dtype=np.int64)
    if stratify:
        pos = np.flatnonzero(labels == 1)
        neg = np.flatnonzero(labels == 0)
        if pos.size < k or neg.size < k:
            raise InsufficientClassError(
                f"each class needs >= {k} members (positives={pos.size}, negatives={neg.size})"
            )
        order = np.concatenate([rng.permutation(pos), rng.permutation(neg)])
    else:
        if labels.size < k:
            raise InsufficientClassError(f"need >= {k} rows, got {labels.size}")
        order = rng.permutation(labels.size)
    assignment[order] = np.arange(order.size) % k
    return FoldAssignment(k, assignment, int(seed))
