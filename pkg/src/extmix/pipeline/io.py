"""CSV input and output for datasets."""

from __future__ import annotations

import csv
import warnings
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..exceptions import LoadError, UsageError
from ..model import Dataset

MISSING_TOKENS = frozenset({"", "na", "nan", "null", "none", "-"})


class DroppedRowsWarning(UserWarning):
    """Rows with missing values were removed while loading."""


def load_csv(path, columns: Optional[Sequence] = None, return_dropped: bool = False):
    """Read numeric columns from a CSV file with a header row.

    Parameters
    ----------
    path : path-like
    columns : sequence of str or int, optional
        Column names or positions to keep; all columns by default.
    return_dropped : bool, default False
        Also return the number of rows removed for missing values.

    Returns
    -------
    Dataset, or (Dataset, int) when ``return_dropped`` is true.

    Raises
    ------
    UsageError
        The file has no data rows, or a requested column does not exist.
    LoadError
        A cell cannot be parsed as a number; ``row`` (1-based, header is
        row 1) and ``column`` locate it.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise UsageError(f"{path} is empty") from None
        rows = list(reader)
    if columns is None:
        idx = list(range(len(header)))
    else:
        idx = []
        for c in columns:
            if isinstance(c, str):
                if c not in header:
                    raise UsageError(f"column {c!r} not found in {path}")
                idx.append(header.index(c))
            else:
                if not 0 <= int(c) < len(header):
                    raise UsageError(f"column index {c} out of range")
                idx.append(int(c))
    names = tuple(header[i] for i in idx)
    values = []
    dropped = 0
    for r, row in enumerate(rows, start=2):
        if not any(cell.strip() for cell in row):
            continue
        rec = []
        missing = False
        for i in idx:
            cell = row[i].strip() if i < len(row) else ""
            if cell.lower() in MISSING_TOKENS:
                missing = True
                continue
            try:
                rec.append(float(cell))
            except ValueError:
                raise LoadError(f"{path}: cannot parse {cell!r} at row {r}, column "
                                f"{header[i]!r}", row=r, column=header[i]) from None
        if missing:
            dropped += 1
        else:
            values.append(rec)
    if not values:
        raise UsageError(f"{path} has no complete data rows")
    if dropped:
        warnings.warn(f"dropped {dropped} row(s) with missing values", DroppedRowsWarning,
                      stacklevel=2)
    data = Dataset(np.array(values), names)
    return (data, dropped) if return_dropped else data


def write_csv(path, data: Dataset) -> Path:
    """Write a dataset with a header row; floats use round-trip formatting."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(data.names)
        for row in data.values:
            w.writerow([repr(float(v)) for v in row])
    return path


def write_table(path, header: Sequence[str], rows) -> Path:
    """Write rows of mixed labels and floats with a header row."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(header))
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                        for v in row])
    return path
