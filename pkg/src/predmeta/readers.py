"""CSV readers for study-level data.

Two layouts are accepted (UTF-8, header row, comma separated):

* effects: ``study,y,se`` or ``study,y,v`` (exactly one of ``se``/``v``)
* counts: ``study,x1,n1,x0,n0``
"""

import csv
import math

from .errors import DataError
from .model import StudySet, TwoByTwoSet


def _rows(path, required, numeric, alternatives=()):
    """Yield (line_number, row dict) after validating the header."""
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        if not header:
            raise DataError(f"{path}: empty file or missing header row")
        reader.fieldnames = header
        missing = [c for c in required if c not in header]
        if missing:
            raise DataError(f"{path}: line 1: missing column(s) {missing}")
        if alternatives:
            present = [c for c in alternatives if c in header]
            if len(present) != 1:
                raise DataError(
                    f"{path}: line 1: need exactly one of {list(alternatives)}"
                    f" columns, found {present}")
        out = []
        for row in reader:
            line = reader.line_num
            if not any((v or "").strip() for v in row.values()):
                continue
            if None in row:
                raise DataError(f"{path}: line {line}: too many fields")
            parsed = {"study": (row.get("study") or "").strip()}
            for col in numeric:
                if col not in header:
                    continue
                raw = (row.get(col) or "").strip()
                try:
                    val = float(raw)
                except ValueError:
                    raise DataError(
                        f"{path}: line {line}: column {col!r}: cannot parse "
                        f"{raw!r} as a number") from None
                if not math.isfinite(val):
                    raise DataError(
                        f"{path}: line {line}: column {col!r} is not finite")
                parsed[col] = val
            out.append((line, parsed))
    if not out:
        raise DataError(f"{path}: no data rows")
    return out


def read_effects_csv(path):
    """Read a ``study,y,se`` or ``study,y,v`` file into a StudySet."""
    rows = _rows(path, ("study", "y"), ("y", "se", "v"), ("se", "v"))
    y, var, labels = [], [], []
    for line, row in rows:
        if "se" in row:
            if row["se"] <= 0:
                raise DataError(f"{path}: line {line}: se must be positive")
            var.append(row["se"] ** 2)
        else:
            if row["v"] <= 0:
                raise DataError(f"{path}: line {line}: v must be positive")
            var.append(row["v"])
        y.append(row["y"])
        labels.append(row["study"] or str(len(labels) + 1))
    return StudySet(y, var, labels)


def read_counts_csv(path):
    """Read a ``study,x1,n1,x0,n0`` file into a TwoByTwoSet."""
    cols = ("x1", "n1", "x0", "n0")
    rows = _rows(path, ("study",) + cols, cols)
    data = {c: [] for c in cols}
    labels = []
    for line, row in rows:
        for c in cols:
            if row[c] != int(row[c]):
                raise DataError(
                    f"{path}: line {line}: column {c!r} must be an integer")
        if row["n1"] < 1 or row["n0"] < 1:
            raise DataError(f"{path}: line {line}: arm sizes must be >= 1")
        if not (0 <= row["x1"] <= row["n1"] and 0 <= row["x0"] <= row["n0"]):
            raise DataError(
                f"{path}: line {line}: events must lie between 0 and the "
                f"arm size")
        for c in cols:
            data[c].append(int(row[c]))
        labels.append(row["study"] or str(len(labels) + 1))
    return TwoByTwoSet(data["x1"], data["n1"], data["x0"], data["n0"], labels)
