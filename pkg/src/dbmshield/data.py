"""Binary datasets: container, CSV I/O and train/test splitting."""

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import check_binary_array
from .rng import get_rng


@dataclass(frozen=True, eq=False)
class BinaryDataset:
    """Rows are individuals, columns are binary variables.

    The value matrix is copied and made read-only on construction so that a
    dataset can be shared between threads and sessions without defensive
    copies.
    """

    values: np.ndarray
    column_names: tuple = field(default=None)

    def __post_init__(self):
        values = check_binary_array(self.values, name="values").copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        names = self.column_names
        if names is None:
            names = tuple(f"V{j + 1}" for j in range(values.shape[1]))
        else:
            names = tuple(str(n) for n in names)
            if len(names) != values.shape[1]:
                raise ValueError(
                    f"{len(names)} column names for {values.shape[1]} columns"
                )
        object.__setattr__(self, "column_names", names)

    @property
    def n_rows(self):
        return self.values.shape[0]

    @property
    def n_columns(self):
        return self.values.shape[1]

    def __len__(self):
        return self.n_rows

    def __eq__(self, other):
        if not isinstance(other, BinaryDataset):
            return NotImplemented
        return (
            self.column_names == other.column_names
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    def take(self, rows):
        return BinaryDataset(self.values[np.asarray(rows, dtype=int)], self.column_names)

    def sorted_rows(self):
        """Rows in lexicographic order; handy for multiset comparisons."""
        if self.n_rows == 0:
            return self.values.copy()
        order = np.lexsort(self.values.T[::-1])
        return self.values[order]


def as_dataset(data):
    if isinstance(data, BinaryDataset):
        return data
    return BinaryDataset(np.asarray(data))


def _parse_cell(token, lineno):
    token = token.strip()
    if token == "0":
        return 0
    if token == "1":
        return 1
    raise ValueError(f"line {lineno}: invalid token {token!r}; expected 0 or 1")


def parse_csv(text):
    """Parse CSV text of 0/1 integers with an optional header line."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError("empty CSV input")
    header = None
    first = [c.strip() for c in rows[0]]
    if not all(c in ("0", "1") for c in first):
        header = first
        rows = rows[1:]
    n_cols = len(header) if header is not None else len(rows[0])
    values = np.zeros((len(rows), n_cols))
    for i, row in enumerate(rows):
        lineno = i + (2 if header is not None else 1)
        if len(row) != n_cols:
            raise ValueError(f"line {lineno}: expected {n_cols} fields, got {len(row)}")
        values[i] = [_parse_cell(c, lineno) for c in row]
    return BinaryDataset(values.reshape(len(rows), n_cols), header)


def read_csv(path):
    return parse_csv(Path(path).read_text())


def format_csv(data, header=True):
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    if header:
        writer.writerow(data.column_names)
    for row in data.values.astype(int):
        writer.writerow(row.tolist())
    return out.getvalue()


def write_csv(data, path, header=True):
    Path(path).write_text(format_csv(data, header=header))


def splitdata(data, ratio, rng=None):
    """Randomly split rows into a training part and a held-out part.

    The second returned dataset receives ``round(ratio * n)`` rows, so
    ``splitdata(d, 0.2)`` yields an 80/20 train/test split.
    """
    data = as_dataset(data)
    ratio = float(ratio)
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must lie strictly between 0 and 1, got {ratio}")
    if data.n_rows < 2:
        raise ValueError("splitting requires at least 2 rows")
    rng = get_rng(rng)
    n_test = int(round(ratio * data.n_rows))
    n_test = min(max(n_test, 1), data.n_rows - 1)
    perm = rng.permutation(data.n_rows)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return data.take(train_idx), data.take(test_idx)
