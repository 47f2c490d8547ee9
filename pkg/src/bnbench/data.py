"""Discrete datasets: CSV ingestion, missing-value policies, discretization.

Cells are stored as state indices into each variable's ordered state list;
missing cells are the sentinel ``MISSING`` (-1).  Datasets are immutable by
contract once built: every transformation returns a new Dataset.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

MISSING = -1
MISSING_LABEL = "MISSING"
MAX_ARITY = 32


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class Variable:
    name: str
    states: tuple[str, ...]

    def __post_init__(self):
        if len(self.states) < 2:
            raise DataError(f"variable {self.name!r} needs >= 2 states")
        if len(set(self.states)) != len(self.states):
            raise DataError(f"variable {self.name!r} has duplicate state labels")

    @property
    def arity(self) -> int:
        return len(self.states)


class Dataset:
    """N x m table of state indices with named, ordered state spaces."""

    def __init__(self, variables: Sequence[Variable], rows: np.ndarray):
        rows = np.asarray(rows, dtype=np.int32)
        if rows.ndim != 2 or rows.shape[1] != len(variables):
            raise DataError("rows must be an N x m matrix matching variables")
        if rows.shape[0] < 1:
            raise DataError("dataset needs at least one row")
        self.variables: list[Variable] = list(variables)
        self.rows = rows
        self.rows.setflags(write=False)
        self._complete: bool | None = None
        for j, v in enumerate(self.variables):
            col = rows[:, j]
            if col.min() < MISSING or ((col >= 0) & (col >= v.arity)).any():
                raise DataError(f"cell out of range in column {v.name!r}")

    # -- shape ----------------------------------------------------------

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def m(self) -> int:
        return self.rows.shape[1]

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    @property
    def arities(self) -> list[int]:
        return [v.arity for v in self.variables]

    def column(self, j: int) -> np.ndarray:
        return self.rows[:, j]

    def is_complete(self) -> bool:
        if self._complete is None:
            self._complete = not (self.rows == MISSING).any()
        return self._complete

    def missing_count(self) -> int:
        return int((self.rows == MISSING).sum())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.variables == other.variables and np.array_equal(
            self.rows, other.rows
        )

    def __repr__(self) -> str:
        return f"Dataset({self.n} rows, {self.m} variables)"

    # -- derived datasets -------------------------------------------------

    def prefix(self, n: int) -> "Dataset":
        if not 1 <= n <= self.n:
            raise DataError(f"prefix size {n} out of range 1..{self.n}")
        return Dataset(self.variables, self.rows[:n].copy())

    def select_columns(self, order: Sequence[int]) -> "Dataset":
        return Dataset(
            [self.variables[j] for j in order], self.rows[:, list(order)].copy()
        )

    def complete_rows(self) -> "Dataset":
        """Listwise-complete subset; raises if no complete row exists."""
        mask = ~(self.rows == MISSING).any(axis=1)
        if not mask.any():
            raise DataError("no complete rows available")
        return Dataset(self.variables, self.rows[mask].copy())


@dataclass(frozen=True)
class ContingencyTable:
    """Counts over the cross-product of a variable subset's states.

    Rows with a missing cell among the subset are dropped (listwise).
    """

    columns: tuple[int, ...]
    arities: tuple[int, ...]
    counts: np.ndarray
    n_used: int


def counts(d: Dataset, cols: Sequence[int]) -> ContingencyTable:
    cols = list(cols)
    if len(set(cols)) != len(cols):
        raise DataError("columns must be distinct")
    if not cols:
        tab = np.array(d.n, dtype=np.int64)
        return ContingencyTable((), (), tab, d.n)
    sub = d.rows[:, cols]
    mask = ~(sub == MISSING).any(axis=1)
    sub = sub[mask]
    ar = tuple(d.variables[j].arity for j in cols)
    if sub.shape[0] == 0:
        return ContingencyTable(tuple(cols), ar, np.zeros(ar, dtype=np.int64), 0)
    codes = np.ravel_multi_index(tuple(sub.T), ar)
    tab = np.bincount(codes, minlength=int(np.prod(ar))).reshape(ar)
    return ContingencyTable(tuple(cols), ar, tab.astype(np.int64), int(sub.shape[0]))


# -- CSV -----------------------------------------------------------------


def load_csv(path: str | os.PathLike, missing_token: str = "") -> Dataset:
    """Read a discrete dataset; state spaces are the sorted distinct tokens.

    The first line must be a header of unique variable names.  Cells equal
    to ``missing_token`` become MISSING.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return _read_csv(fh, missing_token)


def loads_csv(text: str, missing_token: str = "") -> Dataset:
    return _read_csv(io.StringIO(text), missing_token)


def _read_csv(fh, missing_token: str) -> Dataset:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("empty file") from None
    header = [h.strip() for h in header]
    if len(set(header)) != len(header):
        raise DataError("duplicate column names in header")
    m = len(header)
    raw: list[list[str]] = []
    for k, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != m:
            raise DataError(f"line {k}: expected {m} fields, got {len(row)}")
        raw.append(row)
    if not raw:
        raise DataError("no data rows")
    variables = []
    cells = np.empty((len(raw), m), dtype=np.int32)
    for j, name in enumerate(header):
        tokens = [r[j] for r in raw]
        distinct = sorted({t for t in tokens if t != missing_token})
        if len(distinct) > MAX_ARITY:
            raise DataError(f"column {name!r}: arity {len(distinct)} exceeds {MAX_ARITY}")
        if len(distinct) < 2:
            raise DataError(f"column {name!r}: fewer than 2 observed states")
        variables.append(Variable(name, tuple(distinct)))
        lut = {t: i for i, t in enumerate(distinct)}
        cells[:, j] = [MISSING if t == missing_token else lut[t] for t in tokens]
    return Dataset(variables, cells)


def write_csv(d: Dataset, path: str | os.PathLike, missing_token: str = "") -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        dump_csv(d, fh, missing_token)


def dump_csv(d: Dataset, fh, missing_token: str = "") -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(d.names)
    states = [v.states for v in d.variables]
    for row in d.rows:
        w.writerow(
            [
                missing_token if c == MISSING else states[j][c]
                for j, c in enumerate(row)
            ]
        )


# -- missing-value policy -------------------------------------------------


def impute_missing_state(d: Dataset) -> Dataset:
    """Give every column with missing cells an extra last state (MISSING_LABEL)
    and set those cells to it.  Complete columns are returned unchanged."""
    variables = []
    rows = d.rows.copy()
    for j, v in enumerate(d.variables):
        col = rows[:, j]
        holes = col == MISSING
        if holes.any():
            if MISSING_LABEL in v.states:
                raise DataError(
                    f"column {v.name!r} already has a state named {MISSING_LABEL!r}"
                )
            variables.append(Variable(v.name, v.states + (MISSING_LABEL,)))
            col[holes] = v.arity
        else:
            variables.append(v)
    return Dataset(variables, rows)


# -- discretization ---------------------------------------------------------


def discretize_equal_frequency(
    values: Sequence[float], k: int, name: str = "x"
) -> tuple[Variable, np.ndarray]:
    """Equal-frequency binning at empirical quantiles i/k, half-open bins.

    Returns the new Variable (states q1..qk in bin order) and per-value bin
    indices.  Raises if k exceeds the number of distinct values.
    """
    vals = np.asarray(values, dtype=float)
    if vals.size == 0:
        raise DataError("no values to discretize")
    if k < 2:
        raise DataError("k must be >= 2")
    if len(np.unique(vals)) < k:
        raise DataError(f"k={k} exceeds the {len(np.unique(vals))} distinct values")
    edges = np.quantile(vals, [i / k for i in range(1, k)])
    idx = np.searchsorted(edges, vals, side="right").astype(np.int32)
    width = len(str(k))
    var = Variable(name, tuple(f"q{i + 1:0{width}d}" for i in range(k)))
    return var, idx


def dataset_from_columns(
    cols: dict[str, Sequence[str]], missing_token: str = ""
) -> Dataset:
    """Test/helper constructor from name -> token-list mappings."""
    names = list(cols)
    lengths = {len(v) for v in cols.values()}
    if len(lengths) != 1:
        raise DataError("columns differ in length")
    variables = []
    cells = np.empty((lengths.pop(), len(names)), dtype=np.int32)
    for j, name in enumerate(names):
        tokens = list(cols[name])
        distinct = sorted({t for t in tokens if t != missing_token})
        variables.append(Variable(name, tuple(distinct)))
        lut = {t: i for i, t in enumerate(distinct)}
        cells[:, j] = [MISSING if t == missing_token else lut[t] for t in tokens]
    return Dataset(variables, cells)
