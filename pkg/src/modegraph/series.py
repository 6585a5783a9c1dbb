"""Ingestion and elementary statistics for univariate time series.

All operations are pure functions; :class:`TimeSeries` values are immutable
after construction and safe to share across threads.
"""

from __future__ import annotations

import csv
import datetime as _dt
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

__all__ = [
    "TimeSeries",
    "ReturnSeries",
    "load_csv",
    "pct_returns",
    "rolling_stat",
    "zero_crossings",
]

ArrayLike = Union[Sequence[float], np.ndarray]


def _as_values(s: Union["TimeSeries", ArrayLike]) -> np.ndarray:
    """Coerce a TimeSeries or plain sequence to a float array without copying
    more than necessary."""
    if isinstance(s, TimeSeries):
        return s.values
    arr = np.asarray(s, dtype=float)
    if arr.ndim != 1:
        raise ValueError("expected a one-dimensional sequence, got shape %s" % (arr.shape,))
    return arr


@dataclass(frozen=True)
class TimeSeries:
    """Ordered real-valued observations with optional timestamps.

    Parameters
    ----------
    values : sequence of float
        The observations. Must be finite and at least 3 long.
    timestamps : sequence of datetime.date, optional
        Calendar dates, one per observation, strictly increasing.
    label : str
        Free-text name for the series.
    """

    values: np.ndarray
    timestamps: Optional[tuple] = None
    label: str = ""

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1:
            raise ValueError("values must be one-dimensional")
        if arr.size < 3:
            raise ValueError("a TimeSeries needs at least 3 observations, got %d" % arr.size)
        if not np.all(np.isfinite(arr)):
            bad = np.flatnonzero(~np.isfinite(arr))
            raise ValueError("non-finite values at positions %s" % bad[:10].tolist())
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        if self.timestamps is not None:
            ts = tuple(self.timestamps)
            if len(ts) != arr.size:
                raise ValueError(
                    "timestamps length %d does not match values length %d" % (len(ts), arr.size)
                )
            for a, b in zip(ts, ts[1:]):
                if not a < b:
                    raise ValueError("timestamps must be strictly increasing (%s >= %s)" % (a, b))
            object.__setattr__(self, "timestamps", ts)

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class ReturnSeries:
    """Percent returns derived from a parent series.

    ``values[i]`` is the percent change into parent observation
    ``base_index + i``; length is always parent length - 1.
    """

    values: np.ndarray
    base_index: int = 1

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.size


def load_csv(
    path: str,
    column: Union[str, int],
    date_column: Optional[str] = None,
) -> TimeSeries:
    """Load one numeric column of a CSV file into a TimeSeries.

    Parameters
    ----------
    path : str
        File to read. Comma separated, header row required.
    column : str or int
        Header name, or 0-based positional index, of the value column.
    date_column : str, optional
        Header name of an ISO-8601 date column; when given, dates must be
        strictly increasing and are attached as timestamps.

    Returns
    -------
    TimeSeries

    Raises
    ------
    FileNotFoundError
        If `path` does not exist.
    ValueError
        Missing column, unparseable rows (reported with row numbers),
        fewer than 3 valid rows, or non-increasing dates.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("%s: empty file, header row required" % path) from None
        if isinstance(column, int):
            if not 0 <= column < len(header):
                raise ValueError("%s: column index %d out of range (%d columns)"
                                 % (path, column, len(header)))
            col_idx = column
        else:
            if column not in header:
                raise ValueError("%s: missing column %r (have %s)" % (path, column, header))
            col_idx = header.index(column)
        date_idx = None
        if date_column is not None:
            if date_column not in header:
                raise ValueError("%s: missing date column %r" % (path, date_column))
            date_idx = header.index(date_column)

        values = []
        dates = []
        bad_rows = []
        for row_no, row in enumerate(reader, start=2):  # 1-based, header is row 1
            if not row or all(cell.strip() == "" for cell in row):
                continue
            try:
                cell = row[col_idx].strip()
                values.append(float(cell))
                if date_idx is not None:
                    dates.append(_dt.date.fromisoformat(row[date_idx].strip()))
            except (ValueError, IndexError):
                bad_rows.append(row_no)
        if bad_rows:
            raise ValueError(
                "%s: unparseable values in column %r at rows %s"
                % (path, column, bad_rows[:20])
            )
    if len(values) < 3:
        raise ValueError("%s: need at least 3 valid rows, got %d" % (path, len(values)))
    label = header[col_idx] if isinstance(column, int) else column
    return TimeSeries(
        values=np.asarray(values, dtype=float),
        timestamps=tuple(dates) if date_idx is not None else None,
        label=str(label),
    )


def pct_returns(s: Union[TimeSeries, ArrayLike]) -> ReturnSeries:
    """Percent returns: 100 * (s[i+1] - s[i]) / s[i].

    Raises
    ------
    ValueError
        Length < 2, or a zero base value (division by zero).
    """
    v = _as_values(s)
    if v.size < 2:
        raise ValueError("need at least 2 observations for returns")
    if np.any(v == 0.0):
        pos = int(np.flatnonzero(v == 0.0)[0])
        raise ValueError("zero base value at position %d" % pos)
    return ReturnSeries(values=100.0 * np.diff(v) / v[:-1])


def rolling_stat(
    s: Union[TimeSeries, ArrayLike],
    window: int,
    kind: str = "mean",
) -> np.ndarray:
    """Rolling mean or sample standard deviation.

    Returns an array of length ``len(s) - window + 1``; the i-th entry covers
    ``s[i : i + window]``. `std` uses the sample (n-1) denominator.
    """
    v = _as_values(s)
    if kind not in ("mean", "std"):
        raise ValueError("kind must be 'mean' or 'std', got %r" % kind)
    if window > v.size:
        raise ValueError("window %d exceeds series length %d" % (window, v.size))
    if window < 1:
        raise ValueError("window must be positive")
    if kind == "std" and window < 2:
        raise ValueError("std needs window >= 2")
    frames = np.lib.stride_tricks.sliding_window_view(v, window)
    if kind == "mean":
        return frames.mean(axis=1)
    return frames.std(axis=1, ddof=1)


def zero_crossings(s: Union[TimeSeries, ArrayLike]) -> int:
    """Count strict sign changes between adjacent samples.

    An exact zero adopts the sign of the previous nonzero value, so a single
    transit through zero counts once: [1, 0, -1] -> 1.
    """
    v = _as_values(s)
    if v.size < 2:
        raise ValueError("need at least 2 samples")
    signs = np.sign(v)
    signs = signs[signs != 0]  # dropping zeros == adopting the previous sign
    if signs.size < 2:
        return 0
    return int(np.count_nonzero(signs[1:] != signs[:-1]))
