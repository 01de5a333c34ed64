"""Irregularly-spaced multivariate time series, datasets and file ingestion.

A series is a pair of an ascending timestamp vector and a ``(length, d)``
value matrix.  Values are kept in Fortran order so that each coordinate
series ``values[:, i]`` is a contiguous slice.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import DataFormatError

__all__ = [
    "TimeSeries",
    "Dataset",
    "SeriesSplit",
    "load_ucr_tsv",
    "load_jsonl",
    "write_jsonl",
    "split_forecast",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """One (possibly multivariate) time series.

    Parameters
    ----------
    timestamps : array_like, shape (n,)
        Weakly ascending observation times.  Ties are allowed.
    values : array_like, shape (n,) or (n, d)
        Observations; a 1-D input is read as a univariate series.
    id : str
        Opaque label, used in error messages and output files.
    """

    timestamps: np.ndarray
    values: np.ndarray
    id: str = ""

    def __post_init__(self):
        t = np.array(self.timestamps, dtype=float)
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if t.ndim != 1:
            raise DataFormatError(f"series {self.id!r}: timestamps must be 1-D")
        if v.ndim != 2:
            raise DataFormatError(f"series {self.id!r}: values must be 1-D or 2-D")
        if t.size == 0:
            raise DataFormatError(f"series {self.id!r}: empty series")
        if v.shape[0] != t.size:
            raise DataFormatError(
                f"series {self.id!r}: {t.size} timestamps but {v.shape[0]} value rows"
            )
        if v.shape[1] < 1:
            raise DataFormatError(f"series {self.id!r}: no channels")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise DataFormatError(f"series {self.id!r}: non-finite entry")
        if np.any(np.diff(t) < 0):
            raise DataFormatError(f"series {self.id!r}: timestamps are not ascending")
        object.__setattr__(self, "timestamps", _frozen(t))
        object.__setattr__(self, "values", _frozen(np.asfortranarray(v)))
        object.__setattr__(self, "id", str(self.id))

    def __len__(self) -> int:
        return self.timestamps.size

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def channel(self, i: int) -> np.ndarray:
        """Coordinate series ``i`` as a contiguous 1-D view."""
        return self.values[:, i]

    def segment(self, idx) -> TimeSeries:
        """Sub-series at the given timestamp indices (or slice)."""
        return TimeSeries(self.timestamps[idx], self.values[idx], self.id)

    def same_as(self, other: TimeSeries) -> bool:
        return (
            self.id == other.id
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ordered collection of series sharing one channel count."""

    series: tuple[TimeSeries, ...]
    labels: tuple | None = None
    name: str = ""

    def __post_init__(self):
        series = tuple(self.series)
        object.__setattr__(self, "series", series)
        if series:
            d = series[0].d
            for s in series:
                if s.d != d:
                    raise DataFormatError(
                        f"series {s.id!r} has {s.d} channels, expected {d}"
                    )
        ids = [s.id for s in series]
        if len(set(ids)) != len(ids):
            raise DataFormatError("series ids must be unique within a dataset")
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != len(series):
                raise DataFormatError(
                    f"{len(labels)} labels for {len(series)} series"
                )
            object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.series)

    def __iter__(self):
        return iter(self.series)

    def __getitem__(self, i: int) -> TimeSeries:
        return self.series[i]

    @property
    def d(self) -> int:
        if not self.series:
            raise DataFormatError("empty dataset has no channel count")
        return self.series[0].d

    @property
    def ids(self) -> list[str]:
        return [s.id for s in self.series]

    def subset(self, indices: Iterable[int]) -> Dataset:
        indices = list(indices)
        labels = None if self.labels is None else [self.labels[i] for i in indices]
        return Dataset([self.series[i] for i in indices], labels, self.name)

    def shared_timestamps(self) -> np.ndarray | None:
        """The common timestamp vector, or None if the series differ."""
        if not self.series:
            return None
        t0 = self.series[0].timestamps
        for s in self.series[1:]:
            if not np.array_equal(s.timestamps, t0):
                return None
        return t0

    def value_tensor(self) -> np.ndarray:
        """Values stacked as ``(D, N, d)``; requires a shared grid."""
        if self.shared_timestamps() is None:
            raise DataFormatError("series do not share a timestamp grid")
        return np.stack([s.values for s in self.series], axis=1)


@dataclass(frozen=True, eq=False)
class SeriesSplit:
    """Time-window and series partition for one forecasting experiment.

    ``train_time_mask`` and ``test_time_mask`` map a series id to the integer
    indices of its training and test window.  The series-level partition is
    filled in by the evaluation harness via :meth:`with_series`.
    """

    train_time_mask: dict[str, np.ndarray]
    test_time_mask: dict[str, np.ndarray]
    train_series_ids: tuple[str, ...] = ()
    test_series_ids: tuple[str, ...] = ()
    n_test: int = field(default=0)

    def with_series(self, train_ids: Sequence[str], test_ids: Sequence[str]) -> SeriesSplit:
        return replace(
            self, train_series_ids=tuple(train_ids), test_series_ids=tuple(test_ids)
        )

    def train_window(self, s: TimeSeries) -> TimeSeries:
        return s.segment(self.train_time_mask[s.id])

    def test_window(self, s: TimeSeries) -> TimeSeries:
        return s.segment(self.test_time_mask[s.id])


def split_forecast(ds: Dataset, n_test_timestamps: int) -> SeriesSplit:
    """Hold out the last ``n_test_timestamps`` observations of every series."""
    n = int(n_test_timestamps)
    if n < 1:
        raise DataFormatError("n_test_timestamps must be at least 1")
    train, test = {}, {}
    for s in ds:
        if len(s) <= n:
            raise DataFormatError(
                f"series {s.id!r} has {len(s)} timestamps, needs more than {n}"
            )
        idx = np.arange(len(s))
        train[s.id] = _frozen(idx[: len(s) - n])
        test[s.id] = _frozen(idx[len(s) - n :])
    return SeriesSplit(train, test, n_test=n)


def load_ucr_tsv(path, name: str | None = None) -> Dataset:
    """Read a UCR-archive file: one ``label<SEP>v1<SEP>...<SEP>vD`` per line.

    The separator (tab or comma) is detected from the first line.  Series get
    implicit timestamps ``0, 1, ..., D-1`` and ids equal to their line index.
    """
    path = Path(path)
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        raise DataFormatError(f"{path}: empty dataset")
    sep = "\t" if "\t" in lines[0] else ","
    series, labels = [], []
    width = None
    for lineno, line in enumerate(lines, start=1):
        fields = [f.strip() for f in line.strip().split(sep)]
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise DataFormatError(
                f"{path}:{lineno}: {len(fields) - 1} values, expected {width - 1}"
            )
        if len(fields) < 2:
            raise DataFormatError(f"{path}:{lineno}: no values after the label")
        try:
            vals = np.array([float(f) for f in fields[1:]])
        except ValueError as exc:
            raise DataFormatError(f"{path}:{lineno}: {exc}") from None
        try:
            series.append(
                TimeSeries(np.arange(vals.size, dtype=float), vals, str(lineno - 1))
            )
        except DataFormatError as exc:
            raise DataFormatError(f"{path}:{lineno}: {exc}") from None
        labels.append(fields[0])
    return Dataset(series, labels, name or path.stem)


def load_jsonl(path, name: str | None = None) -> Dataset:
    """Read one JSON record per line: ``{"id", "label"?, "t", "v"}``.

    ``v`` holds one list of ``d`` reals per timestamp; ``d`` is taken from the
    first record and enforced on the rest.
    """
    path = Path(path)
    series, labels = [], []
    d = None
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from None
            if not isinstance(rec, dict) or not {"id", "t", "v"} <= rec.keys():
                raise DataFormatError(f"{path}:{lineno}: record needs id, t and v")
            sid = str(rec["id"])
            t, v = rec["t"], rec["v"]
            if not isinstance(t, list) or not isinstance(v, list):
                raise DataFormatError(f"{path}:{lineno}: record {sid!r}: t and v must be lists")
            if len(t) != len(v):
                raise DataFormatError(
                    f"{path}:{lineno}: record {sid!r}: {len(t)} timestamps but {len(v)} values"
                )
            if not all(isinstance(row, list) for row in v):
                raise DataFormatError(f"{path}:{lineno}: record {sid!r}: v rows must be lists")
            widths = {len(row) for row in v}
            if len(widths) > 1:
                raise DataFormatError(f"{path}:{lineno}: record {sid!r}: ragged value rows")
            width = widths.pop() if widths else 0
            if d is None:
                d = width
            elif width != d:
                raise DataFormatError(
                    f"{path}:{lineno}: record {sid!r} has {width} channels, expected {d}"
                )
            try:
                ts = TimeSeries(np.asarray(t, dtype=float), np.asarray(v, dtype=float).reshape(len(t), width), sid)
            except (TypeError, ValueError) as exc:
                raise DataFormatError(f"{path}:{lineno}: record {sid!r}: {exc}") from None
            series.append(ts)
            labels.append(rec.get("label"))
    if not series:
        raise DataFormatError(f"{path}: empty dataset")
    has_labels = any(lab is not None for lab in labels)
    return Dataset(series, labels if has_labels else None, name or path.stem)


def _record(s: TimeSeries, label: Any) -> dict:
    rec = {"id": s.id}
    if label is not None:
        rec["label"] = label
    rec["t"] = s.timestamps.tolist()
    rec["v"] = s.values.tolist()
    return rec


def write_jsonl(ds: Dataset, path) -> None:
    """Write ``ds`` in the JSON-lines layout read by :func:`load_jsonl`."""
    labels = ds.labels if ds.labels is not None else [None] * len(ds)
    with Path(path).open("w", encoding="utf-8") as fh:
        for s, lab in zip(ds.series, labels):
            fh.write(json.dumps(_record(s, lab)) + "\n")
