"""Loading, synthesis and splitting of labelled multivariate time series.

The on-disk layout follows the HAI security dataset: a timestamp column,
one column per sensor/actuator, and a binary ``attack`` column.
"""

from __future__ import annotations

import csv
import gzip
import io
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError
from .rng import check_seed, make_rng

NUMERIC = "numeric"
CATEGORICAL = "categorical"

_SYNTH_STREAM = 1
_SPLIT_STREAM = 2
_N_DRIVERS = 3
_SENSOR_NOISE = 0.03


@dataclass(frozen=True)
class Column:
    name: str
    kind: str = NUMERIC

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise ValueError(f"unknown column kind {self.kind!r}")


@dataclass(frozen=True, eq=False)
class RawDataset:
    """Timestamped feature table with optional 0/1 attack labels.

    ``values`` maps column name to a 1-D array: float64 for numeric columns,
    an object array of strings for categorical ones.
    """

    timestamps: np.ndarray
    columns: tuple[Column, ...]
    values: dict[str, np.ndarray]
    labels: np.ndarray | None = None

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=float)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "columns", tuple(self.columns))
        n = len(ts)
        if n < 1:
            raise DataError("dataset has no rows")
        if np.any(np.diff(ts) < 0):
            raise DataError("timestamps must be nondecreasing")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise DataError("duplicate column names")
        if set(names) != set(self.values):
            raise DataError("values do not match the declared columns")
        for col in self.columns:
            v = self.values[col.name]
            if len(v) != n:
                raise DataError(f"column {col.name!r} has {len(v)} rows, expected {n}")
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if len(labels) != n:
                raise DataError(f"labels have {len(labels)} rows, expected {n}")
            if not np.all((labels == 0) | (labels == 1)):
                raise DataError("labels must be 0 or 1")
            object.__setattr__(self, "labels", labels.astype(np.int8))

    @property
    def n_rows(self) -> int:
        return len(self.timestamps)

    @property
    def feature_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column(self, name: str) -> np.ndarray:
        return self.values[name]

    def kind(self, name: str) -> str:
        for c in self.columns:
            if c.name == name:
                return c.kind
        raise KeyError(name)

    def take(self, rows: Sequence[int] | np.ndarray) -> RawDataset:
        rows = np.asarray(rows, dtype=np.intp)
        return RawDataset(
            timestamps=self.timestamps[rows],
            columns=self.columns,
            values={k: v[rows] for k, v in self.values.items()},
            labels=None if self.labels is None else self.labels[rows],
        )

    def with_values(self, values: dict[str, np.ndarray], columns: Iterable[Column] | None = None) -> RawDataset:
        return RawDataset(
            timestamps=self.timestamps,
            columns=tuple(self.columns if columns is None else columns),
            values=values,
            labels=self.labels,
        )

    def numeric_matrix(self) -> np.ndarray:
        bad = [c.name for c in self.columns if c.kind != NUMERIC]
        if bad:
            raise DataError(f"categorical columns must be encoded first: {bad}")
        if not self.columns:
            return np.empty((self.n_rows, 0))
        return np.column_stack([self.values[c.name] for c in self.columns]).astype(float)


def concat(parts: Sequence[RawDataset]) -> RawDataset:
    """Stack datasets with identical columns row-wise, in the given order."""
    if not parts:
        raise DataError("nothing to concatenate")
    first = parts[0]
    for p in parts[1:]:
        if p.columns != first.columns:
            raise DataError("datasets have different columns")
        if (p.labels is None) != (first.labels is None):
            raise DataError("cannot mix labelled and unlabelled datasets")
    return RawDataset(
        timestamps=np.concatenate([p.timestamps for p in parts]),
        columns=first.columns,
        values={c.name: np.concatenate([p.values[c.name] for p in parts]) for c in first.columns},
        labels=None if first.labels is None else np.concatenate([p.labels for p in parts]),
    )


def _parse_timestamp(cell: str) -> float:
    try:
        return float(cell)
    except ValueError:
        pass
    try:
        dt = datetime.fromisoformat(cell.strip())
    except ValueError as exc:
        raise DataError(f"unparseable timestamp {cell!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def _open_text(path: Path):
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8", newline="")
    return open(path, encoding="utf-8", newline="")


def load_csv(
    path: str | Path,
    label_column: str | None = "attack",
    time_column: str = "time",
    delimiter: str = ",",
    drop_columns: Iterable[str] = (),
) -> RawDataset:
    """Read a header-first CSV (optionally gzipped) into a :class:`RawDataset`.

    Columns whose every cell parses as a float are numeric; anything else is
    categorical. If ``label_column`` is absent from the header the dataset is
    returned unlabelled. Timestamps may be numeric seconds or ISO-8601 strings
    (naive strings are read as UTC).
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with _open_text(path) as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: ragged row ({len(row)} cells, header has {len(header)})")
            rows.append(row)
    if not rows:
        raise DataError(f"{path}: table has no data rows")
    if time_column not in header:
        raise DataError(f"{path}: timestamp column {time_column!r} not found")
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate header names")

    cols = list(zip(*rows))
    cells = dict(zip(header, cols))
    for name, col in cells.items():
        if any(c.strip() == "" for c in col):
            raise DataError(f"{path}: column {name!r} has missing cells")

    timestamps = np.array([_parse_timestamp(c) for c in cells[time_column]])
    labels = None
    if label_column is not None and label_column in cells:
        try:
            labels = np.array([float(c) for c in cells[label_column]])
        except ValueError as exc:
            raise DataError(f"{path}: label column {label_column!r} is not numeric") from exc
        if not np.all((labels == 0) | (labels == 1)):
            raise DataError(f"{path}: label column {label_column!r} must contain only 0 and 1")

    skip = {time_column, label_column, *drop_columns}
    columns, values = [], {}
    for name in header:
        if name in skip:
            continue
        raw = cells[name]
        try:
            values[name] = np.array([float(c) for c in raw])
            columns.append(Column(name, NUMERIC))
        except ValueError:
            values[name] = np.array([c.strip() for c in raw], dtype=object)
            columns.append(Column(name, CATEGORICAL))
    return RawDataset(timestamps, tuple(columns), values, labels)


def write_csv(ds: RawDataset, path: str | Path, label_column: str = "attack", time_column: str = "time") -> None:
    """Write ``ds`` in the layout :func:`load_csv` reads; floats use ``repr`` (round-trip exact)."""
    header = [time_column] + ds.feature_names + ([label_column] if ds.labels is not None else [])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in range(ds.n_rows):
            row = [repr(float(ds.timestamps[r]))]
            for c in ds.columns:
                v = ds.values[c.name][r]
                row.append(repr(float(v)) if c.kind == NUMERIC else str(v))
            if ds.labels is not None:
                row.append(str(int(ds.labels[r])))
            w.writerow(row)


def _anomaly_segments(n_anomaly: int, total: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Place ``n_anomaly`` rows as contiguous attack intervals in the latter part of the timeline."""
    if n_anomaly == 0:
        return []
    region = max(math.ceil(total / 2), n_anomaly)
    start = total - region
    n_seg = max(1, round(n_anomaly / 300))
    lengths = [n_anomaly // n_seg + (1 if i < n_anomaly % n_seg else 0) for i in range(n_seg)]
    gaps = rng.multinomial(region - n_anomaly, np.full(n_seg + 1, 1.0 / (n_seg + 1)))
    segments, pos = [], start
    for length, gap in zip(lengths, gaps[:-1]):
        pos += int(gap)
        segments.append((pos, pos + length))
        pos += length
    return segments


def generate_synthetic(
    n_normal: int,
    n_anomaly: int,
    n_features: int,
    shift_sigmas: float = 2.0,
    seed: int = 0,
) -> RawDataset:
    """Synthetic stand-in for a CPS telemetry trace, one row per second.

    Three shared set-point drivers follow sinusoids at the first three
    harmonics of one operating cycle (200 to 400 samples long), so normal
    operation keeps revisiting the same states. A fixed random mixing matrix
    couples the drivers into correlated observed features, each with its own
    white sensor noise. Anomalies occupy contiguous intervals in the second
    half of the trace. Inside each interval a random subset of
    ``ceil(n_features / 4)`` features is offset by ``shift_sigmas`` times that
    feature's standard deviation, with a random sign per feature.
    """
    if n_features < 1:
        raise DataError("n_features must be at least 1")
    if n_normal < 0 or n_anomaly < 0:
        raise DataError("row counts must be nonnegative")
    if shift_sigmas < 0:
        raise DataError("shift_sigmas must be nonnegative")
    total = n_normal + n_anomaly
    if total == 0:
        raise DataError("requested an empty dataset")
    rng = make_rng(check_seed(seed), _SYNTH_STREAM)

    t = np.arange(total, dtype=float)
    base_period = rng.uniform(200.0, 400.0)
    periods = base_period / np.arange(1, _N_DRIVERS + 1)
    phases = rng.uniform(0.0, 2 * np.pi, size=_N_DRIVERS)
    drivers = np.sin(2 * np.pi * t[:, None] / periods + phases)
    mixing = rng.normal(0.0, 1.0, size=(n_features, _N_DRIVERS))
    noise = rng.normal(0.0, _SENSOR_NOISE, size=(total, n_features))
    levels = rng.uniform(-5.0, 5.0, size=n_features)
    scales = rng.uniform(0.5, 3.0, size=n_features)
    x = (drivers @ mixing.T + noise) * scales + levels

    labels = np.zeros(total, dtype=np.int8)
    sigma = x.std(axis=0)
    n_shift = math.ceil(n_features / 4)
    for lo, hi in _anomaly_segments(n_anomaly, total, rng):
        feats = rng.choice(n_features, size=n_shift, replace=False)
        signs = rng.choice([-1.0, 1.0], size=n_shift)
        x[lo:hi, feats] += shift_sigmas * signs * sigma[feats]
        labels[lo:hi] = 1

    columns = tuple(Column(f"f{i:02d}") for i in range(n_features))
    values = {c.name: x[:, i].copy() for i, c in enumerate(columns)}
    return RawDataset(t, columns, values, labels)


@dataclass(frozen=True)
class SplitSpec:
    """Chronological train/test boundary plus a class-balanced evaluation draw.

    Rows before ``floor(train_fraction * n)`` form the training region
    (restricted to label-0 rows when ``train_normal_only``); the evaluation set
    is sampled without replacement from the remaining rows.
    """

    train_fraction: float = 0.5
    train_normal_only: bool = True
    eval_normal_count: int = 1000
    eval_anomaly_count: int = 500
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie strictly between 0 and 1")
        if self.eval_normal_count < 0 or self.eval_anomaly_count < 0:
            raise ValueError("eval counts must be nonnegative")
        check_seed(self.seed)


def sample_eval(
    ds: RawDataset,
    n_normal: int,
    n_anomaly: int,
    seed: int,
    rows: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw an evaluation block from ``rows`` (default: all rows).

    Returns ``(eval_rows, rest_rows)``. ``eval_rows`` holds the sampled normal
    rows followed by the sampled anomaly rows, each block in time order.
    """
    rows = np.arange(ds.n_rows) if rows is None else np.asarray(rows, dtype=np.intp)
    if ds.labels is None:
        if n_normal or n_anomaly:
            raise DataError("evaluation sampling needs labels")
        return np.empty(0, dtype=np.intp), rows
    rng = make_rng(seed, _SPLIT_STREAM)
    lab = ds.labels[rows]
    wanted = ((0, n_normal, "normal"), (1, n_anomaly, "anomalous"))
    short = [
        f"requested {count} {kind} eval rows, only {int(np.sum(lab == cls))} available"
        for cls, count, kind in wanted
        if count > np.sum(lab == cls)
    ]
    if short:
        raise DataError("; ".join(short))
    picked = [np.sort(rng.permutation(rows[lab == cls])[:count]) for cls, count, _ in wanted]
    eval_rows = np.concatenate(picked)
    rest = np.setdiff1d(rows, eval_rows)
    return eval_rows, rest


def split_indices(ds: RawDataset, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(train_rows, eval_rows, rest_rows)``; rest is the unused test region."""
    if spec.train_normal_only and ds.labels is None:
        raise DataError("train_normal_only requires a labelled dataset")
    boundary = math.floor(spec.train_fraction * ds.n_rows)
    train = np.arange(boundary)
    if spec.train_normal_only:
        train = train[ds.labels[:boundary] == 0]
    eval_rows, rest = sample_eval(
        ds, spec.eval_normal_count, spec.eval_anomaly_count, spec.seed, np.arange(boundary, ds.n_rows)
    )
    return train, eval_rows, rest


def split(ds: RawDataset, spec: SplitSpec) -> tuple[RawDataset, RawDataset]:
    train, eval_rows, _ = split_indices(ds, spec)
    if len(train) == 0:
        raise DataError("training region is empty")
    if len(eval_rows) == 0:
        raise DataError("evaluation set is empty")
    return ds.take(train), take_blocks(ds, eval_rows)


def take_blocks(ds: RawDataset, rows: np.ndarray) -> RawDataset:
    """Rows in the given (non-chronological) order, e.g. an eval block layout."""
    # The eval layout (normals, then anomalies) is not chronological; keep a
    # monotone synthetic clock so the RawDataset invariant holds.
    return RawDataset(
        timestamps=np.arange(len(rows), dtype=float),
        columns=ds.columns,
        values={k: v[rows] for k, v in ds.values.items()},
        labels=None if ds.labels is None else ds.labels[rows],
    )
