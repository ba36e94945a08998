"""Streamed mini-batch data model, Bernoulli-Gaussian synthesis, sensor CSV ingestion.

Synthetic streams draw sparse codes x with entries b*g, b ~ Ber(theta),
g ~ N(0,1), and emit observations Y = D_true @ X. Sensor data is parsed from
time-major CSV files (rows are hourly timestamps, columns are sensors) with
empty cells or "NaN" marking missing readings.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from . import matops
from .seeding import as_rng, subseed


class CsvFormatError(ValueError):
    """Sensor CSV could not be parsed; the message carries row/column context."""


@dataclass(frozen=True, eq=False)
class MiniBatch:
    """One time slot of streamed samples; columns of ``samples`` are the samples."""

    t: int
    samples: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))
        if self.t < 1:
            raise ValueError(f"time index must be 1-based, got {self.t}")
        if self.samples.ndim != 2 or self.samples.shape[1] < 1:
            raise ValueError(f"batch must be 2-d with at least one column, got shape {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError(f"batch at t={self.t} has non-finite samples")

    @property
    def size(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True, eq=False)
class SyntheticModel:
    """Ground-truth generator: orthogonal dictionary plus Bernoulli-Gaussian codes."""

    d_true: np.ndarray
    theta: float
    n: int
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "d_true", np.asarray(self.d_true, dtype=float))
        if not 0.0 < self.theta < 1.0:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")
        if self.d_true.shape != (self.n, self.n):
            raise ValueError(f"dictionary shape {self.d_true.shape} does not match n={self.n}")
        if not matops.is_orthogonal(self.d_true):
            raise ValueError("ground-truth dictionary is not orthogonal within tolerance")

    @classmethod
    def random(cls, n: int, theta: float, seed: int) -> "SyntheticModel":
        d_true = matops.random_orthogonal(n, subseed(seed, "dict"))
        return cls(d_true=d_true, theta=theta, n=n, seed=seed)


def sample_bernoulli_gaussian(n: int, theta: float, count: int, seed) -> np.ndarray:
    """n-by-count matrix of independent Ber(theta) * N(0,1) entries."""
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    if n < 1 or count < 1:
        raise ValueError("n and count must be at least 1")
    rng = as_rng(seed)
    mask = rng.random((n, count)) < theta
    g = rng.standard_normal((n, count))
    return np.where(mask, g, 0.0)


def synthetic_stream(model: SyntheticModel, batch_size: int, total_batches: int) -> Iterator[MiniBatch]:
    """Lazy sequence of mini-batches Y_t = D_true @ X_t, reproducible per model seed."""
    if batch_size < 1:
        raise ValueError(f"batch size must be at least 1, got {batch_size}")
    if total_batches < 0:
        raise ValueError(f"total batches must be nonnegative, got {total_batches}")

    def generate():
        rng = as_rng(subseed(model.seed, "stream"))
        for t in range(1, total_batches + 1):
            x = sample_bernoulli_gaussian(model.n, model.theta, batch_size, rng)
            yield MiniBatch(t, model.d_true @ x)

    return generate()


@dataclass(frozen=True, eq=False)
class SensorDataset:
    """Time-major sensor readings with a mask recording originally-missing cells."""

    readings: np.ndarray
    missing_mask: np.ndarray
    sensor_ids: tuple = ()
    timestamps: tuple = ()
    imputed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "readings", np.asarray(self.readings, dtype=float))
        object.__setattr__(self, "missing_mask", np.asarray(self.missing_mask, dtype=bool))
        if self.readings.shape != self.missing_mask.shape:
            raise ValueError("readings and mask shapes differ")
        if not self.sensor_ids:
            object.__setattr__(self, "sensor_ids", tuple(f"sensor{i}" for i in range(self.readings.shape[1])))
        if not self.timestamps:
            object.__setattr__(self, "timestamps", tuple(range(self.readings.shape[0])))

    @property
    def sensor_count(self) -> int:
        return self.readings.shape[1]


_MISSING_MARKERS = {"", "nan"}


def load_sensor_csv(path) -> SensorDataset:
    """Parse a sensor CSV: header of sensor ids, one row per timestamp.

    Empty cells and "NaN"/"nan" denote missing readings and set the mask; no
    imputation happens here. Ragged rows, non-numeric cells, files without
    sensors, and files without data rows raise CsvFormatError with the
    offending location.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh)]
    if not rows:
        raise CsvFormatError(f"{path}: empty file")
    header = [cell.strip() for cell in rows[0]]
    if not header or all(cell == "" for cell in header):
        raise CsvFormatError(f"{path}: zero sensors in header")
    ncols = len(header)

    values, mask = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if row == []:  # blank line
            continue
        if len(row) != ncols:
            raise CsvFormatError(f"{path}: row {lineno} has {len(row)} cells, expected {ncols}")
        row_vals, row_mask = [], []
        for col, cell in enumerate(row):
            text = cell.strip()
            if text.lower() in _MISSING_MARKERS:
                row_vals.append(np.nan)
                row_mask.append(True)
                continue
            try:
                row_vals.append(float(text))
            except ValueError:
                raise CsvFormatError(
                    f"{path}: row {lineno}, column {col + 1} ({header[col]!r}): not a number: {text!r}"
                ) from None
            row_mask.append(False)
        values.append(row_vals)
        mask.append(row_mask)

    if not values:
        raise CsvFormatError(f"{path}: no data rows")
    return SensorDataset(
        readings=np.array(values, dtype=float),
        missing_mask=np.array(mask, dtype=bool),
        sensor_ids=tuple(header),
        timestamps=tuple(range(len(values))),
    )


def write_sensor_csv(ds: SensorDataset, path) -> None:
    """Write a dataset back to CSV; masked cells are emitted as empty."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ds.sensor_ids)
        for i in range(ds.readings.shape[0]):
            writer.writerow(
                "" if ds.missing_mask[i, j] else repr(float(ds.readings[i, j]))
                for j in range(ds.readings.shape[1])
            )


def impute_row_mean(ds: SensorDataset) -> SensorDataset:
    """Replace masked cells with the mean of the non-missing sensors at that time.

    The mask is preserved for audit, and the fill values are always recomputed
    from the unmasked cells, which makes the operation idempotent.
    """
    counts = (~ds.missing_mask).sum(axis=1)
    if np.any(counts == 0):
        ts = ds.timestamps[int(np.argmax(counts == 0))]
        raise ValueError(f"timestamp {ts}: all sensors missing, cannot impute")
    sums = np.where(ds.missing_mask, 0.0, ds.readings).sum(axis=1)
    means = sums / counts
    filled = np.where(ds.missing_mask, means[:, None], ds.readings)
    return replace(ds, readings=filled, imputed=True)


def batch_sensor_stream(ds: SensorDataset, init_count: int, batch_size: int):
    """Split readings into an init block (n-by-init_count) and streamed batches.

    The first ``init_count`` rows form the initialization block; the rest are
    chunked into batches of ``batch_size`` (the final batch may be smaller).
    Rows are transposed so that columns are samples.
    """
    if init_count < 1 or batch_size < 1:
        raise ValueError("init_count and batch_size must be at least 1")
    total = ds.readings.shape[0]
    if init_count + batch_size > total:
        raise ValueError(
            f"init_count + batch_size = {init_count + batch_size} exceeds {total} timestamps"
        )
    if not np.all(np.isfinite(ds.readings)):
        raise ValueError("dataset contains missing values; impute before streaming")
    init_block = ds.readings[:init_count].T.copy()
    rest = ds.readings[init_count:]

    def generate():
        for t, start in enumerate(range(0, rest.shape[0], batch_size), start=1):
            yield MiniBatch(t, rest[start:start + batch_size].T.copy())

    return init_block, generate()
