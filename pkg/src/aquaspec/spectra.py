"""Spectral data model, dataset CSV format, validation, replicate averaging.

Dataset CSV layout (UTF-8, comma separated, ``.`` decimal point, header row
first):

* column 1: ``id`` (free-form string)
* next columns: ``wl_<nm>`` absorbance columns, integer nanometers strictly
  increasing by a constant step; the wavelength grid is inferred from these
  headers
* remaining columns: ``t:<name>`` target columns, optional as a group
* one data row per sample; absorbance cells must all be present; target cells
  are either all present (labeled sample) or all empty (unlabeled sample)
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .exceptions import FormatError, LabelingError, ParseError, ShapeError

#: Target order used by the paper-style six-parameter reports.
CANONICAL_TARGETS = (
    "TOC",
    "calcium",
    "sodium",
    "magnesium",
    "conductivity",
    "chlorides",
)


@dataclass(frozen=True)
class WavelengthGrid:
    """Uniform wavelength axis: channel i sits at start_nm + i * step_nm."""

    start_nm: float
    step_nm: float
    n_channels: int

    def __post_init__(self):
        if not self.step_nm > 0:
            raise ValueError(f"step_nm must be positive, got {self.step_nm}")
        if self.n_channels < 1:
            raise ValueError(f"n_channels must be >= 1, got {self.n_channels}")

    def wavelengths(self) -> np.ndarray:
        return self.start_nm + self.step_nm * np.arange(self.n_channels)

    def wavelength_of(self, channel: int) -> float:
        if not 0 <= channel < self.n_channels:
            raise IndexError(f"channel {channel} outside 0..{self.n_channels - 1}")
        return self.start_nm + self.step_nm * channel


#: Zeiss-style acquisition: 210 nm start, 2 nm resolution, 205 channels.
DEFAULT_GRID = WavelengthGrid(start_nm=210.0, step_nm=2.0, n_channels=205)


def _frozen_array(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Spectrum:
    """One absorbance vector on a wavelength grid.

    Construction checks structure (length vs. grid). Content checks such as
    finiteness are the job of :func:`validate_dataset`, so files containing
    bad readings can still be loaded and reported on.
    """

    grid: WavelengthGrid
    absorbance: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "absorbance", _frozen_array(self.absorbance))
        if self.absorbance.ndim != 1:
            raise ShapeError("absorbance must be a 1-D vector")
        if self.absorbance.shape[0] != self.grid.n_channels:
            raise ShapeError(
                f"absorbance has {self.absorbance.shape[0]} entries, "
                f"grid declares {self.grid.n_channels} channels"
            )

    def __eq__(self, other):
        if not isinstance(other, Spectrum):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(
            self.absorbance, other.absorbance, equal_nan=True
        )


@dataclass(frozen=True, eq=False)
class Sample:
    """A measured water sample: id, spectrum, and optional target values."""

    id: str
    spectrum: Spectrum
    targets: np.ndarray | None = None

    def __post_init__(self):
        if self.targets is not None:
            object.__setattr__(self, "targets", _frozen_array(self.targets))
            if self.targets.ndim != 1:
                raise ShapeError("targets must be a 1-D vector")

    @property
    def is_labeled(self) -> bool:
        return self.targets is not None

    def __eq__(self, other):
        if not isinstance(other, Sample):
            return NotImplemented
        if self.id != other.id or self.spectrum != other.spectrum:
            return False
        if (self.targets is None) != (other.targets is None):
            return False
        if self.targets is None:
            return True
        return np.array_equal(self.targets, other.targets, equal_nan=True)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Samples sharing one wavelength grid plus an ordered target list."""

    grid: WavelengthGrid
    target_names: tuple[str, ...]
    samples: tuple[Sample, ...]

    def __post_init__(self):
        object.__setattr__(self, "target_names", tuple(self.target_names))
        object.__setattr__(self, "samples", tuple(self.samples))
        for sample in self.samples:
            if sample.spectrum.grid != self.grid:
                raise ShapeError(
                    f"sample '{sample.id}' is on grid {sample.spectrum.grid}, "
                    f"dataset declares {self.grid}"
                )
            if sample.targets is not None and len(sample.targets) != len(
                self.target_names
            ):
                raise ShapeError(
                    f"sample '{sample.id}' has {len(sample.targets)} targets, "
                    f"dataset declares {len(self.target_names)}"
                )

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[Sample]:
        return iter(self.samples)

    def ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.samples)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.target_names == other.target_names
            and len(self.samples) == len(other.samples)
            and all(a == b for a, b in zip(self.samples, other.samples))
        )


def average_replicates(replicates: Sequence[Spectrum]) -> Spectrum:
    """Channel-wise arithmetic mean of replicate measurements."""
    if len(replicates) == 0:
        raise ValueError("cannot average an empty list of replicates")
    grid = replicates[0].grid
    for i, rep in enumerate(replicates):
        if rep.grid != grid:
            raise ShapeError(
                f"replicate {i} is on grid {rep.grid}, expected {grid}"
            )
    stacked = np.stack([rep.absorbance for rep in replicates])
    return Spectrum(grid=grid, absorbance=stacked.mean(axis=0))


# ---------------------------------------------------------------------------
# CSV parsing / serialization


def _parse_header(header: list[str]) -> tuple[WavelengthGrid, tuple[str, ...]]:
    if not header or header[0] != "id":
        raise FormatError("line 1: first header column must be 'id'")
    wavelengths: list[int] = []
    target_names: list[str] = []
    for pos, name in enumerate(header[1:], start=2):
        if name.startswith("wl_"):
            if target_names:
                raise FormatError(
                    f"line 1: absorbance column '{name}' appears after target "
                    "columns; all wl_* columns must precede t:* columns"
                )
            try:
                nm = int(name[3:])
            except ValueError:
                raise FormatError(
                    f"line 1: column {pos} '{name}' is not of the form wl_<integer nm>"
                ) from None
            wavelengths.append(nm)
        elif name.startswith("t:"):
            target = name[2:]
            if not target:
                raise FormatError(f"line 1: column {pos} has an empty target name")
            if target in target_names:
                raise FormatError(f"line 1: duplicate target column 't:{target}'")
            target_names.append(target)
        else:
            raise FormatError(
                f"line 1: column {pos} '{name}' is neither wl_<nm> nor t:<name>"
            )
    if not wavelengths:
        raise FormatError("line 1: no wl_* absorbance columns found")
    if len(wavelengths) == 1:
        step = DEFAULT_GRID.step_nm
    else:
        diffs = {b - a for a, b in zip(wavelengths, wavelengths[1:])}
        if len(diffs) != 1:
            raise FormatError(
                "line 1: wl_* wavelengths must increase by a constant step, "
                f"got steps {sorted(diffs)}"
            )
        step = float(diffs.pop())
        if step <= 0:
            raise FormatError("line 1: wl_* wavelengths must be strictly increasing")
    grid = WavelengthGrid(
        start_nm=float(wavelengths[0]), step_nm=step, n_channels=len(wavelengths)
    )
    return grid, tuple(target_names)


def _parse_cell(cell: str, row: int, column: str) -> float:
    try:
        return float(cell)
    except ValueError:
        raise ParseError(
            f"row {row}, column '{column}': could not parse '{cell}' as a number"
        ) from None


def parse_dataset_csv(text: str) -> Dataset:
    """Parse the dataset CSV format; see the module docstring for the layout."""
    reader = csv.reader(io.StringIO(text.lstrip("﻿")))
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("line 1: file is empty") from None
    grid, target_names = _parse_header(header)
    n_wl = grid.n_channels
    n_cols = 1 + n_wl + len(target_names)

    samples: list[Sample] = []
    for row_idx, row in enumerate(reader, start=1):
        if not row:
            continue  # tolerate a trailing blank line
        if len(row) != n_cols:
            raise ShapeError(
                f"row {row_idx} has {len(row)} cells, header declares {n_cols}"
            )
        sample_id = row[0]
        absorbance = np.empty(n_wl)
        for j in range(n_wl):
            column = f"wl_{int(round(grid.start_nm + j * grid.step_nm))}"
            cell = row[1 + j]
            if cell == "":
                raise ParseError(
                    f"row {row_idx}, column '{column}': absorbance cell is empty"
                )
            absorbance[j] = _parse_cell(cell, row_idx, column)
        target_cells = row[1 + n_wl :]
        targets: np.ndarray | None
        if not target_names:
            targets = None
        elif all(cell == "" for cell in target_cells):
            targets = None
        elif any(cell == "" for cell in target_cells):
            raise ParseError(
                f"row {row_idx}: target cells must be all present or all empty"
            )
        else:
            targets = np.array(
                [
                    _parse_cell(cell, row_idx, f"t:{name}")
                    for cell, name in zip(target_cells, target_names)
                ]
            )
        samples.append(
            Sample(id=sample_id, spectrum=Spectrum(grid, absorbance), targets=targets)
        )
    return Dataset(grid=grid, target_names=target_names, samples=tuple(samples))


def serialize_dataset_csv(dataset: Dataset) -> str:
    """Render a Dataset in the CSV format; floats keep full precision."""
    wavelengths = dataset.grid.wavelengths()
    rounded = np.rint(wavelengths)
    if np.max(np.abs(wavelengths - rounded)) > 1e-9:
        raise FormatError(
            "grid wavelengths must be integral nanometers to serialize as wl_<nm>"
        )
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = (
        ["id"]
        + [f"wl_{int(nm)}" for nm in rounded]
        + [f"t:{name}" for name in dataset.target_names]
    )
    writer.writerow(header)
    for sample in dataset.samples:
        row = [sample.id] + [repr(float(v)) for v in sample.spectrum.absorbance]
        if dataset.target_names:
            if sample.targets is None:
                row += [""] * len(dataset.target_names)
            else:
                row += [repr(float(v)) for v in sample.targets]
        writer.writerow(row)
    return buf.getvalue()


def load_dataset(path) -> Dataset:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return parse_dataset_csv(fh.read())


def save_dataset(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(serialize_dataset_csv(dataset))


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class ValidationIssue:
    severity: str  # "error" or "warning"
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[ValidationIssue, ...] = field(default_factory=tuple)

    @property
    def errors(self) -> tuple[ValidationIssue, ...]:
        return tuple(i for i in self.issues if i.severity == "error")

    @property
    def warnings(self) -> tuple[ValidationIssue, ...]:
        return tuple(i for i in self.issues if i.severity == "warning")

    @property
    def is_clean(self) -> bool:
        """True when no error-severity issues were found (warnings allowed)."""
        return not self.errors

    def format_issues(self) -> str:
        return "\n".join(f"[{i.severity}] {i.message}" for i in self.issues)


def validate_dataset(dataset: Dataset) -> ValidationReport:
    """Check dataset content; reports instead of raising.

    Errors: non-finite absorbance or target entries, duplicate sample ids.
    Warnings: negative absorbance (blank-referenced instruments can emit
    slightly negative readings), negative target values, constant channels.
    """
    issues: list[ValidationIssue] = []
    wavelengths = dataset.grid.wavelengths()

    seen: dict[str, int] = {}
    for sample in dataset.samples:
        seen[sample.id] = seen.get(sample.id, 0) + 1
    for sample_id, count in seen.items():
        if count > 1:
            issues.append(
                ValidationIssue(
                    "error",
                    "duplicate_id",
                    f"sample id '{sample_id}' appears {count} times",
                )
            )

    for sample in dataset.samples:
        absorbance = sample.spectrum.absorbance
        bad = np.flatnonzero(~np.isfinite(absorbance))
        for j in bad:
            issues.append(
                ValidationIssue(
                    "error",
                    "non_finite_absorbance",
                    f"sample '{sample.id}': non-finite absorbance at "
                    f"{wavelengths[j]:g} nm",
                )
            )
        negative = np.flatnonzero(absorbance < 0)
        if negative.size:
            issues.append(
                ValidationIssue(
                    "warning",
                    "negative_absorbance",
                    f"sample '{sample.id}': {negative.size} negative absorbance "
                    f"entries (first at {wavelengths[negative[0]]:g} nm)",
                )
            )
        if sample.targets is not None:
            for name, value in zip(dataset.target_names, sample.targets):
                if not np.isfinite(value):
                    issues.append(
                        ValidationIssue(
                            "error",
                            "non_finite_target",
                            f"sample '{sample.id}': non-finite value for "
                            f"target '{name}'",
                        )
                    )
                elif value < 0:
                    issues.append(
                        ValidationIssue(
                            "warning",
                            "negative_target",
                            f"sample '{sample.id}': negative value "
                            f"{value:g} for target '{name}'",
                        )
                    )

    if len(dataset.samples) >= 2:
        X = np.stack([s.spectrum.absorbance for s in dataset.samples])
        with np.errstate(invalid="ignore"):
            constant = np.flatnonzero(np.ptp(X, axis=0) == 0)
        for j in constant:
            issues.append(
                ValidationIssue(
                    "warning",
                    "constant_channel",
                    f"channel at {wavelengths[j]:g} nm is constant across samples",
                )
            )

    return ValidationReport(issues=tuple(issues))


def split_features_targets(dataset: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Stack spectra into X [n x channels] and targets into Y [n x targets].

    Row order follows ``dataset.samples``. Every sample must be labeled.
    """
    for sample in dataset.samples:
        if sample.targets is None:
            raise LabelingError(
                f"sample '{sample.id}' has no targets; all samples must be labeled"
            )
    if not dataset.samples:
        X = np.empty((0, dataset.grid.n_channels))
        Y = np.empty((0, len(dataset.target_names)))
        return X, Y
    X = np.stack([s.spectrum.absorbance for s in dataset.samples]).astype(np.float64)
    Y = np.stack([s.targets for s in dataset.samples]).astype(np.float64)
    return X, Y
