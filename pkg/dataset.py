"""
dataset.py — Sample storage, UCR-style delimited loader and synthetic grids.

A Dataset owns N samples T_i ∈ R^d with scalar targets f(T_i). Sample order is
stable: index i in every formula of dc_core / lp_build refers to row i here.

Sources:
  - delimited text files, one sample per line (UCR archive convention: the
    class label sits in the first column)
  - the two synthetic surfaces phi1 / phi2 sampled on a uniform square grid
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

logger = logging.getLogger(__name__)

SYNTHETIC_PREFIX = "synthetic:"
# Column count quoted for the TwoLeadECG recordings; only used for a log line.
ECG_REPORTED_DIM = 83


class DatasetParseError(ValueError):
    """Raised when a delimited dataset file is malformed."""


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Sample:
    features: np.ndarray
    target: float


@dataclass(frozen=True)
class Dataset:
    """
    Immutable sample table: `features` is N x d, `targets` has length N.
    Both arrays are copied and frozen on construction.
    """

    features: np.ndarray
    targets: np.ndarray
    name: str = ""

    def __post_init__(self) -> None:
        features = np.array(self.features, dtype=float, copy=True)
        targets = np.array(self.targets, dtype=float, copy=True).reshape(-1)
        if features.ndim != 2:
            raise ValueError(f"features must be a 2-D array, got shape {features.shape}")
        if features.shape[0] < 1:
            raise ValueError("a dataset needs at least one sample")
        if features.shape[1] < 1:
            raise ValueError("samples need at least one feature")
        if targets.shape[0] != features.shape[0]:
            raise ValueError(
                f"{features.shape[0]} feature rows but {targets.shape[0]} targets"
            )
        if not (np.all(np.isfinite(features)) and np.all(np.isfinite(targets))):
            raise ValueError("dataset values must be finite")
        features.flags.writeable = False
        targets.flags.writeable = False
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "targets", targets)

    @property
    def N(self) -> int:
        return int(self.features.shape[0])

    @property
    def d(self) -> int:
        return int(self.features.shape[1])

    @property
    def samples(self) -> list[Sample]:
        return [self.sample(i) for i in range(self.N)]

    def sample(self, i: int) -> Sample:
        if not 0 <= i < self.N:
            raise IndexError(f"sample index {i} out of range for N={self.N}")
        return Sample(features=self.features[i], target=float(self.targets[i]))

    def with_bias(self) -> "Dataset":
        """Return a copy with a constant-1 feature appended (opt-in intercept)."""
        ones = np.ones((self.N, 1))
        return Dataset(np.hstack([self.features, ones]), self.targets, name=f"{self.name}+bias")


@dataclass(frozen=True)
class GridSpec:
    points_per_axis: int = 50
    lo: float = -1.0
    hi: float = 1.0

    def __post_init__(self) -> None:
        if int(self.points_per_axis) < 2:
            raise ValueError(f"points_per_axis must be >= 2, got {self.points_per_axis}")
        if not self.lo < self.hi:
            raise ValueError(f"grid needs lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / (self.points_per_axis - 1)

    def axis(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, int(self.points_per_axis))


# ---------------------------------------------------------------------------
# Delimited files
# ---------------------------------------------------------------------------

def _split(line: str, delimiter: str | None) -> list[str]:
    if delimiter is None:
        return line.split()
    return [part.strip() for part in line.split(delimiter)]


def sniff_delimiter(first_line: str) -> str | None:
    """Tab, then comma, otherwise whitespace (older UCR .txt files)."""
    if "\t" in first_line:
        return "\t"
    if "," in first_line:
        return ","
    return None


def load_delimited(
    path: str | Path,
    delimiter: str | None = "\t",
    label_first: bool = True,
    name: str | None = None,
) -> Dataset:
    """
    Parse a delimited numeric file into a Dataset.

    :param path: File with one sample per line.
    :param delimiter: Field separator; None splits on any whitespace.
    :param label_first: Target in column 0 (UCR layout); otherwise the last column.
    """
    path = Path(path)
    raw = path.read_text(encoding="utf-8")

    rows: list[list[float]] = []
    width: int | None = None
    for lineno, line in enumerate(raw.splitlines(), 1):
        if not line.strip():
            continue
        fields = _split(line.strip(), delimiter)
        if width is None:
            width = len(fields)
            if width < 2:
                raise DatasetParseError(
                    f"{path}:{lineno}: need at least 2 fields per line, found {width}"
                )
        elif len(fields) != width:
            raise DatasetParseError(
                f"{path}:{lineno}: expected {width} fields, found {len(fields)} (line {lineno})"
            )
        try:
            values = [float(x) for x in fields]
        except ValueError as exc:
            raise DatasetParseError(f"{path}:{lineno}: non-numeric field: {exc}") from exc
        if not all(math.isfinite(v) for v in values):
            raise DatasetParseError(f"{path}:{lineno}: non-finite value")
        rows.append(values)

    if not rows:
        raise DatasetParseError(f"{path}: empty file")

    table = np.asarray(rows, dtype=float)
    if label_first:
        targets, features = table[:, 0], table[:, 1:]
    else:
        targets, features = table[:, -1], table[:, :-1]

    data = Dataset(features, targets, name=name or path.stem)
    logger.info("Loaded %s: N=%d d=%d", data.name, data.N, data.d)
    if "ecg" in data.name.lower() and data.d != ECG_REPORTED_DIM:
        logger.info(
            "%s has d=%d (%d columns incl. label); reported recordings per signal: %d",
            data.name, data.d, data.d + 1, ECG_REPORTED_DIM,
        )
    return data


def save_delimited(
    data: Dataset,
    path: str | Path,
    delimiter: str = "\t",
    label_first: bool = True,
) -> None:
    """Write a Dataset back out; repr() keeps every double bit-exact."""
    lines = []
    for i in range(data.N):
        values = [repr(float(v)) for v in data.features[i]]
        target = repr(float(data.targets[i]))
        fields = [target, *values] if label_first else [*values, target]
        lines.append(delimiter.join(fields))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Synthetic surfaces
# ---------------------------------------------------------------------------

def phi1(x, y):
    """Deep minimum at (0.5, 0): sqrt(|x - 0.5| + 3|y|)."""
    return np.sqrt(np.abs(x - 0.5) + 3.0 * np.abs(y))


def phi2(x, y):
    """Several shallow minima: sin(5x - 0.5) - sqrt(|cos(7y)|)."""
    return np.sin(5.0 * x - 0.5) - np.sqrt(np.abs(np.cos(7.0 * y)))


SURFACES: dict[str, Callable] = {"phi1": phi1, "phi2": phi2}


def make_grid(spec: GridSpec, fn: Callable, name: str = "grid") -> Dataset:
    """
    Sample `fn` on a points_per_axis^2 grid, x outer / y inner (row-major),
    both endpoints included.
    """
    axis = spec.axis()
    xs, ys = np.meshgrid(axis, axis, indexing="ij")
    xs, ys = xs.ravel(), ys.ravel()
    targets = np.asarray(fn(xs, ys), dtype=float).reshape(-1)
    if targets.shape[0] != xs.shape[0]:
        targets = np.array([float(fn(x, y)) for x, y in zip(xs, ys)])
    return Dataset(np.column_stack([xs, ys]), targets, name=name)


def load_source(
    source: str,
    grid: GridSpec | None = None,
    label_first: bool = True,
    augment_bias: bool = False,
) -> Dataset:
    """
    Resolve a data source string: `synthetic:phi1`, `synthetic:phi2` or a file path.
    """
    if source.startswith(SYNTHETIC_PREFIX):
        key = source[len(SYNTHETIC_PREFIX):].strip().lower()
        fn = SURFACES.get(key)
        if fn is None:
            raise ValueError(f"unknown synthetic surface '{key}' (expected one of {sorted(SURFACES)})")
        spec = grid or GridSpec()
        data = make_grid(spec, fn, name=key)
        logger.info(
            "Grid %s: %d points/axis on [%g, %g], step %.6f, N=%d",
            key, spec.points_per_axis, spec.lo, spec.hi, spec.step, data.N,
        )
    else:
        path = Path(source).expanduser()
        if not path.exists():
            raise ValueError(f"data file not found: {path}")
        with path.open(encoding="utf-8") as fh:
            first = fh.readline()
        data = load_delimited(path, delimiter=sniff_delimiter(first), label_first=label_first)

    return data.with_bias() if augment_bias else data
