"""Dataset synthesis, CSV ingestion, splitting, and standardization."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FRIEDMAN3_BOUNDS = (
    (0.0, 100.0),
    (40.0 * np.pi, 560.0 * np.pi),
    (0.0, 1.0),
    (1.0, 11.0),
)


class CsvFormatError(ValueError):
    """The CSV file violates the expected numeric, headered layout."""


@dataclass
class Dataset:
    name: str
    X: np.ndarray  # (n, p)
    y: np.ndarray  # (n,)

    def __post_init__(self) -> None:
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.X.ndim != 2 or self.y.ndim != 1 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X must be (n, p) and y (n,) with matching n")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise ValueError(f"dataset {self.name!r} contains non-finite values")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass
class SplitDataset:
    train: Dataset
    valid: Dataset
    split_seed: int


def friedman3_target(Z: np.ndarray) -> np.ndarray:
    """Noise-free Friedman #3 response arctan((z2*z3 - 1/(z2*z4)) / z1)."""
    Z = np.asarray(Z, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.arctan((Z[:, 1] * Z[:, 2] - 1.0 / (Z[:, 1] * Z[:, 3])) / Z[:, 0])


def gen_friedman3(
    n: int, rng: np.random.Generator, noise_std: float = 1.0
) -> Dataset:
    """Sample the synthetic Friedman #3 regression task.

    Features are uniform on the four canonical intervals; the target adds
    noise_std * standard normal noise per row.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    cols = [rng.uniform(lo, hi, size=n) for lo, hi in FRIEDMAN3_BOUNDS]
    Z = np.column_stack(cols)
    y = friedman3_target(Z)
    if noise_std > 0.0:
        y = y + noise_std * rng.standard_normal(n)
    return Dataset(name="friedman3", X=Z, y=y)


def load_csv(
    path: str | Path,
    target_column: str,
    drop_columns: tuple[str, ...] = (),
    name: str | None = None,
) -> Dataset:
    """Read a headered, comma-separated, all-numeric table.

    Features are every column except the target and any dropped columns.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CsvFormatError(f"{path}: file is empty")
    header = [h.strip() for h in rows[0]]
    if target_column not in header:
        raise CsvFormatError(
            f"{path}: target column {target_column!r} not in header {header}"
        )
    skip = set(drop_columns) | {target_column}
    missing = set(drop_columns) - set(header)
    if missing:
        raise CsvFormatError(f"{path}: drop columns {sorted(missing)} not in header")
    feat_idx = [i for i, h in enumerate(header) if h not in skip]
    tgt_idx = header.index(target_column)

    def parse(cell: str, row_no: int, col: str) -> float:
        try:
            return float(cell)
        except ValueError:
            raise CsvFormatError(
                f"{path}: non-numeric cell {cell!r} at data row {row_no}, "
                f"column {col!r}"
            ) from None

    X_rows, y_vals = [], []
    for r, row in enumerate(rows[1:], start=1):
        if len(row) != len(header):
            raise CsvFormatError(
                f"{path}: data row {r} has {len(row)} cells, header has {len(header)}"
            )
        X_rows.append([parse(row[i], r, header[i]) for i in feat_idx])
        y_vals.append(parse(row[tgt_idx], r, target_column))
    if not X_rows:
        raise CsvFormatError(f"{path}: no data rows")
    return Dataset(name=name or path.stem, X=np.asarray(X_rows), y=np.asarray(y_vals))


def load_boston(path: str | Path) -> Dataset:
    """Boston housing table: 13 features, target MEDV."""
    return load_csv(path, target_column="MEDV", name="boston")


def load_energy(path: str | Path) -> Dataset:
    """Energy-efficiency table: 8 attributes, first response Y1 kept, Y2 dropped."""
    return load_csv(path, target_column="Y1", drop_columns=("Y2",), name="energy")


def write_csv(ds: Dataset, path: str | Path, feature_names: list[str] | None = None) -> None:
    """Write a dataset in the same headered format load_csv reads."""
    names = feature_names or [f"x{i + 1}" for i in range(ds.p)]
    if len(names) != ds.p:
        raise ValueError(f"need {ds.p} feature names, got {len(names)}")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(names + ["y"])
        for i in range(ds.n):
            writer.writerow([repr(v) for v in ds.X[i]] + [repr(ds.y[i])])


def split_80_20(ds: Dataset, seed: int) -> SplitDataset:
    """Seeded 80/20 row split (floor on the training side), disjoint and covering.

    The same seed always yields the same validation rows, so every model
    variant in one experiment scores against an identical validation set.
    """
    if ds.n < 5:
        raise ValueError(f"need at least 5 rows to split, got {ds.n}")
    perm = np.random.default_rng(seed).permutation(ds.n)
    n_train = ds.n * 4 // 5
    tr, va = perm[:n_train], perm[n_train:]
    return SplitDataset(
        train=Dataset(ds.name, ds.X[tr], ds.y[tr]),
        valid=Dataset(ds.name, ds.X[va], ds.y[va]),
        split_seed=seed,
    )


@dataclass
class Standardizer:
    """Per-column z-score parameters fit on training rows only."""

    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float
    y_std: float


def standardize_fit(train: Dataset) -> Standardizer:
    x_mean = train.X.mean(axis=0)
    x_std = train.X.std(axis=0)
    constant = x_std == 0.0
    if np.any(constant):
        warnings.warn(
            f"constant feature columns {np.flatnonzero(constant).tolist()} get "
            "unit scale",
            stacklevel=2,
        )
        x_std = np.where(constant, 1.0, x_std)
    y_std = float(train.y.std())
    if y_std == 0.0:
        warnings.warn("constant target gets unit scale", stacklevel=2)
        y_std = 1.0
    return Standardizer(x_mean, x_std, float(train.y.mean()), y_std)


def standardize_apply(std: Standardizer, ds: Dataset) -> Dataset:
    return Dataset(ds.name, (ds.X - std.x_mean) / std.x_std, (ds.y - std.y_mean) / std.y_std)


def standardize_invert(std: Standardizer, ds: Dataset) -> Dataset:
    return Dataset(ds.name, ds.X * std.x_std + std.x_mean, ds.y * std.y_std + std.y_mean)


def invert_y(std: Standardizer, y: np.ndarray) -> np.ndarray:
    """Map standardized responses back to raw target units."""
    return np.asarray(y, dtype=np.float64) * std.y_std + std.y_mean
