"""Core data containers, validation, CSV ingestion, and seed derivation."""

import csv
import hashlib
import io
from dataclasses import dataclass, field, replace

import numpy as np

AUTO = "auto"


class ValidationError(ValueError):
    """A dataset or result object violates one of its invariants."""


class ConfigError(ValueError):
    """A configuration value is missing, unknown, or out of range."""


@dataclass
class Dataset:
    """An n x p feature matrix with a continuous response.

    Feature indices are 0-based internally; reports and file formats use
    1-based indices and the feature names.
    """

    x: np.ndarray
    y: np.ndarray
    feature_names: list[str] | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def names(self) -> list[str]:
        if self.feature_names is not None:
            return list(self.feature_names)
        return [f"x{j + 1}" for j in range(self.p)]


@dataclass(frozen=True)
class TruthSpec:
    """The true support: set of 0-based feature indices."""

    s0: frozenset[int]

    def __init__(self, s0):
        object.__setattr__(self, "s0", frozenset(int(j) for j in s0))


@dataclass
class RunConfig:
    """Pipeline hyperparameters with the documented defaults.

    ``"auto"`` resolutions: active_set_size -> floor(2n / log n) capped at p;
    kappa -> rank-gap detection on the averaged bootstrap ranks;
    lambda_start -> 1e-3 times the largest skip-weight gradient magnitude at
    the dense solution.
    """

    active_set_size: int | str = AUTO
    merge_threshold_r: float = 0.9
    hierarchy_m: float = 10.0
    lambda_start: float | str = AUTO
    path_multiplier: float = 1.05
    bootstrap_b: int = 50
    kappa: float | str = AUTO
    fdr_level_q: float = 0.15
    seed: int = 0
    cv_folds: int = 5
    hidden_size: int = 100
    epochs_dense: int = 200
    epochs_path: int = 20
    learning_rate: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 64
    patience: int = 10
    validation_fraction: float = 0.1
    nodewise_grid_size: int = 50
    e0_factor: float = 1.0

    def __post_init__(self):
        checks = [
            (self.merge_threshold_r, lambda v: 0.0 < v <= 1.0, "merge_threshold_r in (0, 1]"),
            (self.hierarchy_m, lambda v: v > 0, "hierarchy_m > 0"),
            (self.path_multiplier, lambda v: v > 1.0, "path_multiplier > 1"),
            (self.bootstrap_b, lambda v: v >= 1, "bootstrap_b >= 1"),
            (self.fdr_level_q, lambda v: 0.0 < v < 1.0, "fdr_level_q in (0, 1)"),
            (self.cv_folds, lambda v: v >= 2, "cv_folds >= 2"),
            (self.hidden_size, lambda v: v >= 1, "hidden_size >= 1"),
            (self.epochs_dense, lambda v: v >= 1, "epochs_dense >= 1"),
            (self.epochs_path, lambda v: v >= 1, "epochs_path >= 1"),
            (self.learning_rate, lambda v: v > 0, "learning_rate > 0"),
            (self.e0_factor, lambda v: v > 0, "e0_factor > 0"),
        ]
        for value, ok, msg in checks:
            try:
                good = ok(value)
            except TypeError:
                good = False
            if not good:
                raise ConfigError(f"{msg} (got {value!r})")
        if self.active_set_size != AUTO and (
            not isinstance(self.active_set_size, int) or self.active_set_size < 1
        ):
            raise ConfigError(f"active_set_size must be a positive integer or 'auto' (got {self.active_set_size!r})")
        if self.kappa != AUTO and not (isinstance(self.kappa, (int, float)) and self.kappa >= 0):
            raise ConfigError(f"kappa must be a non-negative real or 'auto' (got {self.kappa!r})")
        if self.lambda_start != AUTO and not (
            isinstance(self.lambda_start, (int, float)) and self.lambda_start > 0
        ):
            raise ConfigError(f"lambda_start must be a positive real or 'auto' (got {self.lambda_start!r})")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            raise ConfigError(f"seed must be a 64-bit unsigned integer (got {self.seed!r})")

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, seed=seed)


def derive_seed(seed: int, *tags) -> int:
    """Derive a child seed from a root seed and a stage path.

    Hashes the root together with stage tags and replicate indices so every
    stage gets an independent, reproducible stream regardless of execution
    order.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed)).encode())
    for t in tags:
        h.update(b"/")
        h.update(str(t).encode())
    return int.from_bytes(h.digest(), "little")


def validate(dataset: Dataset) -> None:
    """Raise ValidationError at the first violated Dataset invariant."""
    x, y = dataset.x, dataset.y
    if x.ndim != 2:
        raise ValidationError(f"x must be a 2-d matrix (got ndim={x.ndim})")
    if y.ndim != 1:
        raise ValidationError(f"y must be a 1-d vector (got ndim={y.ndim})")
    n, p = x.shape
    if p < 1:
        raise ValidationError("no features (p = 0)")
    if n < 2:
        raise ValidationError(f"n < 2 (got n={n})")
    if y.shape[0] != n:
        raise ValidationError(f"y length {y.shape[0]} does not match {n} rows of x")
    bad = np.argwhere(~np.isfinite(x))
    if bad.size:
        i, j = bad[0]
        raise ValidationError(f"non-finite value in x at row {i + 1}, feature {j + 1}")
    bad = np.argwhere(~np.isfinite(y))
    if bad.size:
        raise ValidationError(f"non-finite value in y at index {bad[0][0] + 1}")
    if dataset.feature_names is not None and len(dataset.feature_names) != p:
        raise ValidationError(
            f"feature_names length {len(dataset.feature_names)} does not match p={p}"
        )


def load_csv(path, response_column: str) -> Dataset:
    """Read a rectangular header-ed CSV into a validated Dataset.

    The named response column becomes y; the remaining columns become
    features in file order.
    """
    try:
        fh = open(path, "r", newline="", encoding="utf-8")
    except FileNotFoundError:
        raise ValidationError(f"file not found: {path}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"empty CSV: {path}") from None
        if response_column not in header:
            raise ValidationError(
                f"response column {response_column!r} not in header {header}"
            )
        y_col = header.index(response_column)
        rows = []
        for i, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValidationError(
                    f"row {i} has {len(row)} cells, header has {len(header)}"
                )
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                j = next(k for k, c in enumerate(row) if not _is_float(c))
                raise ValidationError(
                    f"non-numeric cell at row {i}, col {j + 1} ({row[j]!r})"
                ) from None
    if len(rows) < 2:
        raise ValidationError(f"n < 2 (got n={len(rows)})")
    data = np.asarray(rows, dtype=np.float64)
    y = data[:, y_col]
    x = np.delete(data, y_col, axis=1)
    names = [h for k, h in enumerate(header) if k != y_col]
    ds = Dataset(x=x, y=y, feature_names=names)
    validate(ds)
    return ds


def _is_float(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def write_csv(dataset: Dataset, path, response_column: str = "y") -> None:
    """Write a Dataset back to CSV; shortest round-trip float formatting."""
    names = dataset.names()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([response_column] + names)
    for i in range(dataset.n):
        writer.writerow([repr(float(dataset.y[i]))] + [repr(float(v)) for v in dataset.x[i]])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(buf.getvalue())
