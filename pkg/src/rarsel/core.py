"""Core data containers: datasets, coefficient vectors, sign patterns, penalties."""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

#: Tolerance below which a coefficient is treated as an exact zero when
#: extracting sign patterns.  Coordinate descent produces exact zeros via
#: soft-thresholding, so this only guards dense least-squares refits.
DEFAULT_ZERO_TOL = 1e-8

_STANDARD_MEAN_TOL = 1e-10
_STANDARD_SCALE_TOL = 1e-8


class DataError(ValueError):
    """Invalid design matrix, response vector, or input file."""


def _float_vector(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DataError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class CoefficientVector:
    """Dense coefficient vector whose nonzero support is kept in sync.

    The ``support`` attribute is always derived from ``values`` at
    construction time, so it can never go stale.
    """

    values: np.ndarray
    support: np.ndarray = field(init=False)

    def __post_init__(self):
        values = _float_vector(self.values, "values").copy()
        values.setflags(write=False)
        support = np.flatnonzero(values)
        support.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "support", support)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def n_nonzero(self) -> int:
        return int(self.support.shape[0])

    def sign(self, zero_tol: float = DEFAULT_ZERO_TOL) -> "SignPattern":
        return sign_of(self, zero_tol)


@dataclass(frozen=True, eq=False)
class SignPattern:
    """Vector over {-1, 0, +1} describing the sign of each coefficient."""

    signs: np.ndarray

    def __post_init__(self):
        signs = np.asarray(self.signs)
        if signs.ndim != 1:
            raise DataError("signs must be one-dimensional")
        if not np.isin(signs, (-1, 0, 1)).all():
            raise DataError("sign entries must be -1, 0 or +1")
        signs = signs.astype(np.int8)
        signs.setflags(write=False)
        object.__setattr__(self, "signs", signs)

    def __len__(self) -> int:
        return self.signs.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, SignPattern):
            return NotImplemented
        return np.array_equal(self.signs, other.signs)


def sign_of(beta: CoefficientVector, zero_tol: float = DEFAULT_ZERO_TOL) -> SignPattern:
    """Map a coefficient vector to its sign pattern.

    Entries with absolute value at most ``zero_tol`` map to 0; the rest map
    to their arithmetic sign.
    """
    if zero_tol < 0:
        raise ValueError("zero_tol must be nonnegative")
    values = beta.values
    signs = np.sign(values).astype(np.int8)
    signs[np.abs(values) <= zero_tol] = 0
    return SignPattern(signs)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Design matrix plus response with centering/scaling metadata.

    ``column_means`` / ``column_scales`` record the affine transform that maps
    the original data to the stored ``x`` (original = means + scales * x).
    For raw data they are zeros and ones.  ``x`` is stored Fortran-ordered so
    per-column access in the solver is contiguous; arrays are frozen after
    construction and safe to share across workers.
    """

    x: np.ndarray
    y: np.ndarray
    column_means: np.ndarray | None = None
    column_scales: np.ndarray | None = None
    standardized: bool = False
    truth: CoefficientVector | None = None
    constant_columns: tuple[int, ...] = ()
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        x = np.asfortranarray(self.x, dtype=np.float64)
        if x.ndim != 2:
            raise DataError(f"x must be a matrix, got shape {x.shape}")
        n, p = x.shape
        if n < 2:
            raise DataError("need at least 2 observations")
        if p < 1:
            raise DataError("need at least 1 feature")
        y = _float_vector(self.y, "y")
        if y.shape[0] != n:
            raise DataError(f"y has length {y.shape[0]}, expected {n}")
        if not np.isfinite(x).all():
            raise DataError("x contains non-finite entries")
        if not np.isfinite(y).all():
            raise DataError("y contains non-finite entries")

        means = self.column_means
        scales = self.column_scales
        means = np.zeros(p) if means is None else _float_vector(means, "column_means")
        scales = np.ones(p) if scales is None else _float_vector(scales, "column_scales")
        if means.shape[0] != p or scales.shape[0] != p:
            raise DataError("centering metadata does not match the number of columns")

        if self.truth is not None and len(self.truth) != p:
            raise DataError(f"truth has length {len(self.truth)}, expected {p}")
        if any(j < 0 or j >= p for j in self.constant_columns):
            raise DataError("constant_columns out of range")
        if self.feature_names is not None and len(self.feature_names) != p:
            raise DataError("feature_names does not match the number of columns")

        if self.standardized:
            self._check_standardized(x)

        for arr in (x, y, means, scales):
            arr.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "column_means", means)
        object.__setattr__(self, "column_scales", scales)
        object.__setattr__(self, "constant_columns", tuple(self.constant_columns))

    def _check_standardized(self, x: np.ndarray) -> None:
        n = x.shape[0]
        skip = np.zeros(x.shape[1], dtype=bool)
        skip[list(self.constant_columns)] = True
        col_means = x.mean(axis=0)
        if np.abs(col_means[~skip]).max(initial=0.0) > _STANDARD_MEAN_TOL:
            raise DataError("standardized flag set but column means are not ~0")
        sd = np.sqrt(((x - col_means) ** 2).sum(axis=0) / n)
        if np.abs(sd[~skip] - 1.0).max(initial=0.0) > _STANDARD_SCALE_TOL:
            raise DataError("standardized flag set but column scales are not ~1")

    @property
    def n_samples(self) -> int:
        return self.x.shape[0]

    @property
    def n_features(self) -> int:
        return self.x.shape[1]

    def subset_rows(self, rows: np.ndarray) -> "Dataset":
        """Dataset restricted to the given rows (standardized flag drops)."""
        rows = np.asarray(rows)
        return Dataset(
            self.x[rows],
            self.y[rows],
            column_means=self.column_means,
            column_scales=self.column_scales,
            standardized=False,
            truth=self.truth,
            constant_columns=self.constant_columns,
            feature_names=self.feature_names,
        )

    def subset_columns(self, cols: np.ndarray) -> "Dataset":
        """Dataset restricted to the given columns; truth does not carry over."""
        cols = np.asarray(cols)
        col_set = set(int(c) for c in cols)
        remap = {int(c): i for i, c in enumerate(cols)}
        names = None
        if self.feature_names is not None:
            names = tuple(self.feature_names[int(c)] for c in cols)
        return Dataset(
            self.x[:, cols],
            self.y,
            column_means=self.column_means[cols],
            column_scales=self.column_scales[cols],
            standardized=self.standardized,
            truth=None,
            constant_columns=tuple(
                remap[j] for j in self.constant_columns if j in col_set
            ),
            feature_names=names,
        )

    def content_hash(self) -> str:
        """SHA-256 over the raw bytes of x and y (used for paired-run audits)."""
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(self.x).tobytes())
        digest.update(self.y.tobytes())
        return digest.hexdigest()


def standardize(dataset: Dataset) -> Dataset:
    """Center each column and rescale to unit standard deviation.

    Uses the population (1/n) standard deviation so marginal-coefficient and
    rescaled-correlation formulas agree.  Zero-variance columns are centered,
    zeroed, given scale 1 and flagged in ``constant_columns`` instead of being
    divided.  A ground-truth coefficient vector, when present, is rescaled by
    the column scales so it stays the population coefficient vector for the
    transformed design (signs are unchanged).
    """
    x = dataset.x
    n = dataset.n_samples
    means = x.mean(axis=0)
    centered = x - means
    sd = np.sqrt((centered**2).sum(axis=0) / n)
    constant = sd <= 1e-12 * np.maximum(1.0, np.abs(means))
    scales = np.where(constant, 1.0, sd)
    out = np.asfortranarray(centered / scales)
    if constant.any():
        out[:, constant] = 0.0

    truth = dataset.truth
    if truth is not None:
        truth = CoefficientVector(truth.values * scales)

    flagged = sorted(set(dataset.constant_columns) | set(np.flatnonzero(constant).tolist()))
    return Dataset(
        out,
        dataset.y,
        column_means=dataset.column_means + dataset.column_scales * means,
        column_scales=dataset.column_scales * scales,
        standardized=True,
        truth=truth,
        constant_columns=tuple(int(j) for j in flagged),
        feature_names=dataset.feature_names,
    )


@dataclass(frozen=True, eq=False)
class PenaltyProfile:
    """Per-feature penalty status encoded as a weight vector.

    weight 0        -> unpenalized feature
    finite weight>0 -> weighted l1 penalty (lambda * weight * |beta_j|)
    weight inf      -> excluded feature, hard-fixed at zero
    """

    weights: np.ndarray

    def __post_init__(self):
        w = _float_vector(self.weights, "weights").copy()
        if w.shape[0] < 1:
            raise DataError("penalty profile needs at least one feature")
        if np.isnan(w).any() or (w < 0).any():
            raise DataError("penalty weights must be nonnegative (0, finite or inf)")
        if not (w < np.inf).any():
            raise DataError("at least one feature must not be excluded")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.weights.shape[0]

    @property
    def unpenalized_mask(self) -> np.ndarray:
        return self.weights == 0.0

    @property
    def weighted_mask(self) -> np.ndarray:
        return (self.weights > 0.0) & np.isfinite(self.weights)

    @property
    def excluded_mask(self) -> np.ndarray:
        return np.isinf(self.weights)

    @property
    def active_mask(self) -> np.ndarray:
        return ~self.excluded_mask

    # --- common configurations -------------------------------------------

    @classmethod
    def lasso(cls, p: int) -> "PenaltyProfile":
        """Unit weight on every feature."""
        return cls(np.ones(p))

    @classmethod
    def from_weights(cls, weights) -> "PenaltyProfile":
        return cls(np.asarray(weights, dtype=np.float64))

    @classmethod
    def adaptive(cls, marginal_coef) -> "PenaltyProfile":
        """Weights 1/|marginal coefficient|; zero coefficients become excluded."""
        coef = np.abs(np.asarray(marginal_coef, dtype=np.float64))
        if (coef == 0).all():
            raise DataError("all marginal coefficients are zero; no usable weights")
        with np.errstate(divide="ignore"):
            w = np.where(coef > 0, 1.0 / coef, np.inf)
        return cls(w)

    @classmethod
    def screened(cls, p: int, kept) -> "PenaltyProfile":
        """Unit weight on the kept set, exclusion elsewhere."""
        w = np.full(p, np.inf)
        w[np.asarray(kept, dtype=np.intp)] = 1.0
        return cls(w)

    @classmethod
    def retention(cls, p: int, retained) -> "PenaltyProfile":
        """No penalty on the retained set, unit weight elsewhere."""
        w = np.ones(p)
        w[np.asarray(retained, dtype=np.intp)] = 0.0
        return cls(w)

    @classmethod
    def purge(cls, p: int, penalized, free) -> "PenaltyProfile":
        """Unit weight on ``penalized``, no penalty on ``free``, exclusion elsewhere."""
        w = np.full(p, np.inf)
        w[np.asarray(penalized, dtype=np.intp)] = 1.0
        w[np.asarray(free, dtype=np.intp)] = 0.0
        return cls(w)


def load_csv(
    path,
    response,
    header: bool = True,
) -> Dataset:
    """Load a delimited file into a Dataset.

    ``response`` selects the response column by name (requires a header row)
    or by 0-based column index.  All remaining columns form the design matrix
    in file order.  Non-finite or non-numeric cells are a hard error.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row]
    if not rows:
        raise DataError(f"{path}: empty file")

    if header:
        names = [c.strip() for c in rows[0]]
        body = rows[1:]
    else:
        names = [str(i + 1) for i in range(len(rows[0]))]
        body = rows
    if not body:
        raise DataError(f"{path}: no data rows")

    n_cols = len(names)
    if isinstance(response, str):
        if not header:
            raise DataError("response selected by name requires a header row")
        try:
            y_col = names.index(response)
        except ValueError:
            raise DataError(f"response column {response!r} not found in header") from None
    else:
        y_col = int(response)
        if y_col < 0 or y_col >= n_cols:
            raise DataError(f"response index {y_col} out of range for {n_cols} columns")

    data = np.empty((len(body), n_cols))
    for i, row in enumerate(body):
        if len(row) != n_cols:
            raise DataError(f"{path}: row {i + 1} has {len(row)} cells, expected {n_cols}")
        for j, cell in enumerate(row):
            try:
                value = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric cell {cell!r} at row {i + 1}, column {names[j]}"
                ) from None
            if not np.isfinite(value):
                raise DataError(
                    f"{path}: non-finite cell at row {i + 1}, column {names[j]}"
                )
            data[i, j] = value

    keep = [j for j in range(n_cols) if j != y_col]
    return Dataset(
        data[:, keep],
        data[:, y_col],
        feature_names=tuple(names[j] for j in keep),
    )
