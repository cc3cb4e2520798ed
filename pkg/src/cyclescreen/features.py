"""Robust per-cycle scaling and feature extraction.

The scaling step shifts a series by a robust location/scale compound: each
value becomes ``x_i - median(X)**2 / IQR(X)``, with quartiles computed by
linear interpolation (the type-7 estimator numpy uses by default). The shift
is a constant per series, so consecutive differences survive unchanged while
series from different cycles land on a comparable footing.

Per-cycle point-anomaly features are maxima of consecutive differences of the
scaled voltage and capacity, plus the maximum ratio of those differences.
Natural-log variants, a power-transform normality toolkit, and a normalized
distance feature over (cycle_index, capacity_max) round out the module.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import norm

from .dataset import CycleRecord
from .errors import (
    DegenerateSpreadError,
    EmptyFeatureError,
    EmptyInputError,
    ShapeMismatchError,
    ShortCycleError,
    SingularCovarianceError,
)

#: guard for near-zero capacity differences and log arguments
EPS = 1e-12


@dataclass(frozen=True)
class ScaledSeries:
    """A robustly shifted series plus the statistics that produced it."""

    values: np.ndarray
    origin: str
    median: float
    iqr: float

    @property
    def offset(self) -> float:
        return self.median**2 / self.iqr


def median_iqr_transform(values, origin: str = "series") -> ScaledSeries:
    """Shift a series by median(X)^2 / IQR(X).

    Parameters
    ----------
    values : array-like of float
        The raw series; at least two distinct values are required.
    origin : str
        Name used in error messages and kept on the result ("voltage",
        "capacity", ...).

    Returns
    -------
    ScaledSeries
        Same length as the input; scaled[i] = values[i] - median^2/IQR.
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ShapeMismatchError(f"{origin}: expected a 1-D series")
    if arr.size == 0:
        raise EmptyInputError(f"{origin}: empty series")
    med = float(np.median(arr))
    q1, q3 = np.quantile(arr, [0.25, 0.75])  # linear interpolation, type 7
    iqr = float(q3 - q1)
    if iqr == 0.0:
        raise DegenerateSpreadError(
            f"{origin}: interquartile range is zero, cannot scale"
        )
    shifted = arr - med**2 / iqr
    return ScaledSeries(values=shifted, origin=origin, median=med, iqr=iqr)


@dataclass
class FeatureMatrix:
    """Per-cycle feature table: one row per cycle, named columns."""

    cycle_index: np.ndarray
    columns: dict[str, np.ndarray]

    def __post_init__(self):
        self.cycle_index = np.asarray(self.cycle_index, dtype=int)
        n = self.cycle_index.shape[0]
        for name, col in list(self.columns.items()):
            col = np.asarray(col, dtype=float)
            if col.shape != (n,):
                raise ShapeMismatchError(
                    f"column '{name}' has shape {col.shape}, expected ({n},)"
                )
            self.columns[name] = col

    def __len__(self) -> int:
        return int(self.cycle_index.shape[0])

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise KeyError(
                f"unknown feature column '{name}'; have {sorted(self.columns)}"
            )
        return self.columns[name]

    def matrix(self, names: Sequence[str]) -> np.ndarray:
        """Stack named columns into an (n, k) array, in the given order."""
        return np.column_stack([self.column(n) for n in names])

    def add_column(self, name: str, values) -> None:
        values = np.asarray(values, dtype=float)
        if values.shape != self.cycle_index.shape:
            raise ShapeMismatchError(
                f"column '{name}' has shape {values.shape}, "
                f"expected {self.cycle_index.shape}"
            )
        self.columns[name] = values

    def to_delimited(self, delimiter: str = ",") -> str:
        names = list(self.columns)
        buf = io.StringIO()
        buf.write(delimiter.join(["cycle_index"] + names) + "\n")
        for i, cyc in enumerate(self.cycle_index):
            row = [str(int(cyc))] + [repr(float(self.columns[n][i])) for n in names]
            buf.write(delimiter.join(row) + "\n")
        return buf.getvalue()


@dataclass
class FeatureNotes:
    """Side channel for guard activations during feature extraction.

    dvdq_clamped lists cycles whose capacity differences were all below the
    guard, forcing the clamped denominator. log_clamped maps a log column to
    the (cycle_index, value) pairs that were floored before taking the log.
    """

    cell_id: str = ""
    dvdq_clamped: list[int] = field(default_factory=list)
    log_clamped: dict[str, list[tuple[int, float]]] = field(default_factory=dict)

    def merge_log(self, column: str, entries: list[tuple[int, float]]) -> None:
        if entries:
            self.log_clamped.setdefault(column, []).extend(entries)

    def is_empty(self) -> bool:
        return not self.dvdq_clamped and not self.log_clamped

    def render(self) -> str:
        lines = [f"cell {self.cell_id or '?'}"]
        if self.is_empty():
            lines.append("  no guard activations")
        for cyc in self.dvdq_clamped:
            lines.append(
                f"  cycle {cyc}: all capacity differences below {EPS:g}, "
                f"denominator clamped"
            )
        for column in sorted(self.log_clamped):
            for cyc, value in self.log_clamped[column]:
                lines.append(
                    f"  cycle {cyc}: {column} input {value!r} floored to {EPS:g}"
                )
        return "\n".join(lines) + "\n"


def _max_diff(values: np.ndarray) -> float:
    return float(np.max(np.diff(values)))


def _dvdq_max(dv: np.ndarray, dq: np.ndarray) -> tuple[float, bool]:
    """Max ratio of consecutive differences, guarding tiny denominators.

    Pairs with |dq| below the guard are skipped; if that empties the set the
    denominators are clamped to the guard (sign kept, exact zeros treated as
    positive) and the caller is told so it can report the cycle.
    """
    keep = np.abs(dq) >= EPS
    if np.any(keep):
        return float(np.max(dv[keep] / dq[keep])), False
    sign = np.where(dq < 0, -1.0, 1.0)
    clamped = sign * np.maximum(np.abs(dq), EPS)
    return float(np.max(dv / clamped)), True


def extract_cycle_features(
    cycles: Sequence[CycleRecord],
    scaled: Sequence[tuple[ScaledSeries, ScaledSeries]],
) -> tuple[FeatureMatrix, FeatureNotes]:
    """Build the per-cycle difference features from scaled series.

    Parameters
    ----------
    cycles : sequence of CycleRecord
        Cycles of a single cell, in any order; output rows follow this order.
    scaled : sequence of (ScaledSeries, ScaledSeries)
        Per-cycle (voltage, capacity) transforms aligned with `cycles`.

    Returns
    -------
    (FeatureMatrix, FeatureNotes)
        Columns dv_max, dq_max, dvdq_max, one row per cycle, plus the guard
        side channel.
    """
    if len(cycles) != len(scaled):
        raise ShapeMismatchError(
            f"{len(cycles)} cycles but {len(scaled)} scaled pairs"
        )
    if len(cycles) == 0:
        raise EmptyInputError("no cycles to extract features from")
    cell_ids = {c.cell_id for c in cycles}
    notes = FeatureNotes(cell_id=",".join(sorted(cell_ids)))
    dv_max = np.empty(len(cycles))
    dq_max = np.empty(len(cycles))
    dvdq_max = np.empty(len(cycles))
    for i, (rec, (v_scaled, q_scaled)) in enumerate(zip(cycles, scaled)):
        n = rec.samples.shape[0]
        if n < 2:
            raise ShortCycleError(
                f"cycle {rec.cell_id}/{rec.cycle_index} has {n} sample(s); "
                f"need at least 2 for difference features"
            )
        if v_scaled.values.shape[0] != n or q_scaled.values.shape[0] != n:
            raise ShapeMismatchError(
                f"cycle {rec.cell_id}/{rec.cycle_index}: scaled series length "
                f"does not match sample count {n}"
            )
        dv = np.diff(v_scaled.values)
        dq = np.diff(q_scaled.values)
        dv_max[i] = float(np.max(dv))
        dq_max[i] = float(np.max(dq))
        dvdq_max[i], clamped = _dvdq_max(dv, dq)
        if clamped:
            notes.dvdq_clamped.append(int(rec.cycle_index))
    matrix = FeatureMatrix(
        cycle_index=np.asarray([c.cycle_index for c in cycles], dtype=int),
        columns={"dv_max": dv_max, "dq_max": dq_max, "dvdq_max": dvdq_max},
    )
    return matrix, notes


def transform_cell(
    cycles: Sequence[CycleRecord],
) -> list[tuple[ScaledSeries, ScaledSeries]]:
    """Fit the median/IQR shift independently on each cycle's voltage and
    capacity series. Each cycle supplies its own statistics, so a level
    drift late in life cannot leak into early cycles."""
    out = []
    for rec in cycles:
        v = median_iqr_transform(
            rec.voltage, origin=f"voltage {rec.cell_id}/{rec.cycle_index}"
        )
        q = median_iqr_transform(
            rec.capacity, origin=f"capacity {rec.cell_id}/{rec.cycle_index}"
        )
        out.append((v, q))
    return out


def log_feature(
    values, floor: float = EPS
) -> tuple[np.ndarray, list[int]]:
    """Natural log of a feature column with non-positive entries floored.

    Returns the transformed column and the indices that were floored. A
    column with no positive entries at all cannot carry information through
    the log and is rejected.
    """
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise EmptyInputError("log_feature: empty column")
    clamped = [int(i) for i in np.nonzero(arr < floor)[0]]
    if len(clamped) == arr.size and np.all(arr <= 0):
        raise EmptyFeatureError(
            "log_feature: no positive entries in column"
        )
    return np.log(np.maximum(arr, floor)), clamped


def build_feature_matrix(
    cycles: Sequence[CycleRecord],
    with_logs: bool = True,
    with_capacity: bool = True,
    with_mahalanobis: bool = False,
) -> tuple[FeatureMatrix, FeatureNotes]:
    """One-stop feature table for a cell: per-cycle scaling, difference
    features, optional log variants, raw capacity maximum, and the
    normalized distance feature over (cycle_index, capacity_max)."""
    scaled = transform_cell(cycles)
    matrix, notes = extract_cycle_features(cycles, scaled)
    if with_logs:
        for name in ("dv_max", "dq_max", "dvdq_max"):
            col = matrix.column(name)
            try:
                logged, clamped = log_feature(col)
            except EmptyFeatureError:
                raise EmptyFeatureError(
                    f"log({name}): no positive entries for cell "
                    f"{notes.cell_id}"
                ) from None
            matrix.add_column(f"log_{name}", logged)
            notes.merge_log(
                f"log_{name}",
                [(int(matrix.cycle_index[i]), float(col[i])) for i in clamped],
            )
    if with_capacity or with_mahalanobis:
        cap_max = np.asarray(
            [float(np.max(rec.capacity)) for rec in cycles], dtype=float
        )
        matrix.add_column("capacity_max", cap_max)
    if with_mahalanobis:
        matrix.add_column(
            "mahalanobis_norm",
            mahalanobis_feature(matrix.cycle_index, matrix.column("capacity_max")),
        )
    return matrix, notes


def yeo_johnson(values, lam: float) -> np.ndarray:
    """Power transform defined piecewise over sign(y) and lambda.

    Negative branch uses exponent 2 - lambda; the lambda = 0 and lambda = 2
    limits are the matching logs. Stable near the limits via expm1/log1p.
    """
    y = np.asarray(values, dtype=float)
    out = np.empty_like(y)
    pos = y >= 0
    if lam == 0.0:
        out[pos] = np.log1p(y[pos])
    else:
        out[pos] = np.expm1(lam * np.log1p(y[pos])) / lam
    if lam == 2.0:
        out[~pos] = -np.log1p(-y[~pos])
    else:
        out[~pos] = -np.expm1((2.0 - lam) * np.log1p(-y[~pos])) / (2.0 - lam)
    return out


def _yj_log_likelihood(y: np.ndarray, lam: float) -> float:
    psi = yeo_johnson(y, lam)
    var = float(np.var(psi))
    if var <= 0.0 or not np.isfinite(var):
        return -np.inf
    n = y.shape[0]
    jacobian = float(np.sum(np.sign(y) * np.log1p(np.abs(y))))
    return -0.5 * n * np.log(var) + (lam - 1.0) * jacobian


def fit_yeo_johnson_lambda(
    values, low: float = -2.0, high: float = 3.0
) -> float:
    """Pick the exponent that maximizes the Gaussian log-likelihood of the
    transformed sample, Jacobian term included.

    A coarse grid over [low, high] brackets the optimum, then golden-section
    search refines it inside the winning cell.
    """
    y = np.asarray(values, dtype=float)
    if y.size < 3:
        raise EmptyInputError("need at least 3 values to fit the exponent")
    grid = np.arange(low, high + 1e-12, 0.05)
    lls = np.asarray([_yj_log_likelihood(y, float(l)) for l in grid])
    if not np.any(np.isfinite(lls)):
        raise DegenerateSpreadError(
            "transformed sample degenerate at every exponent"
        )
    best = int(np.argmax(lls))
    a = float(grid[max(best - 1, 0)])
    b = float(grid[min(best + 1, grid.size - 1)])
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = _yj_log_likelihood(y, c)
    fd = _yj_log_likelihood(y, d)
    for _ in range(60):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = _yj_log_likelihood(y, c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = _yj_log_likelihood(y, d)
        if abs(b - a) < 1e-7:
            break
    return float((a + b) / 2.0)


@dataclass(frozen=True)
class NormalityDiagnostics:
    """Probability-plot summary: (theoretical, ordered) pairs, the squared
    correlation of the plot, and moment skewness of the sample."""

    ordered_pairs: np.ndarray
    r_squared: float
    skewness: float


def _plotting_positions(n: int) -> np.ndarray:
    # order-statistic medians: interior (i - 0.3175)/(n + 0.365),
    # endpoints 1 - 0.5**(1/n) and 0.5**(1/n)
    i = np.arange(1, n + 1, dtype=float)
    m = (i - 0.3175) / (n + 0.365)
    m[0] = 1.0 - 0.5 ** (1.0 / n)
    m[-1] = 0.5 ** (1.0 / n)
    return m


def probability_plot_stats(values) -> NormalityDiagnostics:
    """Normal probability plot of a sample.

    Pairs the sorted sample with standard normal quantiles at the usual
    order-statistic median positions; r_squared is the squared correlation
    of that scatter, so 1.0 means perfectly normal-looking.
    """
    y = np.sort(np.asarray(values, dtype=float))
    n = y.shape[0]
    if n < 3:
        raise EmptyInputError("need at least 3 values for a probability plot")
    if np.all(y == y[0]):
        raise DegenerateSpreadError("all values equal, plot undefined")
    theo = norm.ppf(_plotting_positions(n))
    corr = np.corrcoef(theo, y)[0, 1]
    centered = y - np.mean(y)
    m2 = float(np.mean(centered**2))
    m3 = float(np.mean(centered**3))
    skew = m3 / m2**1.5
    return NormalityDiagnostics(
        ordered_pairs=np.column_stack([theo, y]),
        r_squared=float(corr**2),
        skewness=float(skew),
    )


def mahalanobis_feature(cycle_index, capacity_max) -> np.ndarray:
    """Normalized distance of each (cycle_index, capacity_max) pair from the
    cell's own trend cloud.

    Distances use the sample covariance of the two columns and are min-max
    normalized to [0, 1]; an all-equal distance vector maps to zeros.
    """
    t = np.asarray(cycle_index, dtype=float)
    q = np.asarray(capacity_max, dtype=float)
    if t.shape != q.shape:
        raise ShapeMismatchError("cycle_index and capacity_max differ in length")
    if t.size < 3:
        raise EmptyInputError("need at least 3 cycles for the distance feature")
    X = np.column_stack([t, q])
    mu = X.mean(axis=0)
    cov = np.cov(X, rowvar=False, ddof=1)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise SingularCovarianceError(
            "covariance of (cycle_index, capacity_max) is singular"
        ) from None
    # a singular matrix can slip through with a rounding-level pivot
    if np.any(np.diag(chol) ** 2 <= 1e-12 * np.max(np.diag(cov))):
        raise SingularCovarianceError(
            "covariance of (cycle_index, capacity_max) is singular"
        )
    centered = X - mu
    white = np.linalg.solve(chol, centered.T).T
    dist = np.sqrt(np.sum(white**2, axis=1))
    span = float(dist.max() - dist.min())
    if span == 0.0:
        return np.zeros_like(dist)
    return (dist - dist.min()) / span
