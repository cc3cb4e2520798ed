"""Centroid-distance detectors over a 2-D (or higher) feature space.

Every cycle is reduced to its distance from the componentwise mean of the
cloud under one of four metrics: Euclidean, Manhattan, Minkowski with a free
exponent, and the covariance-whitened form. All four report the square root
where applicable, so they live on a common distance scale. Flags come from a
one-sided MAD rule on the distance vector; scores are min-max normalized over
the observed cycles so that contour grids and flags share a scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BoundsError,
    DegenerateSpreadError,
    EmptyInputError,
    ShapeMismatchError,
    SingularCovarianceError,
)
from .stat_detect import GAUSSIAN_MAD_FACTOR, scaled_mad

METRIC_KINDS = ("euclidean", "manhattan", "minkowski", "mahalanobis")


@dataclass(frozen=True, eq=False)
class MetricSpec:
    """A distance choice: kind plus the exponent or covariance it needs.

    minkowski requires p > 0. mahalanobis may carry an explicit covariance;
    when it is None the consumer estimates one from the data it is fitted on.
    """

    kind: str
    p: float | None = None
    covariance: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in METRIC_KINDS:
            raise ShapeMismatchError(
                f"unknown metric '{self.kind}'; expected one of {METRIC_KINDS}"
            )
        if self.kind == "minkowski":
            if self.p is None or not np.isfinite(self.p) or self.p <= 0:
                raise BoundsError(
                    f"minkowski exponent must be positive, got {self.p!r}"
                )
        if self.covariance is not None:
            cov = np.asarray(self.covariance, dtype=float)
            if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
                raise ShapeMismatchError("covariance must be square")
            if not np.allclose(cov, cov.T, atol=1e-10):
                raise SingularCovarianceError("covariance must be symmetric")
            object.__setattr__(self, "covariance", cov)


def _cholesky_or_raise(cov: np.ndarray) -> np.ndarray:
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise SingularCovarianceError(
            "covariance is not positive definite"
        ) from None
    # a singular matrix can slip through with a rounding-level pivot
    if np.any(np.diag(chol) ** 2 <= 1e-12 * np.max(np.diag(cov))):
        raise SingularCovarianceError("covariance is numerically singular")
    return chol


def pairwise(X, Y, metric: MetricSpec) -> np.ndarray:
    """Distance matrix between rows of X (n, d) and rows of Y (m, d)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != Y.shape[1]:
        raise ShapeMismatchError(
            f"operands differ in dimension: {X.shape[1]} vs {Y.shape[1]}"
        )
    if metric.kind == "mahalanobis":
        if metric.covariance is None:
            raise SingularCovarianceError(
                "mahalanobis metric needs a covariance; none was resolved"
            )
        chol = _cholesky_or_raise(metric.covariance)
        Xw = np.linalg.solve(chol, X.T).T
        Yw = np.linalg.solve(chol, Y.T).T
        diff = Xw[:, None, :] - Yw[None, :, :]
        return np.sqrt(np.sum(diff**2, axis=-1))
    diff = X[:, None, :] - Y[None, :, :]
    if metric.kind == "euclidean":
        return np.sqrt(np.sum(diff**2, axis=-1))
    if metric.kind == "manhattan":
        return np.sum(np.abs(diff), axis=-1)
    p = float(metric.p)
    return np.sum(np.abs(diff) ** p, axis=-1) ** (1.0 / p)


def distance(a, b, metric: MetricSpec) -> float:
    """Distance between two points under the metric."""
    a = np.asarray(a, dtype=float).reshape(1, -1)
    b = np.asarray(b, dtype=float).reshape(1, -1)
    return float(pairwise(a, b, metric)[0, 0])


def resolve_metric(metric: MetricSpec, X: np.ndarray) -> MetricSpec:
    """Fill in a data-estimated covariance for the whitened metric."""
    if metric.kind != "mahalanobis" or metric.covariance is not None:
        return metric
    if X.shape[0] < X.shape[1] + 1:
        raise SingularCovarianceError(
            f"{X.shape[0]} rows cannot support a {X.shape[1]}-D covariance"
        )
    cov = np.cov(X, rowvar=False, ddof=1)
    cov = np.atleast_2d(cov)
    _cholesky_or_raise(cov)
    return MetricSpec(kind="mahalanobis", covariance=cov)


@dataclass(frozen=True)
class DistanceVerdict:
    """Distances to the centroid plus the MAD-rule flags.

    normalized is the min-max rescaling of distances over the observed rows;
    cutoff is the flagging boundary median + mad_threshold * scaled MAD.
    """

    centroid: np.ndarray
    distances: np.ndarray
    normalized: np.ndarray
    flags: np.ndarray
    mad_threshold: float
    cutoff: float

    def flagged_indices(self) -> set[int]:
        return {int(i) for i in np.nonzero(self.flags)[0]}


def centroid_detect(
    X,
    metric: MetricSpec,
    mad_threshold: float = 3.0,
    mad_factor: float = GAUSSIAN_MAD_FACTOR,
) -> DistanceVerdict:
    """Flag rows whose centroid distance exceeds median + threshold * MAD.

    The rule is one-sided: only unusually large distances are anomalous,
    being close to the centroid never is. Lowering the threshold widens the
    flag set monotonically.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] < 3:
        raise EmptyInputError(
            f"need at least 3 rows for a centroid verdict, got {X.shape[0]}"
        )
    metric = resolve_metric(metric, X)
    centroid = X.mean(axis=0)
    dist = pairwise(X, centroid.reshape(1, -1), metric)[:, 0]
    if np.all(dist == dist[0]):
        raise DegenerateSpreadError(
            "all centroid distances are equal; nothing to rank"
        )
    med, mad = scaled_mad(dist, mad_factor)
    cutoff = med + mad_threshold * mad
    flags = dist > cutoff
    span = float(dist.max() - dist.min())
    normalized = (dist - dist.min()) / span
    return DistanceVerdict(
        centroid=centroid,
        distances=dist,
        normalized=normalized,
        flags=flags,
        mad_threshold=mad_threshold,
        cutoff=float(cutoff),
    )


@dataclass(frozen=True)
class GridScores:
    """Normalized-distance surface over a rectangular grid.

    values[i0, i1, ...] is the score at (axes[0][i0], axes[1][i1], ...); the
    row-major flattening therefore iterates the last axis fastest. Scores are
    normalized by the min/max of the fitted data's own distances, so grid
    values above 1 mean "farther than any observed cycle".
    """

    axes: tuple[np.ndarray, ...]
    values: np.ndarray
    bounds: tuple[tuple[float, float], ...]
    data_min: float
    data_max: float


def score_grid(
    X,
    metric: MetricSpec,
    resolution: int | tuple[int, ...] = 50,
    bounds: tuple[tuple[float, float], ...] | None = None,
) -> GridScores:
    """Evaluate the normalized centroid distance on a regular grid.

    Default bounds are the data bounding box expanded 10% per side (constant
    axes are padded by 0.5 to keep the box non-empty).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n, d = X.shape
    if n < 3:
        raise EmptyInputError("need at least 3 rows to build a score grid")
    if d != 2:
        raise ShapeMismatchError(
            f"score grids are 2-D maps; got {d} feature columns"
        )
    metric = resolve_metric(metric, X)
    if isinstance(resolution, int):
        resolution = (resolution,) * d
    if len(resolution) != d:
        raise BoundsError(
            f"{len(resolution)} resolutions for {d} axes"
        )
    if any(r < 2 for r in resolution):
        raise BoundsError("grid resolution must be at least 2 per axis")
    if bounds is None:
        lo = X.min(axis=0)
        hi = X.max(axis=0)
        pad = 0.1 * (hi - lo)
        pad = np.where(pad == 0.0, 0.5, pad)
        bounds = tuple(
            (float(l - p), float(h + p)) for l, h, p in zip(lo, hi, pad)
        )
    if len(bounds) != d:
        raise BoundsError(f"{len(bounds)} bounds for {d} axes")
    for low, high in bounds:
        if not (np.isfinite(low) and np.isfinite(high)) or low >= high:
            raise BoundsError(f"bad axis bounds ({low!r}, {high!r})")

    centroid = X.mean(axis=0)
    data_dist = pairwise(X, centroid.reshape(1, -1), metric)[:, 0]
    dmin, dmax = float(data_dist.min()), float(data_dist.max())
    if dmax == dmin:
        raise DegenerateSpreadError(
            "all centroid distances are equal; nothing to rank"
        )

    axes = tuple(
        np.linspace(low, high, r) for (low, high), r in zip(bounds, resolution)
    )
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.column_stack([m.ravel() for m in mesh])
    node_dist = pairwise(nodes, centroid.reshape(1, -1), metric)[:, 0]
    values = ((node_dist - dmin) / (dmax - dmin)).reshape(resolution)
    return GridScores(
        axes=axes,
        values=values,
        bounds=tuple(bounds),
        data_min=dmin,
        data_max=dmax,
    )
