"""Local outlier factor with the classic reachability-distance definitions.

reach_dist_k(a, b) = max(k_distance(b), d(a, b)); the local reachability
density is the reciprocal mean reachability distance over a point's k
neighbors, and the factor is the mean neighbor density over the point's own.
Scores near 1 mean "as dense as the neighbors"; larger means more isolated.

Distinct points always have positive reachability distance, so densities
stay finite unless more than n_neighbors rows coincide exactly; that case is
rejected rather than scored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dist_detect import MetricSpec, pairwise
from ..errors import DegenerateSpreadError, NeighborCountError
from .knn import metric_from_params


@dataclass
class LofState:
    X: np.ndarray
    k: int
    metric: MetricSpec
    k_distance: np.ndarray
    lrd: np.ndarray


def _knn_rows(D: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Neighbor indices (m, k) and distances, smallest first, per row."""
    order = np.argsort(D, axis=1, kind="stable")[:, :k]
    dists = np.take_along_axis(D, order, axis=1)
    return order, dists


def fit_lof(params: dict, X: np.ndarray, rng) -> LofState:
    k = params["n_neighbors"]
    n = X.shape[0]
    if k >= n:
        raise NeighborCountError(
            f"n_neighbors={k} needs at least {k + 1} rows, got {n}"
        )
    metric = metric_from_params(params, X)
    D = pairwise(X, X, metric)
    np.fill_diagonal(D, np.inf)
    neigh, ndist = _knn_rows(D, k)
    k_distance = ndist[:, -1]
    reach = np.maximum(k_distance[neigh], ndist)
    mean_reach = reach.mean(axis=1)
    if np.any(mean_reach == 0.0):
        raise DegenerateSpreadError(
            f"more than n_neighbors={k} identical rows; densities diverge"
        )
    lrd = 1.0 / mean_reach
    return LofState(X=X.copy(), k=k, metric=metric,
                    k_distance=k_distance, lrd=lrd)


def score_lof(state: LofState, Q: np.ndarray) -> np.ndarray:
    D = pairwise(Q, state.X, state.metric)
    # one exact self-match per query is treated as membership, not a neighbor
    for i in range(D.shape[0]):
        zeros = np.nonzero(D[i] == 0.0)[0]
        if zeros.size:
            D[i, zeros[0]] = np.inf
    neigh, ndist = _knn_rows(D, state.k)
    reach = np.maximum(state.k_distance[neigh], ndist)
    mean_reach = reach.mean(axis=1)
    if np.any(mean_reach == 0.0):
        raise DegenerateSpreadError(
            "query coincides with a saturated duplicate cluster"
        )
    lrd_q = 1.0 / mean_reach
    return state.lrd[neigh].mean(axis=1) / lrd_q
