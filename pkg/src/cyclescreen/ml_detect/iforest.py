"""Isolation forest scored by the classic path-length formula.

Trees are grown on row subsamples with uniform random axis splits; a point's
anomaly score is 2 ** (-E[h] / c(psi)) where E[h] averages path lengths over
trees and c(psi) is the expected path length of an unsuccessful BST search
over the subsample size. Scores near 1 mean "isolated almost immediately".
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_EULER_GAMMA = 0.5772156649015329


def average_path_length(n: int) -> float:
    """c(n): expected path length normalizer, 0 for n <= 1."""
    if n <= 1:
        return 0.0
    if n == 2:
        return 1.0
    h = math.log(n - 1.0) + _EULER_GAMMA
    return 2.0 * h - 2.0 * (n - 1.0) / n


@dataclass
class IsolationForestState:
    trees: list
    tree_features: list  # feature index array per tree
    subsample_size: int
    normalizer: float


def _grow(X: np.ndarray, features: np.ndarray, depth: int, limit: int, rng):
    n = X.shape[0]
    if n <= 1 or depth >= limit:
        return ("leaf", n)
    usable = [f for f in features if X[:, f].min() < X[:, f].max()]
    if not usable:
        return ("leaf", n)
    feat = int(usable[rng.integers(len(usable))])
    lo = X[:, feat].min()
    hi = X[:, feat].max()
    thr = float(rng.uniform(lo, hi))
    mask = X[:, feat] < thr
    if not mask.any() or mask.all():
        return ("leaf", n)
    return (
        "split",
        feat,
        thr,
        _grow(X[mask], features, depth + 1, limit, rng),
        _grow(X[~mask], features, depth + 1, limit, rng),
    )


def fit_iforest(params: dict, X: np.ndarray, rng) -> IsolationForestState:
    n, d = X.shape
    psi = int(math.ceil(params["max_samples"] * n))
    psi = max(2, min(psi, n))
    m = max(1, int(round(params["max_features"] * d)))
    m = min(m, d)
    limit = int(math.ceil(math.log2(psi)))
    trees = []
    tree_features = []
    for _ in range(params["n_estimators"]):
        rows = rng.choice(n, size=psi, replace=False)
        feats = np.sort(rng.choice(d, size=m, replace=False))
        trees.append(_grow(X[rows], feats, 0, limit, rng))
        tree_features.append(feats)
    return IsolationForestState(
        trees=trees,
        tree_features=tree_features,
        subsample_size=psi,
        normalizer=average_path_length(psi),
    )


def _path_length(tree, x: np.ndarray, depth: int = 0) -> float:
    if tree[0] == "leaf":
        return depth + average_path_length(tree[1])
    _, feat, thr, left, right = tree
    if x[feat] < thr:
        return _path_length(left, x, depth + 1)
    return _path_length(right, x, depth + 1)


def score_iforest(state: IsolationForestState, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0])
    for i, x in enumerate(X):
        total = 0.0
        for tree in state.trees:
            total += _path_length(tree, x)
        mean_path = total / len(state.trees)
        out[i] = 2.0 ** (-mean_path / state.normalizer)
    return out
