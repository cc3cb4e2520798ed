"""Learned detectors behind one fit/score interface.

All six models share the convention that a higher raw score is more
anomalous. Raw scores become outlier probabilities through min-max
normalization, and flags come from a probability threshold (default 0.7) or,
for contamination-style workflows, by taking the top scoring fraction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import (
    EmptyInputError,
    ShapeMismatchError,
    ThresholdRangeError,
)
from .autoencoder import (
    AutoencoderState,
    Mlp,
    fit_autoencoder,
    gradient_check,
    mirror_dims,
    score_autoencoder,
)
from .gmm import GmmState, fit_gmm, score_gmm
from .iforest import IsolationForestState, fit_iforest, score_iforest
from .knn import KnnState, fit_knn, score_knn
from .lof import LofState, fit_lof, score_lof
from .params import (
    ML_MODELS,
    PARAM_SPECS,
    DetectorConfig,
    make_config,
    validate_config,
)
from .pca import PcaState, fit_pca, score_pca

DEFAULT_PROBABILITY_THRESHOLD = 0.7

_REGISTRY = {
    "iforest": (fit_iforest, score_iforest),
    "knn": (fit_knn, score_knn),
    "gmm": (fit_gmm, score_gmm),
    "lof": (fit_lof, score_lof),
    "pca": (fit_pca, score_pca),
    "autoencoder": (fit_autoencoder, score_autoencoder),
}


@dataclass
class FittedDetector:
    """A trained detector plus the feature envelope it was fitted on.

    feature_bounds rows are the per-column min and max seen at fit time;
    columns records the feature names when the caller supplied them.
    """

    config: DetectorConfig
    state: object
    feature_bounds: np.ndarray
    columns: tuple[str, ...] | None = None

    @property
    def n_features(self) -> int:
        return int(self.feature_bounds.shape[1])


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise ShapeMismatchError(f"expected a 2-D feature matrix, got {X.ndim}-D")
    if X.shape[0] == 0:
        raise EmptyInputError("feature matrix has no rows")
    return X


def fit(config: DetectorConfig, X, columns=None) -> FittedDetector:
    """Train the configured model on a feature matrix.

    Every source of randomness (subsampling, initialization, batching,
    dropout) flows from config.seed, so a fit is reproducible bit for bit.
    """
    config = validate_config(config)
    X = _as_matrix(X)
    rng = np.random.default_rng(config.seed)
    fit_fn, _ = _REGISTRY[config.model]
    state = fit_fn(config.params, X, rng)
    bounds = np.vstack([X.min(axis=0), X.max(axis=0)])
    return FittedDetector(
        config=config,
        state=state,
        feature_bounds=bounds,
        columns=tuple(columns) if columns is not None else None,
    )


def score(fitted: FittedDetector, X) -> np.ndarray:
    """Raw anomaly scores for rows of X; higher means more anomalous."""
    X = _as_matrix(X)
    if X.shape[1] != fitted.n_features:
        raise ShapeMismatchError(
            f"scored rows have {X.shape[1]} features, detector was fitted "
            f"on {fitted.n_features}"
        )
    _, score_fn = _REGISTRY[fitted.config.model]
    return score_fn(fitted.state, X)


def normalize_scores(values, reference=None) -> np.ndarray:
    """Min-max squash raw scores into outlier probabilities.

    By default the min/max come from the scored values themselves; passing a
    frozen reference reuses another score set's envelope instead, with the
    result clipped back into [0, 1]. A constant input maps to all zeros.
    """
    arr = np.asarray(values, dtype=float)
    ref = arr if reference is None else np.asarray(reference, dtype=float)
    if ref.size == 0:
        raise EmptyInputError("no reference scores to normalize against")
    rmin = float(ref.min())
    rmax = float(ref.max())
    if rmax == rmin:
        return np.zeros_like(arr)
    out = (arr - rmin) / (rmax - rmin)
    if reference is not None:
        out = np.clip(out, 0.0, 1.0)
    return out


def predict_outliers(
    probabilities, threshold: float = DEFAULT_PROBABILITY_THRESHOLD
) -> np.ndarray:
    """Flag rows whose probability strictly exceeds the threshold."""
    if not np.isfinite(threshold) or threshold < 0.0 or threshold > 1.0:
        raise ThresholdRangeError(
            f"threshold must lie in [0, 1], got {threshold!r}"
        )
    return np.asarray(probabilities, dtype=float) > threshold


def predict_top_fraction(scores, fraction: float) -> np.ndarray:
    """Contamination-style flags: mark the ceil(fraction * n) largest scores.

    Ties resolve to the earlier row so the flag count is exact.
    """
    if not np.isfinite(fraction) or fraction < 0.0 or fraction > 0.5:
        raise ThresholdRangeError(
            f"contamination fraction must lie in [0, 0.5], got {fraction!r}"
        )
    arr = np.asarray(scores, dtype=float)
    flags = np.zeros(arr.shape[0], dtype=bool)
    k = int(np.ceil(fraction * arr.shape[0])) if fraction > 0 else 0
    if k:
        order = np.argsort(-arr, kind="stable")
        flags[order[:k]] = True
    return flags


def autoencoder_gradient_check(
    config: DetectorConfig, probe, step: float = 1e-5
) -> float:
    """Build the configured network (untrained, dropout off) and compare
    backprop gradients with central finite differences on a probe batch.
    The probe is used exactly as given; no input scaling is applied."""
    config = validate_config(config)
    if config.model != "autoencoder":
        raise ShapeMismatchError(
            f"gradient check applies to the autoencoder, not '{config.model}'"
        )
    probe = _as_matrix(probe)
    dims = mirror_dims(
        probe.shape[1], tuple(config.params["hidden_neuron_list"])
    )
    rng = np.random.default_rng(config.seed)
    mlp = Mlp(dims, config.params["hidden_activation_name"], rng)
    return gradient_check(mlp, probe, step=step)


__all__ = [
    "ML_MODELS",
    "PARAM_SPECS",
    "DetectorConfig",
    "FittedDetector",
    "DEFAULT_PROBABILITY_THRESHOLD",
    "make_config",
    "validate_config",
    "fit",
    "score",
    "normalize_scores",
    "predict_outliers",
    "predict_top_fraction",
    "autoencoder_gradient_check",
    "Mlp",
    "mirror_dims",
    "gradient_check",
    "AutoencoderState",
    "GmmState",
    "IsolationForestState",
    "KnnState",
    "LofState",
    "PcaState",
]
