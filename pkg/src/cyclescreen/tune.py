"""Hyperparameter search for the learned detectors.

Proposals come from a tree-structured Parzen estimator: past trials are split
into a good and a bad set by the gamma-quantile of a scalarized objective,
each hyperparameter dimension gets a density model per set (Gaussian kernels
for numeric, smoothed counts for categorical), and the candidate maximizing
the good/bad density ratio wins. Two end-to-end strategies sit on top:

* transfer: maximize (recall, precision) on labeled cells, keep each cell's
  best Pareto point, and aggregate those configs into one deployable config.
* proxy: no labels needed; each trial's flags define predicted inliers, a
  quadratic trend of every feature over cycle_index is fitted to them, and
  (trend loss, inlier count) span the objective trade-off. The compromise
  config aggregates the most frequently recurring objective pair.

Finite search spaces no larger than the trial budget are enumerated outright
instead of sampled.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import ml_detect
from .errors import (
    AggregationError,
    ConfigError,
    CycleScreenError,
    InsufficientInlierError,
    NoPositiveLabelError,
)
from .ml_detect import DetectorConfig, make_config
from .ml_detect.params import PARAM_SPECS, CatParam, IntParam, LayerListParam, RealParam
from .util import derive_seed, round_half_up, round_sig

GAMMA = 0.25
N_CANDIDATES = 24
N_STARTUP = 5
DEFAULT_TRIALS = 20
LOSS_SENTINEL = float("inf")


# ---------------------------------------------------------------------------
# search space


@dataclass(frozen=True)
class RealDomain:
    low: float
    high: float

    def __post_init__(self):
        if not (np.isfinite(self.low) and np.isfinite(self.high)) or self.low >= self.high:
            raise ConfigError(f"bad real domain [{self.low}, {self.high}]")


@dataclass(frozen=True)
class IntDomain:
    low: int
    high: int

    def __post_init__(self):
        if self.low > self.high:
            raise ConfigError(f"bad int domain [{self.low}, {self.high}]")


@dataclass(frozen=True)
class CatDomain:
    choices: tuple

    def __post_init__(self):
        if len(self.choices) == 0:
            raise ConfigError("categorical domain needs at least one choice")


@dataclass
class SearchSpace:
    """Per-hyperparameter domains for one model kind."""

    model: str
    params: dict

    def __post_init__(self):
        if self.model not in PARAM_SPECS:
            raise ConfigError(f"unknown model '{self.model}'")
        unknown = set(self.params) - set(PARAM_SPECS[self.model])
        if unknown:
            raise ConfigError(
                f"{self.model}: search space names unknown params {sorted(unknown)}"
            )

    def sample(self, rng) -> dict:
        out = {}
        for name, dom in self.params.items():
            if isinstance(dom, RealDomain):
                out[name] = float(rng.uniform(dom.low, dom.high))
            elif isinstance(dom, IntDomain):
                out[name] = int(rng.integers(dom.low, dom.high + 1))
            else:
                out[name] = dom.choices[rng.integers(len(dom.choices))]
        return out

    def enumerate(self, limit: int):
        """All points of a finite space, or None when the space is continuous
        or larger than the limit."""
        grids = []
        for name, dom in self.params.items():
            if isinstance(dom, RealDomain):
                return None
            if isinstance(dom, IntDomain):
                if dom.high - dom.low + 1 > limit:
                    return None
                grids.append([(name, v) for v in range(dom.low, dom.high + 1)])
            else:
                grids.append([(name, c) for c in dom.choices])
        total = 1
        for g in grids:
            total *= len(g)
            if total > limit:
                return None
        if not grids:
            return [{}]
        return [dict(combo) for combo in itertools.product(*grids)]


def default_search_space(model: str, n_features: int = 2) -> SearchSpace:
    """Reasonable tuning ranges around the registry defaults."""
    spaces = {
        "iforest": {
            "n_estimators": IntDomain(50, 200),
            "max_samples": RealDomain(0.2, 1.0),
            "contamination": RealDomain(0.01, 0.5),
            "max_features": RealDomain(0.2, 1.0),
        },
        "knn": {
            "n_neighbors": IntDomain(1, 20),
            "method": CatDomain(("largest", "mean", "median")),
            "metric": CatDomain(("euclidean", "manhattan", "minkowski")),
            "minkowski_p": RealDomain(1.0, 4.0),
        },
        "gmm": {
            "n_components": IntDomain(1, 4),
            "covariance_type": CatDomain(("full", "tied", "diag", "spherical")),
            "contamination": RealDomain(0.01, 0.5),
            "init_params": CatDomain(("kmeans", "random")),
        },
        "lof": {
            "n_neighbors": IntDomain(2, 30),
            "metric": CatDomain(("euclidean", "manhattan", "minkowski")),
            "minkowski_p": RealDomain(1.0, 4.0),
        },
        "pca": {
            "n_components": IntDomain(1, max(1, n_features)),
        },
        "autoencoder": {
            "epoch_num": IntDomain(20, 100),
            "batch_size": IntDomain(8, 32),
            "dropout_rate": RealDomain(0.0, 0.3),
            "hidden_neuron_list": CatDomain(((4, 2), (8, 4), (8, 2), (16, 8))),
            "hidden_activation_name": CatDomain(("relu", "tanh", "sigmoid")),
            "optimizer_name": CatDomain(("sgd", "momentum", "adam")),
            "learning_rate": RealDomain(0.001, 0.05),
        },
    }
    if model not in spaces:
        raise ConfigError(f"unknown model '{model}'")
    return SearchSpace(model=model, params=spaces[model])


# ---------------------------------------------------------------------------
# trial records and Pareto utilities


@dataclass(frozen=True)
class TrialRecord:
    """One evaluated configuration and its objective pair."""

    trial_id: int
    config: DetectorConfig
    objectives: tuple[float, float]
    objective_kind: str  # "recall_precision" or "loss_inliers"


def _oriented(objectives, directions) -> tuple[float, float]:
    # orient both objectives so larger is better
    return tuple(
        o if d == "max" else -o for o, d in zip(objectives, directions)
    )


def pareto_front(trials, directions) -> list[TrialRecord]:
    """Exact non-dominated subset, stable by trial_id.

    A trial is dominated when another is at least as good in both objectives
    and strictly better in one. Uses a sort-and-sweep over the first
    objective, grouping ties, so it stays O(n log n) for the pair case.
    """
    if len(directions) != 2:
        raise ConfigError("pareto_front expects exactly two directions")
    trials = sorted(trials, key=lambda t: t.trial_id)
    oriented = [_oriented(t.objectives, directions) for t in trials]
    order = sorted(range(len(trials)), key=lambda i: -oriented[i][0])
    front_ids = set()
    best_o2 = -np.inf
    i = 0
    while i < len(order):
        # group ties on the first objective
        j = i
        group = []
        while j < len(order) and oriented[order[j]][0] == oriented[order[i]][0]:
            group.append(order[j])
            j += 1
        group_best = max(oriented[g][1] for g in group)
        for g in group:
            o2 = oriented[g][1]
            if o2 > best_o2 and o2 == group_best:
                front_ids.add(g)
        best_o2 = max(best_o2, group_best)
        i = j
    return [t for idx, t in enumerate(trials) if idx in front_ids]


def aggregate_configs(configs) -> DetectorConfig:
    """Combine several configs for one model into a single deployable one.

    Numeric params average (integers round half up), clamped back into the
    registry range; categorical params take the most frequent value with
    lexicographic tie-breaking. The seed is not a tuned quantity and resets
    to zero.
    """
    configs = list(configs)
    if not configs:
        raise AggregationError("no configs to aggregate")
    model = configs[0].model
    if any(c.model != model for c in configs):
        raise AggregationError(
            f"cannot aggregate across models: {sorted({c.model for c in configs})}"
        )
    spec = PARAM_SPECS[model]
    merged = {}
    for name, p in spec.items():
        values = [c.params[name] for c in configs]
        if isinstance(p, RealParam):
            merged[name] = p.clamp(float(np.mean([float(v) for v in values])))
        elif isinstance(p, IntParam):
            if any(v is None for v in values):
                merged[name] = None
            else:
                merged[name] = p.clamp(round_half_up(float(np.mean(values))))
        elif isinstance(p, (CatParam, LayerListParam)):
            counts = {}
            for v in values:
                key = tuple(v) if isinstance(v, (list, tuple)) else v
                counts[key] = counts.get(key, 0) + 1
            top = max(counts.values())
            winner = sorted(k for k, c in counts.items() if c == top)[0]
            merged[name] = winner
        else:
            raise AggregationError(f"param '{name}' has unknown kind")
    return make_config(model, merged, seed=0)


def compromise_solution(trials) -> DetectorConfig:
    """Aggregate the configs behind the most recurrent objective pair.

    Pairs are compared after rounding each objective to 6 significant
    digits; frequency ties go to the pair containing the lowest trial_id.
    """
    trials = sorted(trials, key=lambda t: t.trial_id)
    if not trials:
        raise AggregationError("no trials to form a compromise from")
    groups: dict[tuple, list[TrialRecord]] = {}
    for t in trials:
        key = (round_sig(t.objectives[0], 6), round_sig(t.objectives[1], 6))
        groups.setdefault(key, []).append(t)
    best_key = None
    best_rank = None
    for key, members in groups.items():
        rank = (-len(members), min(m.trial_id for m in members))
        if best_rank is None or rank < best_rank:
            best_rank = rank
            best_key = key
    return aggregate_configs([t.config for t in groups[best_key]])


# ---------------------------------------------------------------------------
# TPE proposal


def _scalarize(history, directions, rng) -> np.ndarray:
    """Random weighted Chebyshev scalarization, oriented so lower is better.
    Non-finite objectives scalarize to +inf and sink into the bad set."""
    obj = np.asarray([t.objectives for t in history], dtype=float)
    # orient to minimize
    for j, d in enumerate(directions):
        if d == "max":
            obj[:, j] = -obj[:, j]
    weights = rng.dirichlet(np.ones(obj.shape[1]))
    scalars = np.full(obj.shape[0], np.inf)
    finite_rows = np.all(np.isfinite(obj), axis=1)
    if finite_rows.any():
        sub = obj[finite_rows]
        lo = sub.min(axis=0)
        span = sub.max(axis=0) - lo
        span[span == 0.0] = 1.0
        normed = (sub - lo) / span
        scalars[finite_rows] = np.max(weights * normed, axis=1)
    return scalars


def _kde_logpdf(x: float, obs: np.ndarray, bandwidth: float, width: float) -> float:
    # Parzen mixture of Gaussians around past observations plus one uniform
    # component over the domain; the uniform share keeps far-from-cluster
    # candidates scoreable and decays as observations accumulate
    z = (x - obs) / bandwidth
    kern = np.exp(-0.5 * z**2) / (bandwidth * np.sqrt(2.0 * np.pi))
    dens = (float(np.sum(kern)) + 1.0 / width) / (obs.size + 1.0)
    return float(np.log(max(dens, 1e-300)))


def _numeric_bandwidth(obs: np.ndarray, width: float) -> float:
    # Scott's rule, clipped to [width/(n+1), width]: wide kernels while few
    # observations exist, narrowing as evidence accumulates
    sd = float(np.std(obs))
    h = sd * obs.size ** (-0.2)
    floor = width / min(100.0, obs.size + 1.0)
    return float(min(max(h, floor, 1e-12), width))


def _cat_probs(values, choices) -> np.ndarray:
    counts = np.ones(len(choices))  # +1 smoothing
    index = {c: i for i, c in enumerate(choices)}
    for v in values:
        key = tuple(v) if isinstance(v, (list, tuple)) else v
        counts[index[key]] += 1.0
    return counts / counts.sum()


def tpe_propose(history, space: SearchSpace, seed: int, directions) -> dict:
    """Propose the next hyperparameter point.

    Deterministic given (history, seed). With fewer than N_STARTUP past
    trials the draw is uniform; afterwards candidates are sampled from the
    good-set density and ranked by the good/bad log-density ratio.
    """
    rng = np.random.default_rng(seed)
    if len(history) < N_STARTUP:
        return space.sample(rng)

    scalars = _scalarize(history, directions, rng)
    order = np.argsort(scalars, kind="stable")
    n_good = max(1, int(np.ceil(GAMMA * len(history))))
    good_idx = set(order[:n_good].tolist())
    good = [history[i] for i in range(len(history)) if i in good_idx]
    bad = [history[i] for i in range(len(history)) if i not in good_idx]
    if not bad:
        bad = good

    choices_cache = {}
    norm_choices = {}
    for name, dom in space.params.items():
        if isinstance(dom, CatDomain):
            norm = tuple(
                tuple(c) if isinstance(c, (list, tuple)) else c
                for c in dom.choices
            )
            norm_choices[name] = norm
            choices_cache[name] = (
                _cat_probs([t.config.params[name] for t in good], norm),
                _cat_probs([t.config.params[name] for t in bad], norm),
            )

    candidates = []
    scores = []
    for _ in range(N_CANDIDATES):
        cand = {}
        ratio = 0.0
        for name, dom in space.params.items():
            if isinstance(dom, CatDomain):
                p_good, p_bad = choices_cache[name]
                idx = int(rng.choice(len(dom.choices), p=p_good))
                cand[name] = dom.choices[idx]
                ratio += float(np.log(p_good[idx]) - np.log(p_bad[idx]))
                continue
            width = float(dom.high - dom.low)
            g_obs = np.asarray(
                [float(t.config.params[name]) for t in good], dtype=float
            )
            b_obs = np.asarray(
                [float(t.config.params[name]) for t in bad], dtype=float
            )
            h_good = _numeric_bandwidth(g_obs, width)
            h_bad = _numeric_bandwidth(b_obs, width)
            # draw from the good-set mixture; the extra index is the
            # uniform prior component
            comp = int(rng.integers(g_obs.size + 1))
            if comp == g_obs.size:
                value = float(rng.uniform(dom.low, dom.high))
            else:
                value = float(g_obs[comp]) + float(rng.normal(0.0, h_good))
            value = min(max(value, dom.low), dom.high)
            if isinstance(dom, IntDomain):
                value = int(min(max(round_half_up(value), dom.low), dom.high))
                x = float(value)
            else:
                x = value
            cand[name] = value
            ratio += _kde_logpdf(x, g_obs, h_good, width) - _kde_logpdf(
                x, b_obs, h_bad, width
            )
        candidates.append(cand)
        scores.append(ratio)
    return candidates[int(np.argmax(scores))]


# ---------------------------------------------------------------------------
# objective evaluation


def _flags_for_config(config, X, threshold):
    fitted = ml_detect.fit(config, X)
    raw = ml_detect.score(fitted, X)
    probs = ml_detect.normalize_scores(raw)
    return ml_detect.predict_outliers(probs, threshold)


def recall_precision(flags: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    labels = np.asarray(labels, dtype=bool)
    flags = np.asarray(flags, dtype=bool)
    tp = int(np.sum(flags & labels))
    fp = int(np.sum(flags & ~labels))
    fn = int(np.sum(~flags & labels))
    recall = tp / (tp + fn) if tp > 0 else 0.0
    precision = tp / (tp + fp) if tp > 0 else 0.0
    return recall, precision


def regression_proxy_objectives(
    cycle_index, X, flags
) -> tuple[float, int]:
    """Label-free objective pair for one trial's flags.

    Fits a quadratic trend of every feature column over cycle_index using
    only predicted inliers; the loss is the mean of the per-column mean
    squared residuals, and the count is how many inliers remain. Fewer than
    3 inliers cannot pin down a quadratic, so that case raises (callers
    record the trial with an infinite-loss sentinel).
    """
    t = np.asarray(cycle_index, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] != t.shape[0]:
        raise ConfigError("cycle_index and features disagree in length")
    flags = np.asarray(flags, dtype=bool)
    inliers = ~flags
    count = int(inliers.sum())
    if count < 3:
        raise InsufficientInlierError(
            f"only {count} predicted inliers; need at least 3", inlier_count=count
        )
    ti = t[inliers]
    design = np.column_stack([np.ones_like(ti), ti, ti**2])
    losses = []
    for j in range(X.shape[1]):
        y = X[inliers, j]
        beta, *_ = np.linalg.lstsq(design, y, rcond=None)
        resid = y - design @ beta
        losses.append(float(np.mean(resid**2)))
    return float(np.mean(losses)), count


# ---------------------------------------------------------------------------
# strategies


@dataclass
class CellTuning:
    """Per-cell outcome of the transfer strategy."""

    cell_id: str
    trials: list
    front: list
    best: TrialRecord

    @property
    def perfect_recall_fraction(self) -> float:
        return float(
            np.mean([1.0 if t.objectives[0] == 1.0 else 0.0 for t in self.trials])
        )


@dataclass
class TransferResult:
    per_cell: dict
    aggregated: DetectorConfig


@dataclass
class ProxyResult:
    trials: list
    front: list
    compromise: DetectorConfig


def _run_trials(model, space, n_trials, base_seed, evaluate, directions, kind):
    """Shared trial loop: enumerate when the space is small, else TPE."""
    enumerated = space.enumerate(n_trials)
    model_seed = derive_seed(base_seed, "model", model)
    trials: list[TrialRecord] = []
    points = (
        enumerated
        if enumerated is not None
        else (None for _ in range(n_trials))
    )
    for trial_id, preset in enumerate(points):
        if trial_id >= n_trials:
            break
        if preset is None:
            params = tpe_propose(
                trials, space, derive_seed(base_seed, "tpe", trial_id), directions
            )
        else:
            params = preset
        config = make_config(model, params, seed=model_seed)
        objectives = evaluate(config)
        trials.append(
            TrialRecord(
                trial_id=trial_id,
                config=config,
                objectives=objectives,
                objective_kind=kind,
            )
        )
    return trials


def optimize_transfer(
    cells: dict,
    model: str,
    space: SearchSpace | None = None,
    n_trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    threshold: float = ml_detect.DEFAULT_PROBABILITY_THRESHOLD,
) -> TransferResult:
    """Tune on labeled cells and aggregate each cell's best config.

    cells maps cell_id -> (X, labels) where labels is a 0/1 vector aligned
    with the rows of X. Each labeled cell must contain at least one positive
    cycle; per-cell winners are the Pareto points with maximum recall,
    precision breaking ties, earliest trial breaking what remains.
    """
    if not cells:
        raise CycleScreenError("transfer tuning needs at least one labeled cell")
    space = space if space is not None else default_search_space(model)
    per_cell = {}
    for cell_id in sorted(cells):
        X, labels = cells[cell_id]
        labels = np.asarray(labels, dtype=int)
        if labels.sum() == 0:
            raise NoPositiveLabelError(
                f"cell {cell_id} has no positive cycles; cannot score recall"
            )
        cell_seed = derive_seed(seed, "cell", cell_id)

        def evaluate(config, X=X, labels=labels):
            try:
                flags = _flags_for_config(config, X, threshold)
            except CycleScreenError:
                return (0.0, 0.0)
            return recall_precision(flags, labels)

        trials = _run_trials(
            model, space, n_trials, cell_seed, evaluate,
            ("max", "max"), "recall_precision",
        )
        front = pareto_front(trials, ("max", "max"))
        best = sorted(
            front,
            key=lambda t: (-t.objectives[0], -t.objectives[1], t.trial_id),
        )[0]
        per_cell[cell_id] = CellTuning(
            cell_id=cell_id, trials=trials, front=front, best=best
        )
    aggregated = aggregate_configs([ct.best.config for ct in per_cell.values()])
    return TransferResult(per_cell=per_cell, aggregated=aggregated)


def optimize_proxy(
    cycle_index,
    X,
    model: str,
    space: SearchSpace | None = None,
    n_trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    threshold: float = ml_detect.DEFAULT_PROBABILITY_THRESHOLD,
) -> ProxyResult:
    """Label-free tuning for one cell via the trend-regression proxy.

    Each trial minimizes the quadratic-trend loss over predicted inliers
    while maximizing how many inliers survive; the returned compromise
    config aggregates the most recurrent objective pair.
    """
    space = space if space is not None else default_search_space(model)
    X = np.atleast_2d(np.asarray(X, dtype=float))

    def evaluate(config):
        try:
            flags = _flags_for_config(config, X, threshold)
        except CycleScreenError:
            return (LOSS_SENTINEL, 0)
        try:
            loss, count = regression_proxy_objectives(cycle_index, X, flags)
        except InsufficientInlierError as err:
            return (LOSS_SENTINEL, err.inlier_count)
        return (loss, count)

    trials = _run_trials(
        model, space, n_trials, derive_seed(seed, "proxy"), evaluate,
        ("min", "max"), "loss_inliers",
    )
    front = pareto_front(trials, ("min", "max"))
    compromise = compromise_solution(trials)
    return ProxyResult(trials=trials, front=front, compromise=compromise)
