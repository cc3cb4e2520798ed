"""Command-line pipeline over the library.

Subcommands: ingest, features, detect, tune, evaluate, scoremap. Exit codes:
0 on success, 1 on validation/usage errors, 2 on I/O failures. All artifacts
are written atomically (temp file + rename) and contain no timestamps, so a
rerun with the same inputs and seed is byte-identical.

Output layout under --out (default ./out):

    <cell>/features.csv            feature table per cell
    <cell>/feature_notes.txt       guard side channel per cell
    <cell>/<model>/verdict.csv     one verdict file per cell and detector
    <cell>/<model>/grid.csv|.json  score surfaces (scoremap)
    tuning/<model>/trials.csv      trial history
    tuning/<model>/pareto.csv      non-dominated trials
    tuning/<model>/*.json          tuned configs
    report.csv, report.txt         evaluation summary
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import dist_detect, ml_detect, tune
from .dataset import (
    CycleStore,
    attach_labels,
    export_cycles,
    ingest_cycles,
    read_labels,
    read_manifest,
)
from .errors import CycleScreenError
from .evaluation import METRIC_NAMES, benchmark_report, confusion
from .features import FeatureMatrix, build_feature_matrix, log_feature, mahalanobis_feature
from .ml_detect import make_config
from .stat_detect import GAUSSIAN_MAD_FACTOR, StatMethod, detect_stat
from .util import atomic_write_text, derive_seed

STAT_MODELS = tuple(m.value for m in StatMethod)
DIST_MODELS = ("euclidean", "manhattan", "minkowski", "mahalanobis")
ALL_MODELS = STAT_MODELS + DIST_MODELS + ml_detect.ML_MODELS

RECIPES = ("severson", "tohoku", "custom")

#: default feature choices per recipe: (stat column, multivariate columns)
RECIPE_FEATURES = {
    "severson": ("log_dvdq_max", ("log_dq_max", "log_dv_max")),
    "tohoku": ("mahalanobis_norm", ("capacity_max", "mahalanobis_norm")),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems instead of exiting."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _fmt(x) -> str:
    return repr(float(x))


def _safe_name(token: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", token)


def _parse_col_overrides(pairs) -> dict[str, str] | None:
    if not pairs:
        return None
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise UsageError(
                f"--col expects role=name, got '{pair}'"
            )
        role, name = pair.split("=", 1)
        out[role.strip()] = name.strip()
    return out


def _load_store(args) -> CycleStore:
    store = ingest_cycles(
        args.input,
        columns=_parse_col_overrides(getattr(args, "col", None)),
        delimiter=args.delimiter,
    )
    if getattr(args, "labels", None):
        store = attach_labels(store, read_labels(args.labels))
    return store


# ---------------------------------------------------------------------------
# recipe feature construction


def _recipe_features(records, recipe: str) -> tuple[FeatureMatrix, object]:
    """Build the feature table a recipe promises.

    severson: difference features plus their logs. tohoku: capacity maximum
    plus the normalized trend-distance feature. custom: difference features
    and capacity, with logs and the distance feature added when computable.
    """
    if recipe == "severson":
        return build_feature_matrix(
            records, with_logs=True, with_capacity=True, with_mahalanobis=False
        )
    if recipe == "tohoku":
        return build_feature_matrix(
            records, with_logs=False, with_capacity=True, with_mahalanobis=True
        )
    matrix, notes = build_feature_matrix(
        records, with_logs=False, with_capacity=True, with_mahalanobis=False
    )
    for name in ("dv_max", "dq_max", "dvdq_max"):
        col = matrix.column(name)
        if np.any(col > 0):
            logged, clamped = log_feature(col)
            matrix.add_column(f"log_{name}", logged)
            notes.merge_log(
                f"log_{name}",
                [(int(matrix.cycle_index[i]), float(col[i])) for i in clamped],
            )
    if len(matrix) >= 3:
        try:
            matrix.add_column(
                "mahalanobis_norm",
                mahalanobis_feature(
                    matrix.cycle_index, matrix.column("capacity_max")
                ),
            )
        except CycleScreenError:
            pass  # singular trend cloud: feature simply unavailable
    return matrix, notes


def _selected_features(args, matrix: FeatureMatrix, multivariate: bool):
    """Resolve --feature/--log against the recipe defaults.

    Returns (column names, column arrays) after any log transform. Stat
    detectors take the first column; distance/ML detectors take all.
    """
    requested = None
    if args.feature:
        requested = [f.strip() for f in args.feature.split(",") if f.strip()]
        if not requested:
            raise UsageError("--feature was given but names no columns")
    if requested is None:
        if args.recipe == "custom":
            raise UsageError(
                "--recipe custom needs an explicit --feature list"
            )
        stat_col, multi_cols = RECIPE_FEATURES[args.recipe]
        requested = list(multi_cols) if multivariate else [stat_col]
    names = []
    cols = []
    for name in requested:
        try:
            col = matrix.column(name)
        except KeyError as err:
            raise UsageError(str(err)) from None
        if args.log:
            col, _clamped = log_feature(col)
            name = f"log({name})"
        names.append(name)
        cols.append(col)
    return names, cols


# ---------------------------------------------------------------------------
# verdict rendering


def _verdict_stat(cycles, verdict, feature_name, out_path):
    lim = verdict.limits
    extra = (
        f" mad_factor={_fmt(lim.mad_factor)}" if lim.mad_factor is not None else ""
    )
    lines = [
        f"# method={lim.method.value} feature={feature_name}"
        f" lower={_fmt(lim.lower)} upper={_fmt(lim.upper)}"
        f" center={_fmt(lim.center)} spread={_fmt(lim.spread)}{extra}",
        "cycle_index,score,flagged",
    ]
    for cyc, score, flag in zip(cycles, verdict.scores, verdict.flags):
        lines.append(f"{int(cyc)},{_fmt(score)},{int(flag)}")
    atomic_write_text(out_path, "\n".join(lines) + "\n")


def _verdict_dist(cycles, verdict, metric_name, feature_names, out_path):
    centroid = "|".join(_fmt(c) for c in verdict.centroid)
    lines = [
        f"# metric={metric_name} features={'|'.join(feature_names)}"
        f" centroid={centroid} cutoff={_fmt(verdict.cutoff)}"
        f" mad_threshold={_fmt(verdict.mad_threshold)}",
        "cycle_index,distance,normalized,flagged",
    ]
    for cyc, dist, norm, flag in zip(
        cycles, verdict.distances, verdict.normalized, verdict.flags
    ):
        lines.append(f"{int(cyc)},{_fmt(dist)},{_fmt(norm)},{int(flag)}")
    atomic_write_text(out_path, "\n".join(lines) + "\n")


def _verdict_ml(cycles, raw, probs, flags, config, feature_names, mode, out_path):
    lines = [
        f"# model={config.model} features={'|'.join(feature_names)}"
        f" flags={mode} seed={config.seed}",
        "cycle_index,raw_score,probability,flagged",
    ]
    for cyc, r, p, flag in zip(cycles, raw, probs, flags):
        lines.append(f"{int(cyc)},{_fmt(r)},{_fmt(p)},{int(flag)}")
    atomic_write_text(out_path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# per-cell workers (top level so a process pool can pickle them)


@dataclass(frozen=True)
class _DetectJob:
    cell_id: str
    records: tuple
    models: tuple
    out_dir: str
    recipe: str
    feature: str | None
    log: bool
    threshold: float
    mad_factor: float
    mad_threshold: float
    minkowski_p: float
    seed: int
    contamination_mode: bool
    config_params: dict | None = None
    config_seed: int | None = None


class _ArgsView:
    """Minimal attribute bag standing in for parsed args inside workers."""

    def __init__(self, recipe, feature, log):
        self.recipe = recipe
        self.feature = feature
        self.log = log


def _run_detect_cell(job: _DetectJob) -> str:
    matrix, notes = _recipe_features(list(job.records), job.recipe)
    view = _ArgsView(job.recipe, job.feature, job.log)
    cell_dir = f"{job.out_dir}/{_safe_name(job.cell_id)}"
    cycles = matrix.cycle_index

    for model in job.models:
        model_dir = f"{cell_dir}/{model}"
        path = f"{model_dir}/verdict.csv"
        if model in STAT_MODELS:
            names, cols = _selected_features(view, matrix, multivariate=False)
            verdict = detect_stat(cols[0], model, mad_factor=job.mad_factor)
            _verdict_stat(cycles, verdict, names[0], path)
        elif model in DIST_MODELS:
            names, cols = _selected_features(view, matrix, multivariate=True)
            X = np.column_stack(cols)
            spec = dist_detect.MetricSpec(
                kind=model,
                p=job.minkowski_p if model == "minkowski" else None,
            )
            verdict = dist_detect.centroid_detect(
                X, spec, mad_threshold=job.mad_threshold,
                mad_factor=job.mad_factor,
            )
            _verdict_dist(cycles, verdict, model, names, path)
        else:
            names, cols = _selected_features(view, matrix, multivariate=True)
            X = np.column_stack(cols)
            base_seed = (
                job.config_seed if job.config_seed is not None else job.seed
            )
            config = make_config(
                model,
                job.config_params,
                seed=derive_seed(base_seed, job.cell_id, model),
            )
            fitted = ml_detect.fit(config, X, columns=names)
            raw = ml_detect.score(fitted, X)
            probs = ml_detect.normalize_scores(raw)
            if job.contamination_mode and "contamination" in config.params:
                flags = ml_detect.predict_top_fraction(
                    raw, config.params["contamination"]
                )
                mode = f"top_fraction={_fmt(config.params['contamination'])}"
            else:
                flags = ml_detect.predict_outliers(probs, job.threshold)
                mode = f"threshold={_fmt(job.threshold)}"
            _verdict_ml(cycles, raw, probs, flags, config, names, mode, path)
    return job.cell_id


@dataclass(frozen=True)
class _FeatureJob:
    cell_id: str
    records: tuple
    out_dir: str
    recipe: str


def _run_feature_cell(job: _FeatureJob) -> str:
    matrix, notes = _recipe_features(list(job.records), job.recipe)
    cell_dir = f"{job.out_dir}/{_safe_name(job.cell_id)}"
    atomic_write_text(f"{cell_dir}/features.csv", matrix.to_delimited())
    atomic_write_text(f"{cell_dir}/feature_notes.txt", notes.render())
    return job.cell_id


@dataclass(frozen=True)
class _GridJob:
    cell_id: str
    records: tuple
    model: str
    out_dir: str
    recipe: str
    feature: str | None
    log: bool
    resolution: int
    minkowski_p: float
    seed: int


def _run_grid_cell(job: _GridJob) -> str:
    matrix, _notes = _recipe_features(list(job.records), job.recipe)
    view = _ArgsView(job.recipe, job.feature, job.log)
    names, cols = _selected_features(view, matrix, multivariate=True)
    if len(cols) != 2:
        raise UsageError(
            f"scoremap needs exactly 2 features, got {len(cols)}"
        )
    X = np.column_stack(cols)
    if job.model in DIST_MODELS:
        spec = dist_detect.MetricSpec(
            kind=job.model,
            p=job.minkowski_p if job.model == "minkowski" else None,
        )
        grid = dist_detect.score_grid(X, spec, resolution=job.resolution)
        axes, values = grid.axes, grid.values
        bounds = grid.bounds
        data_min, data_max = grid.data_min, grid.data_max
    else:
        config = make_config(
            job.model, None, seed=derive_seed(job.seed, job.cell_id, job.model)
        )
        fitted = ml_detect.fit(config, X, columns=names)
        data_raw = ml_detect.score(fitted, X)
        lo = X.min(axis=0)
        hi = X.max(axis=0)
        pad = np.where(hi - lo == 0.0, 0.5, 0.1 * (hi - lo))
        bounds = tuple(
            (float(l - p), float(h + p)) for l, h, p in zip(lo, hi, pad)
        )
        axes = tuple(
            np.linspace(low, high, job.resolution) for low, high in bounds
        )
        mesh = np.meshgrid(*axes, indexing="ij")
        nodes = np.column_stack([m.ravel() for m in mesh])
        node_raw = ml_detect.score(fitted, nodes)
        values = ml_detect.normalize_scores(node_raw, reference=data_raw)
        values = values.reshape(job.resolution, job.resolution)
        data_min, data_max = float(data_raw.min()), float(data_raw.max())

    cell_dir = f"{job.out_dir}/{_safe_name(job.cell_id)}/{job.model}"
    lines = [
        f"# model={job.model} features={'|'.join(names)}"
        f" resolution={job.resolution}",
        f"{names[0]},{names[1]},score",
    ]
    for i in range(values.shape[0]):
        for j in range(values.shape[1]):
            lines.append(
                f"{_fmt(axes[0][i])},{_fmt(axes[1][j])},{_fmt(values[i, j])}"
            )
    atomic_write_text(f"{cell_dir}/grid.csv", "\n".join(lines) + "\n")
    sidecar = {
        "model": job.model,
        "features": list(names),
        "bounds": [list(b) for b in bounds],
        "resolution": [job.resolution, job.resolution],
        "data_min": data_min,
        "data_max": data_max,
    }
    atomic_write_text(
        f"{cell_dir}/grid.json",
        json.dumps(sidecar, sort_keys=True, indent=2) + "\n",
    )
    return job.cell_id


def _map_cells(worker, jobs_list, n_jobs: int):
    if n_jobs <= 1 or len(jobs_list) <= 1:
        return [worker(j) for j in jobs_list]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(worker, jobs_list))


# ---------------------------------------------------------------------------
# subcommand implementations


def _cmd_ingest(args) -> int:
    store = _load_store(args)
    export_cycles(store, f"{args.out}/cycles.csv")
    cells = store.cells()
    sys.stdout.write(
        f"ingested {len(store)} cycles across {len(cells)} cells -> "
        f"{args.out}/cycles.csv\n"
    )
    return 0


def _cmd_features(args) -> int:
    store = _load_store(args)
    jobs = [
        _FeatureJob(
            cell_id=cell,
            records=tuple(store.by_cell(cell)),
            out_dir=args.out,
            recipe=args.recipe,
        )
        for cell in store.cells()
    ]
    _map_cells(_run_feature_cell, jobs, args.jobs)
    sys.stdout.write(f"wrote features for {len(jobs)} cells under {args.out}\n")
    return 0


def _resolve_models(token: str) -> tuple[str, ...]:
    if token == "all":
        return ALL_MODELS
    if token not in ALL_MODELS:
        raise UsageError(
            f"unknown model '{token}'; expected 'all' or one of {list(ALL_MODELS)}"
        )
    return (token,)


def _cmd_detect(args) -> int:
    store = _load_store(args)
    models = _resolve_models(args.model)
    config_params = None
    config_seed = None
    if args.config:
        if len(models) != 1 or models[0] not in ml_detect.ML_MODELS:
            raise UsageError(
                "--config applies to a single learned model"
            )
        with open(args.config, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
        if payload.get("model") != models[0]:
            raise UsageError(
                f"--config is for model '{payload.get('model')}', "
                f"not '{models[0]}'"
            )
        config_params = payload.get("params", {})
        config_seed = payload.get("seed")
    jobs = [
        _DetectJob(
            cell_id=cell,
            records=tuple(store.by_cell(cell)),
            models=models,
            out_dir=args.out,
            recipe=args.recipe,
            feature=args.feature,
            log=args.log,
            threshold=args.threshold,
            mad_factor=args.mad_factor,
            mad_threshold=args.mad_threshold,
            minkowski_p=args.p,
            seed=args.seed,
            contamination_mode=args.contamination_threshold,
            config_params=config_params,
            config_seed=config_seed,
        )
        for cell in store.cells()
    ]
    _map_cells(_run_detect_cell, jobs, args.jobs)
    sys.stdout.write(
        f"wrote {len(models)} verdict(s) for {len(jobs)} cells under {args.out}\n"
    )
    return 0


def _trial_rows(trials, space, cell_id=""):
    param_names = sorted(space.params)
    rows = []
    for t in trials:
        row = [cell_id, str(t.trial_id)]
        for name in param_names:
            value = t.config.params[name]
            if isinstance(value, (tuple, list)):
                value = "x".join(str(v) for v in value)
            row.append(str(value))
        row.extend(
            [
                _fmt(t.objectives[0]),
                _fmt(t.objectives[1]),
                t.objective_kind,
            ]
        )
        rows.append(",".join(row))
    return param_names, rows


def _write_trials(path, header_params, rows):
    header = ",".join(
        ["cell_id", "trial_id"] + header_params + ["objective_1", "objective_2", "kind"]
    )
    atomic_write_text(path, "\n".join([header] + rows) + "\n")


def _config_json(config) -> str:
    params = {
        k: (list(v) if isinstance(v, (tuple, list)) else v)
        for k, v in config.params.items()
    }
    return json.dumps(
        {"model": config.model, "params": params, "seed": config.seed},
        sort_keys=True,
        indent=2,
    ) + "\n"


def _cmd_tune(args) -> int:
    if args.model not in ml_detect.ML_MODELS:
        raise UsageError(
            f"tuning applies to learned models {list(ml_detect.ML_MODELS)}"
        )
    store = _load_store(args)
    manifest = read_manifest(args.manifest) if args.manifest else None
    space = tune.default_search_space(args.model)
    tuning_dir = f"{args.out}/tuning/{args.model}"

    if args.strategy == "transfer":
        if not args.labels:
            raise UsageError("--strategy transfer requires --labels")
        label_map = read_labels(args.labels)
        cell_ids = sorted(label_map)
        if manifest is not None:
            cell_ids = [c for c in cell_ids if c in manifest.train_cells]
        if not cell_ids:
            raise UsageError("no labeled train cells to tune on")
        cells = {}
        for cell in cell_ids:
            records = store.by_cell(cell)
            if not records:
                raise UsageError(f"labeled cell '{cell}' not present in input")
            matrix, _notes = _recipe_features(records, args.recipe)
            view = _ArgsView(args.recipe, args.feature, args.log)
            names, cols = _selected_features(view, matrix, multivariate=True)
            X = np.column_stack(cols)
            labels = np.asarray(
                [
                    1 if int(c) in label_map[cell] else 0
                    for c in matrix.cycle_index
                ],
                dtype=int,
            )
            cells[cell] = (X, labels)
        result = tune.optimize_transfer(
            cells,
            args.model,
            space=space,
            n_trials=args.trials,
            seed=args.seed,
            threshold=args.threshold,
        )
        all_rows = []
        front_rows = []
        param_names = sorted(space.params)
        for cell in sorted(result.per_cell):
            ct = result.per_cell[cell]
            _, rows = _trial_rows(ct.trials, space, cell_id=cell)
            all_rows.extend(rows)
            _, rows = _trial_rows(ct.front, space, cell_id=cell)
            front_rows.extend(rows)
        _write_trials(f"{tuning_dir}/trials.csv", param_names, all_rows)
        _write_trials(f"{tuning_dir}/pareto.csv", param_names, front_rows)
        atomic_write_text(
            f"{tuning_dir}/config.json", _config_json(result.aggregated)
        )
        fractions = ", ".join(
            f"{cell}={result.per_cell[cell].perfect_recall_fraction:.2f}"
            for cell in sorted(result.per_cell)
        )
        sys.stdout.write(
            f"transfer tuning of {args.model} on {len(cells)} cells done; "
            f"perfect-recall fraction per cell: {fractions}\n"
        )
        return 0

    # proxy strategy: per cell, no labels needed
    cell_ids = store.cells()
    if manifest is not None:
        cell_ids = [c for c in cell_ids if c in manifest.test_cells]
    if not cell_ids:
        raise UsageError("no cells to tune on")
    all_rows = []
    front_rows = []
    param_names = sorted(space.params)
    for cell in cell_ids:
        records = store.by_cell(cell)
        matrix, _notes = _recipe_features(records, args.recipe)
        view = _ArgsView(args.recipe, args.feature, args.log)
        names, cols = _selected_features(view, matrix, multivariate=True)
        X = np.column_stack(cols)
        result = tune.optimize_proxy(
            matrix.cycle_index,
            X,
            args.model,
            space=space,
            n_trials=args.trials,
            seed=derive_seed(args.seed, cell),
            threshold=args.threshold,
        )
        _, rows = _trial_rows(result.trials, space, cell_id=cell)
        all_rows.extend(rows)
        _, rows = _trial_rows(result.front, space, cell_id=cell)
        front_rows.extend(rows)
        atomic_write_text(
            f"{tuning_dir}/compromise_{_safe_name(cell)}.json",
            _config_json(result.compromise),
        )
    _write_trials(f"{tuning_dir}/trials.csv", param_names, all_rows)
    _write_trials(f"{tuning_dir}/pareto.csv", param_names, front_rows)
    sys.stdout.write(
        f"proxy tuning of {args.model} done for {len(cell_ids)} cells\n"
    )
    return 0


def _read_verdict_flags(path: str) -> dict[int, int]:
    flags = {}
    with open(path, "r", encoding="utf-8") as handle:
        header = None
        for line in handle:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
                continue
            row = line.split(",")
            flags[int(row[0])] = int(row[header.index("flagged")])
    return flags


def _cmd_evaluate(args) -> int:
    import os

    label_map = read_labels(args.labels)
    run_dir = args.input
    per_model: dict[str, dict[str, object]] = {}
    for cell_name in sorted(os.listdir(run_dir)):
        cell_dir = os.path.join(run_dir, cell_name)
        if not os.path.isdir(cell_dir) or cell_name == "tuning":
            continue
        if cell_name not in label_map:
            continue
        truth = label_map[cell_name]
        for model_name in sorted(os.listdir(cell_dir)):
            verdict_path = os.path.join(cell_dir, model_name, "verdict.csv")
            if not os.path.isfile(verdict_path):
                continue
            flags = _read_verdict_flags(verdict_path)
            cycles = sorted(flags)
            y = [1 if c in truth else 0 for c in cycles]
            f = [flags[c] for c in cycles]
            counts = confusion(np.asarray(y), np.asarray(f))
            per_model.setdefault(model_name, {})[cell_name] = counts
    if not per_model:
        raise UsageError(
            f"no verdicts for labeled cells found under '{run_dir}'"
        )
    csv_lines = ["model,metric,value,passed"]
    txt_lines = []
    for model_name in sorted(per_model):
        report = benchmark_report(per_model[model_name], kpi=args.kpi)
        txt_lines.append(f"model {model_name} (kpi {args.kpi:g})")
        for cell in sorted(report.per_cell):
            ms = report.per_cell[cell]
            txt_lines.append(
                "  cell "
                + cell
                + ": "
                + " ".join(
                    f"{name}={ms.as_dict()[name]:.4f}" for name in METRIC_NAMES
                )
            )
        for name in METRIC_NAMES:
            value = report.macro.as_dict()[name]
            passed = report.passes[name]
            csv_lines.append(
                f"{model_name},{name},{_fmt(value)},{int(passed)}"
            )
            txt_lines.append(
                f"  macro {name}: {value:.4f} "
                + ("PASS" if passed else "FAIL")
            )
    atomic_write_text(f"{args.out}/report.csv", "\n".join(csv_lines) + "\n")
    atomic_write_text(f"{args.out}/report.txt", "\n".join(txt_lines) + "\n")
    sys.stdout.write("\n".join(txt_lines) + "\n")
    return 0


def _cmd_scoremap(args) -> int:
    store = _load_store(args)
    models = (
        DIST_MODELS + ml_detect.ML_MODELS
        if args.model == "all"
        else _resolve_models(args.model)
    )
    for model in models:
        if model in STAT_MODELS:
            raise UsageError(
                f"scoremap needs a distance or learned model, not '{model}'"
            )
    jobs = []
    for cell in store.cells():
        for model in models:
            jobs.append(
                _GridJob(
                    cell_id=cell,
                    records=tuple(store.by_cell(cell)),
                    model=model,
                    out_dir=args.out,
                    recipe=args.recipe,
                    feature=args.feature,
                    log=args.log,
                    resolution=args.resolution,
                    minkowski_p=args.p,
                    seed=args.seed,
                )
            )
    _map_cells(_run_grid_cell, jobs, args.jobs)
    sys.stdout.write(f"wrote {len(jobs)} score grid(s) under {args.out}\n")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_common(sub, input_required=True):
    sub.add_argument("--input", required=input_required, help="measurement file")
    sub.add_argument("--out", default="out", help="output directory")
    sub.add_argument("--labels", default=None, help="label file (anomalous cycles)")
    sub.add_argument("--manifest", default=None, help="cell role manifest")
    sub.add_argument(
        "--recipe", choices=RECIPES, default="severson",
        help="feature recipe (default severson)",
    )
    sub.add_argument(
        "--feature", default=None,
        help="comma-separated feature columns overriding the recipe default",
    )
    sub.add_argument(
        "--log", action="store_true",
        help="natural-log the selected feature columns",
    )
    sub.add_argument("--seed", type=int, default=0, help="base random seed")
    sub.add_argument(
        "--jobs", type=int, default=1, help="parallel workers across cells"
    )
    sub.add_argument("--delimiter", default=",", help="input field delimiter")
    sub.add_argument(
        "--col", action="append", default=None, metavar="ROLE=NAME",
        help="remap an input column, e.g. --col voltage=U_volts",
    )


def build_parser() -> _Parser:
    parser = _Parser(prog="cyclescreen", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("ingest", help="validate and normalize a measurement file")
    _add_common(p)

    p = subs.add_parser("features", help="write per-cell feature tables")
    _add_common(p)

    p = subs.add_parser("detect", help="run detectors and write verdicts")
    _add_common(p)
    p.add_argument(
        "--model", default="all",
        help="detector name or 'all' (default) for the full battery of "
             f"{len(ALL_MODELS)}",
    )
    p.add_argument(
        "--threshold", type=float, default=0.7,
        help="outlier probability threshold for learned models (default 0.7)",
    )
    p.add_argument(
        "--mad-factor", type=float, default=GAUSSIAN_MAD_FACTOR,
        help="consistency factor for MAD-based rules",
    )
    p.add_argument(
        "--mad-threshold", type=float, default=3.0,
        help="MAD multiplier for distance-detector flags (default 3)",
    )
    p.add_argument(
        "--p", type=float, default=0.5,
        help="minkowski exponent (default 0.5)",
    )
    p.add_argument(
        "--contamination-threshold", action="store_true",
        help="flag the top contamination-fraction instead of using the "
             "probability threshold (models exposing a contamination param)",
    )
    p.add_argument(
        "--config", default=None,
        help="JSON config file (as written by tune) for a single learned model",
    )

    p = subs.add_parser("tune", help="hyperparameter search for a learned model")
    _add_common(p)
    p.add_argument("--model", required=True, help="learned model to tune")
    p.add_argument(
        "--strategy", choices=("transfer", "proxy"), default="transfer",
        help="transfer (labeled cells) or proxy (label-free)",
    )
    p.add_argument("--trials", type=int, default=20, help="trial budget per cell")
    p.add_argument(
        "--threshold", type=float, default=0.7,
        help="probability threshold used inside trial evaluation",
    )

    p = subs.add_parser("evaluate", help="score verdicts against labels")
    _add_common(p, input_required=True)
    p.add_argument(
        "--kpi", type=float, default=0.95,
        help="macro metric pass threshold (default 0.95)",
    )

    p = subs.add_parser("scoremap", help="export score surfaces for plots")
    _add_common(p)
    p.add_argument(
        "--model", default="all",
        help="distance or learned model, or 'all'",
    )
    p.add_argument(
        "--resolution", type=int, default=50,
        help="grid resolution per axis (default 50)",
    )
    p.add_argument("--p", type=float, default=0.5, help="minkowski exponent")

    return parser


_COMMANDS = {
    "ingest": _cmd_ingest,
    "features": _cmd_features,
    "detect": _cmd_detect,
    "tune": _cmd_tune,
    "evaluate": _cmd_evaluate,
    "scoremap": _cmd_scoremap,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "evaluate" and not args.labels:
            raise UsageError("evaluate requires --labels")
        return _COMMANDS[args.command](args)
    except UsageError as err:
        sys.stderr.write(f"error: {err}\n")
        return 1
    except CycleScreenError as err:
        sys.stderr.write(f"error: {err}\n")
        return 1
    except OSError as err:
        sys.stderr.write(f"i/o error: {err}\n")
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
