"""Grid search, stratified k-fold CV, and final holdout evaluation.

Splits are fixed before a grid starts and shared by every configuration;
each trial's training seed derives deterministically from the grid seed
and the configuration, so editing one axis value leaves every other
trial's randomness untouched. Test examples are never materialized until
select_final runs.
"""

from __future__ import annotations

import itertools
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import cnn as cnn_mod
from .cnn import Batch, TrainConfig
from .dataset import (
    FeatureTier,
    PlayerSeries,
    ScalerParams,
    SplitAssignment,
    WindowedExample,
    apply_scaler,
    build_windows,
    fit_scaler,
    sliding_average,
    stable_hash,
)
from .evaluation import mse
from .gbm import GbmHyperparams, fit_gbm, predict_gbm_batch
from .ingest import Position
from .ridge import fit_ridge, predict_ridge_batch

__all__ = [
    "GridSpec",
    "TrialResult",
    "CvConfig",
    "FittedTrial",
    "run_grid",
    "top_k_summary",
    "cross_validate",
    "select_final",
    "train_family",
    "sliding_design",
    "windowed_batch",
    "default_grid",
]

FAMILIES = ("ridge", "gbm", "cnn")


@dataclass
class GridSpec:
    """Cartesian search space for one model family."""

    family: str
    axes: dict[str, list] = field(default_factory=dict)
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown model family '{self.family}'")
        for name, values in self.axes.items():
            if not values:
                raise ValueError(f"grid axis '{name}' is empty")

    def configurations(self) -> list[dict]:
        names = sorted(self.axes)
        configs = []
        for combo in itertools.product(*(self.axes[n] for n in names)):
            config = dict(self.fixed)
            config.update(dict(zip(names, combo)))
            configs.append(config)
        return configs


@dataclass
class TrialResult:
    config: dict
    position: Position
    family: str
    train_mse: float | None
    val_mse: float | None
    test_mse: float | None
    seed: int
    wall_time: float
    error: str | None = None


@dataclass
class CvConfig:
    k: int = 5
    n_bins: int = 4
    strat_on: str = "avg_score"
    seed: int = 0

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be >= 2")


@dataclass
class FittedTrial:
    """A trained model plus everything needed to reuse it."""

    family: str
    model: object
    scaler: ScalerParams | None
    feature_names: list[str]
    config: dict
    extras: dict = field(default_factory=dict)


def sliding_design(examples, scaler: ScalerParams | None = None):
    """Design matrix for the baselines: sliding-average features then d."""
    rows, y = [], []
    for ex in examples:
        sa = sliding_average(ex)
        if scaler is not None:
            sa = apply_scaler(scaler, sa)
        rows.append(np.concatenate([sa.x, [float(sa.d)]]))
        y.append(float(sa.y))
    return np.array(rows), np.array(y)


def windowed_batch(examples, scaler: ScalerParams | None = None) -> Batch:
    """CNN tensors: scaled windows, raw difficulties, raw targets."""
    scaled = [apply_scaler(scaler, ex) if scaler else ex for ex in examples]
    return Batch(
        X=np.stack([ex.X for ex in scaled]),
        d=np.array([float(ex.d) for ex in scaled]),
        y=np.array([float(ex.y) for ex in scaled]),
    )


def derive_seed(seed: int, config: dict) -> int:
    return stable_hash(seed, sorted(config.items())) % (2**31)


def _windows_for_split(
    series_list: list[PlayerSeries],
    strengths,
    splits: SplitAssignment,
    split: str,
    w: int,
    tier: FeatureTier,
    flip_difficulty: bool = False,
) -> list[WindowedExample]:
    examples: list[WindowedExample] = []
    for series in series_list:
        if splits.assignments.get(series.key) == split:
            examples.extend(build_windows(series, w, tier, strengths))
    if flip_difficulty:
        for ex in examples:
            ex.d = -ex.d
    return examples


def train_family(
    family: str,
    config: dict,
    train_examples: list[WindowedExample],
    val_examples: list[WindowedExample],
    seed: int,
) -> tuple[FittedTrial, float, float]:
    """Fit one configuration; returns (fitted trial, train MSE, val MSE)."""
    tier = FeatureTier(config.get("tier", "ptsonly"))
    feature_names = tier.columns() + ["difficulty_gap"]
    if not train_examples or not val_examples:
        raise ValueError("train and validation example sets must be non-empty")

    if family == "ridge":
        scaler = fit_scaler([sliding_average(e) for e in train_examples], "sliding")
        A_train, y_train = sliding_design(train_examples, scaler)
        A_val, y_val = sliding_design(val_examples, scaler)
        model = fit_ridge(
            A_train, y_train, lam=float(config.get("lambda", 1.0)),
            feature_names=feature_names,
        )
        train_err = mse(y_train, predict_ridge_batch(model, A_train))
        val_err = mse(y_val, predict_ridge_batch(model, A_val))
        return (
            FittedTrial(family, model, scaler, feature_names, dict(config)),
            train_err,
            val_err,
        )

    if family == "gbm":
        A_train, y_train = sliding_design(train_examples)
        A_val, y_val = sliding_design(val_examples)
        hp = GbmHyperparams(
            n_trees=int(config.get("n_trees", 50)),
            max_depth=int(config.get("max_depth", 3)),
            lambda_l2=float(config.get("lambda_l2", 10.0)),
            num_leaves=int(config.get("num_leaves", 7)),
            min_data_in_leaf=int(config.get("min_data_in_leaf", 70)),
            eta=float(config.get("eta", 0.1)),
        )
        model = fit_gbm(A_train, y_train, hp, feature_names=feature_names)
        train_err = mse(y_train, predict_gbm_batch(model, A_train))
        val_err = mse(y_val, predict_gbm_batch(model, A_val))
        return (
            FittedTrial(family, model, None, feature_names, dict(config)),
            train_err,
            val_err,
        )

    if family == "cnn":
        w = int(config.get("w", train_examples[0].X.shape[0]))
        k = int(config.get("k", 1))
        scaler = fit_scaler(train_examples, "windowed")
        train_batch = windowed_batch(train_examples, scaler)
        val_batch = windowed_batch(val_examples, scaler)
        model = cnn_mod.init_model(
            w=w,
            k=k,
            f=len(tier.columns()),
            n_filters=int(config.get("filters", 64)),
            n_hidden=int(config.get("hidden", 64)),
            activation=str(config.get("activation", "relu")),
            seed=seed,
        )
        tc = TrainConfig(
            epochs=int(config.get("epochs", 250)),
            learning_rate=float(config.get("learning_rate", 0.001)),
            batch_size=int(config.get("batch_size", 32)),
            early_stop_tolerance=float(config.get("early_stop_tolerance", 1e-4)),
            patience=int(config.get("patience", 20)),
            lambda1=float(config.get("lambda1", 0.0)),
            lambda2=float(config.get("lambda2", 0.0)),
            seed=seed,
        )
        best, curve = cnn_mod.train(model, train_batch, val_batch, tc)
        train_pred, _ = cnn_mod.forward_batch(best, train_batch.X, train_batch.d)
        val_pred, _ = cnn_mod.forward_batch(best, val_batch.X, val_batch.d)
        return (
            FittedTrial(
                family,
                best,
                scaler,
                feature_names,
                dict(config),
                extras={"curve": curve},
            ),
            mse(train_batch.y, train_pred),
            mse(val_batch.y, val_pred),
        )

    raise ValueError(f"unknown model family '{family}'")


def _run_trial(
    family: str,
    config: dict,
    position: Position,
    series_list: list[PlayerSeries],
    strengths,
    splits: SplitAssignment,
    grid_seed: int,
    flip_difficulty: bool,
) -> TrialResult:
    trial_seed = derive_seed(grid_seed, config)
    started = time.perf_counter()
    try:
        w = int(config.get("w", 3))
        tier = FeatureTier(config.get("tier", "ptsonly"))
        train_ex = _windows_for_split(
            series_list, strengths, splits, "train", w, tier, flip_difficulty
        )
        val_ex = _windows_for_split(
            series_list, strengths, splits, "validation", w, tier, flip_difficulty
        )
        _, train_err, val_err = train_family(
            family, config, train_ex, val_ex, trial_seed
        )
        return TrialResult(
            config=dict(config),
            position=position,
            family=family,
            train_mse=train_err,
            val_mse=val_err,
            test_mse=None,
            seed=trial_seed,
            wall_time=time.perf_counter() - started,
        )
    except Exception as exc:  # noqa: BLE001 - failed trials are data, not fatal
        return TrialResult(
            config=dict(config),
            position=position,
            family=family,
            train_mse=None,
            val_mse=None,
            test_mse=None,
            seed=trial_seed,
            wall_time=time.perf_counter() - started,
            error=f"{type(exc).__name__}: {exc}",
        )


def run_grid(
    grid: GridSpec,
    series_list: list[PlayerSeries],
    strengths,
    splits: SplitAssignment,
    seed: int = 0,
    position: Position | None = None,
    workers: int = 1,
    flip_difficulty: bool = False,
) -> list[TrialResult]:
    """One trial per cartesian configuration, sorted by validation MSE.

    Infeasible configurations (e.g. kernel wider than window) are recorded
    as failed trials and sort last. Only train and validation examples are
    ever built here.
    """
    if position is None:
        position = series_list[0].key.position if series_list else Position.MID
    configs = grid.configurations()

    def job(config):
        return _run_trial(
            grid.family, config, position, series_list, strengths, splits, seed,
            flip_difficulty,
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, configs))
    else:
        results = [job(c) for c in configs]
    results.sort(
        key=lambda r: (r.error is not None, r.val_mse if r.val_mse is not None else 0.0)
    )
    return results


def top_k_summary(results: list[TrialResult], k: int) -> tuple[float, float]:
    """(mean, max) of the k lowest validation MSEs among successes."""
    succeeded = sorted(
        (r.val_mse for r in results if r.error is None and r.val_mse is not None)
    )
    if k > len(succeeded):
        raise ValueError(f"k={k} exceeds {len(succeeded)} successful trials")
    best = succeeded[:k]
    return float(np.mean(best)), float(max(best))


def cross_validate(
    family: str,
    config: dict,
    series_list: list[PlayerSeries],
    strengths,
    cv: CvConfig,
    flip_difficulty: bool = False,
) -> tuple[float, float]:
    """Stratified player-disjoint k-fold CV: (mean train MSE, mean val MSE)."""
    if len(series_list) < cv.k:
        raise ValueError(f"{len(series_list)} players cannot fill {cv.k} folds")
    folds = _assign_folds(series_list, cv)
    w = int(config.get("w", 3))
    tier = FeatureTier(config.get("tier", "ptsonly"))
    train_errs, val_errs = [], []
    for held in range(cv.k):
        train_series = [s for s, f in zip(series_list, folds) if f != held]
        val_series = [s for s, f in zip(series_list, folds) if f == held]
        train_ex = [
            e for s in train_series for e in build_windows(s, w, tier, strengths)
        ]
        val_ex = [e for s in val_series for e in build_windows(s, w, tier, strengths)]
        if flip_difficulty:
            for ex in train_ex + val_ex:
                ex.d = -ex.d
        seed = derive_seed(cv.seed, {**config, "fold": held})
        _, train_err, val_err = train_family(family, config, train_ex, val_ex, seed)
        train_errs.append(train_err)
        val_errs.append(val_err)
    return float(np.mean(train_errs)), float(np.mean(val_errs))


def _assign_folds(series_list: list[PlayerSeries], cv: CvConfig) -> list[int]:
    """Quantile-bin players on skill, then deal each bin round-robin."""
    indexed = list(enumerate(series_list))

    def stat(s: PlayerSeries) -> float:
        return s.avg_score if cv.strat_on == "avg_score" else s.stdev_score

    if cv.strat_on == "none":
        ranked = sorted(indexed, key=lambda t: t[1].key.canonical_name)
        n_bins = 1
    else:
        ranked = sorted(indexed, key=lambda t: (stat(t[1]), t[1].key.canonical_name))
        n_bins = min(cv.n_bins, len(series_list))
    edges = [round(i * len(ranked) / n_bins) for i in range(n_bins + 1)]
    folds = [0] * len(series_list)
    cursor = 0  # continues across bins so every fold stays populated
    for b in range(n_bins):
        bin_items = ranked[edges[b] : edges[b + 1]]
        bin_items.sort(key=lambda t: stable_hash(cv.seed, t[1].key.canonical_name))
        for idx, _series in bin_items:
            folds[idx] = cursor % cv.k
            cursor += 1
    return folds


def select_final(
    results: list[TrialResult],
    series_list: list[PlayerSeries],
    strengths,
    splits: SplitAssignment,
    flip_difficulty: bool = False,
) -> tuple[TrialResult, FittedTrial]:
    """Retrain the lowest-validation-MSE configuration (with its stored
    trial seed) and score the holdout split exactly once."""
    succeeded = [r for r in results if r.error is None and r.val_mse is not None]
    if not succeeded:
        raise ValueError("no successful trials to select from")
    best = min(succeeded, key=lambda r: r.val_mse)
    w = int(best.config.get("w", 3))
    tier = FeatureTier(best.config.get("tier", "ptsonly"))
    flip = flip_difficulty
    train_ex = _windows_for_split(
        series_list, strengths, splits, "train", w, tier, flip
    )
    val_ex = _windows_for_split(
        series_list, strengths, splits, "validation", w, tier, flip
    )
    test_ex = _windows_for_split(
        series_list, strengths, splits, "test", w, tier, flip
    )
    fitted, train_err, val_err = train_family(
        best.family, best.config, train_ex, val_ex, best.seed
    )
    if not test_ex:
        raise ValueError("holdout split has no examples")
    if fitted.family == "ridge":
        A, y = sliding_design(test_ex, fitted.scaler)
        test_err = mse(y, predict_ridge_batch(fitted.model, A))
    elif fitted.family == "gbm":
        A, y = sliding_design(test_ex)
        test_err = mse(y, predict_gbm_batch(fitted.model, A))
    else:
        batch = windowed_batch(test_ex, fitted.scaler)
        pred, _ = cnn_mod.forward_batch(fitted.model, batch.X, batch.d)
        test_err = mse(batch.y, pred)
    final = replace(best, train_mse=train_err, val_mse=val_err, test_mse=test_err)
    return final, fitted


def default_grid(family: str) -> GridSpec:
    """Search spaces used when no grid is configured."""
    if family == "cnn":
        return GridSpec(
            family="cnn",
            axes={
                "w": [3, 6, 9],
                "k": [1, 2, 3],
                "tier": [t.value for t in FeatureTier],
                "filters": [32, 64],
                "hidden": [32, 64],
            },
        )
    if family == "ridge":
        return GridSpec(
            family="ridge",
            axes={"lambda": [0.01, 0.1, 1.0, 10.0, 100.0], "w": [3, 6, 9]},
        )
    if family == "gbm":
        return GridSpec(
            family="gbm",
            axes={
                "n_trees": [50],
                "max_depth": [3],
                "num_leaves": [7],
                "lambda_l2": [1.0, 10.0],
                "min_data_in_leaf": [20, 70],
                "eta": [0.05, 0.1],
                "w": [3, 6, 9],
            },
        )
    raise ValueError(f"unknown model family '{family}'")
