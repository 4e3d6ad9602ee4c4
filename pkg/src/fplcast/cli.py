"""Command-line pipeline: ingest, synth, split, train, search, evaluate,
rank, explain.

Commands communicate only through files. Data outputs are byte-identical
across reruns with the same inputs and seed; wall-clock timestamps go to
a sidecar run.log, never into data files.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import cnn as cnn_mod
from . import serialize as ser
from .cnn import TrainConfig
from .dataset import (
    FeatureTier,
    PlayerSeries,
    SplitAssignment,
    assign_splits,
    build_series,
    build_windows,
    generate_synthetic_season,
    sliding_average,
)
from .evaluation import (
    EvalReport,
    average_ranks,
    export_predictions,
    extreme_examples,
    mse,
    spearman_by_gameweek,
    spearman_tied,
)
from .gbm import (
    FeatureBudgetError,
    GbmHyperparams,
    predict_gbm_batch,
    shapley_values,
    split_importance,
)
from .harness import (
    CvConfig,
    GridSpec,
    cross_validate,
    default_grid,
    derive_seed,
    run_grid,
    select_final,
    sliding_design,
    top_k_summary,
    train_family,
    windowed_batch,
)
from .ingest import (
    Position,
    RowParseError,
    SchemaError,
    TeamLookupError,
    canonicalize_name,
    drop_benched,
    fuzzy_match,
    parse_gameweek_csv,
    parse_strengths_csv,
)
from .ridge import export_coefficients, predict_ridge_batch


class CliError(Exception):
    """Failure with a machine-parsable category for the exit message."""

    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


# Config keys and their defaults. Defaults mirror the module-level
# defaults exactly (training ones are pulled from the dataclasses).
def default_config() -> dict:
    tc = TrainConfig()
    hp = GbmHyperparams()
    return {
        "seed": 0,
        "difficulty_sign": "opponent_minus_own",
        "fuzzy_threshold": 0.85,
        "w": 3,
        "tier": "ptsonly",
        "fractions": [0.60, 0.25, 0.15],
        "n_bins": 4,
        "strat_on": "avg_score",
        "ridge_lambda": 1.0,
        "gbm_n_trees": hp.n_trees,
        "gbm_max_depth": hp.max_depth,
        "gbm_lambda_l2": hp.lambda_l2,
        "gbm_num_leaves": hp.num_leaves,
        "gbm_min_data_in_leaf": hp.min_data_in_leaf,
        "gbm_eta": hp.eta,
        "cnn_kernel": 1,
        "cnn_filters": 64,
        "cnn_hidden": 64,
        "cnn_activation": "relu",
        "cnn_lambda1": tc.lambda1,
        "cnn_lambda2": tc.lambda2,
        "epochs": tc.epochs,
        "learning_rate": tc.learning_rate,
        "batch_size": tc.batch_size,
        "early_stop_tolerance": tc.early_stop_tolerance,
        "patience": tc.patience,
        "shapley_background": 100,
        "extreme_k": 2,
        "cv_k": 5,
        "cv_bins": 4,
        "grid_workers": 1,
        "top_k": 10,
        "grid": None,
    }


def load_config(path: str | None, seed_override: int | None) -> dict:
    config = default_config()
    if path is not None:
        try:
            user = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise CliError("io", f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise CliError("config", f"config is not valid JSON: {exc}") from None
        for key, value in user.items():
            if key not in config:
                raise CliError("config", f"unknown config key '{key}'")
            config[key] = value
    if seed_override is not None:
        config["seed"] = seed_override
    return config


def _positions(flag: str) -> list[Position]:
    if flag == "all":
        return Position.ordered()
    return [Position(flag)]


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="\n")


def _log(out: Path, message: str):
    stamp = time.strftime("%Y-%m-%dT%H:%M:%S")
    with open(out / "run.log", "a", encoding="utf-8") as fh:
        fh.write(f"{stamp} {message}\n")


def _read_cleaned(paths: list[str]):
    rows = []
    for path in paths:
        try:
            rows.extend(ser.read_cleaned_csv(Path(path).read_text(encoding="utf-8")))
        except FileNotFoundError:
            raise CliError("io", f"cleaned file not found: {path}") from None
    if not rows:
        raise CliError("data", "no cleaned rows found")
    return rows


def _read_strengths(path: str):
    try:
        return parse_strengths_csv(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise CliError("io", f"strengths file not found: {path}") from None


def _read_splits(path: str) -> SplitAssignment:
    try:
        return ser.read_splits(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise CliError("io", f"splits file not found: {path}") from None


def _flip_flag(config) -> bool:
    sign = config["difficulty_sign"]
    if sign == "opponent_minus_own":
        return False
    if sign == "own_minus_opponent":
        return True
    raise CliError("config", f"unknown difficulty_sign '{sign}'")


def _flip_difficulty(examples, config):
    if _flip_flag(config):
        for ex in examples:
            ex.d = -ex.d
    return examples


def _series_for_position(rows, position: Position) -> list[PlayerSeries]:
    series = [s for s in build_series(rows) if s.key.position == position]
    if not series:
        raise CliError("data", f"no players with position {position.value}")
    return series


def _family_config(family: str, config: dict) -> dict:
    base = {"w": config["w"], "tier": config["tier"]}
    if family == "ridge":
        base["lambda"] = config["ridge_lambda"]
    elif family == "gbm":
        base.update(
            n_trees=config["gbm_n_trees"],
            max_depth=config["gbm_max_depth"],
            lambda_l2=config["gbm_lambda_l2"],
            num_leaves=config["gbm_num_leaves"],
            min_data_in_leaf=config["gbm_min_data_in_leaf"],
            eta=config["gbm_eta"],
        )
    elif family == "cnn":
        base.update(
            k=config["cnn_kernel"],
            filters=config["cnn_filters"],
            hidden=config["cnn_hidden"],
            activation=config["cnn_activation"],
            lambda1=config["cnn_lambda1"],
            lambda2=config["cnn_lambda2"],
            epochs=config["epochs"],
            learning_rate=config["learning_rate"],
            batch_size=config["batch_size"],
            early_stop_tolerance=config["early_stop_tolerance"],
            patience=config["patience"],
        )
    else:
        raise CliError("usage", f"unknown model family '{family}'")
    return base


# ---------------------------------------------------------------------------
# Commands


def cmd_ingest(args, config) -> int:
    out = _out_dir(args)
    strengths = _read_strengths(args.strengths)
    threshold = float(config["fuzzy_threshold"])

    all_rows = []
    read_counts = []
    for raw_item in args.raw:
        season, sep, path = raw_item.partition("=")
        if not sep:
            raise CliError("usage", "--raw items must look like SEASON=PATH")
        try:
            text = Path(path).read_text(encoding="utf-8")
        except FileNotFoundError:
            raise CliError("io", f"raw file not found: {path}") from None
        rows = parse_gameweek_csv(text, season)
        read_counts.append((path, len(rows)))
        all_rows.extend(rows)

    # Canonicalize and merge near-duplicate spellings, per position.
    registry: dict[Position, list[str]] = {p: [] for p in Position}
    resolutions = []
    for row in all_rows:
        canon = canonicalize_name(row.player_name)
        known = registry[row.position]
        if canon in known:
            row.player_name = canon
            continue
        if known:
            match = fuzzy_match(canon, known, threshold)
            if match is not None:
                # Any mapping between distinct spellings is a resolution,
                # including score-1.0 token reorderings.
                row.player_name = match[0]
                resolutions.append((canon, match[0], match[1]))
                continue
        known.append(canon)
        row.player_name = canon

    kept = drop_benched(all_rows)
    dropped = len(all_rows) - len(kept)

    # Every (season, team) pair must have a strength rating.
    for row in kept:
        if row.season not in strengths:
            raise TeamLookupError(f"no strength table for season '{row.season}'")
        strengths[row.season].strength(row.team)
        strengths[row.season].strength(row.opponent)

    per_position = {p: [r for r in kept if r.position == p] for p in Position.ordered()}
    for position, rows in per_position.items():
        _write(out / f"cleaned_{position.value}.csv", ser.write_cleaned_csv(rows))

    report = [
        "ingest report",
        *[f"read {count} rows from {path}" for path, count in read_counts],
        f"dropped: {dropped} benched appearances",
        *[
            f"kept {len(rows)} rows for {position.value}"
            for position, rows in per_position.items()
        ],
        f"fuzzy resolutions: {len(resolutions)}",
        *[
            f'  "{query}" -> "{target}" (score {ser.fmt_num(score)})'
            for query, target, score in resolutions
        ],
    ]
    _write(out / "ingest_report.txt", "\n".join(report) + "\n")
    _log(out, f"ingest raw={args.raw}")
    print(f"ingested {len(kept)} rows ({dropped} benched dropped) -> {out}")
    return 0


def cmd_synth(args, config) -> int:
    out = _out_dir(args)
    rows, strengths = generate_synthetic_season(
        seed=config["seed"], n_players=args.players, n_weeks=args.weeks
    )
    header = (
        "name,position,GW,team,opponent_team,minutes,total_points,goals_scored,"
        "assists,clean_sheets,goals_conceded,saves,bps,bonus,yellow_cards,"
        "red_cards,own_goals,penalties_saved,penalties_missed,influence,"
        "creativity,threat,ict_index,was_home"
    )
    lines = [header]
    for r in rows:
        lines.append(
            ser.csv_line(
                [
                    r.player_name,
                    r.position.value,
                    r.gameweek,
                    r.team,
                    r.opponent,
                    r.minutes,
                    r.total_points,
                    r.goals_scored,
                    r.assists,
                    r.clean_sheets,
                    r.goals_conceded,
                    r.saves,
                    r.bps,
                    r.bonus,
                    r.yellow_cards,
                    r.red_cards,
                    r.own_goals,
                    r.penalties_saved,
                    r.penalties_missed,
                    r.influence,
                    r.creativity,
                    r.threat,
                    r.ict_index,
                    r.was_home,
                ]
            )
        )
    _write(out / "synthetic_gameweeks.csv", "\n".join(lines) + "\n")
    strength_lines = ["season,team,strength"]
    for team in sorted(strengths.entries):
        strength_lines.append(
            ser.csv_line([strengths.season, team, strengths.entries[team]])
        )
    _write(out / "synthetic_strengths.csv", "\n".join(strength_lines) + "\n")
    _log(out, f"synth players={args.players} weeks={args.weeks} seed={config['seed']}")
    print(f"wrote {len(rows)} synthetic rows -> {out}")
    return 0


def cmd_split(args, config) -> int:
    out = _out_dir(args)
    rows = _read_cleaned(args.cleaned)
    fractions = tuple(config["fractions"])
    merged: dict = {}
    for position in Position.ordered():
        series = [s for s in build_series(rows) if s.key.position == position]
        if not series:
            continue
        part = assign_splits(
            series,
            fractions=fractions,
            n_bins=config["n_bins"],
            strat_on=config["strat_on"],
            seed=config["seed"],
        )
        merged.update(part.assignments)
    if not merged:
        raise CliError("data", "no players found in cleaned files")
    splits = SplitAssignment(
        assignments=merged,
        fractions=fractions,
        n_bins=config["n_bins"],
        strat_on=config["strat_on"],
        seed=config["seed"],
    )
    _write(out / "splits.csv", ser.write_splits(splits))
    _log(out, f"split players={len(merged)} seed={config['seed']}")
    print(f"assigned {len(merged)} players -> {out / 'splits.csv'}")
    return 0


def _split_examples(series, strengths, splits, split, w, tier, config):
    examples = []
    for s in series:
        if splits.assignments.get(s.key) == split:
            examples.extend(build_windows(s, w, tier, strengths))
    return _flip_difficulty(examples, config)


def _eval_report(examples, predictions, position, split, model_id) -> EvalReport:
    y = [float(e.y) for e in examples]
    return EvalReport(
        position=position,
        split=split,
        n=len(examples),
        mse=mse(y, predictions),
        spearman=spearman_tied(y, predictions) if len(y) >= 2 else None,
        model_id=model_id,
    )


def _predict_fitted(fitted, examples):
    if fitted.family == "ridge":
        A, _ = sliding_design(examples, fitted.scaler)
        return predict_ridge_batch(fitted.model, A)
    if fitted.family == "gbm":
        A, _ = sliding_design(examples)
        return predict_gbm_batch(fitted.model, A)
    batch = windowed_batch(examples, fitted.scaler)
    pred, _ = cnn_mod.forward_batch(fitted.model, batch.X, batch.d)
    return pred


def cmd_train(args, config) -> int:
    out = _out_dir(args)
    rows = _read_cleaned(args.cleaned)
    strengths = _read_strengths(args.strengths)
    splits = _read_splits(args.splits)
    family = args.family
    w = int(config["w"])
    tier = FeatureTier(config["tier"])
    family_config = _family_config(family, config)

    reports = []
    for position in _positions(args.position):
        series = _series_for_position(rows, position)
        train_ex = _split_examples(series, strengths, splits, "train", w, tier, config)
        val_ex = _split_examples(
            series, strengths, splits, "validation", w, tier, config
        )
        if not train_ex or not val_ex:
            raise CliError(
                "data", f"position {position.value} has an empty train or val split"
            )
        seed = derive_seed(config["seed"], family_config)
        fitted, train_err, val_err = train_family(
            family, family_config, train_ex, val_ex, seed
        )
        ctx = ser.ModelContext(
            w=w, tier=tier.value, position=position.value, scaler=fitted.scaler
        )
        model_path = out / f"model_{family}_{position.value}.txt"
        if family == "ridge":
            _write(model_path, ser.write_ridge(fitted.model, ctx))
        elif family == "gbm":
            _write(model_path, ser.write_gbm(fitted.model, ctx))
        else:
            _write(model_path, ser.write_cnn(fitted.model, ctx))
            _write(
                out / f"learning_curve_{position.value}.csv",
                ser.write_learning_curve(fitted.extras["curve"]),
            )

        # One dataset file per (position, representation), in the form the
        # family consumed: window tensors for the cnn, window means for the
        # baselines. Test examples are never materialized here.
        representation = "windowed" if family == "cnn" else "sliding"
        if representation == "sliding":
            examples = [sliding_average(e) for e in train_ex + val_ex]
        else:
            examples = train_ex + val_ex
        header = ser.DatasetHeader(
            representation=representation,
            position=position.value,
            w=w,
            tier=tier.value,
            seed=config["seed"],
            fractions=tuple(config["fractions"]),
            features=tier.columns(),
            scaler_mean=fitted.scaler.mean if fitted.scaler else None,
            scaler_std=fitted.scaler.std if fitted.scaler else None,
        )
        _write(
            out / f"dataset_{position.value}_{representation}.txt",
            ser.write_dataset(header, examples),
        )
        model_id = f"{family}_{position.value}"
        reports.append(
            _eval_report(
                train_ex, _predict_fitted(fitted, train_ex), position, "train", model_id
            )
        )
        reports.append(
            _eval_report(
                val_ex, _predict_fitted(fitted, val_ex), position, "validation", model_id
            )
        )
        print(
            f"{model_id}: train mse {train_err:.4f}, val mse {val_err:.4f}"
        )
    _write(out / f"report_{family}.csv", ser.write_reports_csv(reports))
    _log(out, f"train family={family} seed={config['seed']}")
    return 0


def _load_model(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise CliError("io", f"model file not found: {path}") from None
    first = text.splitlines()[0] if text else ""
    if first == ser.MAGIC_RIDGE:
        model, ctx = ser.read_ridge(text)
        return "ridge", model, ctx
    if first == ser.MAGIC_GBM:
        model, ctx = ser.read_gbm(text)
        return "gbm", model, ctx
    if first == ser.MAGIC_CNN:
        model, ctx = ser.read_cnn(text)
        return "cnn", model, ctx
    raise CliError("format", f"unrecognized model file: {path}")


def _predict_loaded(family, model, ctx, examples):
    if family == "ridge":
        A, _ = sliding_design(examples, ctx.scaler)
        return predict_ridge_batch(model, A)
    if family == "gbm":
        A, _ = sliding_design(examples)
        return predict_gbm_batch(model, A)
    batch = windowed_batch(examples, ctx.scaler)
    pred, _ = cnn_mod.forward_batch(model, batch.X, batch.d)
    return pred


def cmd_evaluate(args, config) -> int:
    out = _out_dir(args)
    family, model, ctx = _load_model(args.model)
    rows = _read_cleaned(args.cleaned)
    strengths = _read_strengths(args.strengths)
    splits = _read_splits(args.splits)
    position = Position(ctx.position)
    series = _series_for_position(rows, position)
    tier = FeatureTier(ctx.tier)
    examples = _split_examples(
        series, strengths, splits, args.split, ctx.w, tier, config
    )
    if not examples:
        raise CliError("data", f"no {args.split} examples for {position.value}")
    predictions = _predict_loaded(family, model, ctx, examples)
    model_id = f"{family}_{position.value}"
    report = _eval_report(examples, predictions, position, args.split, model_id)
    if args.per_gameweek:
        gw = [e.target_gameweek for e in examples]
        report.spearman = spearman_by_gameweek(
            gw, [float(e.y) for e in examples], predictions
        )
    _write(
        out / f"eval_{model_id}_{args.split}.csv", ser.write_reports_csv([report])
    )
    _write(
        out / f"predictions_{model_id}_{args.split}.csv",
        ser.write_predictions_csv(export_predictions(examples, predictions)),
    )
    k = min(int(config["extreme_k"]), len(examples))
    extremes = extreme_examples(examples, predictions, k)
    lines = ["kind,true,predicted,squared_error,d,points_history"]
    for kind, entries in (("worst", extremes.worst), ("best", extremes.best)):
        for y, yhat, err, d, history in entries:
            lines.append(
                ser.csv_line(
                    [kind, y, yhat, err, d, " ".join(ser.fmt_num(p) for p in history)]
                )
            )
    _write(out / f"extremes_{model_id}_{args.split}.csv", "\n".join(lines) + "\n")
    rho = "null" if report.spearman is None else f"{report.spearman:.4f}"
    print(
        f"{model_id} on {args.split}: n={report.n} mse={report.mse:.4f} "
        f"spearman={rho}"
    )
    _log(out, f"evaluate model={args.model} split={args.split}")
    return 0


def cmd_gridsearch(args, config) -> int:
    out = _out_dir(args)
    rows = _read_cleaned(args.cleaned)
    strengths = _read_strengths(args.strengths)
    splits = _read_splits(args.splits)
    family = args.family
    if config["grid"] is not None:
        axes = {k: list(v) for k, v in config["grid"].items()}
        grid = GridSpec(family=family, axes=axes)
    else:
        grid = default_grid(family)

    summary = {}
    for position in _positions(args.position):
        series = _series_for_position(rows, position)
        results = run_grid(
            grid,
            series,
            strengths,
            splits,
            seed=config["seed"],
            position=position,
            workers=int(config["grid_workers"]),
            flip_difficulty=_flip_flag(config),
        )
        axis_names = sorted({k for r in results for k in r.config})
        lines = [
            ",".join(
                [f'"{n}"' for n in axis_names]
                + ['"train_mse"', '"val_mse"', '"seed"', '"status"', '"reason"']
            )
        ]
        for r in results:
            cells = [r.config.get(n, "") for n in axis_names]
            cells += [
                r.train_mse if r.train_mse is not None else "",
                r.val_mse if r.val_mse is not None else "",
                r.seed,
                "ok" if r.error is None else "failed",
                r.error or "",
            ]
            lines.append(ser.csv_line([c if c is not None else "" for c in cells]))
        _write(out / f"trials_{family}_{position.value}.csv", "\n".join(lines) + "\n")

        succeeded = [r for r in results if r.error is None]
        if not succeeded:
            raise CliError("data", f"every {position.value} trial failed")
        best = succeeded[0]
        entry = {
            "config": best.config,
            "val_mse": best.val_mse,
            "train_mse": best.train_mse,
            "trials": len(results),
            "failed": len(results) - len(succeeded),
        }
        k = min(int(config["top_k"]), len(succeeded))
        mean_k, max_k = top_k_summary(results, k)
        entry["top_k"] = {"k": k, "mean_val_mse": mean_k, "max_val_mse": max_k}
        if args.finalize:
            final, _fitted = select_final(
                results, series, strengths, splits,
                flip_difficulty=_flip_flag(config),
            )
            entry["test_mse"] = final.test_mse
        summary[position.value] = entry
        print(
            f"{family}_{position.value}: best val mse {best.val_mse:.4f} "
            f"({len(results)} trials, {entry['failed']} failed)"
        )
    _write(
        out / f"summary_{family}.json",
        json.dumps(summary, indent=2, sort_keys=True) + "\n",
    )
    _log(out, f"gridsearch family={family} seed={config['seed']}")
    return 0


def cmd_cv(args, config) -> int:
    out = _out_dir(args)
    rows = _read_cleaned(args.cleaned)
    strengths = _read_strengths(args.strengths)
    family = args.family
    family_config = _family_config(family, config)
    cv = CvConfig(
        k=int(config["cv_k"]),
        n_bins=int(config["cv_bins"]),
        strat_on=config["strat_on"],
        seed=config["seed"],
    )
    lines = ["family,position,mean_train_mse,mean_val_mse"]
    for position in _positions(args.position):
        series = _series_for_position(rows, position)
        train_err, val_err = cross_validate(
            family, family_config, series, strengths, cv,
            flip_difficulty=_flip_flag(config),
        )
        lines.append(ser.csv_line([family, position.value, train_err, val_err]))
        print(
            f"{family}_{position.value} cv: train mse {train_err:.4f}, "
            f"val mse {val_err:.4f}"
        )
    _write(out / f"cv_{family}.csv", "\n".join(lines) + "\n")
    _log(out, f"cv family={family} k={cv.k}")
    return 0


def cmd_rank(args, config) -> int:
    out = _out_dir(args)
    family, model, ctx = _load_model(args.model)
    rows = _read_cleaned(args.cleaned)
    strengths = _read_strengths(args.strengths)
    position = Position(ctx.position)
    seasons = sorted({r.season for r in rows})
    season = args.season or seasons[-1]
    rows = [r for r in rows if r.season == season]
    series = _series_for_position(rows, position)
    tier = FeatureTier(ctx.tier)

    candidates = []
    for s in series:
        for ex in build_windows(s, ctx.w, tier, strengths):
            if ex.target_gameweek == args.gameweek:
                candidates.append(ex)
    if not candidates:
        raise CliError(
            "data",
            f"no rankable {position.value} players for gameweek {args.gameweek}",
        )
    candidates = _flip_difficulty(candidates, config)
    predictions = _predict_loaded(family, model, ctx, candidates)
    order = sorted(
        range(len(candidates)),
        key=lambda i: (-predictions[i], candidates[i].player.canonical_name),
    )
    tied = average_ranks(-np.asarray(predictions))
    lines = ["rank,player,predicted,tied_rank"]
    for rank_pos, i in enumerate(order, start=1):
        lines.append(
            ser.csv_line(
                [
                    rank_pos,
                    candidates[i].player.canonical_name,
                    float(predictions[i]),
                    float(tied[i]),
                ]
            )
        )
    path = out / f"rank_{position.value}_gw{args.gameweek}.csv"
    _write(path, "\n".join(lines) + "\n")
    print(f"ranked {len(candidates)} players -> {path}")
    _log(out, f"rank model={args.model} gameweek={args.gameweek}")
    return 0


def cmd_explain(args, config) -> int:
    out = _out_dir(args)
    loaded = [_load_model(path) for path in args.model]
    family = loaded[0][0]
    if any(f != family for f, _, _ in loaded):
        raise CliError("usage", "all --model files must share one family")
    kind = args.kind or {"ridge": "coefficients", "gbm": "shapley", "cnn": "filter"}[
        family
    ]
    valid = {"ridge": "coefficients", "gbm": "shapley", "cnn": "filter"}
    if valid[family] != kind:
        raise CliError(
            "usage", f"family {family} does not support explanation '{kind}'"
        )

    if kind == "coefficients":
        models = {Position(ctx.position): model for _, model, ctx in loaded}
        positions, features, coef, intercepts = export_coefficients(models)
        _write(
            out / "coefficients.csv",
            ser.write_coefficient_table(positions, features, coef, intercepts),
        )
        print(f"wrote coefficients for {len(positions)} positions")
    elif kind == "filter":
        _, model, ctx = loaded[0]
        mean_filter = mean_normalized_filter_csv(model, ctx)
        _write(out / f"filters_{ctx.position}.csv", mean_filter)
        print(f"wrote mean filter ({model.kernel}x{model.n_features})")
    else:
        _, model, ctx = loaded[0]
        rows = _read_cleaned(args.cleaned)
        strengths = _read_strengths(args.strengths)
        splits = _read_splits(args.splits)
        position = Position(ctx.position)
        series = _series_for_position(rows, position)
        tier = FeatureTier(ctx.tier)
        explain_ex = _split_examples(
            series, strengths, splits, args.split, ctx.w, tier, config
        )
        train_ex = _split_examples(
            series, strengths, splits, "train", ctx.w, tier, config
        )
        if not explain_ex:
            raise CliError("data", f"no {args.split} examples to explain")
        if args.example_index >= len(explain_ex):
            raise CliError(
                "usage",
                f"example index {args.example_index} out of range "
                f"({len(explain_ex)} available)",
            )
        A_train, _ = sliding_design(train_ex)
        rng = np.random.default_rng(config["seed"])
        n_background = min(int(config["shapley_background"]), A_train.shape[0])
        background = A_train[
            rng.choice(A_train.shape[0], size=n_background, replace=False)
        ]
        A_explain, _ = sliding_design([explain_ex[args.example_index]])
        result = shapley_values(model, A_explain[0], background)
        names = model.feature_names or [f"x{j}" for j in range(model.n_features)]
        lines = ["feature,value,phi"]
        for name, value, phi in zip(names, A_explain[0], result.phi):
            lines.append(ser.csv_line([name, float(value), float(phi)]))
        lines.append(ser.csv_line(["__base_value__", "", result.base_value]))
        lines.append(
            ser.csv_line(
                ["__prediction__", "", result.base_value + float(result.phi.sum())]
            )
        )
        _write(out / f"shapley_{position.value}.csv", "\n".join(lines) + "\n")
        imp = split_importance(model)
        imp_lines = ["feature,splits,percent"]
        for name, count, pct in zip(names, imp.counts, imp.percentages):
            imp_lines.append(ser.csv_line([name, int(count), float(pct)]))
        _write(
            out / f"split_importance_{position.value}.csv",
            "\n".join(imp_lines) + "\n",
        )
        print(f"wrote shapley attribution for example {args.example_index}")
    _log(out, f"explain kind={kind}")
    return 0


def mean_normalized_filter_csv(model, ctx) -> str:
    mean_filter = cnn_mod.mean_normalized_filter(model)
    tier = FeatureTier(ctx.tier)
    lines = [",".join(['"window_row"'] + [f'"{c}"' for c in tier.columns()])]
    for r in range(mean_filter.shape[0]):
        lines.append(ser.csv_line([r] + [float(v) for v in mean_filter[r]]))
    return "\n".join(lines) + "\n"


def cmd_filters(args, config) -> int:
    out = _out_dir(args)
    family, model, ctx = _load_model(args.model)
    if family != "cnn":
        raise CliError("usage", f"filters requires a cnn model, got {family}")
    _write(out / f"filters_{ctx.position}.csv", mean_normalized_filter_csv(model, ctx))
    print(f"wrote mean filter for {ctx.position}")
    _log(out, f"filters model={args.model}")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fplcast",
        description="Forecast fantasy soccer scores from recent gameweeks.",
    )
    parser.add_argument("--config", help="JSON config file", default=None)
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument(
        "--position",
        choices=["GK", "DEF", "MID", "FWD", "all"],
        default="all",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse, clean, and merge raw gameweek CSVs")
    p.add_argument("--raw", nargs="+", required=True, metavar="SEASON=PATH")
    p.add_argument("--strengths", required=True)

    p = sub.add_parser("synth", help="generate a deterministic synthetic season")
    p.add_argument("--players", type=int, default=200)
    p.add_argument("--weeks", type=int, default=38)

    p = sub.add_parser("split", help="assign players to train/validation/test")
    p.add_argument("--cleaned", nargs="+", required=True)

    p = sub.add_parser("train", help="train one family per position")
    p.add_argument("--cleaned", nargs="+", required=True)
    p.add_argument("--strengths", required=True)
    p.add_argument("--splits", required=True)
    p.add_argument("--family", choices=["ridge", "gbm", "cnn"], required=True)

    p = sub.add_parser("gridsearch", help="grid search over one family")
    p.add_argument("--cleaned", nargs="+", required=True)
    p.add_argument("--strengths", required=True)
    p.add_argument("--splits", required=True)
    p.add_argument("--family", choices=["ridge", "gbm", "cnn"], required=True)
    p.add_argument(
        "--finalize",
        action="store_true",
        help="retrain the best configuration and score the holdout once",
    )

    p = sub.add_parser("cv", help="stratified k-fold cross-validation")
    p.add_argument("--cleaned", nargs="+", required=True)
    p.add_argument("--strengths", required=True)
    p.add_argument("--family", choices=["ridge", "gbm", "cnn"], required=True)

    p = sub.add_parser("evaluate", help="score a saved model on one split")
    p.add_argument("--model", required=True)
    p.add_argument("--cleaned", nargs="+", required=True)
    p.add_argument("--strengths", required=True)
    p.add_argument("--splits", required=True)
    p.add_argument("--split", choices=["train", "validation", "test"], default="test")
    p.add_argument(
        "--per-gameweek",
        action="store_true",
        help="average Spearman over gameweeks instead of pooling",
    )

    p = sub.add_parser("rank", help="rank players by predicted points")
    p.add_argument("--model", required=True)
    p.add_argument("--cleaned", nargs="+", required=True)
    p.add_argument("--strengths", required=True)
    p.add_argument("--gameweek", type=int, required=True)
    p.add_argument("--season", default=None)

    p = sub.add_parser("explain", help="model attribution exports")
    p.add_argument("--model", nargs="+", required=True)
    p.add_argument(
        "--kind", choices=["coefficients", "shapley", "filter"], default=None
    )
    p.add_argument("--cleaned", nargs="+", default=[])
    p.add_argument("--strengths", default=None)
    p.add_argument("--splits", default=None)
    p.add_argument("--split", choices=["train", "validation", "test"], default="test")
    p.add_argument("--example-index", type=int, default=0)

    p = sub.add_parser("filters", help="mean normalized conv filter of a cnn model")
    p.add_argument("--model", required=True)

    return parser


_COMMANDS = {
    "ingest": cmd_ingest,
    "synth": cmd_synth,
    "split": cmd_split,
    "train": cmd_train,
    "gridsearch": cmd_gridsearch,
    "cv": cmd_cv,
    "evaluate": cmd_evaluate,
    "rank": cmd_rank,
    "explain": cmd_explain,
    "filters": cmd_filters,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config, args.seed)
        return _COMMANDS[args.command](args, config)
    except CliError as exc:
        print(f"error:{exc.category}: {exc}", file=sys.stderr)
        return 1
    except SchemaError as exc:
        print(f"error:schema: {exc}", file=sys.stderr)
        return 1
    except RowParseError as exc:
        print(f"error:parse: {exc}", file=sys.stderr)
        return 1
    except TeamLookupError as exc:
        print(f"error:lookup: {exc.args[0]}", file=sys.stderr)
        return 1
    except FeatureBudgetError as exc:
        print(f"error:budget: {exc}", file=sys.stderr)
        return 1
    except ser.FormatError as exc:
        print(f"error:format: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError) as exc:
        print(f"error:data: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
