"""Plain-text file formats: datasets, splits, models, and report tables.

Everything here is line-oriented UTF-8. Numeric cells are rendered with
17 significant digits so reruns are byte-identical and values round-trip
exactly; text cells in CSV outputs are always quoted.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .cnn import PARAM_NAMES, CnnModel, LearningCurve
from .dataset import (
    ScalerParams,
    SlidingAverageExample,
    SplitAssignment,
    WindowedExample,
)
from .evaluation import EvalReport
from .gbm import GbmHyperparams, GbmModel, RegressionTree, TreeNode
from .ingest import CanonicalPlayerKey, Position, RawGameweekRow
from .ridge import RidgeModel

MAGIC_DATASET = "# fplcast-dataset v1"
MAGIC_SPLITS = "# fplcast-splits v1"
MAGIC_RIDGE = "fplcast-ridge v1"
MAGIC_GBM = "fplcast-gbm v1"
MAGIC_CNN = "fplcast-cnn v1"


class FormatError(ValueError):
    """A serialized artifact does not match its expected layout."""


def fmt_num(x) -> str:
    """Fixed 17-significant-digit rendering for floats; plain ints."""
    if isinstance(x, (bool, np.bool_)):
        return "True" if x else "False"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def csv_line(cells) -> str:
    """One CSV line: text quoted (with doubling), numbers via fmt_num."""
    rendered = []
    for cell in cells:
        if isinstance(cell, str):
            rendered.append('"' + cell.replace('"', '""') + '"')
        else:
            rendered.append(fmt_num(cell))
    return ",".join(rendered)


def _parse_csv_line(line: str) -> list[str]:
    return next(csv.reader(io.StringIO(line)))


# ---------------------------------------------------------------------------
# Cleaned gameweek rows (ingest output; raw schema plus season and order)

_CLEANED_COLUMNS = [
    "season",
    "name",
    "position",
    "GW",
    "team",
    "opponent_team",
    "kickoff_order",
    "minutes",
    "total_points",
    "goals_scored",
    "assists",
    "clean_sheets",
    "goals_conceded",
    "saves",
    "bps",
    "bonus",
    "yellow_cards",
    "red_cards",
    "own_goals",
    "penalties_saved",
    "penalties_missed",
    "influence",
    "creativity",
    "threat",
    "ict_index",
    "was_home",
]


def write_cleaned_csv(rows: list[RawGameweekRow]) -> str:
    lines = [",".join(_CLEANED_COLUMNS)]
    for r in rows:
        lines.append(
            csv_line(
                [
                    r.season,
                    r.player_name,
                    r.position.value,
                    r.gameweek,
                    r.team,
                    r.opponent,
                    r.kickoff_order,
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
    return "\n".join(lines) + "\n"


def read_cleaned_csv(text: str) -> list[RawGameweekRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != _CLEANED_COLUMNS:
        raise FormatError("not a cleaned gameweek file (unexpected header)")
    rows = []
    for rec in reader:
        if not rec:
            continue
        by = dict(zip(_CLEANED_COLUMNS, rec))
        rows.append(
            RawGameweekRow(
                player_name=by["name"],
                position=Position(by["position"]),
                season=by["season"],
                gameweek=int(by["GW"]),
                team=by["team"],
                opponent=by["opponent_team"],
                kickoff_order=int(by["kickoff_order"]),
                minutes=int(by["minutes"]),
                total_points=int(by["total_points"]),
                goals_scored=int(by["goals_scored"]),
                assists=int(by["assists"]),
                clean_sheets=int(by["clean_sheets"]),
                goals_conceded=int(by["goals_conceded"]),
                saves=int(by["saves"]),
                bps=int(by["bps"]),
                bonus=int(by["bonus"]),
                yellow_cards=int(by["yellow_cards"]),
                red_cards=int(by["red_cards"]),
                own_goals=int(by["own_goals"]),
                penalties_saved=int(by["penalties_saved"]),
                penalties_missed=int(by["penalties_missed"]),
                influence=float(by["influence"]),
                creativity=float(by["creativity"]),
                threat=float(by["threat"]),
                ict_index=float(by["ict_index"]),
                was_home=by["was_home"] == "True",
            )
        )
    return rows


# ---------------------------------------------------------------------------
# Split assignments


def write_splits(splits: SplitAssignment) -> str:
    lines = [
        MAGIC_SPLITS,
        f"# seed {splits.seed}",
        "# fractions " + " ".join(fmt_num(f) for f in splits.fractions),
        f"# n_bins {splits.n_bins}",
        f"# strat_on {splits.strat_on}",
        "player,position,split",
    ]
    for key in sorted(
        splits.assignments, key=lambda k: (k.canonical_name, k.position.value)
    ):
        lines.append(
            csv_line([key.canonical_name, key.position.value, splits.assignments[key]])
        )
    return "\n".join(lines) + "\n"


def read_splits(text: str) -> SplitAssignment:
    lines = text.splitlines()
    if not lines or lines[0] != MAGIC_SPLITS:
        raise FormatError("not a splits file")
    meta = {}
    body_start = 0
    for i, line in enumerate(lines):
        if line.startswith("# ") and i > 0:
            key, _, value = line[2:].partition(" ")
            meta[key] = value
        elif not line.startswith("#"):
            body_start = i
            break
    assignments = {}
    for line in lines[body_start + 1 :]:
        if not line:
            continue
        name, pos, split = _parse_csv_line(line)
        assignments[CanonicalPlayerKey(name, Position(pos))] = split
    fr = tuple(float(v) for v in meta["fractions"].split())
    return SplitAssignment(
        assignments=assignments,
        fractions=fr,  # type: ignore[arg-type]
        n_bins=int(meta["n_bins"]),
        strat_on=meta["strat_on"],
        seed=int(meta["seed"]),
    )


# ---------------------------------------------------------------------------
# Example datasets (windowed and sliding-average)


@dataclass
class DatasetHeader:
    representation: str  # windowed | sliding
    position: str
    w: int
    tier: str
    seed: int
    fractions: tuple[float, float, float]
    features: list[str]
    scaler_mean: np.ndarray | None = None
    scaler_std: np.ndarray | None = None


def write_dataset(header: DatasetHeader, examples) -> str:
    f = len(header.features)
    lines = [
        MAGIC_DATASET,
        f"# representation {header.representation}",
        f"# position {header.position}",
        f"# w {header.w}",
        f"# tier {header.tier}",
        f"# seed {header.seed}",
        "# fractions " + " ".join(fmt_num(x) for x in header.fractions),
        "# features " + " ".join(header.features),
    ]
    if header.scaler_mean is not None:
        lines.append("# scaler_mean " + " ".join(fmt_num(x) for x in header.scaler_mean))
        lines.append("# scaler_std " + " ".join(fmt_num(x) for x in header.scaler_std))
    if header.representation == "windowed":
        feat_cols = [f"x{r}_{c}" for r in range(header.w) for c in range(f)]
    else:
        feat_cols = [f"x_{c}" for c in range(f)]
    lines.append(",".join(["player", "position", "target_gameweek", "d", "y"] + feat_cols))
    for ex in examples:
        values = ex.X.ravel() if header.representation == "windowed" else ex.x
        lines.append(
            csv_line(
                [
                    ex.player.canonical_name,
                    ex.position.value,
                    ex.target_gameweek,
                    ex.d,
                    ex.y,
                ]
                + [float(v) for v in values]
            )
        )
    return "\n".join(lines) + "\n"


def read_dataset(text: str) -> tuple[DatasetHeader, list]:
    lines = text.splitlines()
    if not lines or lines[0] != MAGIC_DATASET:
        raise FormatError("not a dataset file")
    meta: dict[str, str] = {}
    body_start = len(lines)
    for i, line in enumerate(lines[1:], start=1):
        if line.startswith("# "):
            key, _, value = line[2:].partition(" ")
            meta[key] = value
        else:
            body_start = i
            break
    header = DatasetHeader(
        representation=meta["representation"],
        position=meta["position"],
        w=int(meta["w"]),
        tier=meta["tier"],
        seed=int(meta["seed"]),
        fractions=tuple(float(v) for v in meta["fractions"].split()),  # type: ignore[arg-type]
        features=meta["features"].split(),
        scaler_mean=(
            np.array([float(v) for v in meta["scaler_mean"].split()])
            if "scaler_mean" in meta
            else None
        ),
        scaler_std=(
            np.array([float(v) for v in meta["scaler_std"].split()])
            if "scaler_std" in meta
            else None
        ),
    )
    n_features = len(header.features)
    examples = []
    for line in lines[body_start + 1 :]:
        if not line:
            continue
        cells = _parse_csv_line(line)
        player = CanonicalPlayerKey(cells[0], Position(cells[1]))
        target_gw, d, y = int(cells[2]), int(cells[3]), int(cells[4])
        values = np.array([float(v) for v in cells[5:]])
        if header.representation == "windowed":
            examples.append(
                WindowedExample(
                    X=values.reshape(header.w, n_features),
                    d=d,
                    y=y,
                    player=player,
                    position=player.position,
                    target_gameweek=target_gw,
                )
            )
        else:
            examples.append(
                SlidingAverageExample(
                    x=values,
                    d=d,
                    y=y,
                    player=player,
                    position=player.position,
                    target_gameweek=target_gw,
                )
            )
    return header, examples


# ---------------------------------------------------------------------------
# Model context: windowing and scaling needed to reuse a model on raw rows


@dataclass
class ModelContext:
    w: int
    tier: str
    position: str
    scaler: ScalerParams | None = None


def _context_lines(ctx: ModelContext) -> list[str]:
    lines = [f"w {ctx.w}", f"tier {ctx.tier}", f"position {ctx.position}"]
    if ctx.scaler is not None:
        lines.append("scaler_mean " + " ".join(fmt_num(v) for v in ctx.scaler.mean))
        lines.append("scaler_std " + " ".join(fmt_num(v) for v in ctx.scaler.std))
    return lines


def _parse_context(lines: list[str]) -> tuple[ModelContext, int]:
    """Parse context lines from the front of `lines`; returns consumed count."""
    fields: dict[str, str] = {}
    consumed = 0
    for line in lines:
        key, _, value = line.partition(" ")
        if key not in ("w", "tier", "position", "scaler_mean", "scaler_std"):
            break
        fields[key] = value
        consumed += 1
    scaler = None
    if "scaler_mean" in fields:
        scaler = ScalerParams(
            mean=np.array([float(v) for v in fields["scaler_mean"].split()]),
            std=np.array([float(v) for v in fields["scaler_std"].split()]),
        )
    ctx = ModelContext(
        w=int(fields["w"]),
        tier=fields["tier"],
        position=fields["position"],
        scaler=scaler,
    )
    return ctx, consumed


# ---------------------------------------------------------------------------
# Ridge model


def write_ridge(model: RidgeModel, ctx: ModelContext) -> str:
    lines = [MAGIC_RIDGE]
    lines.extend(_context_lines(ctx))
    lines.extend(
        [
            f"lambda {fmt_num(model.lam)}",
            f"intercept {fmt_num(model.intercept)}",
            f"n_features {len(model.feature_names)}",
        ]
    )
    for name, weight in zip(model.feature_names, model.weights):
        lines.append(f"feature\t{name}\t{fmt_num(weight)}")
    return "\n".join(lines) + "\n"


def read_ridge(text: str) -> tuple[RidgeModel, ModelContext]:
    lines = text.splitlines()
    if not lines or lines[0] != MAGIC_RIDGE:
        raise FormatError("not a ridge model file")
    ctx, consumed = _parse_context(lines[1:])
    rest = lines[1 + consumed :]
    lam = float(rest[0].split(" ", 1)[1])
    intercept = float(rest[1].split(" ", 1)[1])
    names, weights = [], []
    for line in rest[3:]:
        if not line:
            continue
        _, name, weight = line.split("\t")
        names.append(name)
        weights.append(float(weight))
    model = RidgeModel(
        weights=np.array(weights), intercept=intercept, lam=lam, feature_names=names
    )
    return model, ctx


# ---------------------------------------------------------------------------
# GBM model (pre-order node dump per tree)


def _dump_tree(tree: RegressionTree) -> list[str]:
    lines = [
        "gains " + " ".join(fmt_num(g) for g in tree.split_gains)
        if tree.split_gains
        else "gains"
    ]

    def rec(node_id: int):
        node = tree.nodes[node_id]
        if node.is_leaf:
            lines.append(f"L {fmt_num(node.value)} {node.n_samples}")
        else:
            lines.append(
                f"I {node.feature} {fmt_num(node.threshold)} {node.n_samples}"
            )
            rec(node.left)
            rec(node.right)

    rec(0)
    return lines


def _parse_tree(lines: list[str], start: int) -> tuple[RegressionTree, int]:
    gains_line = lines[start]
    if not gains_line.startswith("gains"):
        raise FormatError(f"expected gains line, got {gains_line!r}")
    gains = [float(v) for v in gains_line.split()[1:]]
    tree = RegressionTree(split_gains=gains)
    pos = start + 1

    def rec(depth: int) -> int:
        nonlocal pos
        parts = lines[pos].split()
        pos += 1
        node_id = len(tree.nodes)
        if parts[0] == "L":
            tree.nodes.append(
                TreeNode(value=float(parts[1]), n_samples=int(parts[2]), depth=depth)
            )
        elif parts[0] == "I":
            tree.nodes.append(
                TreeNode(
                    feature=int(parts[1]),
                    threshold=float(parts[2]),
                    n_samples=int(parts[3]),
                    depth=depth,
                )
            )
            tree.nodes[node_id].left = rec(depth + 1)
            tree.nodes[node_id].right = rec(depth + 1)
        else:
            raise FormatError(f"bad node line {lines[pos - 1]!r}")
        return node_id

    rec(0)
    return tree, pos


def write_gbm(model: GbmModel, ctx: ModelContext) -> str:
    hp = model.hyperparams
    lines = [MAGIC_GBM]
    lines.extend(_context_lines(ctx))
    lines += [
        f"base_score {fmt_num(model.base_score)}",
        f"eta {fmt_num(model.eta)}",
        f"n_features {model.n_features}",
        (
            f"hyperparams n_trees={hp.n_trees} max_depth={hp.max_depth}"
            f" lambda_l2={fmt_num(hp.lambda_l2)} num_leaves={hp.num_leaves}"
            f" min_data_in_leaf={hp.min_data_in_leaf} eta={fmt_num(hp.eta)}"
        ),
        "feature_names "
        + (" ".join(model.feature_names) if model.feature_names else "-"),
        f"n_trees {len(model.trees)}",
    ]
    for i, tree in enumerate(model.trees):
        lines.append(f"tree {i}")
        lines.extend(_dump_tree(tree))
    return "\n".join(lines) + "\n"


def read_gbm(text: str) -> tuple[GbmModel, ModelContext]:
    lines = [l for l in text.splitlines() if l]
    if not lines or lines[0] != MAGIC_GBM:
        raise FormatError("not a gbm model file")
    ctx, consumed = _parse_context(lines[1:])
    rest = lines[1 + consumed :]
    base = float(rest[0].split()[1])
    eta = float(rest[1].split()[1])
    n_features = int(rest[2].split()[1])
    hp_kv = dict(kv.split("=") for kv in rest[3].split()[1:])
    hp = GbmHyperparams(
        n_trees=int(hp_kv["n_trees"]),
        max_depth=int(hp_kv["max_depth"]),
        lambda_l2=float(hp_kv["lambda_l2"]),
        num_leaves=int(hp_kv["num_leaves"]),
        min_data_in_leaf=int(hp_kv["min_data_in_leaf"]),
        eta=float(hp_kv["eta"]),
    )
    names_cell = rest[4].split(" ", 1)[1]
    feature_names = None if names_cell == "-" else names_cell.split()
    n_trees = int(rest[5].split()[1])
    trees = []
    pos = 6
    for _ in range(n_trees):
        if not rest[pos].startswith("tree "):
            raise FormatError(f"expected tree marker at line {pos + 1}")
        tree, pos = _parse_tree(rest, pos + 1)
        trees.append(tree)
    model = GbmModel(
        base_score=base,
        trees=trees,
        eta=eta,
        hyperparams=hp,
        n_features=n_features,
        feature_names=feature_names,
    )
    return model, ctx


# ---------------------------------------------------------------------------
# CNN model (shapes header + row-major values)


def write_cnn(model: CnnModel, ctx: ModelContext) -> str:
    lines = [MAGIC_CNN]
    lines.extend(_context_lines(ctx))
    lines.append(f"activation {model.activation}")
    for name in PARAM_NAMES:
        p = getattr(model, name)
        lines.append(f"param {name} " + " ".join(str(s) for s in p.shape))
        lines.append(" ".join(fmt_num(v) for v in p.ravel()))
    return "\n".join(lines) + "\n"


def read_cnn(text: str) -> tuple[CnnModel, ModelContext]:
    lines = text.splitlines()
    if not lines or lines[0] != MAGIC_CNN:
        raise FormatError("not a cnn model file")
    ctx, consumed = _parse_context(lines[1:])
    lines = lines[1 + consumed :]
    activation = lines[0].split()[1]
    window = ctx.w
    params = {}
    i = 1
    while i < len(lines):
        if not lines[i]:
            i += 1
            continue
        parts = lines[i].split()
        if parts[0] != "param":
            raise FormatError(f"expected param header at line {i + 1}")
        name = parts[1]
        shape = tuple(int(s) for s in parts[2:])
        values = np.array([float(v) for v in lines[i + 1].split()])
        params[name] = values.reshape(shape)
        i += 2
    missing = set(PARAM_NAMES) - set(params)
    if missing:
        raise FormatError(f"missing parameters: {sorted(missing)}")
    return CnnModel(activation=activation, window=window, **params), ctx


# ---------------------------------------------------------------------------
# Report tables and exports


def write_learning_curve(curve: LearningCurve) -> str:
    lines = ["epoch,train_cost,train_mse,val_mse"]
    for epoch, (c, tm, vm) in enumerate(
        zip(curve.train_cost, curve.train_mse, curve.val_mse)
    ):
        lines.append(csv_line([epoch, c, tm, vm]))
    lines.append(csv_line(["best_epoch", curve.best_epoch, "", ""]))
    return "\n".join(lines) + "\n"


def write_reports_csv(reports: list[EvalReport]) -> str:
    lines = ["model,position,split,n,mse,spearman"]
    for r in reports:
        lines.append(
            csv_line(
                [
                    r.model_id,
                    r.position.value,
                    r.split,
                    r.n,
                    r.mse,
                    r.spearman if r.spearman is not None else "null",
                ]
            )
        )
    return "\n".join(lines) + "\n"


def write_mse_table(cells: dict[str, dict[str, float]], models: list[str]) -> str:
    """Positions-by-models MSE table with an AVG row (holdout layout)."""
    lines = [",".join(['"position"'] + [f'"{m}"' for m in models])]
    position_order = [p.value for p in Position.ordered()]
    for pos in position_order:
        row = [pos] + [cells[m].get(pos, float("nan")) for m in models]
        lines.append(csv_line(row))
    avg = [
        "AVG",
        *[
            float(np.mean([cells[m][p] for p in position_order if p in cells[m]]))
            for m in models
        ],
    ]
    lines.append(csv_line(avg))
    return "\n".join(lines) + "\n"


def write_spearman_table(cells: dict[str, dict[str, float | None]], models: list[str]) -> str:
    """Models-by-positions Spearman table (ranking layout)."""
    position_order = [p.value for p in Position.ordered()]
    lines = [",".join(['"model"'] + [f'"{p}"' for p in position_order])]
    for m in models:
        row: list = [m]
        for p in position_order:
            value = cells[m].get(p)
            row.append("null" if value is None else value)
        lines.append(csv_line(row))
    return "\n".join(lines) + "\n"


def write_coefficient_table(
    positions: list[str], features: list[str], coef: np.ndarray, intercepts: np.ndarray
) -> str:
    lines = [",".join(['"position"'] + [f'"{f}"' for f in features] + ['"intercept"'])]
    for i, pos in enumerate(positions):
        lines.append(csv_line([pos] + [float(v) for v in coef[i]] + [float(intercepts[i])]))
    return "\n".join(lines) + "\n"


def read_coefficient_table(text: str) -> tuple[list[str], list[str], np.ndarray, np.ndarray]:
    lines = [l for l in text.splitlines() if l]
    header = _parse_csv_line(lines[0])
    features = header[1:-1]
    positions, coef_rows, intercepts = [], [], []
    for line in lines[1:]:
        cells = _parse_csv_line(line)
        positions.append(cells[0])
        coef_rows.append([float(v) for v in cells[1:-1]])
        intercepts.append(float(cells[-1]))
    return positions, features, np.array(coef_rows), np.array(intercepts)


def write_predictions_csv(records: list[dict]) -> str:
    lines = ["true,predicted,player,gameweek,position"]
    for r in records:
        lines.append(
            csv_line(
                [r["true"], r["predicted"], r["player"], r["gameweek"], r["position"]]
            )
        )
    return "\n".join(lines) + "\n"


def read_predictions_csv(text: str) -> list[dict]:
    lines = [l for l in text.splitlines() if l]
    records = []
    for line in lines[1:]:
        cells = _parse_csv_line(line)
        records.append(
            {
                "true": float(cells[0]),
                "predicted": float(cells[1]),
                "player": cells[2],
                "gameweek": int(cells[3]),
                "position": cells[4],
            }
        )
    return records
