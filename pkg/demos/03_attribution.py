"""Explain each model family: coefficients, Shapley values, mean filter.

Run from the repository root:  python demos/03_attribution.py
"""

import numpy as np

from fplcast.dataset import (
    FeatureTier,
    assign_splits,
    build_series,
    build_windows,
    generate_synthetic_season,
)
from fplcast.harness import train_family, sliding_design
from fplcast.ingest import Position
from fplcast.ridge import export_coefficients
from fplcast.gbm import predict_gbm, shapley_values, split_importance
from fplcast.cnn import mean_normalized_filter

rows, strengths = generate_synthetic_season(seed=3, n_players=160, n_weeks=30)
all_series = build_series(rows)
w, tier = 3, FeatureTier.PTS_ICT
names = tier.columns() + ["difficulty_gap"]


def examples_for(position, bucket, splits, series):
    return [
        e
        for s in series
        if splits.assignments[s.key] == bucket
        for e in build_windows(s, w, tier, strengths)
    ]


print("== Ridge coefficients per position ==")
ridge_models = {}
for position in Position.ordered():
    series = [s for s in all_series if s.key.position is position]
    splits = assign_splits(series, seed=3)
    train_ex = examples_for(position, "train", splits, series)
    val_ex = examples_for(position, "validation", splits, series)
    fitted, _, _ = train_family(
        "ridge", {"w": w, "tier": tier.value, "lambda": 1.0}, train_ex, val_ex, 3
    )
    ridge_models[position] = fitted.model
positions, features, coef, intercepts = export_coefficients(ridge_models)
print(f"{'':14}" + "".join(f"{p:>8}" for p in positions))
for j, feature in enumerate(features):
    print(f"{feature:14}" + "".join(f"{coef[i, j]:8.3f}" for i in range(len(positions))))

print("\n== GBM split importance and Shapley attribution (MID) ==")
series = [s for s in all_series if s.key.position is Position.MID]
splits = assign_splits(series, seed=3)
train_ex = examples_for(Position.MID, "train", splits, series)
val_ex = examples_for(Position.MID, "validation", splits, series)
fitted, _, _ = train_family(
    "gbm", {"w": w, "tier": tier.value, "min_data_in_leaf": 20}, train_ex, val_ex, 3
)
imp = split_importance(fitted.model)
for name, pct in sorted(zip(names, imp.percentages), key=lambda t: -t[1]):
    if pct > 0:
        print(f"  {name:14} {pct:5.1f}% of splits")

A_train, _ = sliding_design(train_ex)
A_val, _ = sliding_design(val_ex)
background = A_train[np.random.default_rng(3).choice(len(A_train), 100, replace=False)]
x = A_val[0]
result = shapley_values(fitted.model, x, background)
print(f"\n  example feature vector: {np.round(x, 2)}")
print(f"  base value E[f]: {result.base_value:.3f}")
for name, phi in zip(names, result.phi):
    print(f"  phi {name:14} {phi:+.3f}")
print(f"  reconstructed prediction: {result.base_value + result.phi.sum():.3f}")
print(f"  direct prediction:        {predict_gbm(fitted.model, x):.3f}")

print("\n== CNN mean normalized filter (kernel x features) ==")
fitted, _, _ = train_family(
    "cnn",
    {"w": w, "tier": tier.value, "k": 2, "filters": 64, "hidden": 32,
     "epochs": 60, "patience": 60},
    train_ex,
    val_ex,
    3,
)
mean_filter = mean_normalized_filter(fitted.model)
print(f"  columns: {tier.columns()}")
print(np.round(mean_filter, 3))
