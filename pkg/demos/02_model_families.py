"""Train all three model families on one position and compare them.

Run from the repository root:  python demos/02_model_families.py
"""

import numpy as np

from fplcast.dataset import (
    FeatureTier,
    assign_splits,
    build_series,
    build_windows,
    generate_synthetic_season,
)
from fplcast.evaluation import spearman_tied
from fplcast.harness import train_family, sliding_design, windowed_batch
from fplcast.ingest import Position
from fplcast import cnn as cnn_mod
from fplcast.ridge import predict_ridge_batch
from fplcast.gbm import predict_gbm_batch

rows, strengths = generate_synthetic_season(seed=7, n_players=200, n_weeks=38)
series = [s for s in build_series(rows) if s.key.position is Position.MID]
splits = assign_splits(series, seed=7)

w, tier = 3, FeatureTier.PTSONLY
train_ex, val_ex = [], []
for s in series:
    bucket = splits.assignments[s.key]
    if bucket == "train":
        train_ex.extend(build_windows(s, w, tier, strengths))
    elif bucket == "validation":
        val_ex.extend(build_windows(s, w, tier, strengths))

val_y = np.array([float(e.y) for e in val_ex])
train_y = np.array([float(e.y) for e in train_ex])
baseline = float(np.mean((val_y - train_y.mean()) ** 2))
print(f"midfielders: {len(train_ex)} train / {len(val_ex)} val examples")
print(f"mean-predictor baseline val MSE: {baseline:.3f}\n")

configs = {
    "ridge": {"w": w, "tier": tier.value, "lambda": 1.0},
    "gbm": {"w": w, "tier": tier.value},
    "cnn": {"w": w, "tier": tier.value, "k": 1, "filters": 32, "hidden": 32,
            "epochs": 250, "patience": 20},
}

print(f"{'family':8} {'train MSE':>10} {'val MSE':>10} {'vs base':>8} {'spearman':>9}")
for family, config in configs.items():
    fitted, train_mse, val_mse = train_family(family, config, train_ex, val_ex, seed=7)
    if family == "ridge":
        A, _ = sliding_design(val_ex, fitted.scaler)
        pred = predict_ridge_batch(fitted.model, A)
    elif family == "gbm":
        A, _ = sliding_design(val_ex)
        pred = predict_gbm_batch(fitted.model, A)
    else:
        batch = windowed_batch(val_ex, fitted.scaler)
        pred, _ = cnn_mod.forward_batch(fitted.model, batch.X, batch.d)
    rho = spearman_tied(val_y, pred)
    print(
        f"{family:8} {train_mse:10.3f} {val_mse:10.3f} "
        f"{val_mse / baseline:8.3f} {rho:9.3f}"
    )

print("\n'vs base' below 1.0 means the model beats predicting the mean.")
