"""Walk the data pipeline: synthetic season -> cleaning -> windows -> splits.

Run from the repository root:  python demos/01_data_pipeline.py
"""

import numpy as np

from fplcast.dataset import (
    FeatureTier,
    assign_splits,
    build_series,
    build_windows,
    fit_scaler,
    apply_scaler,
    generate_synthetic_season,
    sliding_average,
)
from fplcast.ingest import Position, canonicalize_name, drop_benched, fuzzy_match

print("== Name cleaning ==")
for messy in ("Aleksandar Mitrović", "  Son   Heung-min ", "Ødegaard"):
    print(f"  {messy!r:28} -> {canonicalize_name(messy)!r}")
match = fuzzy_match("heung-min son", ["son heung-min", "harry kane"], 0.85)
print(f"  token-sort match for 'heung-min son': {match}")

print("\n== Synthetic season ==")
rows, strengths = generate_synthetic_season(seed=42, n_players=120, n_weeks=20)
print(f"  {len(rows)} rows for {len({r.player_name for r in rows})} players")
played = drop_benched(rows)
print(f"  {len(rows) - len(played)} benched rows dropped (synthetic players all play)")

print("\n== Windowed examples ==")
series = build_series(played)
mid = [s for s in series if s.key.position is Position.MID]
w, tier = 3, FeatureTier.PTS_MINUTES
examples = [e for s in mid for e in build_windows(s, w, tier, strengths)]
print(f"  {len(mid)} midfielders -> {len(examples)} windows of w={w}")
example = examples[0]
print(f"  one example: X shape {example.X.shape}, d={example.d}, y={example.y}")
print(f"  window rows (points, minutes):\n{example.X}")
sa = sliding_average(example)
print(f"  sliding average: {np.round(sa.x, 2)}")

print("\n== Player-disjoint stratified splits ==")
splits = assign_splits(mid, fractions=(0.6, 0.25, 0.15), n_bins=4, seed=42)
counts = {"train": 0, "validation": 0, "test": 0}
for bucket in splits.assignments.values():
    counts[bucket] += 1
print(f"  players per split: {counts}")

print("\n== Standard scaling (train statistics only) ==")
train_examples = [
    e
    for s in mid
    if splits.assignments[s.key] == "train"
    for e in build_windows(s, w, tier, strengths)
]
scaler = fit_scaler(train_examples, "windowed")
print(f"  mu = {np.round(scaler.mean, 3)}")
print(f"  sigma = {np.round(scaler.std, 3)}")
scaled = apply_scaler(scaler, example)
print(f"  scaled first window:\n{np.round(scaled.X, 3)}")
print(f"  d and y pass through unscaled: d={scaled.d}, y={scaled.y}")
