"""Fantasy Premier League player score forecasting.

Predicts a player's next-gameweek fantasy score from a sliding window of
recent per-gameweek statistics, with three model families sharing one
data pipeline: closed-form ridge regression, leaf-wise gradient-boosted
trees, and a from-scratch 1D convolutional network. Ranking quality is
scored with the tie-aware Spearman correlation.
"""

from .ingest import (
    CanonicalPlayerKey,
    Position,
    RawGameweekRow,
    TeamStrengthTable,
    canonicalize_name,
    compute_difficulty,
    drop_benched,
    fuzzy_match,
    parse_gameweek_csv,
    parse_strengths_csv,
)
from .dataset import (
    FeatureTier,
    PlayerSeries,
    ScalerParams,
    SlidingAverageExample,
    SplitAssignment,
    WindowedExample,
    apply_scaler,
    assign_splits,
    build_series,
    build_windows,
    fit_scaler,
    generate_synthetic_season,
    sliding_average,
)
from .ridge import RidgeModel, export_coefficients, fit_ridge, predict_ridge
from .gbm import (
    GbmHyperparams,
    GbmModel,
    fit_gbm,
    predict_gbm,
    shapley_values,
    split_importance,
)
from .cnn import (
    Batch,
    CnnModel,
    TrainConfig,
    adam_step,
    backward,
    cost,
    forward,
    init_model,
    mean_normalized_filter,
    train,
)
from .evaluation import (
    EvalReport,
    average_ranks,
    export_predictions,
    extreme_examples,
    mse,
    spearman_tied,
)

__version__ = "0.1.0"
