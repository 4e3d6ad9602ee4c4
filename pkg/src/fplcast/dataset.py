"""Windowed example construction, splits, scaling, and synthetic seasons.

A cleaned player series becomes one training example per retained gameweek
that has a full window of w prior appearances: the w-by-f feature window,
the following match's difficulty gap, and that match's points as the
target. Baseline models consume the per-feature window means instead of
the full window.
"""

from __future__ import annotations

import enum
import hashlib
import warnings
from dataclasses import dataclass

import numpy as np

from .ingest import (
    NUMERIC_STATS,
    CanonicalPlayerKey,
    Position,
    RawGameweekRow,
    TeamStrengthTable,
    canonicalize_name,
    compute_difficulty,
)

__all__ = [
    "PlayerSeries",
    "FeatureTier",
    "WindowedExample",
    "SlidingAverageExample",
    "SplitAssignment",
    "ScalerParams",
    "build_series",
    "build_windows",
    "sliding_average",
    "assign_splits",
    "fit_scaler",
    "apply_scaler",
    "generate_synthetic_season",
    "stable_hash",
]

DIFFICULTY_FEATURE = "difficulty_gap"


@dataclass
class PlayerSeries:
    """All retained rows for one player, in chronological order."""

    key: CanonicalPlayerKey
    rows: list[RawGameweekRow]

    @property
    def avg_score(self) -> float:
        return float(np.mean([r.total_points for r in self.rows]))

    @property
    def stdev_score(self) -> float:
        # Population standard deviation, consistent with the scaler.
        return float(np.std([r.total_points for r in self.rows]))


class FeatureTier(enum.Enum):
    """How many of the numeric gameweek statistics enter the window."""

    PTSONLY = "ptsonly"
    PTS_MINUTES = "pts_minutes"
    PTS_ICT = "pts_ict"
    FULL = "full"

    def columns(self) -> list[str]:
        if self is FeatureTier.PTSONLY:
            return ["total_points"]
        if self is FeatureTier.PTS_MINUTES:
            return ["total_points", "minutes"]
        if self is FeatureTier.PTS_ICT:
            return [
                "total_points",
                "minutes",
                "influence",
                "creativity",
                "threat",
                "ict_index",
            ]
        return list(NUMERIC_STATS)


@dataclass
class WindowedExample:
    """One (window, difficulty, target) training triple."""

    X: np.ndarray  # w x f
    d: int
    y: int
    player: CanonicalPlayerKey
    position: Position
    target_gameweek: int


@dataclass
class SlidingAverageExample:
    """Column means of a window, for the linear and tree baselines."""

    x: np.ndarray  # length f
    d: int
    y: int
    player: CanonicalPlayerKey
    position: Position
    target_gameweek: int


@dataclass
class SplitAssignment:
    """Player-disjoint train/validation/test membership."""

    assignments: dict[CanonicalPlayerKey, str]
    fractions: tuple[float, float, float]
    n_bins: int
    strat_on: str
    seed: int

    def players(self, split: str) -> list[CanonicalPlayerKey]:
        return [k for k, s in self.assignments.items() if s == split]


@dataclass
class ScalerParams:
    """Per-feature population mean and standard deviation."""

    mean: np.ndarray
    std: np.ndarray
    fitted_on: str = "train"


def build_series(rows: list[RawGameweekRow]) -> list[PlayerSeries]:
    """Group cleaned rows into per-player series ordered chronologically.

    Rows must already carry canonical player names. A player appearing in
    two seasons forms a single series; rows order by (season, kickoff_order).
    """
    by_key: dict[CanonicalPlayerKey, list[RawGameweekRow]] = {}
    for row in rows:
        key = CanonicalPlayerKey(canonicalize_name(row.player_name), row.position)
        by_key.setdefault(key, []).append(row)
    series = []
    for key in sorted(by_key, key=lambda k: (k.canonical_name, k.position.value)):
        ordered = sorted(by_key[key], key=lambda r: (r.season, r.kickoff_order))
        series.append(PlayerSeries(key=key, rows=ordered))
    return series


def _feature_matrix(rows: list[RawGameweekRow], columns: list[str]) -> np.ndarray:
    return np.array(
        [[float(getattr(r, c)) for c in columns] for r in rows], dtype=np.float64
    )


def build_windows(
    series: PlayerSeries,
    w: int,
    tier: FeatureTier,
    strengths: dict[str, TeamStrengthTable] | TeamStrengthTable,
) -> list[WindowedExample]:
    """Slide a w-week window over the series; the week after each window
    supplies the target points and difficulty.

    Windows never span a season boundary. A (season-local) series shorter
    than w+1 rows yields nothing.
    """
    if w < 1:
        raise ValueError(f"window size must be >= 1, got {w}")
    columns = tier.columns()
    examples: list[WindowedExample] = []
    for season_rows in _split_by_season(series.rows):
        if len(season_rows) < w + 1:
            continue
        feats = _feature_matrix(season_rows, columns)
        for i in range(w, len(season_rows)):
            target = season_rows[i]
            if isinstance(strengths, dict):
                if target.season not in strengths:
                    raise KeyError(
                        f"no strength table for season '{target.season}'"
                    )
                table = strengths[target.season]
            else:
                table = strengths
            examples.append(
                WindowedExample(
                    X=feats[i - w : i].copy(),
                    d=compute_difficulty(target, table),
                    y=target.total_points,
                    player=series.key,
                    position=series.key.position,
                    target_gameweek=target.gameweek,
                )
            )
    return examples


def _split_by_season(rows: list[RawGameweekRow]) -> list[list[RawGameweekRow]]:
    segments: list[list[RawGameweekRow]] = []
    for row in rows:
        if segments and segments[-1][-1].season == row.season:
            segments[-1].append(row)
        else:
            segments.append([row])
    return segments


def sliding_average(example: WindowedExample) -> SlidingAverageExample:
    """Collapse a window to its per-feature arithmetic means."""
    return SlidingAverageExample(
        x=example.X.mean(axis=0),
        d=example.d,
        y=example.y,
        player=example.player,
        position=example.position,
        target_gameweek=example.target_gameweek,
    )


def stable_hash(*parts) -> int:
    """Deterministic 64-bit hash of the stringified parts (platform-stable,
    unlike builtin hash)."""
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _largest_remainder(n: int, fractions: tuple[float, ...]) -> list[int]:
    quotas = [n * f for f in fractions]
    counts = [int(q) for q in quotas]
    remainders = [q - c for q, c in zip(quotas, counts)]
    short = n - sum(counts)
    # Ties go to the earlier split (train before validation before test).
    order = sorted(range(len(fractions)), key=lambda i: (-remainders[i], i))
    for i in order[:short]:
        counts[i] += 1
    return counts


def assign_splits(
    series_list: list[PlayerSeries],
    fractions: tuple[float, float, float] = (0.60, 0.25, 0.15),
    n_bins: int = 4,
    strat_on: str = "avg_score",
    seed: int = 0,
) -> SplitAssignment:
    """Partition players into train/validation/test, stratified on skill.

    Players are rank-bucketed into n_bins quantile bins of the chosen
    statistic; inside each bin a deterministic shuffle keyed by
    (seed, canonical_name) orders players, and largest-remainder rounding
    fixes the per-bin counts. Examples never cross splits because the
    partition is by player.
    """
    if strat_on not in ("avg_score", "stdev_score", "none"):
        raise ValueError(f"unknown stratification statistic '{strat_on}'")
    if any(f <= 0 for f in fractions):
        raise ValueError("split fractions must be positive")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"split fractions must sum to 1, got {sum(fractions)}")
    if not series_list:
        raise ValueError("no players to split")

    if n_bins > len(series_list):
        warnings.warn(
            f"n_bins={n_bins} exceeds player count {len(series_list)}; clamping",
            stacklevel=2,
        )
        n_bins = len(series_list)
    if strat_on == "none":
        n_bins = 1

    def stat(s: PlayerSeries) -> float:
        return s.avg_score if strat_on == "avg_score" else s.stdev_score

    if strat_on == "none":
        ranked = sorted(series_list, key=lambda s: s.key.canonical_name)
    else:
        ranked = sorted(series_list, key=lambda s: (stat(s), s.key.canonical_name))

    # Equal-count rank chunks = empirical quantile bins.
    edges = [round(i * len(ranked) / n_bins) for i in range(n_bins + 1)]
    assignments: dict[CanonicalPlayerKey, str] = {}
    for b in range(n_bins):
        bin_players = ranked[edges[b] : edges[b + 1]]
        bin_players.sort(key=lambda s: stable_hash(seed, s.key.canonical_name))
        counts = _largest_remainder(len(bin_players), fractions)
        cursor = 0
        for split, count in zip(("train", "validation", "test"), counts):
            for s in bin_players[cursor : cursor + count]:
                assignments[s.key] = split
            cursor += count
    return SplitAssignment(
        assignments=assignments,
        fractions=fractions,
        n_bins=n_bins,
        strat_on=strat_on,
        seed=seed,
    )


def fit_scaler(examples, representation: str = "windowed") -> ScalerParams:
    """Population mean/std per feature over the training examples.

    Windowed examples pool every row of every window; sliding-average
    examples use their mean vectors directly. Difficulty and target are
    never scaled.
    """
    if not examples:
        raise ValueError("cannot fit a scaler on zero examples")
    if representation == "windowed":
        stacked = np.vstack([e.X for e in examples])
    elif representation == "sliding":
        stacked = np.vstack([e.x for e in examples])
    else:
        raise ValueError(f"unknown representation '{representation}'")
    return ScalerParams(
        mean=stacked.mean(axis=0), std=stacked.std(axis=0), fitted_on="train"
    )


def apply_scaler(params: ScalerParams, example):
    """Return a copy of the example with z-scored features.

    Features with zero training variance map to 0. d and y pass through.
    """
    safe_std = np.where(params.std > 0, params.std, 1.0)
    if isinstance(example, WindowedExample):
        if example.X.shape[1] != params.mean.shape[0]:
            raise ValueError(
                f"feature count mismatch: example has {example.X.shape[1]}, "
                f"scaler has {params.mean.shape[0]}"
            )
        z = (example.X - params.mean) / safe_std
        z[:, params.std == 0] = 0.0
        return WindowedExample(
            X=z,
            d=example.d,
            y=example.y,
            player=example.player,
            position=example.position,
            target_gameweek=example.target_gameweek,
        )
    if example.x.shape[0] != params.mean.shape[0]:
        raise ValueError(
            f"feature count mismatch: example has {example.x.shape[0]}, "
            f"scaler has {params.mean.shape[0]}"
        )
    z = (example.x - params.mean) / safe_std
    z[params.std == 0] = 0.0
    return SlidingAverageExample(
        x=z,
        d=example.d,
        y=example.y,
        player=example.player,
        position=example.position,
        target_gameweek=example.target_gameweek,
    )


_SYNTH_TEAMS = 20
_POINTS_MIN, _POINTS_MAX = -5, 24

# Any two blocks differ in >= 3 of their 4 characters, so synthetic names
# built from them stay below the 0.85 fuzzy-match threshold and survive
# ingestion unmerged.
_NAME_BLOCKS = (
    "bana", "cepa", "diqa", "fora", "gusa",
    "hate", "jeve", "kiwe", "loxe", "muze",
)


def _synth_name(p: int, width: int) -> str:
    digits = [(p // 10**i) % 10 for i in reversed(range(width))]
    return "".join(_NAME_BLOCKS[d] for d in digits)


def generate_synthetic_season(
    seed: int,
    n_players: int,
    n_weeks: int,
    position_mix: tuple[float, float, float, float] = (2 / 15, 5 / 15, 5 / 15, 3 / 15),
) -> tuple[list[RawGameweekRow], TeamStrengthTable]:
    """Deterministic desk-scale season standing in for real data.

    Each player gets a latent skill drawn once and a slowly-mixing form
    state; weekly points are a right-skewed integer draw centered on
    skill + form, shaded by the upcoming difficulty gap, and clipped to
    the legal score range. Every emitted row has minutes > 0.
    """
    if n_players < 1:
        raise ValueError("n_players must be >= 1")
    if n_weeks < 2:
        raise ValueError("n_weeks must be >= 2")
    rng = np.random.default_rng(seed)
    season = "synthetic"

    teams = [f"team{t:02d}" for t in range(_SYNTH_TEAMS)]
    strengths = TeamStrengthTable(
        season=season,
        entries={
            team: int(s)
            for team, s in zip(teams, rng.integers(1, 6, size=_SYNTH_TEAMS))
        },
    )

    mix_total = sum(position_mix)
    counts = _largest_remainder(
        n_players, tuple(m / mix_total for m in position_mix)
    )
    positions: list[Position] = []
    for pos, count in zip(Position.ordered(), counts):
        positions.extend([pos] * count)

    name_width = max(3, len(str(n_players - 1)))
    rows: list[RawGameweekRow] = []
    for p in range(n_players):
        position = positions[p]
        team = teams[p % _SYNTH_TEAMS]
        skill = float(rng.uniform(0.5, 7.5))
        form = 0.0
        for week in range(1, n_weeks + 1):
            opponent = teams[int(rng.integers(0, _SYNTH_TEAMS - 1))]
            if opponent == team:
                opponent = teams[_SYNTH_TEAMS - 1]
            gap = strengths.entries[opponent] - strengths.entries[team]
            form = 0.6 * form + float(rng.normal(0.0, 1.0))
            # gamma(2, 1.5) has mean 3: re-centered it is a right-skewed
            # zero-mean disturbance.
            noise = float(rng.gamma(2.0, 1.5)) - 3.0
            points = int(np.clip(round(skill + form - 0.4 * gap + noise),
                                 _POINTS_MIN, _POINTS_MAX))
            minutes = int(rng.integers(45, 91))
            goals = max(0, int(round((points - 2) / 4))) if position != Position.GK else 0
            saves = int(rng.integers(0, 6)) if position == Position.GK else 0
            influence = float(np.round(max(0.0, points * 2.0 + rng.normal(0, 2)), 1))
            creativity = float(np.round(max(0.0, skill * 3.0 + rng.normal(0, 2)), 1))
            threat = float(np.round(max(0.0, goals * 15.0 + rng.normal(0, 2)), 1))
            rows.append(
                RawGameweekRow(
                    player_name=_synth_name(p, name_width),
                    position=position,
                    season=season,
                    gameweek=week,
                    team=team,
                    opponent=opponent,
                    minutes=minutes,
                    total_points=points,
                    goals_scored=goals,
                    assists=int(rng.integers(0, 2)),
                    clean_sheets=int(points >= 6),
                    goals_conceded=int(rng.integers(0, 3)),
                    saves=saves,
                    bps=max(0, points * 3),
                    bonus=int(np.clip(points - 7, 0, 3)),
                    influence=influence,
                    creativity=creativity,
                    threat=threat,
                    ict_index=float(
                        np.round((influence + creativity + threat) / 10.0, 1)
                    ),
                    was_home=bool(rng.integers(0, 2)),
                    kickoff_order=week - 1,
                )
            )
    return rows, strengths
