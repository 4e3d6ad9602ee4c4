import numpy as np
import pytest

from fplcast.dataset import (
    FeatureTier,
    PlayerSeries,
    apply_scaler,
    assign_splits,
    build_series,
    build_windows,
    fit_scaler,
    generate_synthetic_season,
    sliding_average,
)
from fplcast.ingest import CanonicalPlayerKey, Position, TeamStrengthTable

from conftest import make_row


def mitrovic_series():
    """The two-week worked window plus the following (target) match."""
    rows = [
        make_row(gameweek=1, kickoff_order=0, total_points=1, goals_scored=0,
                 assists=0, opponent="arsenal"),
        make_row(gameweek=2, kickoff_order=1, total_points=12, goals_scored=2,
                 assists=0, opponent="liverpool"),
        # Target week: 2 points against a weaker side (difficulty -1).
        make_row(gameweek=3, kickoff_order=2, total_points=2, goals_scored=0,
                 assists=0, opponent="brentford"),
    ]
    key = CanonicalPlayerKey("aleksandar mitrovic", Position.FWD)
    return PlayerSeries(key=key, rows=rows)


class TestBuildWindows:
    def test_worked_example(self, strengths):
        tier = FeatureTier.FULL
        examples = build_windows(mitrovic_series(), 2, tier, strengths)
        assert len(examples) == 1
        ex = examples[0]
        assert ex.y == 2
        assert ex.d == -1
        assert ex.target_gameweek == 3
        cols = tier.columns()
        assert ex.X.shape == (2, len(cols))
        points = ex.X[:, cols.index("total_points")]
        goals = ex.X[:, cols.index("goals_scored")]
        assert list(points) == [1.0, 12.0]
        assert list(goals) == [0.0, 2.0]

    def test_series_of_length_w_yields_nothing(self, strengths):
        series = mitrovic_series()
        series.rows = series.rows[:2]
        assert build_windows(series, 2, FeatureTier.PTSONLY, strengths) == []

    def test_series_of_length_w_plus_one_yields_one(self, strengths):
        assert len(build_windows(mitrovic_series(), 2, FeatureTier.PTSONLY, strengths)) == 1

    def test_count_identity(self, strengths):
        rows = [
            make_row(gameweek=i + 1, kickoff_order=i, opponent="arsenal")
            for i in range(10)
        ]
        series = PlayerSeries(
            key=CanonicalPlayerKey("someone", Position.FWD), rows=rows
        )
        for w in (1, 2, 5, 9):
            assert len(build_windows(series, w, FeatureTier.PTSONLY, strengths)) == 10 - w

    def test_windows_never_cross_seasons(self, strengths):
        rows_a = [
            make_row(season="2020-21", gameweek=i + 1, kickoff_order=i)
            for i in range(3)
        ]
        rows_b = [
            make_row(season="2021-22", gameweek=i + 1, kickoff_order=i)
            for i in range(3)
        ]
        series = PlayerSeries(
            key=CanonicalPlayerKey("someone", Position.FWD), rows=rows_a + rows_b
        )
        tables = {"2020-21": TeamStrengthTable("2020-21", dict(strengths.entries)),
                  "2021-22": strengths}
        examples = build_windows(series, 2, FeatureTier.PTSONLY, tables)
        # One per season segment; none spanning gameweeks 3->1.
        assert len(examples) == 2
        assert [e.target_gameweek for e in examples] == [3, 3]

    def test_w_below_one_rejected(self, strengths):
        with pytest.raises(ValueError):
            build_windows(mitrovic_series(), 0, FeatureTier.PTSONLY, strengths)


class TestFeatureTiers:
    def test_tier_contents_nest(self):
        pts = FeatureTier.PTSONLY.columns()
        pm = FeatureTier.PTS_MINUTES.columns()
        ict = FeatureTier.PTS_ICT.columns()
        full = FeatureTier.FULL.columns()
        assert pts == ["total_points"]
        assert pm[: len(pts)] == pts and "minutes" in pm
        assert set(ict) >= {"influence", "creativity", "threat", "ict_index"}
        assert set(full) >= set(ict) and len(full) == 18

    def test_points_always_first(self):
        for tier in FeatureTier:
            assert tier.columns()[0] == "total_points"


class TestSlidingAverage:
    def test_worked_example_means(self, strengths):
        tier = FeatureTier.FULL
        [ex] = build_windows(mitrovic_series(), 2, tier, strengths)
        sa = sliding_average(ex)
        cols = tier.columns()
        assert sa.x[cols.index("total_points")] == pytest.approx(6.5)
        assert sa.x[cols.index("goals_scored")] == pytest.approx(1.0)
        assert sa.x[cols.index("assists")] == pytest.approx(0.0)
        assert sa.d == ex.d and sa.y == ex.y

    def test_constant_window(self, strengths):
        rows = [
            make_row(gameweek=i + 1, kickoff_order=i, total_points=4)
            for i in range(4)
        ]
        series = PlayerSeries(
            key=CanonicalPlayerKey("someone", Position.FWD), rows=rows
        )
        [ex] = build_windows(series, 3, FeatureTier.PTSONLY, strengths)
        assert sliding_average(ex).x[0] == 4.0

    def test_w1_is_identity(self, strengths):
        examples = build_windows(mitrovic_series(), 1, FeatureTier.PTSONLY, strengths)
        for ex in examples:
            assert sliding_average(ex).x[0] == ex.X[0, 0]

    def test_exact_mean_of_columns(self, strengths):
        [ex] = build_windows(mitrovic_series(), 2, FeatureTier.FULL, strengths)
        sa = sliding_average(ex)
        np.testing.assert_allclose(sa.x, ex.X.sum(axis=0) / 2, rtol=0, atol=0)


def _player(name, points):
    rows = [
        make_row(
            player_name=name, gameweek=i + 1, kickoff_order=i, total_points=p
        )
        for i, p in enumerate(points)
    ]
    return PlayerSeries(key=CanonicalPlayerKey(name, Position.FWD), rows=rows)


class TestAssignSplits:
    def make_players(self, n):
        return [_player(f"player {i:02d}", [i % 7, 2, 5]) for i in range(n)]

    def test_twenty_players_single_bin(self):
        splits = assign_splits(
            self.make_players(20), (0.6, 0.25, 0.15), n_bins=1, seed=3
        )
        counts = {"train": 0, "validation": 0, "test": 0}
        for split in splits.assignments.values():
            counts[split] += 1
        assert counts == {"train": 12, "validation": 5, "test": 3}

    def test_partition_property(self):
        players = self.make_players(23)
        splits = assign_splits(players, seed=5)
        assert set(splits.assignments) == {p.key for p in players}

    def test_single_player_goes_to_train(self):
        with pytest.warns(UserWarning):
            splits = assign_splits(self.make_players(1), seed=0)
        assert list(splits.assignments.values()) == ["train"]

    def test_deterministic(self):
        players = self.make_players(17)
        a = assign_splits(players, seed=9)
        b = assign_splits(players, seed=9)
        assert a.assignments == b.assignments

    def test_seed_changes_assignment(self):
        players = self.make_players(40)
        a = assign_splits(players, seed=1)
        b = assign_splits(players, seed=2)
        assert a.assignments != b.assignments

    def test_per_bin_counts_near_targets(self):
        players = self.make_players(37)
        splits = assign_splits(players, (0.6, 0.25, 0.15), n_bins=4, seed=2)
        counts = {"train": 0, "validation": 0, "test": 0}
        for split in splits.assignments.values():
            counts[split] += 1
        # Largest-remainder keeps each bin within 1 of target, so the
        # total stays within n_bins of the global target.
        assert abs(counts["train"] - 0.6 * 37) < 4
        assert abs(counts["validation"] - 0.25 * 37) < 4
        assert abs(counts["test"] - 0.15 * 37) < 4

    def test_fractions_must_sum_to_one(self):
        with pytest.raises(ValueError):
            assign_splits(self.make_players(5), (0.5, 0.2, 0.2))

    def test_adding_player_perturbs_minimally(self):
        players = self.make_players(30)
        before = assign_splits(players, n_bins=1, seed=4).assignments
        extra = _player("zz extra", [3, 3, 3])
        after = assign_splits(players + [extra], n_bins=1, seed=4).assignments
        moved = sum(
            1 for p in players if before[p.key] != after[p.key]
        )
        assert moved <= 3


class TestScaler:
    def _examples(self, values):
        from fplcast.dataset import WindowedExample

        key = CanonicalPlayerKey("someone", Position.FWD)
        return [
            WindowedExample(
                X=np.array([[v]], dtype=float),
                d=0,
                y=1,
                player=key,
                position=Position.FWD,
                target_gameweek=2,
            )
            for v in values
        ]

    def test_two_point_example(self):
        params = fit_scaler(self._examples([1.0, 3.0]), "windowed")
        assert params.mean[0] == pytest.approx(2.0)
        assert params.std[0] == pytest.approx(1.0)  # population std
        scaled = [apply_scaler(params, e) for e in self._examples([1.0, 3.0])]
        assert scaled[0].X[0, 0] == pytest.approx(-1.0)
        assert scaled[1].X[0, 0] == pytest.approx(1.0)

    def test_constant_feature_records_zero_std(self):
        params = fit_scaler(self._examples([4.0, 4.0]), "windowed")
        assert params.std[0] == 0.0
        scaled = apply_scaler(params, self._examples([9.0])[0])
        assert scaled.X[0, 0] == 0.0

    def test_training_data_centered_after_transform(self):
        examples = self._examples([1.0, 2.0, 5.0, 9.0])
        params = fit_scaler(examples, "windowed")
        transformed = [apply_scaler(params, e).X[0, 0] for e in examples]
        assert abs(np.mean(transformed)) < 1e-9

    def test_round_trip(self):
        examples = self._examples([1.0, 2.0, 7.0])
        params = fit_scaler(examples, "windowed")
        for e in examples:
            z = apply_scaler(params, e)
            recovered = z.X * params.std + params.mean
            np.testing.assert_allclose(recovered, e.X, atol=1e-9)

    def test_d_and_y_not_scaled(self):
        examples = self._examples([1.0, 3.0])
        examples[0].d = 3
        params = fit_scaler(examples, "windowed")
        scaled = apply_scaler(params, examples[0])
        assert scaled.d == 3 and scaled.y == 1

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            fit_scaler([], "windowed")

    def test_dimension_mismatch_rejected(self):
        params = fit_scaler(self._examples([1.0, 3.0]), "windowed")
        bad = self._examples([1.0])[0]
        bad.X = np.zeros((1, 2))
        with pytest.raises(ValueError):
            apply_scaler(params, bad)

    def test_windowed_pools_all_rows(self):
        from fplcast.dataset import WindowedExample

        key = CanonicalPlayerKey("someone", Position.FWD)
        ex = WindowedExample(
            X=np.array([[1.0], [3.0]]),
            d=0,
            y=1,
            player=key,
            position=Position.FWD,
            target_gameweek=3,
        )
        params = fit_scaler([ex], "windowed")
        assert params.mean[0] == pytest.approx(2.0)


class TestSyntheticSeason:
    def test_deterministic(self):
        a_rows, a_str = generate_synthetic_season(3, 10, 6)
        b_rows, b_str = generate_synthetic_season(3, 10, 6)
        assert a_rows == b_rows
        assert a_str == b_str

    def test_row_count(self):
        rows, _ = generate_synthetic_season(1, 13, 9)
        assert len(rows) == 13 * 9

    def test_points_in_legal_range(self):
        rows, _ = generate_synthetic_season(2, 50, 20)
        assert all(-5 <= r.total_points <= 24 for r in rows)

    def test_all_rows_played(self):
        rows, _ = generate_synthetic_season(5, 20, 10)
        assert all(r.minutes > 0 for r in rows)

    def test_strengths_cover_all_teams(self):
        rows, table = generate_synthetic_season(4, 25, 5)
        for r in rows:
            assert table.strength(r.team) in range(1, 6)
            assert table.strength(r.opponent) in range(1, 6)

    def test_names_survive_fuzzy_merge(self):
        from fplcast.ingest import token_sort_similarity

        rows, _ = generate_synthetic_season(6, 120, 2)
        names = sorted({r.player_name for r in rows})
        assert len(names) == 120
        # Spot-check adjacent ids, the closest name pairs by construction.
        for a, b in zip(names, names[1:]):
            assert token_sort_similarity(a, b) < 0.85

    def test_position_mix_respected(self):
        rows, _ = generate_synthetic_season(7, 30, 2, position_mix=(0, 0, 1, 0))
        assert all(r.position is Position.MID for r in rows)


class TestBuildSeries:
    def test_groups_by_player_and_orders(self):
        rows = [
            make_row(player_name="b", gameweek=2, kickoff_order=5),
            make_row(player_name="a", gameweek=1, kickoff_order=0),
            make_row(player_name="b", gameweek=1, kickoff_order=1),
        ]
        series = build_series(rows)
        assert [s.key.canonical_name for s in series] == ["a", "b"]
        assert [r.kickoff_order for r in series[1].rows] == [1, 5]

    def test_stats_recomputed_from_rows(self):
        rows = [
            make_row(gameweek=1, kickoff_order=0, total_points=2),
            make_row(gameweek=2, kickoff_order=1, total_points=6),
        ]
        [series] = build_series(rows)
        assert series.avg_score == pytest.approx(4.0)
        assert series.stdev_score == pytest.approx(2.0)  # population
        series.rows.append(make_row(gameweek=3, kickoff_order=2, total_points=10))
        assert series.avg_score == pytest.approx(6.0)
