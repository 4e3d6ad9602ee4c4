import numpy as np
import pytest

from fplcast.cnn import LearningCurve
from fplcast.dataset import (
    FeatureTier,
    ScalerParams,
    assign_splits,
    build_series,
    build_windows,
    generate_synthetic_season,
    sliding_average,
)
from fplcast.evaluation import EvalReport
from fplcast.ingest import Position
from fplcast.serialize import (
    DatasetHeader,
    FormatError,
    csv_line,
    fmt_num,
    read_cleaned_csv,
    read_dataset,
    read_splits,
    write_cleaned_csv,
    write_dataset,
    write_learning_curve,
    write_mse_table,
    write_reports_csv,
    write_spearman_table,
    write_splits,
)


class TestNumberFormatting:
    def test_floats_render_17_significant_digits(self):
        assert fmt_num(0.1) == "0.10000000000000001"
        assert float(fmt_num(1 / 3)) == 1 / 3

    def test_ints_render_plain(self):
        assert fmt_num(42) == "42"
        assert fmt_num(np.int64(-3)) == "-3"

    def test_bools(self):
        assert fmt_num(True) == "True"

    def test_csv_line_quotes_text_only(self):
        assert csv_line(["a,b", 1, 2.5]) == '"a,b",1,2.5'
        assert csv_line(['say "hi"']) == '"say ""hi"""'


@pytest.fixture
def season():
    rows, strengths = generate_synthetic_season(seed=8, n_players=12, n_weeks=6)
    return rows, strengths


class TestCleanedRoundTrip:
    def test_rows_survive(self, season):
        rows, _ = season
        parsed = read_cleaned_csv(write_cleaned_csv(rows))
        assert parsed == rows

    def test_rejects_foreign_header(self):
        with pytest.raises(FormatError):
            read_cleaned_csv("a,b,c\n1,2,3\n")


class TestSplitsRoundTrip:
    def test_full_round_trip(self, season):
        rows, _ = season
        series = build_series(rows)
        splits = assign_splits(series, seed=4)
        parsed = read_splits(write_splits(splits))
        assert parsed.assignments == splits.assignments
        assert parsed.fractions == pytest.approx(splits.fractions)
        assert parsed.seed == splits.seed
        assert parsed.strat_on == splits.strat_on


class TestDatasetRoundTrip:
    def _examples(self, season, representation):
        rows, strengths = season
        series = build_series(rows)
        windowed = [
            e for s in series for e in build_windows(s, 2, FeatureTier.PTS_ICT, strengths)
        ]
        if representation == "sliding":
            return [sliding_average(e) for e in windowed]
        return windowed

    def test_windowed_round_trip(self, season):
        examples = self._examples(season, "windowed")
        header = DatasetHeader(
            representation="windowed",
            position="MID",
            w=2,
            tier="pts_ict",
            seed=8,
            fractions=(0.6, 0.25, 0.15),
            features=FeatureTier.PTS_ICT.columns(),
            scaler_mean=np.array([1.0] * 6),
            scaler_std=np.array([2.0] * 6),
        )
        parsed_header, parsed = read_dataset(write_dataset(header, examples))
        assert parsed_header.w == 2
        assert parsed_header.tier == "pts_ict"
        np.testing.assert_array_equal(parsed_header.scaler_mean, header.scaler_mean)
        assert len(parsed) == len(examples)
        for a, b in zip(parsed, examples):
            np.testing.assert_array_equal(a.X, b.X)
            assert (a.d, a.y, a.player, a.target_gameweek) == (
                b.d,
                b.y,
                b.player,
                b.target_gameweek,
            )

    def test_sliding_round_trip(self, season):
        examples = self._examples(season, "sliding")
        header = DatasetHeader(
            representation="sliding",
            position="MID",
            w=2,
            tier="pts_ict",
            seed=8,
            fractions=(0.6, 0.25, 0.15),
            features=FeatureTier.PTS_ICT.columns(),
        )
        _, parsed = read_dataset(write_dataset(header, examples))
        for a, b in zip(parsed, examples):
            np.testing.assert_array_equal(a.x, b.x)

    def test_rejects_foreign_text(self):
        with pytest.raises(FormatError):
            read_dataset("not a dataset\n")


class TestReportWriters:
    def test_learning_curve_layout(self):
        curve = LearningCurve(
            train_cost=[2.0, 1.0], train_mse=[1.5, 0.75], val_mse=[1.8, 1.0],
            best_epoch=1,
        )
        text = write_learning_curve(curve)
        lines = text.splitlines()
        assert lines[0] == "epoch,train_cost,train_mse,val_mse"
        assert lines[1].startswith("0,2,1.5,")
        assert lines[-1].startswith('"best_epoch",1')

    def test_reports_csv_null_spearman(self):
        report = EvalReport(
            position=Position.GK, split="test", n=4, mse=2.0, spearman=None,
            model_id="ridge_GK",
        )
        text = write_reports_csv([report])
        assert '"null"' in text

    def test_mse_table_has_avg_row(self):
        cells = {
            "ridge": {"GK": 6.0, "DEF": 7.0, "MID": 6.0, "FWD": 7.0},
            "cnn": {"GK": 5.0, "DEF": 6.0, "MID": 6.0, "FWD": 6.0},
        }
        text = write_mse_table(cells, ["ridge", "cnn"])
        lines = text.splitlines()
        assert lines[0] == '"position","ridge","cnn"'
        assert lines[1].startswith('"GK"')
        assert lines[-1].startswith('"AVG",6.5,5.75')

    def test_spearman_table_positions_as_columns(self):
        cells = {"cnn": {"GK": 0.7, "DEF": 0.57, "MID": 0.58, "FWD": None}}
        lines = write_spearman_table(cells, ["cnn"]).splitlines()
        assert lines[0] == '"model","GK","DEF","MID","FWD"'
        assert lines[1].endswith('"null"')
