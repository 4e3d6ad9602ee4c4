import io

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fplcast.ingest import (
    Position,
    RowParseError,
    SchemaError,
    TeamLookupError,
    canonicalize_name,
    compute_difficulty,
    drop_benched,
    fuzzy_match,
    parse_gameweek_csv,
    parse_strengths_csv,
    token_sort_similarity,
)

from conftest import make_row

HEADER = (
    "name,position,GW,team,opponent_team,minutes,total_points,goals_scored,"
    "assists,clean_sheets,goals_conceded,saves,bps,bonus,influence,creativity,"
    "threat,ict_index,was_home"
)


def row_line(name="Harry Kane", position="FWD", gw=1, minutes=90, points=12):
    return (
        f"{name},{position},{gw},spurs,arsenal,{minutes},{points},1,0,0,1,0,"
        f"30,2,10.0,5.0,40.0,5.5,True"
    )


class TestParseGameweekCsv:
    def test_header_only_gives_empty_list(self):
        assert parse_gameweek_csv(HEADER + "\n", "2021-22") == []

    def test_single_row_identity(self):
        rows = parse_gameweek_csv(
            HEADER + "\n" + row_line(minutes=90, points=12), "2021-22"
        )
        assert len(rows) == 1
        row = rows[0]
        assert row.minutes == 90
        assert row.total_points == 12
        assert row.player_name == "Harry Kane"
        assert row.position is Position.FWD
        assert row.season == "2021-22"
        assert row.was_home is True

    def test_non_numeric_minutes_cites_line_2(self):
        text = HEADER + "\n" + row_line(minutes="abc")
        with pytest.raises(RowParseError, match="line 2"):
            parse_gameweek_csv(text, "2021-22")

    def test_missing_column_names_it(self):
        broken = HEADER.replace("opponent_team", "opponent")
        with pytest.raises(SchemaError, match="opponent_team"):
            parse_gameweek_csv(broken + "\n", "2021-22")

    def test_round_accepted_for_gameweek(self):
        text = HEADER.replace("GW", "round") + "\n" + row_line(gw=7)
        assert parse_gameweek_csv(text, "2021-22")[0].gameweek == 7

    def test_extra_columns_ignored(self):
        text = HEADER + ",expected_goals\n" + row_line() + ",0.7"
        assert len(parse_gameweek_csv(text, "2021-22")) == 1

    def test_accepts_byte_streams(self):
        data = (HEADER + "\n" + row_line()).encode("utf-8")
        assert len(parse_gameweek_csv(io.BytesIO(data), "2021-22")) == 1

    def test_file_order_preserved(self):
        text = HEADER + "\n" + row_line(name="A") + "\n" + row_line(name="B")
        names = [r.player_name for r in parse_gameweek_csv(text, "2021-22")]
        assert names == ["A", "B"]

    def test_ict_mismatch_warns_only(self):
        bad_ict = row_line().replace("5.5", "50.0")
        with pytest.warns(UserWarning, match="ict_index"):
            rows = parse_gameweek_csv(HEADER + "\n" + bad_ict, "2021-22")
        assert len(rows) == 1

    def test_unknown_position_rejected(self):
        with pytest.raises(RowParseError, match="position"):
            parse_gameweek_csv(
                HEADER + "\n" + row_line(position="STRIKER"), "2021-22"
            )

    def test_kickoff_order_follows_gameweek(self):
        text = (
            HEADER
            + "\n"
            + row_line(name="A", gw=5)
            + "\n"
            + row_line(name="A", gw=2)
        )
        rows = parse_gameweek_csv(text, "2021-22")
        assert rows[1].kickoff_order < rows[0].kickoff_order


class TestCanonicalizeName:
    def test_folds_diacritics(self):
        assert canonicalize_name("Aleksandar Mitrović") == "aleksandar mitrovic"

    def test_collapses_whitespace(self):
        assert canonicalize_name("  Son   Heung-min ") == "son heung-min"

    def test_lowercases(self):
        assert canonicalize_name("KANE") == "kane"

    def test_folds_stroked_letters(self):
        assert canonicalize_name("Ødegaard") == "odegaard"

    def test_empty_input(self):
        assert canonicalize_name("") == ""

    @given(st.text(max_size=40))
    def test_idempotent(self, name):
        once = canonicalize_name(name)
        assert canonicalize_name(once) == once


def _levenshtein_oracle(a: str, b: str) -> int:
    # Full-matrix dynamic program, independent of the two-row version.
    m, n = len(a), len(b)
    dist = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(m + 1):
        dist[i][0] = i
    for j in range(n + 1):
        dist[0][j] = j
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            dist[i][j] = min(
                dist[i - 1][j] + 1, dist[i][j - 1] + 1, dist[i - 1][j - 1] + cost
            )
    return dist[m][n]


def _similarity_oracle(a: str, b: str) -> float:
    ta = " ".join(sorted(a.split()))
    tb = " ".join(sorted(b.split()))
    longest = max(len(ta), len(tb))
    if longest == 0:
        return 1.0
    return 1.0 - _levenshtein_oracle(ta, tb) / longest


class TestFuzzyMatch:
    def test_exact_match_scores_one(self):
        assert fuzzy_match("harry kane", ["mo salah", "harry kane"]) == (
            "harry kane",
            1.0,
        )

    def test_token_sort_handles_name_order(self):
        # Token sort maps both to "heung-min son": distance 0.
        result = fuzzy_match("heung-min son", ["son heung-min"], 0.85)
        assert result == ("son heung-min", 1.0)

    def test_below_threshold_returns_none(self):
        assert fuzzy_match("xyz", ["harry kane"], 0.85) is None

    def test_empty_candidates_rejected(self):
        with pytest.raises(ValueError):
            fuzzy_match("kane", [], 0.85)

    def test_tie_broken_by_first_occurrence(self):
        result = fuzzy_match("kane", ["kane", "kane"], 0.5)
        assert result == ("kane", 1.0)

    def test_abbreviation_scores_against_oracle(self):
        # "aleks. mitrovic" vs "aleksandar mitrovic" as in abbreviated feeds.
        got = token_sort_similarity("aleks mitrovic", "aleksandar mitrovic")
        assert got == pytest.approx(
            _similarity_oracle("aleks mitrovic", "aleksandar mitrovic")
        )

    @given(st.text(max_size=20), st.text(max_size=20))
    def test_similarity_symmetric(self, a, b):
        assert token_sort_similarity(a, b) == token_sort_similarity(b, a)

    @given(
        st.lists(
            st.text(
                alphabet=st.characters(min_codepoint=97, max_codepoint=122),
                min_size=1,
                max_size=12,
            ),
            min_size=1,
            max_size=6,
        )
    )
    def test_matches_oracle_on_random_candidates(self, candidates):
        query = candidates[0]
        result = fuzzy_match(query, candidates, threshold=0.0)
        assert result is not None
        best, score = result
        oracle_scores = [_similarity_oracle(query, c) for c in candidates]
        assert score == pytest.approx(max(oracle_scores))
        assert best == candidates[oracle_scores.index(max(oracle_scores))]


class TestDropBenched:
    def test_zero_minutes_excluded(self):
        assert drop_benched([make_row(minutes=0)]) == []

    def test_one_minute_retained(self):
        rows = [make_row(minutes=1)]
        assert drop_benched(rows) == rows

    def test_empty_input(self):
        assert drop_benched([]) == []

    def test_idempotent(self):
        rows = [make_row(minutes=m) for m in (0, 5, 0, 90)]
        once = drop_benched(rows)
        assert drop_benched(once) == once

    def test_order_preserved(self):
        rows = [make_row(minutes=m, gameweek=i + 1) for i, m in enumerate((5, 0, 7))]
        assert [r.gameweek for r in drop_benched(rows)] == [1, 3]


class TestComputeDifficulty:
    def test_equal_strengths_zero(self, strengths):
        row = make_row(team="fulham", opponent="fulham")
        assert compute_difficulty(row, strengths) == 0

    def test_stronger_opponent_positive(self, strengths):
        row = make_row(team="fulham", opponent="arsenal")  # 4 - 3
        assert compute_difficulty(row, strengths) == 1

    def test_negative_value_representable(self, strengths):
        row = make_row(team="fulham", opponent="brentford")  # 2 - 3
        assert compute_difficulty(row, strengths) == -1

    def test_unknown_team_named_in_error(self, strengths):
        row = make_row(team="fulham", opponent="chelsea")
        with pytest.raises(TeamLookupError, match="chelsea"):
            compute_difficulty(row, strengths)

    def test_bounded_by_rating_range(self, strengths):
        for team in strengths.entries:
            for opponent in strengths.entries:
                row = make_row(team=team, opponent=opponent)
                assert -4 <= compute_difficulty(row, strengths) <= 4


class TestParseStrengths:
    def test_round_trip(self):
        text = "season,team,strength\n2021-22,Fulham,3\n2021-22,Arsenal,4\n"
        tables = parse_strengths_csv(text)
        assert tables["2021-22"].strength("Fulham") == 3
        assert tables["2021-22"].strength("arsenal") == 4

    def test_out_of_range_strength_rejected(self):
        with pytest.raises(RowParseError, match="strength"):
            parse_strengths_csv("season,team,strength\n2021-22,Fulham,9\n")
