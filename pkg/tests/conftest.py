import numpy as np
import pytest

from fplcast.dataset import build_series, generate_synthetic_season
from fplcast.ingest import Position, RawGameweekRow, TeamStrengthTable


def make_row(**overrides) -> RawGameweekRow:
    base = dict(
        player_name="aleksandar mitrovic",
        position=Position.FWD,
        season="2021-22",
        gameweek=1,
        team="fulham",
        opponent="arsenal",
        minutes=90,
        total_points=2,
        kickoff_order=0,
    )
    base.update(overrides)
    return RawGameweekRow(**base)


@pytest.fixture
def strengths():
    return TeamStrengthTable(
        season="2021-22",
        entries={"fulham": 3, "arsenal": 4, "brentford": 2, "liverpool": 5},
    )


@pytest.fixture
def small_season():
    """60 players x 16 weeks, enough for every split to hold examples."""
    rows, table = generate_synthetic_season(seed=11, n_players=60, n_weeks=16)
    return rows, table


@pytest.fixture
def mid_series(small_season):
    rows, _ = small_season
    return [s for s in build_series(rows) if s.key.position == Position.MID]


def linear_design(seed: int, n: int, f: int, noise: float = 0.1):
    """Design matrix with a known linear signal, for sanity fits."""
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, f))
    true_w = rng.normal(size=f)
    y = A @ true_w + 1.5 + noise * rng.normal(size=n)
    return A, y, true_w
