from collections import Counter

import pytest
from hypothesis import given, strategies as st

from swarmalloc.rng import RngStream
from swarmalloc.tasks import (
    ConfigurationError,
    HomeRect,
    TaskSpec,
    VertexState,
    claim_task,
    place_tasks,
    split_demand,
)


@pytest.mark.parametrize(
    "total, T, expected",
    [(80, 1, [80]), (80, 3, [27, 27, 26]), (80, 30, [3] * 20 + [2] * 10), (80, 80, [1] * 80)],
)
def test_split_demand(total, T, expected):
    assert split_demand(total, T) == expected


def test_split_demand_rejects_too_many_tasks():
    with pytest.raises(ConfigurationError):
        split_demand(5, 6)
    with pytest.raises(ConfigurationError):
        split_demand(5, 0)


@given(st.integers(1, 500), st.integers(1, 500))
def test_split_demand_properties(total, T):
    if total < T:
        return
    parts = split_demand(total, T)
    assert sum(parts) == total and len(parts) == T
    assert max(parts) - min(parts) <= 1 and min(parts) >= 1


def test_vertex_state_validation():
    VertexState(True, 3, 3, (1, 1))
    with pytest.raises(ValueError):
        VertexState(True, 3, 4, (1, 1))
    with pytest.raises(ValueError):
        VertexState(True, 3, -1, (1, 1))
    with pytest.raises(ValueError):
        VertexState(True, 3, 3, (1, 1), is_home=True)
    assert VertexState(True, 3, 3, (1, 1)).with_residual(1).residual_demand == 1


def test_task_spec_validation():
    assert TaskSpec(2, 5).demand_vector() == [3, 2]
    assert TaskSpec(2, 5, (1, 4)).demand_vector() == [1, 4]
    with pytest.raises(ConfigurationError):
        TaskSpec(2, 5, (1, 3))
    with pytest.raises(ConfigurationError):
        TaskSpec(2, 5, (0, 5))


def test_home_rect():
    home = HomeRect.centered(50, 50)
    assert len(home) == 9
    assert home.cells()[0] == (24, 24) and home.cells()[1] == (25, 24)
    assert home.nearest((0, 25)) == (24, 25)
    assert home.nearest((25, 25)) == (25, 25)
    assert home.nearest((49, 0)) == (26, 24)


def test_place_tasks_avoids_home_and_is_deterministic():
    home = HomeRect(1, 1, 3, 3)
    spec = TaskSpec(16, 40)
    a = place_tasks(RngStream(4), spec, 5, 5, home)
    b = place_tasks(RngStream(4), spec, 5, 5, home)
    assert a == b
    locs = [loc for loc, _ in a]
    assert len(set(locs)) == 16
    assert not any(home.contains(v) for v in locs)
    assert sum(d for _, d in a) == 40
    with pytest.raises(ConfigurationError):
        place_tasks(RngStream(4), TaskSpec(17, 40), 5, 5, home)


def test_place_tasks_is_uniform():
    counts = Counter()
    for seed in range(4000):
        (loc, _), = place_tasks(RngStream(seed), TaskSpec(1, 1), 3, 3, HomeRect(1, 1, 1, 1))
        counts[loc] += 1
    assert len(counts) == 8
    assert all(abs(c - 500) < 100 for c in counts.values())


@given(st.lists(st.integers(0, 100), unique=True, max_size=12), st.integers(0, 15), st.integers(0, 2**32))
def test_claim_task_cardinality(claimants, rd, seed):
    winners = claim_task(claimants, rd, RngStream(seed))
    assert winners <= set(claimants)
    assert len(winners) == min(len(claimants), rd)


def test_claim_task_is_fair():
    counts = Counter()
    for seed in range(6000):
        counts.update(claim_task([4, 9, 13], 1, RngStream(seed)))
    assert all(abs(c - 2000) < 200 for c in counts.values())
