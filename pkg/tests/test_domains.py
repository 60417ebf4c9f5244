from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lhbl import domains
from lhbl.domains import StateSpaceSpec
from lhbl.errors import ConfigError, MalformedStateError

EIGHT = StateSpaceSpec("sliding_tile", 8)
LO3 = StateSpaceSpec("lights_out", 3)
LO5 = StateSpaceSpec("lights_out", 5)
CUBE2 = StateSpaceSpec("rubiks_cube", 2)
CUBE3 = StateSpaceSpec("rubiks_cube", 3)
ALL_SPECS = [EIGHT, StateSpaceSpec("sliding_tile", 15), LO3, LO5, CUBE2, CUBE3]


def bfs_distance(spec, start):
    """Independent breadth-first distance from ``start`` to the goal (unit costs)."""
    goal = domains.goal_state(spec)
    seen = {start: 0}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        if s == goal:
            return seen[s]
        for child, _ in domains.successors(spec, s):
            if child not in seen:
                seen[child] = seen[s] + 1
                queue.append(child)
    return None


def test_eight_puzzle_corner_blank_has_two_successors():
    goal = domains.goal_state(EIGHT)
    assert goal[-1] == 0  # blank in the bottom-right corner
    assert len(domains.successors(EIGHT, goal)) == 2


def test_lights_out_every_cell_pressable():
    rng = np.random.default_rng(3)
    for _ in range(20):
        s = domains.scramble(LO3, 7, rng)
        assert len(domains.successors(LO3, s)) == 9


@pytest.mark.parametrize("spec", [CUBE2, CUBE3])
def test_cube_quarter_turns_are_twelve_and_invertible(spec):
    s = domains.scramble(spec, 10, np.random.default_rng(0))
    expanded = domains.expand(spec, s)
    assert len(expanded) == 12
    assert len({child for _, child, _ in expanded}) == 12
    for op, child, cost in expanded:
        assert cost == 1.0
        assert domains.apply_op(spec, child, domains.inverse_op(spec, op)) == s


def test_cube_quarter_turn_has_order_four():
    s = domains.goal_state(CUBE3)
    for op in range(12):
        t = s
        for _ in range(4):
            t = domains.apply_op(CUBE3, t, op)
            domains.validate_state(CUBE3, t)
        assert t == s


def test_cube3_single_turn_moves_twenty_stickers():
    goal = domains.goal_state(CUBE3)
    for op in range(12):
        child = domains.apply_op(CUBE3, goal, op)
        assert sum(a != b for a, b in zip(goal, child)) == 12  # 4 side strips of 3; face itself stays uniform


def test_goal_tests():
    goal = domains.goal_state(EIGHT)
    assert domains.is_goal(EIGHT, goal)
    child, _ = domains.successors(EIGHT, goal)[0]
    assert not domains.is_goal(EIGHT, child)
    assert domains.is_goal(LO3, (0,) * 9)
    assert goal == (1, 2, 3, 4, 5, 6, 7, 8, 0)


@pytest.mark.parametrize("spec", ALL_SPECS, ids=str)
def test_scramble_zero_is_goal_and_replayable(spec):
    assert domains.scramble(spec, 0, np.random.default_rng(1)) == domains.goal_state(spec)
    a = domains.scramble(spec, 25, np.random.default_rng(42))
    b = domains.scramble(spec, 25, np.random.default_rng(42))
    assert a == b


def test_depth_one_scramble_is_one_move_away():
    for seed in range(10):
        s = domains.scramble(EIGHT, 1, np.random.default_rng(seed))
        assert bfs_distance(EIGHT, s) == 1


def test_lights_out_scramble_distance_bounded_by_cell_count():
    s = domains.scramble(LO3, 20, np.random.default_rng(7))
    assert bfs_distance(LO3, s) <= 9


@pytest.mark.parametrize("spec,dim", [(EIGHT, 81), (LO3, 9), (CUBE3, 324), (CUBE2, 144)], ids=str)
def test_encoding_dimensions(spec, dim):
    assert domains.encoding_dim(spec) == dim
    vec = domains.encode(spec, domains.goal_state(spec))
    assert vec.shape == (dim,)
    assert set(np.unique(vec)) <= {0.0, 1.0}


def test_encode_is_injective_on_random_states():
    rng = np.random.default_rng(11)
    states = set()
    while len(states) < 10_000:
        states.add(domains.scramble(EIGHT, int(rng.integers(0, 40)), rng))
    states = sorted(states)
    vecs = domains.encode_batch(EIGHT, states)
    assert len({v.tobytes() for v in vecs}) == 10_000


@pytest.mark.parametrize("spec", ALL_SPECS, ids=str)
def test_successors_are_reversible(spec):
    rng = np.random.default_rng(5)
    for _ in range(10):
        s = domains.scramble(spec, int(rng.integers(0, 30)), rng)
        succ = domains.successors(spec, s)
        assert len({c for c, _ in succ}) == len(succ)
        assert all(c != s for c, _ in succ)
        for child, cost in succ:
            assert (s, cost) in domains.successors(spec, child)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), depth=st.integers(0, 80))
def test_scrambled_tiles_stay_solvable(seed, depth):
    s = domains.scramble(EIGHT, depth, np.random.default_rng(seed))
    assert domains.is_solvable_tiles(EIGHT, s)


def test_parity_check_rejects_swapped_tiles():
    goal = list(domains.goal_state(EIGHT))
    goal[0], goal[1] = goal[1], goal[0]
    assert not domains.is_solvable_tiles(EIGHT, tuple(goal))


@pytest.mark.parametrize("spec,bad", [
    (EIGHT, (1, 2, 3, 4, 5, 6, 7, 8, 8)),
    (EIGHT, (1, 2, 3)),
    (LO3, (0, 2, 0, 0, 0, 0, 0, 0, 0)),
    (CUBE2, (0,) * 24),
])
def test_malformed_states_rejected(spec, bad):
    with pytest.raises(MalformedStateError):
        domains.successors(spec, bad)


def test_bad_sizes_rejected():
    with pytest.raises(ConfigError):
        StateSpaceSpec("sliding_tile", 9)
    with pytest.raises(ConfigError):
        StateSpaceSpec("rubiks_cube", 1)


def test_replay_accumulates_cost():
    rng = np.random.default_rng(0)
    goal = domains.goal_state(LO3)
    ops = [int(x) for x in rng.integers(0, 9, size=5)]
    end, cost = domains.replay(LO3, goal, ops)
    assert cost == 5.0
    back, _ = domains.replay(LO3, end, [domains.inverse_op(LO3, op) for op in reversed(ops)])
    assert back == goal
