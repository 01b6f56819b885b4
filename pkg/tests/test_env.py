import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arglearn.env import (
    GRID,
    Action,
    MazeEnv,
    Wall,
    farthest_free_point,
    generate_maze,
    in_wall,
    maze_from_json,
    maze_to_json,
    normalised_goal_distance,
    sample_initial_state,
    transition,
    true_reward,
)

OPEN = MazeEnv(walls=(), goal=(0.9, 0.9))


def test_transition_free_move():
    assert transition(OPEN, (0.5, 0.5), Action.UP) == (0.5, 0.52)


def test_transition_wall_blocks():
    env = MazeEnv(walls=(Wall(0.4, 0.6, 0.51, 0.6),), goal=(0.9, 0.9))
    assert transition(env, (0.5, 0.5), Action.UP) == (0.5, 0.5)


def test_transition_out_of_bounds_blocks():
    assert transition(OPEN, (0.0, 0.99), Action.UP) == (0.0, 0.99)
    assert transition(OPEN, (0.0, 0.99), Action.LEFT) == (0.0, 0.99)


def test_transition_idempotent_when_blocked():
    env = MazeEnv(walls=(Wall(0.4, 0.6, 0.51, 0.6),), goal=(0.9, 0.9))
    s = (0.5, 0.5)
    assert transition(env, s, Action.UP) == s
    assert transition(env, s, Action.UP) == s


def test_action_vectors_have_step_norm():
    from arglearn.env import ACTION_VECTORS

    assert len(ACTION_VECTORS) == 4
    for dx, dy in ACTION_VECTORS.values():
        assert math.hypot(dx, dy) == pytest.approx(0.02)


def test_true_reward_goal_region():
    # place s_next at normalised distance 0.2 from the goal
    env = MazeEnv(walls=(), goal=(0.5, 0.5))
    s_next = (0.5 + 0.2 * env.max_distance, 0.5)
    assert true_reward(env, (0.5, 0.5), Action.RIGHT, s_next) == 1.0


def test_true_reward_blocked_penalty():
    # (0.6, 0.6) sits at raw distance 0.5*sqrt(2) from (0.1, 0.1): d = 0.5
    env = MazeEnv(walls=(), goal=(0.1, 0.1))
    s = (0.6, 0.6)
    assert normalised_goal_distance(env, s) == pytest.approx(0.5)
    assert true_reward(env, s, Action.UP, s) == pytest.approx(0.15)


def test_true_reward_far_move():
    env = MazeEnv(walls=(), goal=(0.0, 0.0))
    s_next = (1.0, 1.0)  # exactly max_distance away -> d = 1
    assert true_reward(env, (0.98, 1.0), Action.RIGHT, s_next) == pytest.approx(0.0)


@given(
    x=st.floats(0, 1), y=st.floats(0, 1),
    gx=st.floats(0, 1), gy=st.floats(0, 1),
    a=st.sampled_from(list(Action)),
)
def test_true_reward_bounds(x, y, gx, gy, a):
    env = MazeEnv(walls=(), goal=(gx, gy))
    s = (x, y)
    r = true_reward(env, s, a, transition(env, s, a))
    assert -0.1 <= r <= 1.0


@settings(max_examples=50)
@given(
    x=st.floats(0, 1), y=st.floats(0, 1),
    a=st.sampled_from(list(Action)),
    wx=st.floats(0.05, 0.8), wy=st.floats(0.05, 0.8),
)
def test_transition_never_lands_strictly_inside_wall(x, y, a, wx, wy):
    wall = Wall(wx, min(wx + 0.15, 1.0), wy, min(wy + 0.15, 1.0))
    if wall.contains(0.9, 0.9):
        return
    env = MazeEnv(walls=(wall,), goal=(0.9, 0.9))
    if in_wall(env.walls, x, y):
        return
    nx, ny = transition(env, (x, y), a)
    assert not (wall.x_min < nx < wall.x_max and wall.y_min < ny < wall.y_max)
    assert 0.0 <= nx <= 1.0 and 0.0 <= ny <= 1.0


def test_normalised_goal_distance_at_goal_and_max():
    env = MazeEnv(walls=(), goal=(0.9, 0.9))
    assert normalised_goal_distance(env, (0.9, 0.9)) == 0.0
    far = MazeEnv(walls=(), goal=(0.0, 0.0))
    assert normalised_goal_distance(far, (1.0, 1.0)) == pytest.approx(1.0)


def test_normalised_goal_distance_example():
    env = MazeEnv(walls=(), goal=(0.9, 0.9))
    # sqrt(0.8^2 + 0.8^2) / sqrt(2) = 0.8
    assert normalised_goal_distance(env, (0.1, 0.1)) == pytest.approx(0.8)


def test_generate_maze_no_walls():
    env = generate_maze(seed=7, wall_count=0)
    assert env.walls == ()


def test_generate_maze_deterministic():
    a = generate_maze(seed=7, wall_count=6)
    b = generate_maze(seed=7, wall_count=6)
    assert maze_to_json(a) == maze_to_json(b)


def _oracle_flood_fill(env, grid=GRID):
    """Independent reachability count from the goal cell over cell centers."""
    centers = [(i + 0.5) / grid for i in range(grid)]
    free = [[not in_wall(env.walls, centers[ix], centers[iy]) for iy in range(grid)] for ix in range(grid)]
    gx = min(int(env.goal[0] * grid), grid - 1)
    gy = min(int(env.goal[1] * grid), grid - 1)
    seen = set()
    stack = [(gx, gy)] if free[gx][gy] else []
    while stack:
        ix, iy = stack.pop()
        if (ix, iy) in seen:
            continue
        seen.add((ix, iy))
        for jx, jy in ((ix + 1, iy), (ix - 1, iy), (ix, iy + 1), (ix, iy - 1)):
            if 0 <= jx < grid and 0 <= jy < grid and free[jx][jy] and (jx, jy) not in seen:
                stack.append((jx, jy))
    return len(seen)


def test_generate_maze_goal_reaches_half_the_grid():
    env = generate_maze(seed=7, wall_count=6)
    assert _oracle_flood_fill(env) >= 0.5 * GRID * GRID


def test_generate_maze_goal_never_walled():
    for seed in range(5):
        env = generate_maze(seed=seed, wall_count=8)
        assert not in_wall(env.walls, *env.goal)


def test_sample_initial_state_in_unit_square():
    rng = np.random.default_rng(3)
    x, y = sample_initial_state(OPEN, rng)
    assert 0.0 <= x <= 1.0 and 0.0 <= y <= 1.0


def test_sample_initial_state_avoids_walls():
    env = MazeEnv(walls=(Wall(0.0, 1.0, 0.4, 0.6),), goal=(0.9, 0.9))
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        _, y = sample_initial_state(env, rng)
        assert not 0.4 < y < 0.6


def test_sample_initial_state_deterministic():
    assert sample_initial_state(OPEN, np.random.default_rng(5)) == sample_initial_state(
        OPEN, np.random.default_rng(5)
    )


def test_farthest_free_point_open_maze():
    env = MazeEnv(walls=(), goal=(0.95, 0.95))
    start = farthest_free_point(env)
    assert start == (0.01, 0.01)
    assert normalised_goal_distance(env, start) > 0.9


def test_maze_json_round_trip():
    env = generate_maze(seed=11, wall_count=4)
    clone = maze_from_json(maze_to_json(env))
    assert clone.walls == env.walls
    assert clone.goal == env.goal
    assert clone.rng_seed == env.rng_seed
