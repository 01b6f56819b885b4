"""Continuous maze MDP: unit square, four fixed-step actions, rectangular walls.

All operations are pure given an explicit rng; a MazeEnv is immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

STEP = 0.02
MAX_DISTANCE = math.sqrt(2.0)  # unit-square diameter, maps raw distances onto [0,1]
GOAL_NORM_RADIUS = 0.3
GRID = 50  # 0.02-resolution discretisation used for validation and start picking

State = tuple[float, float]


class Action(IntEnum):
    UP = 0
    RIGHT = 1
    DOWN = 2
    LEFT = 3


ACTION_VECTORS = {
    Action.UP: (0.0, STEP),
    Action.RIGHT: (STEP, 0.0),
    Action.DOWN: (0.0, -STEP),
    Action.LEFT: (-STEP, 0.0),
}

ACTION_NAMES = {a: a.name.capitalize() for a in Action}
ACTION_FROM_NAME = {name: a for a, name in ACTION_NAMES.items()}


class MazeGenerationError(RuntimeError):
    """No valid maze found within the rejection-sampling attempt budget."""


@dataclass(frozen=True)
class Wall:
    """Axis-aligned closed rectangle inside the unit square."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate wall rectangle: {self}")
        if self.x_min < 0 or self.x_max > 1 or self.y_min < 0 or self.y_max > 1:
            raise ValueError(f"wall outside unit square: {self}")

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max


@dataclass(frozen=True)
class MazeEnv:
    """Deterministic maze MDP with a fixed goal and impassable walls."""

    walls: tuple[Wall, ...]
    goal: State
    rng_seed: int = 0
    max_distance: float = MAX_DISTANCE
    # raw distance whose normalised value equals the 0.3 goal threshold
    goal_radius_raw: float = field(default=GOAL_NORM_RADIUS * MAX_DISTANCE)

    def __post_init__(self):
        if self.max_distance <= 0:
            raise ValueError("max_distance must be positive")
        if in_wall(self.walls, self.goal[0], self.goal[1]):
            raise ValueError("goal lies inside a wall")


def in_wall(walls, x: float, y: float) -> bool:
    return any(w.contains(x, y) for w in walls)


def transition(env: MazeEnv, s: State, a: Action) -> State:
    """Apply one action; wall hits and out-of-bounds moves leave the state unchanged."""
    dx, dy = ACTION_VECTORS[Action(a)]
    nx, ny = s[0] + dx, s[1] + dy
    if nx < 0.0 or nx > 1.0 or ny < 0.0 or ny > 1.0:
        return s
    if in_wall(env.walls, nx, ny):
        return s
    return (nx, ny)


def normalised_goal_distance(env: MazeEnv, s: State) -> float:
    """Euclidean distance from s to the goal divided by max_distance, clipped to [0,1]."""
    d = math.hypot(s[0] - env.goal[0], s[1] - env.goal[1]) / env.max_distance
    return min(d, 1.0)


def true_reward(env: MazeEnv, s: State, a: Action, s_next: State) -> float:
    """Hand-designed maze reward: 1 inside the goal region, shaped elsewhere,
    with a -0.1 penalty for blocked moves."""
    d = normalised_goal_distance(env, s_next)
    if d <= GOAL_NORM_RADIUS:
        return 1.0
    if s == s_next:
        return (1.0 - d) ** 2 - 0.1
    return (1.0 - d) ** 2


def sample_initial_state(env: MazeEnv, rng: np.random.Generator) -> State:
    """Uniform over the wall-free part of the unit square (rejection sampling)."""
    for _ in range(100_000):
        x, y = rng.uniform(0.0, 1.0, size=2)
        if not in_wall(env.walls, x, y):
            return (float(x), float(y))
    raise MazeGenerationError("could not sample a wall-free state")


def _grid_free_mask(walls, grid: int = GRID) -> np.ndarray:
    """Boolean (grid, grid) mask of cells whose centers are wall-free; [ix, iy]."""
    centers = (np.arange(grid) + 0.5) / grid
    free = np.ones((grid, grid), dtype=bool)
    for w in walls:
        xs = (centers >= w.x_min) & (centers <= w.x_max)
        ys = (centers >= w.y_min) & (centers <= w.y_max)
        free[np.ix_(xs, ys)] = False
    return free


def _flood_fill(free: np.ndarray, start: tuple[int, int]) -> np.ndarray:
    grid = free.shape[0]
    reached = np.zeros_like(free)
    if not free[start]:
        return reached
    stack = [start]
    reached[start] = True
    while stack:
        ix, iy = stack.pop()
        for jx, jy in ((ix + 1, iy), (ix - 1, iy), (ix, iy + 1), (ix, iy - 1)):
            if 0 <= jx < grid and 0 <= jy < grid and free[jx, jy] and not reached[jx, jy]:
                reached[jx, jy] = True
                stack.append((jx, jy))
    return reached


def _cell_of(p: State, grid: int = GRID) -> tuple[int, int]:
    return (min(int(p[0] * grid), grid - 1), min(int(p[1] * grid), grid - 1))


def maze_is_valid(walls, goal: State, grid: int = GRID) -> bool:
    """Goal wall-free, every grid row keeps a free cell, and the flood fill
    from the goal reaches at least half of all cells."""
    if in_wall(walls, goal[0], goal[1]):
        return False
    free = _grid_free_mask(walls, grid)
    if not free.any(axis=0).all():  # some 0.02-grid row fully walled
        return False
    reached = _flood_fill(free, _cell_of(goal, grid))
    return reached.sum() >= 0.5 * grid * grid


def generate_maze(seed: int, wall_count: int, max_attempts: int = 500) -> MazeEnv:
    """Rejection-sample a maze with `wall_count` thin rectangular walls.

    Deterministic for a fixed seed. Raises MazeGenerationError if no maze
    passing the reachability checks is found within `max_attempts`.
    """
    if wall_count < 0:
        raise ValueError("wall_count must be >= 0")
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        goal = (float(rng.uniform(0.05, 0.95)), float(rng.uniform(0.05, 0.95)))
        walls = []
        tries = 0
        while len(walls) < wall_count and tries < 50 * max(wall_count, 1):
            tries += 1
            horizontal = rng.uniform() < 0.5
            length = float(rng.uniform(0.15, 0.5))
            thickness = float(rng.uniform(0.02, 0.05))
            wx, wy = (length, thickness) if horizontal else (thickness, length)
            x0 = float(rng.uniform(0.0, 1.0 - wx))
            y0 = float(rng.uniform(0.0, 1.0 - wy))
            wall = Wall(x0, x0 + wx, y0, y0 + wy)
            if wall.contains(*goal):
                continue
            walls.append(wall)
        if len(walls) < wall_count:
            continue
        if maze_is_valid(walls, goal):
            return MazeEnv(walls=tuple(walls), goal=goal, rng_seed=seed)
    raise MazeGenerationError(
        f"no valid maze with {wall_count} walls after {max_attempts} attempts (seed={seed})"
    )


def farthest_free_point(env: MazeEnv, grid: int = GRID) -> State:
    """Center of the goal-reachable grid cell farthest from the goal.

    Used as the shared evaluation / iterative-rollout start state; ties break
    toward the lowest (ix, iy) cell.
    """
    free = _grid_free_mask(env.walls, grid)
    reached = _flood_fill(free, _cell_of(env.goal, grid))
    centers = (np.arange(grid) + 0.5) / grid
    dx = centers[:, None] - env.goal[0]
    dy = centers[None, :] - env.goal[1]
    dist = np.hypot(dx, dy)
    dist[~reached] = -1.0
    ix, iy = np.unravel_index(np.argmax(dist), dist.shape)
    return (float(centers[ix]), float(centers[iy]))


def maze_to_json(env: MazeEnv) -> dict:
    return {
        "seed": env.rng_seed,
        "goal": [env.goal[0], env.goal[1]],
        "walls": [[w.x_min, w.x_max, w.y_min, w.y_max] for w in env.walls],
    }


def maze_from_json(obj: dict) -> MazeEnv:
    walls = tuple(Wall(*w) for w in obj["walls"])
    return MazeEnv(walls=walls, goal=(obj["goal"][0], obj["goal"][1]), rng_seed=obj["seed"])


def save_maze(env: MazeEnv, path) -> None:
    with open(path, "w") as f:
        json.dump(maze_to_json(env), f)


def load_maze(path) -> MazeEnv:
    with open(path) as f:
        return maze_from_json(json.load(f))
