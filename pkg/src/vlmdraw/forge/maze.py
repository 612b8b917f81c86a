"""3x3 maze benchmark: uniform spanning-tree mazes with one valid and
one single-move-corrupted proposed path per seed."""

from __future__ import annotations

from collections import deque

import numpy as np

from .types import MazeGT, TaskInstance, TaskKind

__all__ = ["gen_maze", "walk_path", "MAZE_SIZE", "DIRECTIONS"]

MAZE_SIZE = 3
MIN_PATH, MAX_PATH = 3, 8

# (row, col) deltas in image orientation: row 0 is the top row.
DIRECTIONS = {
    "Up": (-1, 0),
    "Down": (1, 0),
    "Left": (0, -1),
    "Right": (0, 1),
}

MAZE_QUESTION_TEMPLATE = (
    "You are given an image of a maze where the green square marks the "
    "START cell and the red square marks the END cell of the maze. The "
    "walls of the maze are solid black lines. Dashed gray lines mark "
    "cell boundaries that can be crossed. You are given a proposed "
    "sequence of moves to reach the end of the maze starting from the "
    "green square and ending at the red square. Each move will move "
    "exactly one cell length in that direction. For example, \"right\" "
    "means move one cell in the maze to the right. A valid path must "
    "NOT cross any solid black walls and must end up in the red square "
    "cell.\n\n"
    "Proposed path: {path}\n\n"
    "Sketch the proposed path on the maze, then answer: is the proposed "
    "path valid? Answer Yes or No.")


def _edge(a: tuple[int, int], b: tuple[int, int]):
    return (a, b) if a <= b else (b, a)


def _neighbors(cell):
    r, c = cell
    for dr, dc in DIRECTIONS.values():
        nr, nc = r + dr, c + dc
        if 0 <= nr < MAZE_SIZE and 0 <= nc < MAZE_SIZE:
            yield (nr, nc)


def _wilson_tree(rng: np.random.Generator) -> set:
    """Uniform spanning tree over the cell grid via loop-erased walks."""
    cells = [(r, c) for r in range(MAZE_SIZE) for c in range(MAZE_SIZE)]
    in_tree = {cells[int(rng.integers(len(cells)))]}
    edges = set()
    for cell in cells:
        if cell in in_tree:
            continue
        # random walk with loop erasure
        walk = [cell]
        position = cell
        while position not in in_tree:
            options = list(_neighbors(position))
            position = options[int(rng.integers(len(options)))]
            if position in walk:
                walk = walk[:walk.index(position) + 1]
            else:
                walk.append(position)
        for a, b in zip(walk, walk[1:]):
            edges.add(_edge(a, b))
            in_tree.add(a)
            in_tree.add(b)
    return edges


def _tree_path(edges: set, start, end) -> list:
    adjacency: dict = {}
    for a, b in edges:
        adjacency.setdefault(a, []).append(b)
        adjacency.setdefault(b, []).append(a)
    queue = deque([start])
    parent = {start: None}
    while queue:
        cell = queue.popleft()
        if cell == end:
            break
        for nxt in adjacency.get(cell, []):
            if nxt not in parent:
                parent[nxt] = cell
                queue.append(nxt)
    path = [end]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    return list(reversed(path))


def _directions_of(cells: list) -> tuple[str, ...]:
    names = []
    reverse = {delta: name for name, delta in DIRECTIONS.items()}
    for a, b in zip(cells, cells[1:]):
        names.append(reverse[(b[0] - a[0], b[1] - a[1])])
    return tuple(names)


def walk_path(walls: frozenset, start: tuple[int, int],
              path: tuple[str, ...]) -> tuple[bool, tuple[int, int]]:
    """Follow the moves from start; returns (crossed_no_wall, end cell).
    Stepping outside the grid counts as crossing the border wall (the
    walk stays put so the end cell remains meaningful)."""
    position = start
    clean = True
    for move in path:
        dr, dc = DIRECTIONS[move]
        nxt = (position[0] + dr, position[1] + dc)
        if not (0 <= nxt[0] < MAZE_SIZE and 0 <= nxt[1] < MAZE_SIZE):
            clean = False
            continue
        if _edge(position, nxt) in walls:
            clean = False
        position = nxt
    return clean, position


def gen_maze(seed: int, dims: tuple[int, int] = (600, 600)
             ) -> tuple[TaskInstance, TaskInstance]:
    """One maze, two instances: the ground-truth path (valid) and a twin
    with exactly one direction replaced (always invalid: the endpoint
    moves off the red cell or a wall is crossed)."""
    rng = np.random.default_rng(seed)
    w, h = dims
    while True:
        tree = _wilson_tree(rng)
        all_edges = {_edge(cell, nxt)
                     for cell in [(r, c) for r in range(MAZE_SIZE)
                                  for c in range(MAZE_SIZE)]
                     for nxt in _neighbors(cell)}
        walls = frozenset(all_edges - tree)
        cells = [(r, c) for r in range(MAZE_SIZE) for c in range(MAZE_SIZE)]
        candidates = []
        for start in cells:
            for end in cells:
                if start == end:
                    continue
                length = len(_tree_path(tree, start, end)) - 1
                if MIN_PATH <= length <= MAX_PATH:
                    candidates.append((start, end))
        if candidates:
            break
    start, end = candidates[int(rng.integers(len(candidates)))]
    path = _directions_of(_tree_path(tree, start, end))

    names = list(DIRECTIONS)
    while True:
        idx = int(rng.integers(len(path)))
        replacement = names[int(rng.integers(len(names)))]
        if replacement == path[idx]:
            continue
        corrupted = path[:idx] + (replacement,) + path[idx + 1:]
        clean, final = walk_path(walls, start, corrupted)
        if not clean or final != end:
            break

    def instance(proposed, valid, tag):
        return TaskInstance(
            id=f"maze_{seed}_{tag}",
            kind=TaskKind.MAZE, width=w, height=h,
            question=MAZE_QUESTION_TEMPLATE.format(path=", ".join(proposed)),
            truth=MazeGT(walls=walls, start=start, end=end,
                         path=proposed, valid=valid))

    return instance(path, True, "valid"), instance(corrupted, False, "invalid")
