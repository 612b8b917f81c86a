"""Ball-drop scene generator: 1-3 tilted platforms, randomized ball X,
four containers along the bottom, ground truth simulated natively."""

from __future__ import annotations

import math

import numpy as np

from ..metrics import PixelRect
from .physics import DT, NoLanding, simulate_ball
from .types import BallGT, BallScene, TaskInstance, TaskKind

__all__ = ["gen_ball_drop", "BALL_QUESTION"]

BALL_QUESTION = (
    "A ball will be dropped straight down from its current position. "
    "The containers at the bottom are numbered 1 to 4 from left to "
    "right. Sketch the trajectory the ball will take, then give the "
    "number of the container it finally lands in as your final answer.")

SCENE_W = SCENE_H = 1000
WALL_TOP = 840
FLOOR_Y = 990
BALL_RADIUS = 18.0
BALL_Y = 80.0

PLATFORM_LENGTH = (200.0, 400.0)
PLATFORM_ANGLE_DEG = (8.0, 35.0)
PLATFORM_X = (180.0, 820.0)
PLATFORM_Y = (250.0, 700.0)
PLATFORM_MIN_SPACING = 150.0


def _containers() -> tuple[PixelRect, ...]:
    step = SCENE_W / 4
    return tuple(PixelRect(i * step, WALL_TOP, (i + 1) * step, FLOOR_Y)
                 for i in range(4))


def _random_platform(rng: np.random.Generator):
    cx = rng.uniform(*PLATFORM_X)
    cy = rng.uniform(*PLATFORM_Y)
    length = rng.uniform(*PLATFORM_LENGTH)
    angle = math.radians(rng.uniform(*PLATFORM_ANGLE_DEG))
    if rng.random() < 0.5:
        angle = -angle
    dx = 0.5 * length * math.cos(angle)
    dy = 0.5 * length * math.sin(angle)
    a = (round(cx - dx), round(cy - dy))
    b = (round(cx + dx), round(cy + dy))
    return a, b, (cx, cy)


def gen_ball_drop(seed: int, n_lines: int,
                  max_attempts: int = 400) -> TaskInstance:
    """One scene with exactly n_lines platforms whose simulated ball
    touches at least one platform before landing (purely-vertical drops
    are rejected as trivially guessable). Deterministic in the seed."""
    if n_lines not in (1, 2, 3):
        raise ValueError("n_lines must be 1, 2, or 3")
    rng = np.random.default_rng(seed)
    containers = _containers()
    for _ in range(max_attempts):
        platforms = []
        centers = []
        while len(platforms) < n_lines:
            a, b, center = _random_platform(rng)
            if all(math.dist(center, c) >= PLATFORM_MIN_SPACING
                   for c in centers):
                platforms.append((a, b))
                centers.append(center)
        ball_x = float(rng.integers(120, 881))
        scene = BallScene(
            width=SCENE_W, height=SCENE_H,
            ball_start=(ball_x, BALL_Y), ball_radius=BALL_RADIUS,
            platforms=tuple(platforms), containers=containers,
            wall_top=WALL_TOP)
        try:
            result = simulate_ball(scene)
        except NoLanding:
            continue
        if result.platform_hits == 0:
            continue
        # only ship refinement-stable scenes: a half-step rerun must
        # land in the same container (balls that balance on a platform
        # at one step size but roll off at another are rejected)
        try:
            fine = simulate_ball(scene, dt=DT / 2.0, sample_every=16)
        except NoLanding:
            continue
        if fine.container != result.container:
            continue
        return TaskInstance(
            id=f"ball_{seed}_{n_lines}",
            kind=TaskKind.BALL_DROP, width=SCENE_W, height=SCENE_H,
            question=BALL_QUESTION,
            truth=BallGT(trajectory=result.trajectory,
                         container=result.container, scene=scene))
    raise NoLanding(f"no acceptable scene after {max_attempts} attempts "
                    f"(seed {seed}, {n_lines} lines)")
