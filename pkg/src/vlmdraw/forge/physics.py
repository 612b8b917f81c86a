"""Deterministic 2D ball physics: gravity, circle-vs-segment collision
with restitution and Coulomb-style tangential friction, fixed-step
integration. Good enough for single-bounce-then-roll scenes; every run
is a pure function of (scene, dt)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import BallScene

__all__ = ["SimResult", "NoLanding", "simulate_ball",
           "GRAVITY", "RESTITUTION", "FRICTION", "DT", "T_MAX", "SETTLE_SPEED"]

GRAVITY = 1000.0      # px/s^2, +y is down (image space)
RESTITUTION = 0.35
FRICTION = 0.2        # tangential impulse fraction of the normal impulse
DT = 1.0 / 240.0
T_MAX = 20.0
SETTLE_SPEED = 2.0    # px/s


class NoLanding(Exception):
    pass


@dataclass(frozen=True)
class SimResult:
    trajectory: tuple[tuple[float, float], ...]
    container: int  # 1..4
    platform_hits: int


def scene_segments(scene: BallScene) -> tuple[np.ndarray, np.ndarray, int]:
    """All collision segments: platforms first (so hits are countable),
    then container walls, floor, and image side walls. Returns
    (starts, ends, n_platforms)."""
    segments = [(np.array(a, float), np.array(b, float))
                for a, b in scene.platforms]
    n_platforms = len(segments)
    floor_y = scene.containers[0].y1
    boundaries = sorted({c.x0 for c in scene.containers}
                        | {c.x1 for c in scene.containers})
    for x in boundaries:
        segments.append((np.array([x, scene.wall_top]),
                         np.array([x, floor_y])))
    segments.append((np.array([scene.containers[0].x0, floor_y]),
                     np.array([scene.containers[-1].x1, floor_y])))
    segments.append((np.array([0.0, 0.0]), np.array([0.0, floor_y])))
    segments.append((np.array([float(scene.width), 0.0]),
                     np.array([float(scene.width), floor_y])))
    starts = np.array([s for s, _ in segments])
    ends = np.array([e for _, e in segments])
    return starts, ends, n_platforms


def _container_of(scene: BallScene, pos: np.ndarray) -> int:
    for i, box in enumerate(scene.containers, start=1):
        if box.x0 <= pos[0] <= box.x1 and box.y0 <= pos[1] <= box.y1:
            return i
    return 0


def simulate_ball(scene: BallScene, dt: float = DT,
                  sample_every: int = 8) -> SimResult:
    """Integrate until the ball settles (speed below SETTLE_SPEED inside
    a container) or T_MAX passes; raises NoLanding if the ball is not in
    any container by then."""
    starts, ends, n_platforms = scene_segments(scene)
    deltas = ends - starts
    len2 = (deltas ** 2).sum(axis=1)
    len2[len2 == 0] = 1.0

    pos = np.array(scene.ball_start, dtype=float)
    vel = np.zeros(2)
    radius = scene.ball_radius
    trajectory = [tuple(pos)]
    platform_hits = 0
    steps = int(round(T_MAX / dt))
    for step_index in range(1, steps + 1):
        vel[1] += GRAVITY * dt
        pos = pos + vel * dt
        for _ in range(4):
            rel = pos[None, :] - starts
            t = np.clip((rel * deltas).sum(axis=1) / len2, 0.0, 1.0)
            closest = starts + t[:, None] * deltas
            offset = pos[None, :] - closest
            dist2 = (offset ** 2).sum(axis=1)
            hit = int(np.argmin(dist2))
            dist = float(np.sqrt(dist2[hit]))
            if dist >= radius:
                break
            if dist > 1e-9:
                normal = offset[hit] / dist
            else:
                seg = deltas[hit]
                normal = np.array([-seg[1], seg[0]])
                normal /= np.linalg.norm(normal)
                if normal[1] > 0:  # push away from gravity by default
                    normal = -normal
            pos = closest[hit] + normal * radius
            v_n = float(vel @ normal)
            if v_n < 0.0:
                if hit < n_platforms:
                    platform_hits += 1
                impulse = -(1.0 + RESTITUTION) * v_n
                vel = vel + impulse * normal
                tangent = np.array([-normal[1], normal[0]])
                v_t = float(vel @ tangent)
                friction_mag = min(FRICTION * impulse, abs(v_t))
                vel = vel - np.sign(v_t) * friction_mag * tangent
        if step_index % sample_every == 0:
            trajectory.append(tuple(pos))
        speed = float(np.linalg.norm(vel))
        if speed < SETTLE_SPEED:
            container = _container_of(scene, pos)
            if container:
                if trajectory[-1] != tuple(pos):
                    trajectory.append(tuple(pos))
                return SimResult(tuple(trajectory), container, platform_hits)
    if trajectory[-1] != tuple(pos):
        trajectory.append(tuple(pos))
    container = _container_of(scene, pos)
    if container:
        return SimResult(tuple(trajectory), container, platform_hits)
    raise NoLanding(f"ball at {tuple(pos)} after {T_MAX}s")
