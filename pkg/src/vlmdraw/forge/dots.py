"""Connect-the-dots generators: random scatter layouts and outline
puzzles resampled from silhouette contours."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .types import DotsGT, TaskInstance, TaskKind

__all__ = [
    "PlacementFailure", "DegenerateContour", "SelfIntersecting",
    "gen_random_dots", "gen_outline_dots", "douglas_peucker",
]

DOTS_QUESTION = (
    "Connect the dots in order by drawing a straight line from each "
    "numbered dot to the next, starting at 1. When you are done, give "
    "the total number of dots as your final answer.")

OUTLINE_DOT_COUNT = 30

# Douglas-Peucker tolerance as a fraction of the contour bounding-box
# diagonal, and the turn angle above which a simplified vertex counts
# as a sharp corner that resampling must hit exactly.
DP_TOLERANCE_FRACTION = 0.005
CORNER_TURN_DEG = 30.0


class PlacementFailure(Exception):
    pass


class DegenerateContour(Exception):
    pass


class SelfIntersecting(Exception):
    pass


def gen_random_dots(n: int, seed: int, dims: tuple[int, int] = (800, 800),
                    dot_radius: float = 8.0,
                    max_attempts: int = 20000) -> TaskInstance:
    """n numbered dots with pairwise center distance >= 3x the dot
    radius, placed by rejection sampling; deterministic in the seed."""
    if n < 2:
        raise ValueError("need at least 2 dots")
    w, h = dims
    rng = np.random.default_rng(seed)
    margin = 4 * dot_radius
    min_dist = 3 * dot_radius
    points: list[tuple[float, float]] = []
    attempts = 0
    while len(points) < n:
        if attempts >= max_attempts:
            raise PlacementFailure(
                f"could not place {n} dots in {dims} after {max_attempts} tries")
        attempts += 1
        x = float(np.round(rng.uniform(margin, w - margin)))
        y = float(np.round(rng.uniform(margin, h - margin)))
        if all(math.hypot(x - px, y - py) >= min_dist for px, py in points):
            points.append((x, y))
    return TaskInstance(
        id=f"dots_random_{n}_{seed}",
        kind=TaskKind.CONNECT_DOTS, width=w, height=h,
        question=DOTS_QUESTION,
        truth=DotsGT(points=tuple(points), dot_radius=dot_radius))


# ---------------------------------------------------------------------------
# outline puzzles

def _perp_distance(point, start, end) -> float:
    px, py = point
    x1, y1 = start
    x2, y2 = end
    dx, dy = x2 - x1, y2 - y1
    norm = math.hypot(dx, dy)
    if norm == 0:
        return math.hypot(px - x1, py - y1)
    return abs(dy * px - dx * py + x2 * y1 - y2 * x1) / norm


def douglas_peucker(points: Sequence[tuple[float, float]],
                    tolerance: float) -> list[tuple[float, float]]:
    """Classic recursive polyline simplification."""
    if len(points) < 3:
        return list(points)
    max_d, index = 0.0, 0
    for i in range(1, len(points) - 1):
        d = _perp_distance(points[i], points[0], points[-1])
        if d > max_d:
            max_d, index = d, i
    if max_d <= tolerance:
        return [points[0], points[-1]]
    left = douglas_peucker(points[:index + 1], tolerance)
    right = douglas_peucker(points[index:], tolerance)
    return left[:-1] + right


def _segments_intersect(p1, p2, p3, p4) -> bool:
    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    d1 = cross(p3, p4, p1)
    d2 = cross(p3, p4, p2)
    d3 = cross(p1, p2, p3)
    d4 = cross(p1, p2, p4)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def _self_intersects(loop: list[tuple[float, float]]) -> bool:
    n = len(loop)
    segments = [(loop[i], loop[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue  # adjacent around the loop
            if _segments_intersect(*segments[i], *segments[j]):
                return True
    return False


def _arc_lengths(loop: list[tuple[float, float]]) -> np.ndarray:
    pts = np.asarray(loop + [loop[0]])
    return np.hypot(*(np.diff(pts, axis=0).T))


def _point_at(loop, cumulative, distance):
    """Point at the given arc distance along the closed loop."""
    total = cumulative[-1]
    distance = distance % total
    i = int(np.searchsorted(cumulative, distance, side="right"))
    prev = cumulative[i - 1] if i > 0 else 0.0
    seg_len = cumulative[i] - prev
    frac = 0.0 if seg_len == 0 else (distance - prev) / seg_len
    a = loop[i]
    b = loop[(i + 1) % len(loop)]
    return (a[0] + frac * (b[0] - a[0]), a[1] + frac * (b[1] - a[1]))


def _turn_angle_deg(prev, vertex, nxt) -> float:
    v1 = (vertex[0] - prev[0], vertex[1] - prev[1])
    v2 = (nxt[0] - vertex[0], nxt[1] - vertex[1])
    n1, n2 = math.hypot(*v1), math.hypot(*v2)
    if n1 == 0 or n2 == 0:
        return 0.0
    cosang = max(-1.0, min(1.0, (v1[0] * v2[0] + v1[1] * v2[1]) / (n1 * n2)))
    return math.degrees(math.acos(cosang))


def _resample_loop(loop: list[tuple[float, float]], n_dots: int
                   ) -> list[tuple[float, float]]:
    """Evenly spaced dots along the loop; sharp corners (big direction
    changes surviving simplification) are anchored exactly, with the
    remaining dots distributed between them proportional to arc length."""
    n = len(loop)
    seg = _arc_lengths(loop)
    cumulative = np.cumsum(seg)
    total = float(cumulative[-1])
    corner_idx = [i for i in range(n)
                  if _turn_angle_deg(loop[i - 1], loop[i], loop[(i + 1) % n])
                  > CORNER_TURN_DEG]
    if not corner_idx or len(corner_idx) > n_dots:
        return [_point_at(loop, cumulative, k * total / n_dots)
                for k in range(n_dots)]
    # arc-length positions of corners, in order around the loop
    positions = [0.0 if i == 0 else float(cumulative[i - 1]) for i in corner_idx]
    n_corners = len(positions)
    arcs = [(positions[(k + 1) % n_corners] - positions[k]) % total or total
            for k in range(n_corners)]
    interior_total = n_dots - n_corners
    shares = [interior_total * a / total for a in arcs]
    counts = [int(math.floor(s)) for s in shares]
    remainders = sorted(range(n_corners), key=lambda k: shares[k] - counts[k],
                        reverse=True)
    for k in remainders[:interior_total - sum(counts)]:
        counts[k] += 1
    dots = []
    for k in range(n_corners):
        start = positions[k]
        dots.append(_point_at(loop, cumulative, start))
        for m in range(1, counts[k] + 1):
            dots.append(_point_at(loop, cumulative,
                                  start + arcs[k] * m / (counts[k] + 1)))
    return dots


def gen_outline_dots(contours: Sequence[Sequence[tuple[float, float]]],
                     seed: int = 0, dims: tuple[int, int] = (800, 800),
                     dot_radius: float = 8.0) -> TaskInstance:
    """Turn silhouette contours into a 30-dot connect-the-dots puzzle.

    Contours are simplified (Douglas-Peucker at 0.5% of the bounding-box
    diagonal), normalized to the unit square, and the longest closed
    contour is resampled to exactly 30 arc-equidistant dots (sharp
    corners anchored). Self-intersecting simplified contours are
    rejected.
    """
    del seed  # placement is fully determined by the contour
    if not contours:
        raise DegenerateContour("no contours given")
    all_pts = [p for c in contours for p in c]
    xs = [p[0] for p in all_pts]
    ys = [p[1] for p in all_pts]
    diag = math.hypot(max(xs) - min(xs), max(ys) - min(ys))
    if diag == 0:
        raise DegenerateContour("contours collapse to a point")
    tol = DP_TOLERANCE_FRACTION * diag

    best_loop, best_len = None, 0.0
    for contour in contours:
        pts = [tuple(map(float, p)) for p in contour]
        if len(pts) >= 2 and pts[0] == pts[-1]:
            pts = pts[:-1]
        if len(pts) < 3:
            continue
        simplified = douglas_peucker(pts + [pts[0]], tol)[:-1]
        if len(simplified) < 3:
            continue
        length = float(_arc_lengths(simplified).sum())
        if length > best_len:
            best_loop, best_len = simplified, length
    if best_loop is None:
        raise DegenerateContour("no usable closed contour")
    if _self_intersects(best_loop):
        raise SelfIntersecting("simplified main contour crosses itself")

    # normalize to the unit square, preserving aspect
    xs = [p[0] for p in best_loop]
    ys = [p[1] for p in best_loop]
    span = max(max(xs) - min(xs), max(ys) - min(ys))
    loop = [((x - min(xs)) / span, (y - min(ys)) / span) for x, y in best_loop]

    dots_unit = _resample_loop(loop, OUTLINE_DOT_COUNT)

    w, h = dims
    margin = 6 * dot_radius
    scale = min(w, h) - 2 * margin
    points = tuple((margin + x * scale, margin + y * scale)
                   for x, y in dots_unit)
    return TaskInstance(
        id=f"dots_outline_{abs(hash(points)) % 10**8}",
        kind=TaskKind.CONNECT_DOTS, width=w, height=h,
        question=DOTS_QUESTION,
        truth=DotsGT(points=points, dot_radius=dot_radius))
