"""Geometry kernel: frame-to-pixel mapping, corner splitting, and
least-squares cubic Bézier fitting of stroke samples.

A stroke's ordered samples and timestamps become renderable primitives:
one sample is a dot, two are a straight line, and longer runs are fit
with endpoint-interpolating cubics (chained in windows so long strokes
stay faithful to their samples). Doubled points with adjacent t-values
are corners and split the stroke into independent runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .strokes import CoordinateFrame, FrameMode, GridRef, Origin, Stroke

__all__ = [
    "PixelPoint",
    "CubicBezier",
    "Dot",
    "Line",
    "CubicChain",
    "PathPrimitive",
    "DegenerateSystem",
    "OutOfFrame",
    "pixel_of",
    "split_corners",
    "fit_cubic",
    "stroke_to_primitives",
    "DOT_RADIUS_AT_1000",
]

# Dot radius in px at a 1000-px-wide image, scaled linearly with width.
DOT_RADIUS_AT_1000 = 4.0

# Identical tokens map to identical pixels; anything farther apart than
# this is a genuine distinct sample, not a written-twice corner.
CORNER_EPS = 1e-6

# Corners are doubled points whose two t entries sit within this gap.
CORNER_T_GAP = 0.1

# Runs longer than this are subdivided before fitting.
MAX_WINDOW_SAMPLES = 8

# Target spacing when subdividing: at most this many sample intervals
# per window, so every window keeps at least one interior sample and a
# 9-sample circle stays within 2% radial error.
WINDOW_INTERVALS = 3


@dataclass(frozen=True)
class PixelPoint:
    x: float
    y: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


@dataclass(frozen=True)
class CubicBezier:
    p0: PixelPoint
    p1: PixelPoint
    p2: PixelPoint
    p3: PixelPoint

    def control_array(self) -> np.ndarray:
        return np.array([[p.x, p.y] for p in (self.p0, self.p1, self.p2, self.p3)])

    def evaluate(self, ts: Sequence[float]) -> np.ndarray:
        t = np.asarray(ts, dtype=float)[:, None]
        cp = self.control_array()
        return ((1 - t) ** 3 * cp[0] + 3 * t * (1 - t) ** 2 * cp[1]
                + 3 * t ** 2 * (1 - t) * cp[2] + t ** 3 * cp[3])


@dataclass(frozen=True)
class Dot:
    center: PixelPoint
    radius: float


@dataclass(frozen=True)
class Line:
    a: PixelPoint
    b: PixelPoint


@dataclass(frozen=True)
class CubicChain:
    segments: tuple[CubicBezier, ...]


PathPrimitive = Dot | Line | CubicChain


class DegenerateSystem(Exception):
    """The fit carries no information about the free control points."""


class OutOfFrame(Exception):
    def __init__(self, ref: GridRef, frame: CoordinateFrame):
        super().__init__(f"{ref.token()} outside frame bounds {frame.bounds()}")


def pixel_of(ref: GridRef, frame: CoordinateFrame,
             image_dims: tuple[float, float], *, clamp: bool = False) -> PixelPoint:
    """Map a frame token to image pixels (origin top-left).

    Grid mode anchors at cell centers; normalized mode scales the 0..scale
    range across the image. Bottom-left-origin frames flip the row axis.
    Out-of-bounds refs raise OutOfFrame unless clamp=True, in which case
    they are clamped to the frame boundary (render-time degradation;
    validate() still reports them).
    """
    w, h = image_dims
    max_col, max_row = frame.bounds()
    col, row = ref.col, ref.row
    if not (0 <= col <= max_col and 0 <= row <= max_row):
        if not clamp:
            raise OutOfFrame(ref, frame)
        col = min(max(col, 0), max_col)
        row = min(max(row, 0), max_row)
    if frame.mode is FrameMode.GRID_CELLS:
        x = (col + 0.5) * w / (frame.res_x + 1)
        y = (row + 0.5) * h / (frame.res_y + 1)
        if frame.origin is Origin.BOTTOM_LEFT:
            y = h - y
    else:
        x = col * w / frame.scale
        y = row * h / frame.scale
        if frame.origin is Origin.BOTTOM_LEFT:
            y = h - y
    return PixelPoint(x, y)


def split_corners(points: Sequence[PixelPoint],
                  ts: Sequence[float]) -> list[tuple[list[PixelPoint], list[float]]]:
    """Split a sample run at written-twice corner points.

    A corner is an adjacent pair of identical points whose t-values
    differ by at most CORNER_T_GAP. Each resulting run keeps its own
    copy of the corner sample and has its t-values renormalized to
    [0, 1]; concatenating the runs reproduces the input samples.
    """
    if len(points) != len(ts):
        raise ValueError("points and ts must have equal length")
    n = len(points)
    cut_after = []
    for j in range(n - 1):
        same = (abs(points[j].x - points[j + 1].x) <= CORNER_EPS
                and abs(points[j].y - points[j + 1].y) <= CORNER_EPS)
        if same and abs(ts[j + 1] - ts[j]) <= CORNER_T_GAP + 1e-12:
            cut_after.append(j)
    runs = []
    start = 0
    for cut in cut_after + [n - 1]:
        run_pts = list(points[start:cut + 1])
        run_ts = list(ts[start:cut + 1])
        runs.append((run_pts, _renorm(run_ts)))
        start = cut + 1
    return [r for r in runs if r[0]]


def _renorm(ts: list[float]) -> list[float]:
    if len(ts) < 2:
        return list(ts)
    lo, hi = ts[0], ts[-1]
    if hi <= lo:
        return list(np.linspace(0.0, 1.0, len(ts)))
    return [(t - lo) / (hi - lo) for t in ts]


def fit_cubic(points: Sequence[PixelPoint], ts: Sequence[float]) -> CubicBezier:
    """Endpoint-interpolating least-squares cubic through the samples.

    p0 and p3 are pinned to the first and last sample; the free control
    points minimize the sum of squared distances between the Bernstein
    evaluation at the given ts and the samples. The system is solved in
    offsets from the chord thirds, so rank-deficient but consistent
    inputs (e.g. a single interior sample) take the straightest curve
    among the minimizers rather than an origin-dependent one.

    Raises DegenerateSystem when no interior sample constrains the free
    control points (all interior ts at 0 or 1).
    """
    pts = np.array([[p.x, p.y] for p in points], dtype=float)
    t = np.asarray(ts, dtype=float)
    if len(pts) < 3 or len(pts) != len(t):
        raise ValueError("fit_cubic needs >= 3 samples with matching ts")
    p0, p3 = pts[0], pts[-1]
    b1 = 3.0 * t * (1.0 - t) ** 2
    b2 = 3.0 * t ** 2 * (1.0 - t)
    design = np.stack([b1, b2], axis=1)
    if np.max(np.abs(design)) < 1e-12:
        raise DegenerateSystem("no interior samples constrain the fit")
    base1 = p0 + (p3 - p0) / 3.0
    base2 = p0 + 2.0 * (p3 - p0) / 3.0
    rhs = (pts - np.outer((1.0 - t) ** 3, p0) - np.outer(t ** 3, p3)
           - np.outer(b1, base1) - np.outer(b2, base2))
    sol, *_ = np.linalg.lstsq(design, rhs, rcond=None)
    p1 = base1 + sol[0]
    p2 = base2 + sol[1]
    return CubicBezier(PixelPoint(*p0), PixelPoint(*p1),
                       PixelPoint(*p2), PixelPoint(*p3))


def _line_as_cubic(a: PixelPoint, b: PixelPoint) -> CubicBezier:
    av, bv = a.as_array(), b.as_array()
    return CubicBezier(a, PixelPoint(*(av + (bv - av) / 3.0)),
                       PixelPoint(*(av + 2.0 * (bv - av) / 3.0)), b)


def _window_bounds(n_samples: int) -> list[tuple[int, int]]:
    """Consecutive (start, end) windows sharing endpoints, each at most
    WINDOW_INTERVALS sample intervals (and so at most MAX_WINDOW_SAMPLES
    samples), balanced so sizes differ by at most one interval."""
    intervals = n_samples - 1
    if n_samples <= MAX_WINDOW_SAMPLES:
        return [(0, n_samples - 1)]
    n_win = -(-intervals // WINDOW_INTERVALS)
    base, extra = divmod(intervals, n_win)
    bounds = []
    start = 0
    for k in range(n_win):
        size = base + (1 if k < extra else 0)
        bounds.append((start, start + size))
        start += size
    return bounds


def _fit_run(pts: list[PixelPoint], ts: list[float]) -> list[PathPrimitive]:
    if len(pts) == 1:
        return []
    if len(pts) == 2:
        return [Line(pts[0], pts[1])]
    segments = []
    for start, end in _window_bounds(len(pts)):
        window = pts[start:end + 1]
        wts = _renorm(ts[start:end + 1])
        if len(window) == 2:
            segments.append(_line_as_cubic(window[0], window[1]))
            continue
        try:
            segments.append(fit_cubic(window, wts))
        except DegenerateSystem:
            # Fall back to a polyline through the window samples.
            segments.extend(_line_as_cubic(a, b)
                            for a, b in zip(window, window[1:]))
    return [CubicChain(tuple(segments))]


def stroke_to_primitives(stroke: Stroke, frame: CoordinateFrame,
                         image_dims: tuple[float, float]) -> list[PathPrimitive]:
    """Convert a stroke's samples into renderable path primitives.

    One sample maps to a dot, two to a straight line; longer strokes are
    corner-split and each run fit as a cubic chain. Out-of-frame refs
    are clamped so a slightly wild stroke still renders. Text strokes
    carry no geometry here (the renderer anchors their text element at
    pixel_of of the single point).
    """
    w, _ = image_dims
    pixels = [pixel_of(p, frame, image_dims, clamp=True) for p in stroke.points]
    if len(pixels) == 1:
        return [Dot(pixels[0], DOT_RADIUS_AT_1000 * w / 1000.0)]
    if len(pixels) == 2:
        return [Line(pixels[0], pixels[1])]
    primitives: list[PathPrimitive] = []
    for run_pts, run_ts in split_corners(pixels, list(stroke.t_values)):
        primitives.extend(_fit_run(run_pts, run_ts))
    return primitives
