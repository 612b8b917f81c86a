"""Deterministic rasterization of generated task instances."""

from __future__ import annotations

import math

from PIL import Image, ImageDraw, ImageFont

from ..rendering import RasterImage
from .maze import MAZE_SIZE
from .types import BallGT, DotsGT, MazeGT, TaskInstance, TaskKind

__all__ = ["render_task_image"]

MAZE_MARGIN = 40
WALL_WIDTH = 6
DASH_LEN = 10


def _font(px: int):
    try:
        return ImageFont.load_default(size=px)
    except TypeError:
        return ImageFont.load_default()


def _render_dots(instance: TaskInstance) -> Image.Image:
    truth: DotsGT = instance.truth
    img = Image.new("RGBA", (instance.width, instance.height),
                    (255, 255, 255, 255))
    draw = ImageDraw.Draw(img)
    r = truth.dot_radius
    font = _font(int(2.2 * r))
    for i, (x, y) in enumerate(truth.points, start=1):
        draw.ellipse([x - r, y - r, x + r, y + r], fill=(20, 20, 20, 255))
        draw.text((x + 1.9 * r, y - 1.9 * r), str(i),
                  fill=(20, 20, 20, 255), font=font, anchor="mm")
    return img


def _dashed_line(draw, a, b, fill, width):
    length = math.dist(a, b)
    if length == 0:
        return
    n = max(1, int(length // (2 * DASH_LEN)))
    for k in range(n + 1):
        t0 = (2 * k) * DASH_LEN / length
        t1 = min((2 * k + 1) * DASH_LEN / length, 1.0)
        if t0 >= 1.0:
            break
        p = (a[0] + (b[0] - a[0]) * t0, a[1] + (b[1] - a[1]) * t0)
        q = (a[0] + (b[0] - a[0]) * t1, a[1] + (b[1] - a[1]) * t1)
        draw.line([p, q], fill=fill, width=width)


def _render_maze(instance: TaskInstance) -> Image.Image:
    truth: MazeGT = instance.truth
    img = Image.new("RGBA", (instance.width, instance.height),
                    (255, 255, 255, 255))
    draw = ImageDraw.Draw(img)
    side = min(instance.width, instance.height) - 2 * MAZE_MARGIN
    cell = side / MAZE_SIZE
    ox = (instance.width - side) / 2
    oy = (instance.height - side) / 2

    def corner(r, c):
        return (ox + c * cell, oy + r * cell)

    def cell_box(r, c, inset):
        x, y = corner(r, c)
        return [x + inset, y + inset, x + cell - inset, y + cell - inset]

    draw.rectangle(cell_box(*truth.start, inset=cell * 0.18),
                   fill=(40, 170, 60, 255))
    draw.rectangle(cell_box(*truth.end, inset=cell * 0.18),
                   fill=(210, 40, 40, 255))
    # interior boundaries: solid black when walled, dashed gray when open
    for r in range(MAZE_SIZE):
        for c in range(MAZE_SIZE):
            if c + 1 < MAZE_SIZE:
                edge = (((r, c), (r, c + 1)) if (r, c) <= (r, c + 1)
                        else ((r, c + 1), (r, c)))
                a, b = corner(r, c + 1), corner(r + 1, c + 1)
                if edge in truth.walls:
                    draw.line([a, b], fill=(0, 0, 0, 255), width=WALL_WIDTH)
                else:
                    _dashed_line(draw, a, b, (150, 150, 150, 255), 2)
            if r + 1 < MAZE_SIZE:
                edge = ((r, c), (r + 1, c))
                a, b = corner(r + 1, c), corner(r + 1, c + 1)
                if edge in truth.walls:
                    draw.line([a, b], fill=(0, 0, 0, 255), width=WALL_WIDTH)
                else:
                    _dashed_line(draw, a, b, (150, 150, 150, 255), 2)
    draw.rectangle([ox, oy, ox + side, oy + side],
                   outline=(0, 0, 0, 255), width=WALL_WIDTH)
    return img


def _render_ball(instance: TaskInstance) -> Image.Image:
    truth: BallGT = instance.truth
    scene = truth.scene
    img = Image.new("RGBA", (instance.width, instance.height),
                    (255, 255, 255, 255))
    draw = ImageDraw.Draw(img)
    for a, b in scene.platforms:
        draw.line([tuple(a), tuple(b)], fill=(0, 0, 0, 255), width=8)
    floor_y = scene.containers[0].y1
    boundaries = sorted({c.x0 for c in scene.containers}
                        | {c.x1 for c in scene.containers})
    for x in boundaries:
        draw.line([(x, scene.wall_top), (x, floor_y)],
                  fill=(0, 0, 0, 255), width=8)
    draw.line([(scene.containers[0].x0, floor_y),
               (scene.containers[-1].x1, floor_y)],
              fill=(0, 0, 0, 255), width=8)
    font = _font(36)
    for i, box in enumerate(scene.containers, start=1):
        draw.text(((box.x0 + box.x1) / 2, (box.y0 + box.y1) / 2 + 20),
                  str(i), fill=(90, 90, 90, 255), font=font, anchor="mm")
    bx, by = scene.ball_start
    r = scene.ball_radius
    draw.ellipse([bx - r, by - r, bx + r, by + r], fill=(200, 30, 30, 255))
    return img


def render_task_image(instance: TaskInstance) -> RasterImage:
    """Draw a generated instance; identical input yields identical
    pixels. Manifest-backed kinds (counting, shapes, labels, free VQA)
    ship their own image files instead."""
    if instance.kind is TaskKind.CONNECT_DOTS:
        return RasterImage.from_pil(_render_dots(instance))
    if instance.kind is TaskKind.MAZE:
        return RasterImage.from_pil(_render_maze(instance))
    if instance.kind is TaskKind.BALL_DROP:
        return RasterImage.from_pil(_render_ball(instance))
    raise ValueError(f"{instance.kind.value} instances are not generated; "
                     "their images arrive via the manifest")
