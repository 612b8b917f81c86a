"""Non-destructive overlay rendering: SVG documents, the reference
coordinate ruler, and raster compositing for multi-turn feedback.

The source image is never modified. Overlays are ordered vector layers
(one per stroke) that can be hidden, exported as SVG 1.1, or rasterized
over a copy of the base image for feedback/export.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from PIL import Image, ImageColor, ImageDraw, ImageFont

from .geometry import (
    CubicChain,
    Dot,
    Line,
    PathPrimitive,
    PixelPoint,
    pixel_of,
    stroke_to_primitives,
)
from .strokes import (
    AnnotationSet,
    CoordinateFrame,
    FrameMode,
    Origin,
    SizeUnit,
    validate,
)

__all__ = [
    "RasterImage",
    "Layer",
    "OverlayDocument",
    "GridAugmentation",
    "RenderRejected",
    "DimensionMismatch",
    "DEFAULT_PALETTE",
    "pixel_of",
    "render_overlay",
    "rasterize_overlay",
    "grid_ruler_layout",
    "grid_augment",
    "composite",
]

# High-contrast default stroke palette, cycled in stroke order.
DEFAULT_PALETTE = (
    "#e6194b", "#4363d8", "#3cb44b", "#f58231",
    "#911eb4", "#46f0f0", "#f032e6", "#9a6324",
)

# Stroke width in px at a 1000-px-wide image, scaled linearly.
STROKE_WIDTH_AT_1000 = 3.0

# Ruler defaults: margins as a fraction of the image dimension, label
# font as a fraction of image height.
MARGIN_FRACTION = 0.06
LABEL_FONT_FRACTION = 0.025
DEFAULT_TICK_STEP = 5


class RenderRejected(Exception):
    def __init__(self, violations):
        self.violations = violations
        super().__init__(f"annotation rejected: {violations}")


class DimensionMismatch(Exception):
    pass


@dataclass(frozen=True)
class RasterImage:
    """8-bit RGBA raster. The buffer is (height, width, 4) uint8."""

    pixels: np.ndarray

    def __post_init__(self):
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 4 or self.pixels.dtype != np.uint8:
            raise ValueError("RasterImage needs (H, W, 4) uint8 pixels")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def dims(self) -> tuple[int, int]:
        return self.width, self.height

    @classmethod
    def blank(cls, width: int, height: int, color: str = "white") -> "RasterImage":
        rgba = ImageColor.getrgb(color) + (255,)
        buf = np.zeros((height, width, 4), dtype=np.uint8)
        buf[:, :] = rgba[:4] if len(rgba) == 4 else rgba[:3] + (255,)
        return cls(buf)

    @classmethod
    def from_pil(cls, image: Image.Image) -> "RasterImage":
        return cls(np.asarray(image.convert("RGBA"), dtype=np.uint8).copy())

    @classmethod
    def from_png_bytes(cls, data: bytes) -> "RasterImage":
        return cls.from_pil(Image.open(io.BytesIO(data)))

    def to_pil(self) -> Image.Image:
        return Image.fromarray(self.pixels, "RGBA")

    def to_png_bytes(self) -> bytes:
        out = io.BytesIO()
        self.to_pil().save(out, format="PNG")
        return out.getvalue()

    def __eq__(self, other) -> bool:
        return isinstance(other, RasterImage) and np.array_equal(self.pixels, other.pixels)


@dataclass(frozen=True)
class TextElement:
    anchor: PixelPoint
    content: str
    font_px: float
    color: str


@dataclass(frozen=True)
class Layer:
    """One stroke's visual form: either path primitives or a text element."""

    stroke_id: str
    color: str
    stroke_width: float
    visible: bool = True
    primitives: tuple[PathPrimitive, ...] = ()
    text: Optional[TextElement] = None


@dataclass(frozen=True)
class OverlayDocument:
    """Ordered vector layers over (never baked into) a source image."""

    width: int
    height: int
    layers: tuple[Layer, ...] = ()
    background_ref: Optional[str] = None

    def with_visibility(self, stroke_id: str, visible: bool) -> "OverlayDocument":
        found = False
        layers = []
        for layer in self.layers:
            if layer.stroke_id == stroke_id:
                layers.append(replace(layer, visible=visible))
                found = True
            else:
                layers.append(layer)
        if not found:
            raise KeyError(stroke_id)
        return replace(self, layers=tuple(layers))

    def without_layer(self, stroke_id: str) -> "OverlayDocument":
        return replace(self, layers=tuple(
            layer for layer in self.layers if layer.stroke_id != stroke_id))

    def to_svg(self) -> str:
        return _document_svg(self)


@dataclass(frozen=True)
class GridAugmentation:
    left_margin: int
    bottom_margin: int
    tick_step: int
    label_font_px: int
    augmented_dims: tuple[int, int]
    ticks_x: tuple[tuple[float, Optional[int]], ...]
    ticks_y: tuple[tuple[float, Optional[int]], ...]


def _cell_height(frame: CoordinateFrame, height: float) -> float:
    if frame.mode is FrameMode.GRID_CELLS:
        return height / (frame.res_y + 1)
    return height / frame.scale


def render_overlay(annotation: AnnotationSet, frame: CoordinateFrame,
                   image_dims: tuple[int, int],
                   palette: Sequence[str] = DEFAULT_PALETTE,
                   background_ref: Optional[str] = None) -> OverlayDocument:
    """Build one vector layer per stroke, in stroke order.

    Geometry strokes get path primitives and cycle the palette; text
    strokes become centered text elements with their declared style.
    Out-of-frame anchors degrade by clamping (validate still reports
    them); structural violations (duplicate ids, mismatched counts,
    multi-point text) reject the render.
    """
    structural = [v for v in validate(annotation, frame)
                  if v.kind in ("duplicate_id", "count_mismatch", "multi_point_text")]
    if structural:
        raise RenderRejected(structural)

    w, h = image_dims
    width_px = STROKE_WIDTH_AT_1000 * w / 1000.0
    layers = []
    color_cursor = 0
    for stroke in annotation.strokes:
        if stroke.is_text():
            style = stroke.text.style
            if style.unit is SizeUnit.PIXELS:
                font_px = style.size
            else:
                font_px = style.size * _cell_height(frame, h)
            anchor = pixel_of(stroke.points[0], frame, image_dims, clamp=True)
            layers.append(Layer(
                stroke_id=stroke.id, color=style.color, stroke_width=width_px,
                text=TextElement(anchor, stroke.text.content, font_px, style.color)))
        else:
            color = palette[color_cursor % len(palette)]
            color_cursor += 1
            prims = tuple(stroke_to_primitives(stroke, frame, image_dims))
            layers.append(Layer(
                stroke_id=stroke.id, color=color, stroke_width=width_px,
                primitives=prims))
    return OverlayDocument(width=w, height=h, layers=tuple(layers),
                           background_ref=background_ref)


# ---------------------------------------------------------------------------
# SVG output

def _f(v: float) -> str:
    return f"{v:.2f}"


def _path_d(primitives: Sequence[PathPrimitive]) -> str:
    parts = []
    for prim in primitives:
        if isinstance(prim, Line):
            parts.append(f"M {_f(prim.a.x)} {_f(prim.a.y)} L {_f(prim.b.x)} {_f(prim.b.y)}")
        elif isinstance(prim, CubicChain):
            seg = prim.segments[0]
            parts.append(f"M {_f(seg.p0.x)} {_f(seg.p0.y)}")
            for seg in prim.segments:
                parts.append(
                    f"C {_f(seg.p1.x)} {_f(seg.p1.y)}, "
                    f"{_f(seg.p2.x)} {_f(seg.p2.y)}, "
                    f"{_f(seg.p3.x)} {_f(seg.p3.y)}")
    return " ".join(parts)


def _layer_svg(layer: Layer) -> str:
    display = "" if layer.visible else ' display="none"'
    open_tag = (f'<g id="stroke-{layer.stroke_id}" '
                f'data-stroke-id="{layer.stroke_id}"{display}>')
    body = []
    if layer.text is not None:
        t = layer.text
        body.append(
            f'<text x="{_f(t.anchor.x)}" y="{_f(t.anchor.y)}" '
            f'font-size="{_f(t.font_px)}" fill="{t.color}" '
            f'text-anchor="middle" dominant-baseline="central" '
            f'font-family="sans-serif">{t.content}</text>')
    else:
        dots = [p for p in layer.primitives if isinstance(p, Dot)]
        strokes = [p for p in layer.primitives if not isinstance(p, Dot)]
        for dot in dots:
            body.append(
                f'<circle cx="{_f(dot.center.x)}" cy="{_f(dot.center.y)}" '
                f'r="{_f(dot.radius)}" fill="{layer.color}"/>')
        if strokes:
            body.append(
                f'<path d="{_path_d(strokes)}" fill="none" stroke="{layer.color}" '
                f'stroke-width="{_f(layer.stroke_width)}" stroke-linecap="round" '
                f'stroke-linejoin="round"/>')
    return "\n    ".join([open_tag] + body) + "\n  </g>"


def _document_svg(doc: OverlayDocument) -> str:
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'xmlns:xlink="http://www.w3.org/1999/xlink" version="1.1" '
        f'width="{doc.width}" height="{doc.height}" '
        f'viewBox="0 0 {doc.width} {doc.height}">',
    ]
    if doc.background_ref:
        lines.append(f'  <image id="base-image" xlink:href="{doc.background_ref}" '
                     f'x="0" y="0" width="{doc.width}" height="{doc.height}"/>')
    else:
        lines.append("  <!-- base image supplied separately; overlay only -->")
    for layer in doc.layers:
        lines.append("  " + _layer_svg(layer))
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# coordinate ruler

def grid_ruler_layout(frame: CoordinateFrame, image_dims: tuple[int, int],
                      tick_step: int = DEFAULT_TICK_STEP,
                      left_margin: Optional[int] = None,
                      bottom_margin: Optional[int] = None) -> GridAugmentation:
    """Pure layout of the appended ruler: tick/label positions in the
    coordinates of the augmented image."""
    if frame.mode is not FrameMode.GRID_CELLS:
        raise ValueError("ruler layout requires a grid frame")
    w, h = image_dims
    lm = int(round(w * MARGIN_FRACTION)) if left_margin is None else left_margin
    bm = int(round(h * MARGIN_FRACTION)) if bottom_margin is None else bottom_margin
    font_px = max(6, int(round(h * LABEL_FONT_FRACTION)))
    n_cols = frame.res_x + 1
    n_rows = frame.res_y + 1
    ticks_x = []
    for c in range(n_cols):
        px = lm + (c + 0.5) * w / n_cols
        label = c if c % tick_step == 0 or c == frame.res_x else None
        ticks_x.append((px, label))
    ticks_y = []
    for r in range(n_rows):
        py = (r + 0.5) * h / n_rows
        if frame.origin is Origin.BOTTOM_LEFT:
            py = h - py
        label = r if r % tick_step == 0 or r == frame.res_y else None
        ticks_y.append((py, label))
    return GridAugmentation(
        left_margin=lm, bottom_margin=bm, tick_step=tick_step,
        label_font_px=font_px, augmented_dims=(w + lm, h + bm),
        ticks_x=tuple(ticks_x), ticks_y=tuple(ticks_y))


def _label_font(px: int) -> ImageFont.ImageFont:
    try:
        return ImageFont.load_default(size=px)
    except TypeError:  # very old Pillow
        return ImageFont.load_default()


def grid_augment(image: RasterImage, frame: CoordinateFrame,
                 tick_step: int = DEFAULT_TICK_STEP,
                 left_margin: Optional[int] = None,
                 bottom_margin: Optional[int] = None) -> RasterImage:
    """Append the labeled coordinate ruler to the left and bottom.

    The original pixels are copied unchanged into their region of the
    larger canvas; cropping the margins recovers the input exactly.
    """
    layout = grid_ruler_layout(frame, image.dims, tick_step,
                               left_margin, bottom_margin)
    w, h = image.dims
    aug_w, aug_h = layout.augmented_dims
    canvas = Image.new("RGBA", (aug_w, aug_h), (255, 255, 255, 255))
    canvas.paste(image.to_pil(), (layout.left_margin, 0))
    draw = ImageDraw.Draw(canvas)
    font = _label_font(layout.label_font_px)
    # Axis lines and ticks stay strictly inside the margins so the
    # original pixels are untouched.
    axis_x = layout.left_margin - 1
    axis_y = h  # top row of the bottom margin
    tick_len = max(3, layout.bottom_margin // 6)
    draw.line([(axis_x, axis_y), (aug_w, axis_y)], fill="black", width=1)
    draw.line([(axis_x, 0), (axis_x, axis_y)], fill="black", width=1)
    # cell boundaries as ticks, cell centers as labels
    n_cols = frame.res_x + 1
    for b in range(n_cols + 1):
        bx = layout.left_margin + b * w / n_cols
        draw.line([(min(bx, aug_w - 1), axis_y), (min(bx, aug_w - 1), axis_y + tick_len)],
                  fill="black", width=1)
    n_rows = frame.res_y + 1
    for b in range(n_rows + 1):
        by = min(b * h / n_rows, axis_y)
        draw.line([(axis_x - tick_len, by), (axis_x, by)], fill="black", width=1)
    for px, label in layout.ticks_x:
        if label is not None:
            draw.text((px, axis_y + tick_len + layout.bottom_margin * 0.35),
                      str(label), fill="black", font=font, anchor="mm")
    for py, label in layout.ticks_y:
        if label is not None:
            draw.text((layout.left_margin * 0.45, py), str(label),
                      fill="black", font=font, anchor="mm")
    return RasterImage.from_pil(canvas)


# ---------------------------------------------------------------------------
# compositing

def _flatten_chain(chain: CubicChain, samples_per_segment: int = 48) -> list[tuple[float, float]]:
    pts: list[tuple[float, float]] = []
    for seg in chain.segments:
        dense = seg.evaluate(np.linspace(0.0, 1.0, samples_per_segment))
        chunk = [(float(x), float(y)) for x, y in dense]
        if pts:
            chunk = chunk[1:]
        pts.extend(chunk)
    return pts


def _draw_layer(draw: ImageDraw.ImageDraw, layer: Layer):
    color = ImageColor.getrgb(layer.color) + (255,)
    width = max(1, int(round(layer.stroke_width)))
    if layer.text is not None:
        t = layer.text
        font = _label_font(max(6, int(round(t.font_px))))
        draw.text((t.anchor.x, t.anchor.y), t.content, fill=color,
                  font=font, anchor="mm")
        return
    for prim in layer.primitives:
        if isinstance(prim, Dot):
            r = prim.radius
            draw.ellipse([prim.center.x - r, prim.center.y - r,
                          prim.center.x + r, prim.center.y + r], fill=color)
        elif isinstance(prim, Line):
            draw.line([(prim.a.x, prim.a.y), (prim.b.x, prim.b.y)],
                      fill=color, width=width)
            for p in (prim.a, prim.b):
                hw = width / 2.0
                draw.ellipse([p.x - hw, p.y - hw, p.x + hw, p.y + hw], fill=color)
        elif isinstance(prim, CubicChain):
            draw.line(_flatten_chain(prim), fill=color, width=width, joint="curve")


def rasterize_overlay(doc: OverlayDocument) -> RasterImage:
    """Visible layers drawn on a transparent canvas."""
    canvas = Image.new("RGBA", (doc.width, doc.height), (0, 0, 0, 0))
    draw = ImageDraw.Draw(canvas)
    for layer in doc.layers:
        if layer.visible:
            _draw_layer(draw, layer)
    return RasterImage.from_pil(canvas)


def composite(base: RasterImage, overlay: OverlayDocument) -> RasterImage:
    """Alpha-blend visible overlay layers over a copy of the base."""
    if (overlay.width, overlay.height) != base.dims:
        raise DimensionMismatch(
            f"overlay {overlay.width}x{overlay.height} vs base "
            f"{base.width}x{base.height}")
    out = base.to_pil()
    out.alpha_composite(rasterize_overlay(overlay).to_pil())
    return RasterImage.from_pil(out)
