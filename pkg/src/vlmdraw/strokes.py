"""Stroke annotation data model, parser, and serializers.

The model output grammar is an XML-style dialect: an ``<answer>`` block
holding a single ``<strokes>`` section of ``<s1>..<sN>`` stroke blocks,
each with quoted ``xAyB`` point tokens, comma-separated t-values, an id,
and (for counting/labeling) a ``<text>`` payload, optionally followed by
a ``<final_answer>`` tag.  A structurally equivalent JSON dialect
(``.anno.json``) is provided for programmatic use.

Parsing is deliberately lenient about the noise chat models produce
(code fences, missing quotes, stray whitespace, a missing ``<answer>``
wrapper around otherwise well-formed stroke blocks) but every repair
rule is enumerable and everything beyond them is a hard ParseError.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

__all__ = [
    "Origin",
    "FrameMode",
    "SizeUnit",
    "Dialect",
    "GridRef",
    "CoordinateFrame",
    "TextStyle",
    "TextPayload",
    "Stroke",
    "AnnotationSet",
    "Violation",
    "ParseError",
    "NoAnswerBlock",
    "CountMismatch",
    "BadToken",
    "parse_annotation",
    "serialize_annotation",
    "validate",
]


class Origin(Enum):
    TOP_LEFT = "top_left"
    BOTTOM_LEFT = "bottom_left"


class FrameMode(Enum):
    GRID_CELLS = "grid_cells"
    NORMALIZED = "normalized"


class SizeUnit(Enum):
    CELLS = "cells"
    PIXELS = "px"


class Dialect(Enum):
    XML_STYLE = "xml"
    JSON = "json"


@dataclass(frozen=True)
class GridRef:
    """One ``xAyB`` token: integer column and row indices in frame space."""

    col: int
    row: int

    def token(self) -> str:
        return f"x{self.col}y{self.row}"


@dataclass(frozen=True)
class CoordinateFrame:
    """Convention mapping stroke tokens to image positions.

    Grid-cell frames index cells 0..res on each axis (the reference
    ruler appended to the image); normalized frames use a 0..scale
    coordinate range (default 1000).
    """

    mode: FrameMode
    res_x: Optional[int] = None
    res_y: Optional[int] = None
    scale: Optional[int] = None
    origin: Origin = Origin.TOP_LEFT

    def __post_init__(self):
        if self.mode is FrameMode.GRID_CELLS:
            if self.res_x is None or self.res_y is None:
                raise ValueError("grid frame requires res_x and res_y")
            if self.res_x < 1 or self.res_y < 1:
                raise ValueError("grid resolution must be >= 1")
            if self.scale is not None:
                raise ValueError("grid frame must not carry a scale")
        else:
            if self.scale is None:
                raise ValueError("normalized frame requires a scale")
            if self.scale < 1:
                raise ValueError("scale must be >= 1")
            if self.res_x is not None or self.res_y is not None:
                raise ValueError("normalized frame must not carry res_x/res_y")

    @classmethod
    def grid(cls, res_x: int = 50, res_y: int = 50,
             origin: Origin = Origin.BOTTOM_LEFT) -> "CoordinateFrame":
        return cls(FrameMode.GRID_CELLS, res_x=res_x, res_y=res_y, origin=origin)

    @classmethod
    def normalized(cls, scale: int = 1000,
                   origin: Origin = Origin.TOP_LEFT) -> "CoordinateFrame":
        return cls(FrameMode.NORMALIZED, scale=scale, origin=origin)

    def bounds(self) -> tuple[int, int]:
        """Inclusive (max_col, max_row) for token validation."""
        if self.mode is FrameMode.GRID_CELLS:
            return self.res_x, self.res_y
        return self.scale, self.scale


_HEX_COLOR = re.compile(r"^#[0-9a-fA-F]{6}$")


def _color_ok(color: str) -> bool:
    if _HEX_COLOR.match(color):
        return True
    try:
        from PIL import ImageColor

        ImageColor.getrgb(color)
        return True
    except ValueError:
        return False


@dataclass(frozen=True)
class TextStyle:
    """Text sizing and color. Size is a cell multiplier unless the
    model suffixed 'px'."""

    size: float = 1.0
    unit: SizeUnit = SizeUnit.CELLS
    color: str = "black"

    def __post_init__(self):
        if self.size <= 0:
            raise ValueError("text size must be positive")
        if not _color_ok(self.color):
            raise ValueError(f"unparseable color: {self.color!r}")


@dataclass(frozen=True)
class TextPayload:
    content: str
    style: TextStyle = TextStyle()


@dataclass(frozen=True)
class Stroke:
    """One drawing unit: ordered point samples with normalized
    timestamps, optionally carrying a text payload instead of geometry."""

    id: str
    points: tuple[GridRef, ...]
    t_values: tuple[float, ...]
    text: Optional[TextPayload] = None

    def is_text(self) -> bool:
        return self.text is not None


@dataclass(frozen=True)
class AnnotationSet:
    """Parsed model output: strokes in emission order plus the optional
    concept line and final answer."""

    strokes: tuple[Stroke, ...] = ()
    concept: Optional[str] = None
    final_answer: Optional[str] = None
    # Non-fatal oddities noticed while parsing (surfaced by validate());
    # excluded from equality so round-trips compare on content alone.
    parse_notes: tuple[str, ...] = field(default=(), compare=False, repr=False)


@dataclass(frozen=True)
class Violation:
    stroke_id: Optional[str]
    kind: str
    message: str


class ParseError(Exception):
    """Base class for unrecoverable model-output parse failures."""


class NoAnswerBlock(ParseError):
    def __init__(self):
        super().__init__("no <answer> block or stroke tags found in output")


class CountMismatch(ParseError):
    def __init__(self, stroke_id: str, n_points: int, n_ts: int):
        self.stroke_id = stroke_id
        super().__init__(
            f"stroke {stroke_id!r}: {n_points} points but {n_ts} t_values"
        )


class BadToken(ParseError):
    def __init__(self, token: str, offset: int):
        self.token = token
        self.offset = offset
        super().__init__(f"unrecoverable point token {token!r} at offset {offset}")


# ---------------------------------------------------------------------------
# parsing

_FENCE = re.compile(r"^\s*```[a-zA-Z0-9_-]*\s*\n(.*?)\n\s*```\s*$", re.DOTALL)
_ANSWER = re.compile(r"<answer\s*>(.*?)</answer\s*>", re.DOTALL | re.IGNORECASE)
_STROKE_BLOCK = re.compile(r"<s(\d+)\s*>(.*?)</s\1\s*>", re.DOTALL | re.IGNORECASE)
_SIMPLE_TAG = {
    name: re.compile(rf"<{name}\s*>(.*?)</{name}\s*>", re.DOTALL | re.IGNORECASE)
    for name in ("concept", "final_answer", "points", "t_values", "id",
                 "font_size", "color", "strokes", "style")
}
_TEXT_TAG = re.compile(r"<text([^>]*)>(.*?)</text\s*>", re.DOTALL | re.IGNORECASE)
_ATTR = re.compile(r"(\w+)\s*=\s*\"([^\"]*)\"")
_POINT_TOKEN = re.compile(r"x\s*(-?\d+)\s*y\s*(-?\d+)")
_FLOAT = re.compile(r"-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?")


def _strip_fences(text: str) -> str:
    m = _FENCE.match(text)
    return m.group(1) if m else text


def _parse_points(raw: str) -> tuple[GridRef, ...]:
    refs = []
    pos = 0
    for piece in raw.split(","):
        token = piece.strip().strip("'\"").strip()
        if not token:
            pos += len(piece) + 1
            continue
        m = _POINT_TOKEN.fullmatch(token)
        if not m:
            raise BadToken(token, raw.find(piece, pos))
        refs.append(GridRef(int(m.group(1)), int(m.group(2))))
        pos += len(piece) + 1
    return tuple(refs)


def _parse_t_values(raw: str) -> tuple[float, ...]:
    return tuple(float(m.group(0)) for m in _FLOAT.finditer(raw))


def _normalize_ts(points: tuple[GridRef, ...],
                  ts: tuple[float, ...]) -> tuple[float, ...]:
    """Corner-pair swap then affine rescale to [0, 1].

    The prompt's own shape examples write corner t pairs locally out of
    order (e.g. 0.55 then 0.5 at a doubled point); identical adjacent
    points whose t entries decrease by at most 0.1 are swapped back.
    Any remaining nondecreasing list is affinely mapped onto [0, 1].
    Lists that stay decreasing or constant are returned unchanged and
    left to validate() to flag.
    """
    vals = list(ts)
    for j in range(len(vals) - 1):
        if (points[j] == points[j + 1]
                and vals[j] > vals[j + 1]
                and vals[j] - vals[j + 1] <= 0.1 + 1e-12):
            vals[j], vals[j + 1] = vals[j + 1], vals[j]
    if len(vals) >= 2 and all(a <= b for a, b in zip(vals, vals[1:])):
        lo, hi = vals[0], vals[-1]
        if (lo, hi) != (0.0, 1.0) and hi > lo:
            vals = [(v - lo) / (hi - lo) for v in vals]
    return tuple(vals)


def _parse_text_payload(block: str) -> Optional[TextPayload]:
    m = _TEXT_TAG.search(block)
    if not m:
        return None
    attrs = dict(_ATTR.findall(m.group(1)))
    content = m.group(2).strip().strip("'\"")
    size_raw = attrs.get("size")
    color = attrs.get("color")
    # COUNTING_PROMPT allows an alternate <style> carrier.
    style_m = _SIMPLE_TAG["style"].search(block)
    if style_m:
        inner = style_m.group(1)
        if size_raw is None:
            fs = _SIMPLE_TAG["font_size"].search(inner)
            if fs:
                size_raw = fs.group(1).strip()
        if color is None:
            cm = _SIMPLE_TAG["color"].search(inner)
            if cm:
                color = cm.group(1).strip()
    size, unit = 1.0, SizeUnit.CELLS
    if size_raw:
        size_raw = size_raw.strip()
        if size_raw.lower().endswith("px"):
            unit = SizeUnit.PIXELS
            size_raw = size_raw[:-2].strip()
        try:
            size = float(size_raw)
        except ValueError:
            size = 1.0
    if size <= 0:
        size = 1.0
    if not color or not _color_ok(color):
        color = "black"
    return TextPayload(content, TextStyle(size, unit, color))


def _parse_stroke(index: int, block: str) -> Stroke:
    id_m = _SIMPLE_TAG["id"].search(block)
    stroke_id = id_m.group(1).strip() if id_m else f"s{index}"
    pts_m = _SIMPLE_TAG["points"].search(block)
    ts_m = _SIMPLE_TAG["t_values"].search(block)
    points = _parse_points(pts_m.group(1)) if pts_m else ()
    ts = _parse_t_values(ts_m.group(1)) if ts_m else ()
    if len(points) != len(ts) or len(points) < 1:
        raise CountMismatch(stroke_id, len(points), len(ts))
    ts = _normalize_ts(points, ts)
    return Stroke(stroke_id, points, ts, _parse_text_payload(block))


def _parse_json_dialect(text: str) -> AnnotationSet:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NoAnswerBlock() from exc
    if not isinstance(doc, dict) or "strokes" not in doc:
        raise NoAnswerBlock()
    strokes = []
    for i, s in enumerate(doc.get("strokes") or [], start=1):
        stroke_id = str(s.get("id", f"s{i}"))
        points = tuple(GridRef(int(p["x"]), int(p["y"])) for p in s.get("points", []))
        ts = tuple(float(t) for t in s.get("t", []))
        if len(points) != len(ts) or len(points) < 1:
            raise CountMismatch(stroke_id, len(points), len(ts))
        text_payload = None
        if s.get("text") is not None:
            t = s["text"]
            unit = SizeUnit.PIXELS if t.get("unit") == "px" else SizeUnit.CELLS
            text_payload = TextPayload(
                str(t.get("content", "")),
                TextStyle(float(t.get("size", 1.0)), unit, t.get("color", "black")),
            )
        strokes.append(Stroke(stroke_id, points, _normalize_ts(points, ts), text_payload))
    concept = doc.get("concept")
    final = doc.get("final_answer")
    return AnnotationSet(
        strokes=tuple(strokes),
        concept=None if concept is None else str(concept),
        final_answer=None if final is None else str(final),
    )


def parse_annotation(text: str, frame: Optional[CoordinateFrame] = None) -> AnnotationSet:
    """Parse raw model output into an AnnotationSet.

    Extracts the first ``<answer>`` block (prose around it is ignored);
    if the wrapper is missing but bare stroke blocks or a final-answer
    tag are present, those are accepted as the answer body.  A leading
    code fence is stripped.  JSON-dialect documents are detected by a
    leading ``{``.  The frame does not affect parsing (tokens are
    frame-agnostic); it is accepted so call sites can pass their
    session frame uniformly.

    Raises NoAnswerBlock, CountMismatch, or BadToken.
    """
    del frame
    body = _strip_fences(text.strip())
    if body.lstrip().startswith("{"):
        return _parse_json_dialect(body)

    notes = []
    m = _ANSWER.search(body)
    if m:
        body = m.group(1)
    else:
        if not _STROKE_BLOCK.search(body) and not _SIMPLE_TAG["final_answer"].search(body):
            raise NoAnswerBlock()
        notes.append("missing_answer_wrapper")

    blocks = sorted(
        ((int(m.group(1)), m.group(2), m.start()) for m in _STROKE_BLOCK.finditer(body)),
        key=lambda item: (item[0], item[2]),
    )
    strokes = tuple(_parse_stroke(n, block) for n, block, _ in blocks)

    concept_m = _SIMPLE_TAG["concept"].search(body)
    final_m = _SIMPLE_TAG["final_answer"].search(body)
    concept = concept_m.group(1).strip() if concept_m else None
    final = final_m.group(1).strip() if final_m else None

    if final_m and blocks:
        strokes_close = body.lower().rfind("</strokes>")
        last_block_end = max(m.end() for m in _STROKE_BLOCK.finditer(body))
        boundary = strokes_close if strokes_close >= 0 else last_block_end
        if final_m.start() < boundary:
            notes.append("final_answer_before_strokes_end")

    return AnnotationSet(strokes=strokes, concept=concept, final_answer=final,
                         parse_notes=tuple(notes))


# ---------------------------------------------------------------------------
# serialization

def _fmt_t(t: float) -> str:
    return f"{t:.2f}"


def _fmt_size(style: TextStyle) -> str:
    suffix = "px" if style.unit is SizeUnit.PIXELS else ""
    return f"{style.size}{suffix}"


def _stroke_xml(n: int, stroke: Stroke) -> str:
    lines = [f"<s{n}>"]
    if stroke.text is not None:
        lines.append(
            f'  <text size="{_fmt_size(stroke.text.style)}"'
            f' color="{stroke.text.style.color}">'
            f"'{stroke.text.content}'</text>"
        )
    points = ",".join(f"'{p.token()}'" for p in stroke.points)
    ts = ",".join(_fmt_t(t) for t in stroke.t_values)
    lines.append(f"  <points>{points}</points>")
    lines.append(f"  <t_values>{ts}</t_values>")
    lines.append(f"  <id>{stroke.id}</id>")
    lines.append(f"</s{n}>")
    return "\n".join(lines)


def _stroke_json(stroke: Stroke) -> dict:
    doc = {
        "id": stroke.id,
        "points": [{"x": p.col, "y": p.row} for p in stroke.points],
        "t": list(stroke.t_values),
    }
    if stroke.text is not None:
        doc["text"] = {
            "content": stroke.text.content,
            "size": stroke.text.style.size,
            "unit": stroke.text.style.unit.value,
            "color": stroke.text.style.color,
        }
    return doc


def serialize_annotation(annotation: AnnotationSet,
                         dialect: Dialect = Dialect.XML_STYLE) -> str:
    """Serialize to the XML-style grammar or the JSON dialect.

    XML output is byte-compatible with the grammar the system prompt
    teaches: quoted unpadded tokens, t-values with exactly two decimals.
    parse_annotation(serialize_annotation(s)) == s for any s whose
    t-values survive two-decimal printing.
    """
    if dialect is Dialect.JSON:
        doc = {
            "concept": annotation.concept,
            "strokes": [_stroke_json(s) for s in annotation.strokes],
            "final_answer": annotation.final_answer,
        }
        return json.dumps(doc, indent=2)

    parts = ["<answer>"]
    if annotation.concept is not None:
        parts.append(f"<concept>{annotation.concept}</concept>")
    parts.append("<strokes>")
    for n, stroke in enumerate(annotation.strokes, start=1):
        parts.append(_stroke_xml(n, stroke))
    parts.append("</strokes>")
    if annotation.final_answer is not None:
        parts.append(f"<final_answer>{annotation.final_answer}</final_answer>")
    parts.append("</answer>")
    return "\n".join(parts)


# ---------------------------------------------------------------------------
# validation

def validate(annotation: AnnotationSet, frame: CoordinateFrame) -> list[Violation]:
    """Report every invariant violation for the given frame.

    Returns an empty list iff the set is fully valid: points in frame
    bounds, t-values in [0, 1] and nondecreasing with 0/1 endpoints,
    unique stroke ids, single-point text strokes.
    """
    out: list[Violation] = []
    max_col, max_row = frame.bounds()
    seen: set[str] = set()
    for stroke in annotation.strokes:
        if stroke.id in seen:
            out.append(Violation(stroke.id, "duplicate_id",
                                 f"stroke id {stroke.id!r} repeats"))
        seen.add(stroke.id)
        if len(stroke.points) != len(stroke.t_values) or not stroke.points:
            out.append(Violation(stroke.id, "count_mismatch",
                                 f"{len(stroke.points)} points vs "
                                 f"{len(stroke.t_values)} t_values"))
            continue
        for p in stroke.points:
            if not (0 <= p.col <= max_col):
                out.append(Violation(stroke.id, "out_of_range",
                                     f"col={p.col} outside [0, {max_col}]"))
            if not (0 <= p.row <= max_row):
                out.append(Violation(stroke.id, "out_of_range",
                                     f"row={p.row} outside [0, {max_row}]"))
        for t in stroke.t_values:
            if not (0.0 <= t <= 1.0):
                out.append(Violation(stroke.id, "t_out_of_range",
                                     f"t={t} outside [0, 1]"))
        if any(a > b for a, b in zip(stroke.t_values, stroke.t_values[1:])):
            out.append(Violation(stroke.id, "t_decreasing",
                                 "t_values decrease"))
        elif len(stroke.t_values) >= 2 and (
                stroke.t_values[0] != 0.0 or stroke.t_values[-1] != 1.0):
            out.append(Violation(stroke.id, "t_endpoints",
                                 "t_values do not span [0, 1]"))
        if stroke.text is not None and len(stroke.points) != 1:
            out.append(Violation(stroke.id, "multi_point_text",
                                 "text stroke must have exactly one anchor"))
    for note in annotation.parse_notes:
        if note == "final_answer_before_strokes_end":
            out.append(Violation(None, "final_answer_position",
                                 "final_answer appeared before </strokes>"))
    return out
