"""Batch evaluation: map parsed annotations to task-appropriate metrics
and aggregate them into a reproducible report.

Prediction extraction is frame-aware: stroke tokens are mapped to
pixels with the same convention the renderer uses, so a model that
emits ground-truth coordinates scores perfectly.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from PIL import Image, ImageDraw

from . import __version__
from .forge.types import (
    BallGT,
    CountGT,
    DotsGT,
    LabelGT,
    MazeGT,
    ShapesGT,
    TaskInstance,
    TaskKind,
    expected_answer,
)
from .geometry import PixelPoint, pixel_of
from .metrics import (
    EmptyPrediction,
    PixelRect,
    answer_accuracy,
    ap50,
    dilation_accuracy,
    marker_accuracy,
    ordering_errors,
    rmse_closest,
)
from .strokes import AnnotationSet, CoordinateFrame

__all__ = [
    "InstanceScore",
    "MetricReport",
    "evaluate_instances",
    "write_report",
    "extract_points",
    "extract_segments",
    "extract_markers",
    "extract_boxes",
    "DILATION_RADII",
]

DILATION_RADII = (0, 3, 5, 7, 10, 15)

CSV_COLUMNS = ["id", "kind", "answer", "expected", "answer_correct",
               "rmse", "ordering_errors", "ordering_rate",
               "marker_location_acc", "count_correct",
               "dilation_acc_r0", "failure"]


# ---------------------------------------------------------------------------
# prediction extraction

def extract_points(annotation: AnnotationSet, frame: CoordinateFrame,
                   dims: tuple[int, int]) -> list[PixelPoint]:
    """Every geometry sample, in pixels."""
    points = []
    for stroke in annotation.strokes:
        if stroke.is_text():
            continue
        points.extend(pixel_of(p, frame, dims, clamp=True)
                      for p in stroke.points)
    return points


def extract_segments(annotation: AnnotationSet, frame: CoordinateFrame,
                     dims: tuple[int, int]
                     ) -> list[tuple[PixelPoint, PixelPoint]]:
    """Consecutive sample pairs within each geometry stroke, in stroke
    order (doubled corner points collapse to nothing)."""
    segments = []
    for stroke in annotation.strokes:
        if stroke.is_text():
            continue
        px = [pixel_of(p, frame, dims, clamp=True) for p in stroke.points]
        for a, b in zip(px, px[1:]):
            if (a.x, a.y) != (b.x, b.y):
                segments.append((a, b))
    return segments


def extract_markers(annotation: AnnotationSet, frame: CoordinateFrame,
                    dims: tuple[int, int]) -> list[tuple[PixelPoint, str]]:
    return [(pixel_of(s.points[0], frame, dims, clamp=True), s.text.content)
            for s in annotation.strokes if s.is_text() and s.points]


def extract_boxes(annotation: AnnotationSet, frame: CoordinateFrame,
                  dims: tuple[int, int]) -> dict[str, list[PixelRect]]:
    """Tight bounding box of each geometry stroke's samples, classed by
    the stroke id prefix (everything before the final '_<number>')."""
    boxes: dict[str, list[PixelRect]] = {}
    for stroke in annotation.strokes:
        if stroke.is_text() or len(stroke.points) < 2:
            continue
        px = [pixel_of(p, frame, dims, clamp=True) for p in stroke.points]
        xs = [p.x for p in px]
        ys = [p.y for p in px]
        cls = stroke.id.rsplit("_", 1)[0] if "_" in stroke.id else stroke.id
        boxes.setdefault(cls, []).append(
            PixelRect(min(xs), min(ys), max(xs), max(ys)))
    return boxes


def _polygon_mask(polygon, dims) -> np.ndarray:
    w, h = dims
    img = Image.new("1", (w, h), 0)
    ImageDraw.Draw(img).polygon([tuple(p) for p in polygon], fill=1)
    return np.asarray(img, dtype=bool)


# ---------------------------------------------------------------------------
# scoring

@dataclass(frozen=True)
class InstanceScore:
    id: str
    kind: str
    answer: Optional[str]
    expected: Optional[str]
    answer_correct: Optional[bool]
    metrics: dict = field(default_factory=dict)
    failure: Optional[str] = None


@dataclass
class MetricReport:
    run_id: str
    config_hash: str
    tool_version: str
    instances: list[InstanceScore]
    aggregates: dict

    def to_json(self) -> str:
        doc = {
            "run_id": self.run_id,
            "config_hash": self.config_hash,
            "tool_version": self.tool_version,
            "aggregates": self.aggregates,
            "n_instances": len(self.instances),
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.DictWriter(out, fieldnames=CSV_COLUMNS,
                                extrasaction="ignore")
        writer.writeheader()
        for score in self.instances:
            row = {"id": score.id, "kind": score.kind,
                   "answer": score.answer, "expected": score.expected,
                   "answer_correct": score.answer_correct,
                   "failure": score.failure}
            row.update({k: v for k, v in score.metrics.items()
                        if k in CSV_COLUMNS})
            writer.writerow(row)
        return out.getvalue()

    def instances_json(self) -> str:
        """Full per-instance records; together with the manifest these
        suffice to recompute every aggregate."""
        doc = [{"id": s.id, "kind": s.kind, "answer": s.answer,
                "expected": s.expected, "answer_correct": s.answer_correct,
                "failure": s.failure, "metrics": s.metrics}
               for s in self.instances]
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _score_instance(instance: TaskInstance, annotation: AnnotationSet,
                    answer: Optional[str], frame: CoordinateFrame
                    ) -> InstanceScore:
    dims = (instance.width, instance.height)
    truth = instance.truth
    expected = expected_answer(instance)
    answer_ok = None
    if expected is not None:
        answer_ok = answer_accuracy([answer], [expected])["acc"] == 1.0
    metrics: dict = {}
    failure = None
    if isinstance(truth, DotsGT):
        gt_points = [PixelPoint(*p) for p in truth.points]
        try:
            metrics["rmse"] = rmse_closest(
                gt_points, extract_points(annotation, frame, dims))
        except EmptyPrediction:
            failure = "empty_prediction"
        ordering = ordering_errors(
            gt_points, extract_segments(annotation, frame, dims))
        metrics["ordering_errors"] = ordering.errors
        metrics["ordering_rate"] = ordering.rate
    elif isinstance(truth, CountGT):
        result = marker_accuracy(list(truth.boxes),
                                 extract_markers(annotation, frame, dims))
        metrics["marker_location_acc"] = result.location_acc
        metrics["count_correct"] = result.count_correct
    elif isinstance(truth, ShapesGT):
        preds = extract_boxes(annotation, frame, dims)
        metrics["pred_boxes"] = {
            cls: [[b.x0, b.y0, b.x1, b.y1] for b in boxes]
            for cls, boxes in preds.items()}
    elif isinstance(truth, LabelGT):
        masks = {name: _polygon_mask(poly, dims)
                 for name, poly in truth.parts.items()}
        labels = extract_markers(annotation, frame, dims)
        labels = [(p, name) for p, name in labels]
        for r in DILATION_RADII:
            result = dilation_accuracy(labels, masks, r)
            metrics[f"dilation_acc_r{r}"] = result.accuracy
            if r == 0:
                metrics["missing_label_rate"] = result.missing_label_rate
                metrics["wrong_position_rate"] = result.wrong_position_rate
    return InstanceScore(id=instance.id, kind=instance.kind.value,
                         answer=answer, expected=expected,
                         answer_correct=answer_ok, metrics=metrics,
                         failure=failure)


def evaluate_instances(results: Sequence[tuple[TaskInstance, AnnotationSet,
                                               Optional[str]]],
                       frame: CoordinateFrame,
                       run_id: str = "",
                       config: Optional[dict] = None) -> MetricReport:
    """Score every (instance, annotation, final answer) triple and
    aggregate. Shape predictions pool across instances in order for
    AP50; everything else averages per instance."""
    config_hash = hashlib.sha256(
        json.dumps(config or {}, sort_keys=True).encode()).hexdigest()[:16]
    scores = []
    shape_preds: dict[str, list[PixelRect]] = {}
    shape_gts: dict[str, list[PixelRect]] = {}
    for instance, annotation, answer in results:
        scores.append(_score_instance(instance, annotation, answer, frame))
        if isinstance(instance.truth, ShapesGT):
            dims = (instance.width, instance.height)
            preds = extract_boxes(annotation, frame, dims)
            for cls, boxes in preds.items():
                shape_preds.setdefault(cls, []).extend(boxes)
            for cls, boxes in instance.truth.classes.items():
                shape_gts.setdefault(cls, []).extend(boxes)

    aggregates: dict = {}
    answered = [(s.answer, s.expected) for s in scores if s.expected is not None]
    if answered:
        aggregates["answer_accuracy"] = answer_accuracy(
            [a for a, _ in answered], [e for _, e in answered])
    rmses = [s.metrics["rmse"] for s in scores if "rmse" in s.metrics]
    if rmses or any(s.failure == "empty_prediction" for s in scores):
        aggregates["rmse"] = {
            "mean": float(np.mean(rmses)) if rmses else None,
            "n": len(rmses),
            "empty_predictions": sum(
                1 for s in scores if s.failure == "empty_prediction"),
        }
    rates = [s.metrics["ordering_rate"] for s in scores
             if "ordering_rate" in s.metrics]
    if rates:
        aggregates["ordering"] = {
            "mean_rate": float(np.mean(rates)),
            "total_errors": int(sum(s.metrics["ordering_errors"]
                                    for s in scores
                                    if "ordering_errors" in s.metrics)),
            "n": len(rates),
        }
    marker_accs = [s.metrics["marker_location_acc"] for s in scores
                   if "marker_location_acc" in s.metrics]
    if marker_accs:
        counts = [s.metrics["count_correct"] for s in scores
                  if "count_correct" in s.metrics]
        aggregates["counting"] = {
            "marker_location_acc": float(np.mean(marker_accs)),
            "count_acc": float(np.mean([1.0 if c else 0.0 for c in counts])),
            "n": len(marker_accs),
        }
    if shape_gts:
        aggregates["ap50"] = ap50(shape_preds, shape_gts)
    for r in DILATION_RADII:
        key = f"dilation_acc_r{r}"
        values = [s.metrics[key] for s in scores if key in s.metrics]
        if values:
            aggregates.setdefault("dilation", {})[f"r{r}"] = float(np.mean(values))
    return MetricReport(run_id=run_id, config_hash=config_hash,
                        tool_version=__version__, instances=scores,
                        aggregates=aggregates)


def write_report(report: MetricReport, out_dir) -> None:
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    (out / "instances.csv").write_text(report.to_csv())
    (out / "instances.json").write_text(report.instances_json())
