"""Scoring procedures: point RMSE, segment ordering errors, counting
marker accuracy, AP50 with size buckets and oval conversion, boundary-
dilation labeling accuracy, and normalized answer accuracy.

Design notes that are contracts here:
- rmse_closest matches each ground-truth point to the nearest predicted
  point (many predictions may share one), and raises EmptyPrediction so
  batch scorers can tally the instance separately instead of inventing
  a penalty.
- A predicted segment's distance to a ground-truth pair is the mean of
  squared endpoint distances, minimized over the two orientations.
- AP ranking is the model's emission order (strokes carry no
  confidence); size buckets follow the usual 32^2 / 96^2 pixel-area
  thresholds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
from scipy import ndimage
from scipy.optimize import linear_sum_assignment

from .geometry import PixelPoint

__all__ = [
    "PixelRect",
    "EmptyPrediction",
    "OrderingResult",
    "MarkerResult",
    "DilationResult",
    "SMALL_AREA",
    "MEDIUM_AREA",
    "size_bucket",
    "rmse_closest",
    "ordering_errors",
    "marker_accuracy",
    "oval_to_bbox",
    "ap50",
    "dilation_accuracy",
    "answer_accuracy",
    "normalize_answer",
]

SMALL_AREA = 32.0 ** 2
MEDIUM_AREA = 96.0 ** 2


class EmptyPrediction(Exception):
    pass


@dataclass(frozen=True)
class PixelRect:
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise ValueError("rect corners must be ordered")

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def contains(self, p: PixelPoint) -> bool:
        return self.x0 <= p.x <= self.x1 and self.y0 <= p.y <= self.y1

    def iou(self, other: "PixelRect") -> float:
        ix0 = max(self.x0, other.x0)
        iy0 = max(self.y0, other.y0)
        ix1 = min(self.x1, other.x1)
        iy1 = min(self.y1, other.y1)
        if ix1 <= ix0 or iy1 <= iy0:
            return 0.0
        inter = (ix1 - ix0) * (iy1 - iy0)
        union = self.area + other.area - inter
        return inter / union if union > 0 else 0.0


def size_bucket(rect: PixelRect) -> str:
    if rect.area < SMALL_AREA:
        return "small"
    if rect.area < MEDIUM_AREA:
        return "medium"
    return "large"


# ---------------------------------------------------------------------------
# point RMSE

def rmse_closest(gt: Sequence[PixelPoint], pred: Sequence[PixelPoint]) -> float:
    """Root mean square of each ground-truth point's distance to its
    nearest predicted point."""
    if not gt:
        raise ValueError("ground truth must be non-empty")
    if not pred:
        raise EmptyPrediction("no predicted points")
    g = np.array([[p.x, p.y] for p in gt])
    q = np.array([[p.x, p.y] for p in pred])
    d2 = ((g[:, None, :] - q[None, :, :]) ** 2).sum(axis=2)
    return float(np.sqrt(d2.min(axis=1).mean()))


# ---------------------------------------------------------------------------
# segment ordering

@dataclass(frozen=True)
class OrderingResult:
    errors: int
    rate: float
    expected_segments: int


def _segment_pair_mse(seg: tuple[PixelPoint, PixelPoint],
                      a: PixelPoint, b: PixelPoint) -> float:
    s, e = seg

    def d2(p, q):
        return (p.x - q.x) ** 2 + (p.y - q.y) ** 2

    forward = (d2(s, a) + d2(e, b)) / 2.0
    backward = (d2(s, b) + d2(e, a)) / 2.0
    return min(forward, backward)


def ordering_errors(gt: Sequence[PixelPoint],
                    pred_segments: Sequence[tuple[PixelPoint, PixelPoint]]
                    ) -> OrderingResult:
    """Count predicted segments closer to a wrong consecutive ground-
    truth pair than to their expected pair (i, i+1).

    Predicted segment i is an error iff some pair (j, j+1), j != i, has
    strictly lower mean squared endpoint distance than pair (i, i+1).
    Missing segments (fewer predictions than gt pairs) count as errors;
    so do surplus segments beyond the expected count.
    """
    if len(gt) < 2:
        raise ValueError("need at least 2 ground-truth points")
    expected = len(gt) - 1
    errors = 0
    evaluable = min(len(pred_segments), expected)
    for i in range(evaluable):
        own = _segment_pair_mse(pred_segments[i], gt[i], gt[i + 1])
        for j in range(expected):
            if j == i:
                continue
            if _segment_pair_mse(pred_segments[i], gt[j], gt[j + 1]) < own:
                errors += 1
                break
    errors += abs(len(pred_segments) - expected)
    return OrderingResult(errors=errors, rate=errors / expected,
                          expected_segments=expected)


# ---------------------------------------------------------------------------
# counting markers

@dataclass(frozen=True)
class MarkerResult:
    location_acc: float
    count_correct: bool
    matched: int


def marker_accuracy(gt_boxes: Sequence[PixelRect],
                    markers: Sequence[tuple[PixelPoint, str]]) -> MarkerResult:
    """Maximum one-to-one matching of markers to boxes they fall inside;
    at most one marker may claim each object."""
    n_boxes, n_markers = len(gt_boxes), len(markers)
    if n_boxes == 0 and n_markers == 0:
        return MarkerResult(location_acc=1.0, count_correct=True, matched=0)
    if n_boxes == 0 or n_markers == 0:
        return MarkerResult(location_acc=0.0,
                            count_correct=n_boxes == n_markers, matched=0)
    contains = np.zeros((n_markers, n_boxes), dtype=float)
    for i, (point, _) in enumerate(markers):
        for j, box in enumerate(gt_boxes):
            if box.contains(point):
                contains[i, j] = 1.0
    rows, cols = linear_sum_assignment(contains, maximize=True)
    matched = int(contains[rows, cols].sum())
    return MarkerResult(
        location_acc=matched / max(n_boxes, n_markers),
        count_correct=n_markers == n_boxes,
        matched=matched)


# ---------------------------------------------------------------------------
# shapes

def oval_to_bbox(center: PixelPoint, rx: float, ry: float,
                 rotation: float = 0.0) -> PixelRect:
    """Tight axis-aligned bounds of an ellipse rotated by `rotation`
    radians."""
    if rx <= 0 or ry <= 0:
        raise ValueError("radii must be positive")
    c, s = math.cos(rotation), math.sin(rotation)
    half_w = math.sqrt((rx * c) ** 2 + (ry * s) ** 2)
    half_h = math.sqrt((rx * s) ** 2 + (ry * c) ** 2)
    return PixelRect(center.x - half_w, center.y - half_h,
                     center.x + half_w, center.y + half_h)


def _match_flags(preds: Sequence[PixelRect], gts: Sequence[PixelRect],
                 iou_threshold: float = 0.5) -> list[Optional[int]]:
    """Greedy matching in emission order: each prediction takes the
    unmatched ground truth with the highest IoU >= threshold."""
    taken: set[int] = set()
    assigned: list[Optional[int]] = []
    for pred in preds:
        best_j, best_iou = None, iou_threshold
        for j, gt in enumerate(gts):
            if j in taken:
                continue
            iou = pred.iou(gt)
            if iou >= best_iou and (best_j is None or iou > best_iou):
                best_j, best_iou = j, iou
        if best_j is not None:
            taken.add(best_j)
        assigned.append(best_j)
    return assigned


def _ap_from_flags(tp_flags: Sequence[bool], n_gt: int) -> float:
    """All-point-interpolated AP from ranked true/false positive flags."""
    if n_gt == 0:
        return 0.0
    tp = np.cumsum([1 if f else 0 for f in tp_flags])
    fp = np.cumsum([0 if f else 1 for f in tp_flags])
    recall = tp / n_gt
    precision = tp / np.maximum(tp + fp, 1)
    # precision envelope, integrated over recall steps
    mrec = np.concatenate([[0.0], recall, [recall[-1] if len(recall) else 0.0]])
    mpre = np.concatenate([[0.0], precision, [0.0]])
    for i in range(len(mpre) - 2, -1, -1):
        mpre[i] = max(mpre[i], mpre[i + 1])
    ap = 0.0
    for i in range(1, len(mrec)):
        ap += (mrec[i] - mrec[i - 1]) * mpre[i]
    return float(ap)


def _bucket_ap(preds: Sequence[PixelRect], gts: Sequence[PixelRect],
               assigned: Sequence[Optional[int]],
               bucket: Optional[str]) -> Optional[float]:
    if bucket is None:
        in_bucket = [True] * len(gts)
    else:
        in_bucket = [size_bucket(g) == bucket for g in gts]
    n_gt = sum(in_bucket)
    if n_gt == 0:
        return None
    flags = []
    for pred, j in zip(preds, assigned):
        if j is not None:
            if in_bucket[j]:
                flags.append(True)
            # matched an out-of-bucket gt: ignored for this bucket
        else:
            if bucket is None or size_bucket(pred) == bucket:
                flags.append(False)
            # unmatched and out of bucket range: ignored
    return _ap_from_flags(flags, n_gt)


def ap50(preds: Mapping[str, Sequence[PixelRect]],
         gts: Mapping[str, Sequence[PixelRect]]) -> dict[str, Optional[float]]:
    """AP at IoU 0.5, overall and per size bucket, macro-averaged over
    classes with ground truth. Buckets are by ground-truth area; the
    usual ignore rules apply (predictions matched to an out-of-bucket
    object, or unmatched with out-of-bucket area, do not count against
    that bucket)."""
    out: dict[str, Optional[float]] = {}
    for bucket in (None, "small", "medium", "large"):
        values = []
        for cls, cls_gts in gts.items():
            cls_preds = list(preds.get(cls, []))
            assigned = _match_flags(cls_preds, list(cls_gts))
            ap = _bucket_ap(cls_preds, list(cls_gts), assigned, bucket)
            if ap is not None:
                values.append(ap)
        key = "all" if bucket is None else bucket
        out[key] = float(np.mean(values)) if values else None
    return out


# ---------------------------------------------------------------------------
# part labeling

@dataclass(frozen=True)
class DilationResult:
    accuracy: float
    correct: int
    required: int
    missing_label_rate: float
    wrong_position_rate: float
    unknown_names: tuple[str, ...]


def dilation_accuracy(labels: Sequence[tuple[PixelPoint, str]],
                      parts: Mapping[str, np.ndarray],
                      r: float) -> DilationResult:
    """Fraction of required parts with a correctly named label anchored
    inside the part's region dilated by radius r (exact Euclidean).

    A required part with no label of its name is a missing-label error;
    one whose labels all fall outside the dilated region is a
    wrong-position error. Label names outside the part list are
    reported, not scored.
    """
    if r < 0:
        raise ValueError("dilation radius must be >= 0")
    required = len(parts)
    by_name: dict[str, list[PixelPoint]] = {}
    unknown = []
    for point, name in labels:
        if name in parts:
            by_name.setdefault(name, []).append(point)
        else:
            unknown.append(name)
    correct = missing = wrong = 0
    for name, mask in parts.items():
        anchors = by_name.get(name, [])
        if not anchors:
            missing += 1
            continue
        if not mask.any():
            wrong += 1
            continue
        dist = ndimage.distance_transform_edt(~mask.astype(bool))
        hit = False
        h, w = mask.shape
        for p in anchors:
            ix, iy = int(round(p.x)), int(round(p.y))
            if 0 <= ix < w and 0 <= iy < h and dist[iy, ix] <= r:
                hit = True
                break
        if hit:
            correct += 1
        else:
            wrong += 1
    return DilationResult(
        accuracy=correct / required if required else 1.0,
        correct=correct,
        required=required,
        missing_label_rate=missing / required if required else 0.0,
        wrong_position_rate=wrong / required if required else 0.0,
        unknown_names=tuple(unknown))


# ---------------------------------------------------------------------------
# answers

def normalize_answer(text: str) -> str:
    return " ".join(text.strip().casefold().split())


def answer_accuracy(answers: Sequence[Optional[str]], truths: Sequence[str],
                    normalizer: Callable[[str], str] = normalize_answer
                    ) -> dict[str, float]:
    """Normalized exact-match rate with its binomial standard error."""
    if len(answers) != len(truths):
        raise ValueError("answers and truths must align")
    n = len(truths)
    if n == 0:
        return {"acc": 0.0, "stderr": 0.0, "n": 0}
    hits = sum(1 for a, t in zip(answers, truths)
               if a is not None and normalizer(a) == normalizer(t))
    p = hits / n
    return {"acc": p, "stderr": math.sqrt(p * (1 - p) / n), "n": n}
