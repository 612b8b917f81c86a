"""Dataset manifests: versioned JSON index plus an images/ directory.

Generated benchmarks are written with save_dataset; curated external
data (counting, shapes, part labels, free VQA) is ingested by writing
the same manifest shape by hand.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from ..metrics import PixelRect
from .images import render_task_image
from .types import (
    BallGT,
    BallScene,
    CountGT,
    DotsGT,
    LabelGT,
    MazeGT,
    ShapesGT,
    TaskInstance,
    TaskKind,
)

__all__ = ["SchemaError", "MissingFile", "save_dataset", "load_manifest",
           "SCHEMA_VERSION"]

SCHEMA_VERSION = 1


class SchemaError(Exception):
    pass


class MissingFile(Exception):
    pass


def _rect_json(rect: PixelRect):
    return [rect.x0, rect.y0, rect.x1, rect.y1]


def _truth_json(truth) -> Optional[dict]:
    if truth is None:
        return None
    if isinstance(truth, DotsGT):
        return {"type": "dots", "points": [list(p) for p in truth.points],
                "dot_radius": truth.dot_radius}
    if isinstance(truth, MazeGT):
        return {"type": "maze",
                "walls": sorted([list(a), list(b)] for a, b in truth.walls),
                "start": list(truth.start), "end": list(truth.end),
                "path": list(truth.path), "valid": truth.valid}
    if isinstance(truth, BallGT):
        scene = truth.scene
        return {"type": "ball",
                "trajectory": [list(p) for p in truth.trajectory],
                "container": truth.container,
                "scene": {
                    "width": scene.width, "height": scene.height,
                    "ball_start": list(scene.ball_start),
                    "ball_radius": scene.ball_radius,
                    "platforms": [[list(a), list(b)]
                                  for a, b in scene.platforms],
                    "containers": [_rect_json(c) for c in scene.containers],
                    "wall_top": scene.wall_top,
                }}
    if isinstance(truth, CountGT):
        return {"type": "count", "object": truth.object,
                "boxes": [_rect_json(b) for b in truth.boxes]}
    if isinstance(truth, ShapesGT):
        return {"type": "shapes",
                "classes": {cls: [_rect_json(b) for b in boxes]
                            for cls, boxes in truth.classes.items()}}
    if isinstance(truth, LabelGT):
        return {"type": "label",
                "parts": {name: [list(p) for p in poly]
                          for name, poly in truth.parts.items()}}
    raise SchemaError(f"unserializable truth {type(truth).__name__}")


def _truth_from_json(doc: Optional[dict]):
    if doc is None:
        return None
    kind = doc.get("type")
    if kind == "dots":
        return DotsGT(points=tuple(tuple(p) for p in doc["points"]),
                      dot_radius=float(doc.get("dot_radius", 8.0)))
    if kind == "maze":
        return MazeGT(
            walls=frozenset((tuple(a), tuple(b)) for a, b in doc["walls"]),
            start=tuple(doc["start"]), end=tuple(doc["end"]),
            path=tuple(doc["path"]), valid=bool(doc["valid"]))
    if kind == "ball":
        s = doc["scene"]
        scene = BallScene(
            width=s["width"], height=s["height"],
            ball_start=tuple(s["ball_start"]),
            ball_radius=float(s["ball_radius"]),
            platforms=tuple((tuple(a), tuple(b)) for a, b in s["platforms"]),
            containers=tuple(PixelRect(*c) for c in s["containers"]),
            wall_top=float(s["wall_top"]))
        return BallGT(trajectory=tuple(tuple(p) for p in doc["trajectory"]),
                      container=int(doc["container"]), scene=scene)
    if kind == "count":
        return CountGT(object=doc["object"],
                       boxes=tuple(PixelRect(*b) for b in doc["boxes"]))
    if kind == "shapes":
        return ShapesGT(classes={
            cls: tuple(PixelRect(*b) for b in boxes)
            for cls, boxes in doc["classes"].items()})
    if kind == "label":
        return LabelGT(parts={
            name: tuple(tuple(p) for p in poly)
            for name, poly in doc["parts"].items()})
    raise SchemaError(f"unknown truth type {kind!r}")


def save_dataset(instances: list[TaskInstance], out_dir: str | Path) -> Path:
    """Render and write images/ plus manifest.json; returns the manifest
    path. Rerunning with identical instances rewrites identical bytes."""
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    entries = []
    for instance in instances:
        image_rel = f"images/{instance.id}.png"
        if instance.image_path is None:
            raster = render_task_image(instance)
            (out / image_rel).write_bytes(raster.to_png_bytes())
        else:
            image_rel = instance.image_path
        entries.append({
            "id": instance.id,
            "kind": instance.kind.value,
            "image": image_rel,
            "width": instance.width,
            "height": instance.height,
            "question": instance.question,
            "truth": _truth_json(instance.truth),
        })
    manifest = {"schema_version": SCHEMA_VERSION, "instances": entries}
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def load_manifest(path: str | Path) -> list[TaskInstance]:
    """Load instances; ids must be unique and image files must exist."""
    path = Path(path)
    if not path.exists():
        raise MissingFile(str(path))
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"manifest is not valid JSON: {exc}") from exc
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(
            f"unsupported schema version {doc.get('schema_version')!r}")
    instances = []
    seen = set()
    for entry in doc.get("instances", []):
        if entry["id"] in seen:
            raise SchemaError(f"duplicate instance id {entry['id']!r}")
        seen.add(entry["id"])
        image_path = path.parent / entry["image"]
        if not image_path.exists():
            raise MissingFile(str(image_path))
        instances.append(TaskInstance(
            id=entry["id"],
            kind=TaskKind(entry["kind"]),
            width=int(entry["width"]),
            height=int(entry["height"]),
            question=entry["question"],
            truth=_truth_from_json(entry.get("truth")),
            image_path=str(image_path)))
    return instances
