"""Synthetic benchmark generation and dataset manifests: numbered-dot
images, outline connect-the-dots, 3x3 mazes with valid/invalid proposed
paths, ball-drop physics scenes, plus manifest I/O for curated data."""

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
    expected_answer,
)
from .dots import (
    DegenerateContour,
    PlacementFailure,
    SelfIntersecting,
    douglas_peucker,
    gen_outline_dots,
    gen_random_dots,
)
from .maze import gen_maze, walk_path
from .physics import NoLanding, simulate_ball
from .balldrop import gen_ball_drop
from .images import render_task_image
from .manifest import MissingFile, SchemaError, load_manifest, save_dataset

__all__ = [
    "TaskKind", "TaskInstance", "DotsGT", "MazeGT", "BallGT", "BallScene",
    "CountGT", "ShapesGT", "LabelGT", "expected_answer",
    "gen_random_dots", "gen_outline_dots", "douglas_peucker",
    "PlacementFailure", "DegenerateContour", "SelfIntersecting",
    "gen_maze", "walk_path", "simulate_ball", "NoLanding", "gen_ball_drop",
    "render_task_image", "load_manifest", "save_dataset",
    "SchemaError", "MissingFile",
]
