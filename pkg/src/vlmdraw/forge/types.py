"""Benchmark item types: one TaskInstance per image with a
kind-matched ground-truth record."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from ..metrics import PixelRect

__all__ = [
    "TaskKind", "DotsGT", "MazeGT", "BallScene", "BallGT", "CountGT",
    "ShapesGT", "LabelGT", "GroundTruth", "TaskInstance", "expected_answer",
]


class TaskKind(Enum):
    CONNECT_DOTS = "connect_dots"
    MAZE = "maze"
    BALL_DROP = "ball_drop"
    COUNTING = "counting"
    SHAPES = "shapes"
    PART_LABEL = "part_label"
    FREE_VQA = "free_vqa"


@dataclass(frozen=True)
class DotsGT:
    """Ordered dot centers in pixels; dot i carries numeral i+1."""

    points: tuple[tuple[float, float], ...]
    dot_radius: float


@dataclass(frozen=True)
class MazeGT:
    """3x3 maze: walls are closed boundaries between adjacent cells
    (border walls implicit); cells are (row, col) with row 0 at the top."""

    walls: frozenset[tuple[tuple[int, int], tuple[int, int]]]
    start: tuple[int, int]
    end: tuple[int, int]
    path: tuple[str, ...]
    valid: bool

    def __post_init__(self):
        if len(self.path) < 1:
            raise ValueError("proposed path must have at least one move")


@dataclass(frozen=True)
class BallScene:
    width: int
    height: int
    ball_start: tuple[float, float]
    ball_radius: float
    platforms: tuple[tuple[tuple[float, float], tuple[float, float]], ...]
    containers: tuple[PixelRect, ...]
    wall_top: float  # y of the container wall tops

    def __post_init__(self):
        if len(self.containers) != 4:
            raise ValueError("scene needs exactly 4 containers")
        if len(self.platforms) > 3:
            raise ValueError("scene takes at most 3 platforms")


@dataclass(frozen=True)
class BallGT:
    trajectory: tuple[tuple[float, float], ...]
    container: int  # 1..4
    scene: BallScene

    def __post_init__(self):
        if self.trajectory and self.trajectory[0] != self.scene.ball_start:
            raise ValueError("trajectory must start at the ball start")


@dataclass(frozen=True)
class CountGT:
    object: str
    boxes: tuple[PixelRect, ...]


@dataclass(frozen=True)
class ShapesGT:
    classes: dict[str, tuple[PixelRect, ...]]


@dataclass(frozen=True)
class LabelGT:
    """Part name -> polygon vertices (pixels)."""

    parts: dict[str, tuple[tuple[float, float], ...]]


GroundTruth = Union[DotsGT, MazeGT, BallGT, CountGT, ShapesGT, LabelGT]

_KIND_TO_TRUTH = {
    TaskKind.CONNECT_DOTS: DotsGT,
    TaskKind.MAZE: MazeGT,
    TaskKind.BALL_DROP: BallGT,
    TaskKind.COUNTING: CountGT,
    TaskKind.SHAPES: ShapesGT,
    TaskKind.PART_LABEL: LabelGT,
}


@dataclass(frozen=True)
class TaskInstance:
    id: str
    kind: TaskKind
    width: int
    height: int
    question: str
    truth: Optional[GroundTruth] = None
    image_path: Optional[str] = None

    def __post_init__(self):
        expected = _KIND_TO_TRUTH.get(self.kind)
        if self.truth is not None and expected is not None \
                and not isinstance(self.truth, expected):
            raise ValueError(
                f"{self.kind.value} instance cannot carry "
                f"{type(self.truth).__name__}")


def expected_answer(instance: TaskInstance) -> Optional[str]:
    """The final text answer the task's truth implies, where one exists."""
    truth = instance.truth
    if isinstance(truth, MazeGT):
        return "Yes" if truth.valid else "No"
    if isinstance(truth, BallGT):
        return str(truth.container)
    if isinstance(truth, CountGT):
        return str(len(truth.boxes))
    if isinstance(truth, DotsGT):
        return str(len(truth.points))
    return None
