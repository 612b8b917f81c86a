"""Prompt construction: the stroke-eliciting system prompt, per-task
prompts, and the stepwise-mode guard texts.

Templates live as checksummed assets under prompt_assets/ so drift is
test-detectable; substitution is plain token replacement (the counting
and labeling templates contain literal XML the model must copy).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources

from .strokes import CoordinateFrame, FrameMode, Origin

__all__ = [
    "SessionMode",
    "PromptConfig",
    "FreeQuestion",
    "Counting",
    "Labeling",
    "TaskPrompt",
    "build_system_prompt",
    "build_task_prompt",
    "stepwise_guards",
    "load_asset",
    "verify_assets",
]

FINAL_ANSWER_INSTRUCTION = (
    "Include your final answer at the end of your response, after the "
    "</strokes> tag, in a new <final_answer> tag.")


class SessionMode(Enum):
    SINGLE_TURN = "single_turn"
    STEPWISE = "stepwise"


@dataclass(frozen=True)
class PromptConfig:
    """The ablation surface: coordinate frame, ruler on/off, single vs
    stepwise protocol, and whether the sketching prompt is sent at all."""

    frame: CoordinateFrame = field(default_factory=CoordinateFrame.normalized)
    grid_enabled: bool = False
    mode: SessionMode = SessionMode.SINGLE_TURN
    sketch_enabled: bool = True

    def __post_init__(self):
        if self.grid_enabled and self.frame.mode is not FrameMode.GRID_CELLS:
            raise ValueError("grid_enabled requires a grid-cells frame")


@dataclass(frozen=True)
class FreeQuestion:
    text: str


@dataclass(frozen=True)
class Counting:
    object: str

    def __post_init__(self):
        if not self.object:
            raise ValueError("counting task needs an object name")


@dataclass(frozen=True)
class Labeling:
    concept: str
    labels_hint: tuple[str, ...]

    def __post_init__(self):
        if not self.concept or not self.labels_hint:
            raise ValueError("labeling task needs a concept and labels")


TaskPrompt = FreeQuestion | Counting | Labeling


def load_asset(name: str) -> str:
    return (resources.files("vlmdraw") / "prompt_assets" / name).read_text()


def verify_assets() -> list[str]:
    """Return the names of assets whose bytes no longer match the
    recorded checksums (empty when nothing drifted)."""
    root = resources.files("vlmdraw") / "prompt_assets"
    recorded = {}
    for line in (root / "CHECKSUMS").read_text().splitlines():
        digest, name = line.split(None, 1)
        recorded[name.strip()] = digest
    drifted = []
    for name, digest in recorded.items():
        actual = hashlib.sha256((root / name).read_bytes()).hexdigest()
        if actual != digest:
            drifted.append(name)
    return drifted


def _substitute(template: str, mapping: dict[str, str]) -> str:
    out = template
    for key, value in mapping.items():
        out = out.replace("{" + key + "}", value)
    return out


def build_system_prompt(cfg: PromptConfig) -> str:
    """The stroke-eliciting system prompt for the config's frame.

    Grid frames use their resolution and origin; normalized frames emit
    the same template with the scale as the resolution (the model then
    produces 0..scale coordinates with no appended ruler). Only sent
    when sketching is enabled.
    """
    if not cfg.sketch_enabled:
        raise ValueError("no system prompt when sketching is disabled")
    frame = cfg.frame
    if frame.mode is FrameMode.GRID_CELLS:
        res_x, res_y = frame.res_x, frame.res_y
    else:
        res_x = res_y = frame.scale
    if frame.origin is Origin.TOP_LEFT:
        origin_corner = "top left"
        example_bottom_left = f"x0y{res_y}"
        example_right_of_bottom_left = f"x1y{res_y}"
    else:
        origin_corner = "bottom left"
        example_bottom_left = "x0y0"
        example_right_of_bottom_left = "x1y0"
    base = _substitute(load_asset("system_base.txt"), {
        "res_x": str(res_x),
        "res_y": str(res_y),
        "origin_corner": origin_corner,
        "example_bottom_left": example_bottom_left,
        "example_right_of_bottom_left": example_right_of_bottom_left,
    })
    return base + "\n" + load_asset("sketch_methods.txt")


def build_task_prompt(task: TaskPrompt) -> str:
    if isinstance(task, Counting):
        return _substitute(load_asset("counting.txt"), {"object": task.object})
    if isinstance(task, Labeling):
        return _substitute(load_asset("labeling.txt"), {
            "concept": task.concept,
            "labels_hint": ", ".join(task.labels_hint),
        })
    return f"{task.text}\n\n{FINAL_ANSWER_INSTRUCTION}"


def stepwise_guards() -> dict[str, str]:
    return {
        "one_stroke_guard": load_asset("guard_one_stroke.txt"),
        "final_answer_guard": load_asset("guard_final_answer.txt"),
    }
