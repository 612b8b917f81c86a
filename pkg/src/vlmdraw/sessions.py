"""Single-turn and stepwise annotation sessions.

A session owns one base image, one task, and a provider. Single-turn
asks for every stroke plus the final answer in one call. Stepwise asks
for exactly one stroke per turn under a guard prompt; each later turn
feeds back the composited image of everything drawn so far together
with the strokes' text form, and an empty turn triggers one final
answer-only turn. Every turn is recorded and optionally appended to a
replayable event log.
"""

from __future__ import annotations

import hashlib
import json
import uuid
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

from .gateway import ChatMessage, ImagePart, ProviderConfig, TextPart, complete
from .prompting import (
    PromptConfig,
    SessionMode,
    TaskPrompt,
    build_system_prompt,
    build_task_prompt,
    stepwise_guards,
)
from .rendering import RasterImage, composite, grid_augment, render_overlay
from .strokes import (
    AnnotationSet,
    Dialect,
    ParseError,
    Stroke,
    parse_annotation,
    serialize_annotation,
)

__all__ = [
    "SessionStatus",
    "TurnRecord",
    "Session",
    "ParseFailure",
    "SessionStateError",
    "DEFAULT_MAX_TURNS",
    "run_single_turn",
    "run_multi_turn",
    "step",
]

# Stepwise runs average ~6 turns with a worst task mean near 19; double
# headroom on top of that.
DEFAULT_MAX_TURNS = 40


class SessionStatus(Enum):
    OPEN = "open"
    AWAITING_FINAL = "awaiting_final"
    DONE = "done"
    FAILED = "failed"


class SessionStateError(Exception):
    pass


class ParseFailure(Exception):
    def __init__(self, raw_text: str, cause: ParseError):
        self.raw_text = raw_text
        self.cause = cause
        super().__init__(f"model output failed to parse: {cause}")


@dataclass(frozen=True)
class TurnRecord:
    index: int
    sent_image: RasterImage
    sent_text_history: str
    response: str
    delta: AnnotationSet
    final_answer: Optional[str] = None
    violations: tuple[str, ...] = ()


@dataclass
class Session:
    base_image: RasterImage
    cfg: PromptConfig
    task: TaskPrompt
    provider: ProviderConfig
    id: str = field(default_factory=lambda: uuid.uuid4().hex)
    turns: list[TurnRecord] = field(default_factory=list)
    status: SessionStatus = SessionStatus.OPEN
    accumulated: tuple[Stroke, ...] = ()
    final_answer: Optional[str] = None
    turn_limit_exceeded: bool = False
    event_log_path: Optional[str] = None

    def accumulated_set(self) -> AnnotationSet:
        return AnnotationSet(strokes=self.accumulated,
                             final_answer=self.final_answer)


def _input_image(session: Session) -> RasterImage:
    if session.cfg.grid_enabled:
        return grid_augment(session.base_image, session.cfg.frame)
    return session.base_image


def _feedback_image(session: Session) -> RasterImage:
    """Base image with all accumulated strokes composited, re-augmented
    with the ruler each turn when the grid is enabled."""
    if not session.accumulated:
        return _input_image(session)
    overlay = render_overlay(AnnotationSet(strokes=session.accumulated),
                             session.cfg.frame, session.base_image.dims)
    fed = composite(session.base_image, overlay)
    if session.cfg.grid_enabled:
        fed = grid_augment(fed, session.cfg.frame)
    return fed


def _history_text(session: Session) -> str:
    if not session.accumulated:
        return ""
    return serialize_annotation(AnnotationSet(strokes=session.accumulated),
                                Dialect.XML_STYLE)


def _log_turn(session: Session, record: TurnRecord):
    session.turns.append(record)
    if session.event_log_path:
        entry = {
            "session_id": session.id,
            "index": record.index,
            "status": session.status.value,
            "sent_image_sha256": hashlib.sha256(
                record.sent_image.to_png_bytes()).hexdigest(),
            "sent_text_history": record.sent_text_history,
            "response": record.response,
            "delta": json.loads(serialize_annotation(record.delta, Dialect.JSON)),
            "final_answer": record.final_answer,
            "violations": list(record.violations),
        }
        with open(session.event_log_path, "a") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")


def _messages_for(session: Session, user_text: str,
                  image: RasterImage) -> list[ChatMessage]:
    messages = []
    if session.cfg.sketch_enabled:
        messages.append(ChatMessage.system(build_system_prompt(session.cfg)))
    messages.append(ChatMessage.user(TextPart(user_text), ImagePart(image)))
    return messages


def run_single_turn(session: Session) -> tuple[AnnotationSet, Optional[str]]:
    """One call carrying the system prompt, task prompt, and input image;
    the full annotation set and final answer come back together."""
    if session.status is not SessionStatus.OPEN:
        raise SessionStateError(f"session is {session.status.value}")
    if session.cfg.mode is not SessionMode.SINGLE_TURN:
        raise SessionStateError("session is configured for stepwise mode")
    image = _input_image(session)
    user_text = build_task_prompt(session.task)
    response = complete(_messages_for(session, user_text, image), session.provider)
    try:
        parsed = parse_annotation(response, session.cfg.frame)
    except ParseError as exc:
        session.status = SessionStatus.FAILED
        _log_turn(session, TurnRecord(index=1, sent_image=image,
                                      sent_text_history="", response=response,
                                      delta=AnnotationSet(),
                                      violations=("parse_failure",)))
        raise ParseFailure(response, exc) from exc
    session.accumulated = parsed.strokes
    session.final_answer = parsed.final_answer
    session.status = SessionStatus.DONE
    _log_turn(session, TurnRecord(index=1, sent_image=image,
                                  sent_text_history="", response=response,
                                  delta=parsed, final_answer=parsed.final_answer))
    return session.accumulated_set(), parsed.final_answer


def _unique_id(session: Session, stroke: Stroke, turn_index: int) -> Stroke:
    used = {s.id for s in session.accumulated}
    if stroke.id not in used:
        return stroke
    return replace(stroke, id=f"{stroke.id}_t{turn_index}")


def step(session: Session, user_text: Optional[str] = None,
         new_image: Optional[RasterImage] = None) -> TurnRecord:
    """Execute exactly one stepwise protocol turn.

    Open sessions run a one-stroke turn; a session awaiting its final
    answer runs the answer-only turn. Injecting a new image swaps the
    base and starts a fresh stroke layer (the transcript is kept), for
    guidance flows where each screenshot is annotated anew.
    """
    if session.cfg.mode is not SessionMode.STEPWISE:
        raise SessionStateError("session is configured for single-turn mode")
    if session.status not in (SessionStatus.OPEN, SessionStatus.AWAITING_FINAL):
        raise SessionStateError(f"session is {session.status.value}")

    if new_image is not None:
        session.base_image = new_image
        session.accumulated = ()
        if session.status is SessionStatus.AWAITING_FINAL:
            session.status = SessionStatus.OPEN

    guards = stepwise_guards()
    index = len(session.turns) + 1
    task_text = build_task_prompt(session.task)
    history = _history_text(session)
    image = _feedback_image(session)

    if session.status is SessionStatus.AWAITING_FINAL:
        parts = [guards["final_answer_guard"], task_text]
    else:
        parts = [guards["one_stroke_guard"], task_text]
    if history:
        parts.append("Previously drawn strokes:\n" + history)
    if user_text:
        parts.append(user_text)
    prompt = "\n\n".join(parts)

    response = complete(_messages_for(session, prompt, image), session.provider)
    violations: list[str] = []
    try:
        parsed = parse_annotation(response, session.cfg.frame)
    except ParseError as exc:
        session.status = SessionStatus.FAILED
        _log_turn(session, TurnRecord(index=index, sent_image=image,
                                      sent_text_history=history,
                                      response=response, delta=AnnotationSet(),
                                      violations=("parse_failure",)))
        raise ParseFailure(response, exc) from exc

    if session.status is SessionStatus.AWAITING_FINAL:
        session.final_answer = parsed.final_answer
        session.status = SessionStatus.DONE
        if parsed.strokes:
            violations.append("strokes_on_final_turn_ignored")
        record = TurnRecord(index=index, sent_image=image,
                            sent_text_history=history, response=response,
                            delta=AnnotationSet(),
                            final_answer=parsed.final_answer,
                            violations=tuple(violations))
        _log_turn(session, record)
        return record

    # one-stroke turn: the guard allows at most one stroke
    delta_strokes = parsed.strokes[:1]
    if len(parsed.strokes) > 1:
        violations.append("extra_strokes_dropped")
    if delta_strokes:
        stroke = _unique_id(session, delta_strokes[0], index)
        if stroke.id != delta_strokes[0].id:
            violations.append("renamed_duplicate_id")
        session.accumulated = session.accumulated + (stroke,)
        delta = AnnotationSet(strokes=(stroke,))
    else:
        delta = AnnotationSet()
        session.status = SessionStatus.AWAITING_FINAL
    if parsed.final_answer is not None:
        # the guard forbids final answers on stroke turns; note and ignore
        violations.append("early_final_answer_ignored")
    record = TurnRecord(index=index, sent_image=image,
                        sent_text_history=history, response=response,
                        delta=delta, violations=tuple(violations))
    _log_turn(session, record)
    return record


def run_multi_turn(session: Session,
                   max_turns: int = DEFAULT_MAX_TURNS
                   ) -> tuple[AnnotationSet, Optional[str]]:
    """Drive stepwise turns until the model stops adding strokes, then
    one final answer-only turn. Exceeding max_turns forces the final
    turn (recorded on the session). Total calls <= max_turns + 1."""
    if session.status is not SessionStatus.OPEN:
        raise SessionStateError(f"session is {session.status.value}")
    stroke_turns = 0
    while session.status is SessionStatus.OPEN:
        if stroke_turns >= max_turns:
            session.turn_limit_exceeded = True
            session.status = SessionStatus.AWAITING_FINAL
            break
        step(session)
        stroke_turns += 1
    if session.status is SessionStatus.AWAITING_FINAL:
        step(session)
    return session.accumulated_set(), session.final_answer
