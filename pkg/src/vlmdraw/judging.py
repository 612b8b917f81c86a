"""Model-as-judge protocols: rubric-scored annotation quality,
annotation-to-answer alignment, and inter-rater agreement statistics."""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .gateway import ChatMessage, ImagePart, ProviderConfig, TextPart, complete
from .metrics import normalize_answer
from .prompting import load_asset
from .rendering import RasterImage

__all__ = [
    "Rubric",
    "JudgeVerdict",
    "AgreementStats",
    "ScoreParseFailure",
    "judge_quality",
    "judge_alignment",
    "align_rate",
    "agreement_stats",
    "parse_quality_score",
]

RATING_LEVELS = 5

FORMAT_REMINDER = (
    "Your previous reply did not end with the required format. Repeat "
    "your assessment and finish with exactly one line of the form "
    "'Quality Score: N' where N is an integer from 1 to 5.")

ANSWER_REMINDER = (
    "Your previous reply did not end with the required format. State "
    "your conclusion again and finish with exactly one line of the "
    "form 'Answer: X'.")


class Rubric(Enum):
    BALL_PHYSICS = "rubric_ball_physics.txt"
    MAZE_NAV = "rubric_maze_nav.txt"


class ScoreParseFailure(Exception):
    pass


@dataclass(frozen=True)
class JudgeVerdict:
    reasoning: str
    score: Optional[int] = None
    inferred_answer: Optional[str] = None

    def __post_init__(self):
        if self.score is not None and self.score not in range(1, 6):
            raise ValueError("quality score must be in 1..5")


@dataclass(frozen=True)
class AgreementStats:
    kappa_quadratic: float
    pearson: Optional[float]
    n: int


_SCORE = re.compile(r"Quality Score:\s*(-?\d+)")
_ANSWER = re.compile(r"Answer:\s*(.+)")


def parse_quality_score(text: str) -> int:
    """The terminal 'Quality Score: N' line; N must be 1..5."""
    matches = _SCORE.findall(text)
    if not matches:
        raise ScoreParseFailure("no 'Quality Score:' line found")
    score = int(matches[-1])
    if score not in range(1, 6):
        raise ScoreParseFailure(f"score {score} outside 1..5")
    return score


def _reasoning_before_score(text: str) -> str:
    last = None
    for last in _SCORE.finditer(text):
        pass
    return text[:last.start()].strip() if last else text.strip()


def judge_quality(original: RasterImage, annotated: RasterImage,
                  rubric: Rubric, provider: ProviderConfig,
                  proposed_path: Optional[str] = None) -> JudgeVerdict:
    """Score an annotated image 1-5 against the task rubric.

    Both images are sent with the rubric text; the maze rubric needs
    the proposed path substituted in. One format-reminder retry is
    allowed before ScoreParseFailure.
    """
    rubric_text = load_asset(rubric.value)
    if rubric is Rubric.MAZE_NAV:
        if proposed_path is None:
            raise ValueError("maze rubric requires the proposed path")
        rubric_text = rubric_text.replace("{INSERT_ORIGINAL_PROMPT_PATH}",
                                          proposed_path)
    messages = [ChatMessage.user(TextPart(rubric_text),
                                 ImagePart(original), ImagePart(annotated))]
    response = complete(messages, provider)
    try:
        score = parse_quality_score(response)
    except ScoreParseFailure:
        messages.append(ChatMessage.assistant(response))
        messages.append(ChatMessage.user(TextPart(FORMAT_REMINDER)))
        response = complete(messages, provider)
        score = parse_quality_score(response)
    return JudgeVerdict(reasoning=_reasoning_before_score(response),
                        score=score)


def judge_alignment(annotated: RasterImage, question: str,
                    provider: ProviderConfig) -> JudgeVerdict:
    """Infer the answer implied by the annotations alone (the model's
    own text answer is never shown)."""
    prompt = load_asset("alignment.txt").replace("{question}", question)
    messages = [ChatMessage.user(TextPart(prompt), ImagePart(annotated))]
    response = complete(messages, provider)
    matches = _ANSWER.findall(response)
    if not matches:
        messages.append(ChatMessage.assistant(response))
        messages.append(ChatMessage.user(TextPart(ANSWER_REMINDER)))
        response = complete(messages, provider)
        matches = _ANSWER.findall(response)
        if not matches:
            raise ScoreParseFailure("no 'Answer:' line found")
    answer = matches[-1].strip()
    return JudgeVerdict(reasoning=response.strip(), inferred_answer=answer)


def align_rate(inferred: Sequence[str],
               model_answers: Sequence[Optional[str]]) -> float:
    """Fraction of instances where the judge's inferred answer equals
    the model's stated final answer (normalized comparison)."""
    if len(inferred) != len(model_answers):
        raise ValueError("verdicts and answers must align")
    if not inferred:
        return 0.0
    hits = sum(1 for judge, model in zip(inferred, model_answers)
               if model is not None
               and normalize_answer(judge) == normalize_answer(model))
    return hits / len(inferred)


def agreement_stats(a: Sequence[int], b: Sequence[int]) -> AgreementStats:
    """Quadratically weighted Cohen's kappa and Pearson correlation on
    aligned 1..5 rating vectors."""
    if len(a) != len(b) or len(a) < 2:
        raise ValueError("need two aligned rating vectors of length >= 2")
    for v in list(a) + list(b):
        if v not in range(1, RATING_LEVELS + 1):
            raise ValueError(f"rating {v} outside 1..{RATING_LEVELS}")
    k = RATING_LEVELS
    conf = np.zeros((k, k))
    for x, y in zip(a, b):
        conf[x - 1, y - 1] += 1
    conf /= conf.sum()
    idx = np.arange(k)
    weights = 1.0 - ((idx[:, None] - idx[None, :]) ** 2) / ((k - 1) ** 2)
    po = float((weights * conf).sum())
    row = conf.sum(axis=1)
    col = conf.sum(axis=0)
    pe = float((weights * np.outer(row, col)).sum())
    kappa = float("nan") if abs(1 - pe) < 1e-15 else (po - pe) / (1 - pe)
    av = np.asarray(a, dtype=float)
    bv = np.asarray(b, dtype=float)
    if av.std() == 0 or bv.std() == 0:
        pearson = None
    else:
        pearson = float(np.corrcoef(av, bv)[0, 1])
    return AgreementStats(kappa_quadratic=kappa, pearson=pearson, n=len(a))
