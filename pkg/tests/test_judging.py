"""Judge protocol tests: score parsing, retries, agreement statistics."""

import math
import re

import numpy as np
import pytest

from vlmdraw.gateway import mock_provider, mock_state
from vlmdraw.judging import (
    AgreementStats,
    Rubric,
    ScoreParseFailure,
    agreement_stats,
    align_rate,
    judge_alignment,
    judge_quality,
    parse_quality_score,
)
from vlmdraw.prompting import load_asset
from vlmdraw.rendering import RasterImage

from oracles import weighted_kappa_oracle


def shipped_examples(asset: str) -> list[str]:
    """The worked example outputs embedded in a rubric asset."""
    text = load_asset(asset)
    return re.findall(r"<example_\d+>\n(.*?)\n</example_\d+>", text, re.DOTALL)


IMG = RasterImage.blank(32, 32)


class TestQualityJudge:
    def test_shipped_ball_examples_parse_to_2_and_4(self):
        examples = shipped_examples("rubric_ball_physics.txt")
        assert len(examples) == 2
        assert parse_quality_score(examples[0]) == 2
        assert parse_quality_score(examples[1]) == 4

    def test_shipped_maze_example_parses_to_1(self):
        examples = shipped_examples("rubric_maze_nav.txt")
        assert parse_quality_score(examples[0]) == 1

    def test_judge_quality_end_to_end(self):
        examples = shipped_examples("rubric_ball_physics.txt")
        provider = mock_provider([examples[1]])
        verdict = judge_quality(IMG, IMG, Rubric.BALL_PHYSICS, provider)
        assert verdict.score == 4
        assert "path the ball takes is logical" in verdict.reasoning
        request = mock_state(provider).requests[0]
        parts = request[0]["content"]
        assert sum(p["type"] == "image_url" for p in parts) == 2
        assert "Quality Checks" in parts[0]["text"]

    def test_out_of_range_score_rejected(self):
        provider = mock_provider(["Quality Score: 7", "Quality Score: 7"])
        with pytest.raises(ScoreParseFailure):
            judge_quality(IMG, IMG, Rubric.BALL_PHYSICS, provider)

    def test_format_retry_recovers(self):
        provider = mock_provider(["I think it is quite good.",
                                  "Reconsidered.\nQuality Score: 5"])
        verdict = judge_quality(IMG, IMG, Rubric.BALL_PHYSICS, provider)
        assert verdict.score == 5
        assert len(mock_state(provider).requests) == 2
        retry_parts = mock_state(provider).requests[1]
        assert any("previous reply did not end with the required format"
                   in p.get("text", "")
                   for m in retry_parts for p in m["content"])

    def test_maze_rubric_substitutes_path(self):
        provider = mock_provider(["Quality Score: 3"])
        judge_quality(IMG, IMG, Rubric.MAZE_NAV, provider,
                      proposed_path="Up, Right, Down")
        sent = mock_state(provider).requests[0][0]["content"][0]["text"]
        assert "Up, Right, Down" in sent
        assert "{INSERT_ORIGINAL_PROMPT_PATH}" not in sent

    def test_maze_rubric_requires_path(self):
        provider = mock_provider(["Quality Score: 3"])
        with pytest.raises(ValueError):
            judge_quality(IMG, IMG, Rubric.MAZE_NAV, provider)

    def test_reasoning_preserved(self):
        provider = mock_provider(["Careful reasoning here.\nQuality Score: 5"])
        verdict = judge_quality(IMG, IMG, Rubric.BALL_PHYSICS, provider)
        assert verdict.reasoning == "Careful reasoning here."


class TestAlignment:
    def test_infer_and_rate(self):
        provider = mock_provider(["The path ends in bucket 2.\nAnswer: 2"])
        verdict = judge_alignment(IMG, "Which bucket?", provider)
        assert verdict.inferred_answer == "2"
        assert align_rate(["2"], ["2"]) == 1.0
        assert align_rate(["Yes"], ["no"]) == 0.0
        assert align_rate(["a", "b", "a", "a"], ["a", "b", "x", "a"]) == 0.75

    def test_question_substituted(self):
        provider = mock_provider(["Answer: Yes"])
        judge_alignment(IMG, "Is the path valid?", provider)
        sent = mock_state(provider).requests[0][0]["content"][0]["text"]
        assert "Is the path valid?" in sent


class TestAgreement:
    def test_perfect_agreement(self):
        stats = agreement_stats([1, 2, 3, 4, 5, 2], [1, 2, 3, 4, 5, 2])
        assert stats.kappa_quadratic == pytest.approx(1.0)
        assert stats.pearson == pytest.approx(1.0)
        assert stats.n == 6

    def test_antisymmetric_fixture(self):
        a = [1, 2, 3, 4, 5]
        b = [5, 4, 3, 2, 1]
        stats = agreement_stats(a, b)
        assert stats.pearson == pytest.approx(-1.0)
        assert stats.kappa_quadratic == pytest.approx(
            weighted_kappa_oracle(a, b), abs=1e-9)
        assert stats.kappa_quadratic == pytest.approx(-1.0, abs=1e-9)

    def test_matches_oracle_on_random_vectors(self):
        rng = np.random.default_rng(8)
        for _ in range(40):
            n = int(rng.integers(2, 40))
            a = list(rng.integers(1, 6, n))
            b = list(rng.integers(1, 6, n))
            want = weighted_kappa_oracle(a, b)
            got = agreement_stats(a, b).kappa_quadratic
            if math.isnan(want):
                assert math.isnan(got)
            else:
                assert got == pytest.approx(want, abs=1e-9)

    def test_symmetric_in_arguments(self):
        a = [1, 3, 5, 2, 2, 4]
        b = [2, 3, 4, 2, 1, 5]
        ab = agreement_stats(a, b)
        ba = agreement_stats(b, a)
        assert ab.kappa_quadratic == pytest.approx(ba.kappa_quadratic)
        assert ab.pearson == pytest.approx(ba.pearson)

    def test_zero_variance_pearson_absent(self):
        stats = agreement_stats([3, 3, 3], [1, 2, 3])
        assert stats.pearson is None

    def test_paired_shuffle_invariance(self):
        rng = np.random.default_rng(9)
        a = list(rng.integers(1, 6, 30))
        b = list(rng.integers(1, 6, 30))
        order = rng.permutation(30)
        sa = [a[i] for i in order]
        sb = [b[i] for i in order]
        base = agreement_stats(a, b)
        shuffled = agreement_stats(sa, sb)
        assert shuffled.kappa_quadratic == pytest.approx(
            base.kappa_quadratic, abs=1e-12)
        assert shuffled.pearson == pytest.approx(base.pearson, abs=1e-12)

    def test_rejects_bad_ratings(self):
        with pytest.raises(ValueError):
            agreement_stats([0, 1], [1, 1])
        with pytest.raises(ValueError):
            agreement_stats([1], [1])
