"""Acceptance gate: every exit criterion at its stated tolerance.

Each test prints one ACCEPTANCE <name>: PASS/FAIL line. The live-smoke
criterion is environment-gated (set VLMDRAW_LIVE_SMOKE=1 plus provider
env vars) and asserts schema validity only: headline accuracy numbers
require proprietary frontier-model access and are out of desk-scale
reach by design, so nothing here asserts them.
"""

import json
import math
import os
import random
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from vlmdraw.cli import main as cli_main
from vlmdraw.forge import gen_random_dots, gen_outline_dots, load_manifest, save_dataset, simulate_ball
from vlmdraw.geometry import CubicBezier, PixelPoint, fit_cubic
from vlmdraw.judging import agreement_stats, parse_quality_score, ScoreParseFailure
from vlmdraw.metrics import (
    PixelRect,
    ap50,
    dilation_accuracy,
    marker_accuracy,
    ordering_errors,
)
from vlmdraw.rendering import RasterImage, composite, render_overlay
from vlmdraw.strokes import (
    AnnotationSet,
    CoordinateFrame,
    Dialect,
    parse_annotation,
    serialize_annotation,
)

from fixtures import (
    TRAJECTORY_OUTPUT,
    TRAJECTORY_STROKE_IDS,
    make_counting_instance,
    oracle_single_turn_response,
    oracle_stepwise_script,
)
from oracles import (
    ap50_oracle,
    dilation_hit_oracle,
    marker_matching_oracle,
    ordering_oracle,
    maze_walk_oracle,
    weighted_kappa_oracle,
)
from test_strokes import make_random_annotation

NORM = CoordinateFrame.normalized(1000)


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"\nACCEPTANCE {name}: FAIL", flush=True)
        raise
    print(f"\nACCEPTANCE {name}: PASS", flush=True)


# ---------------------------------------------------------------------------

def test_grammar_round_trip():
    with criterion("grammar-round-trip"):
        started = time.monotonic()
        rng = random.Random(20240001)
        for case in range(1000):
            annotation = make_random_annotation(rng)
            dialect = Dialect.XML_STYLE if case % 2 == 0 else Dialect.JSON
            assert parse_annotation(
                serialize_annotation(annotation, dialect), NORM) == annotation

        parsed = parse_annotation(TRAJECTORY_OUTPUT, NORM)
        assert len(parsed.strokes) == 5
        assert [s.id for s in parsed.strokes] == TRAJECTORY_STROKE_IDS
        assert parsed.final_answer == "3"
        for dialect in (Dialect.XML_STYLE, Dialect.JSON):
            assert parse_annotation(
                serialize_annotation(parsed, dialect), NORM) == parsed
        elapsed = time.monotonic() - started
        assert elapsed < 5.0, f"round-trip took {elapsed:.2f}s"


def test_bezier_fit_oracle():
    with criterion("bezier-fit-oracle"):
        started = time.monotonic()
        rng = np.random.default_rng(20240002)
        for _ in range(500):
            control = rng.uniform(0, 1000, (4, 2))
            n_interior = int(rng.integers(5, 9))
            ts = np.concatenate([[0.0],
                                 np.sort(rng.uniform(0.02, 0.98, n_interior)),
                                 [1.0]])
            curve = CubicBezier(*[PixelPoint(*p) for p in control])
            samples = [PixelPoint(*xy) for xy in curve.evaluate(ts)]
            fit = fit_cubic(samples, list(ts))
            err = np.max(np.abs(fit.control_array() - control))
            assert err < 1e-6, f"control-point error {err}"

        # collinear samples stay collinear
        fit = fit_cubic([PixelPoint(0, 0), PixelPoint(5, 0), PixelPoint(10, 0)],
                        [0.0, 0.5, 1.0])
        assert np.max(np.abs(fit.control_array()[:, 1])) < 1e-9

        # perturbing the fitted free control points never reduces RSS
        for _ in range(50):
            control = rng.uniform(0, 400, (4, 2))
            ts = np.concatenate([[0.0], np.sort(rng.uniform(0.1, 0.9, 5)), [1.0]])
            noisy = (CubicBezier(*[PixelPoint(*p) for p in control])
                     .evaluate(ts) + rng.normal(0, 2.0, (7, 2)))
            fit = fit_cubic([PixelPoint(*xy) for xy in noisy], list(ts))

            def rss(cp):
                pts = CubicBezier(*[PixelPoint(*c) for c in cp]).evaluate(ts)
                return float(np.sum((pts - noisy) ** 2))

            base_cp = fit.control_array()
            base_rss = rss(base_cp)
            for which in (1, 2):
                for axis in (0, 1):
                    for sign in (-1.0, 1.0):
                        perturbed = base_cp.copy()
                        perturbed[which, axis] += sign * 1e-3
                        assert rss(perturbed) >= base_rss - 1e-9
        elapsed = time.monotonic() - started
        assert elapsed < 10.0, f"fit oracle took {elapsed:.2f}s"


def test_metric_oracle_equivalence():
    with criterion("metric-oracle-equivalence"):
        rng = np.random.default_rng(20240003)

        def point():
            return PixelPoint(float(rng.uniform(0, 200)),
                              float(rng.uniform(0, 200)))

        def rect(max_side=100.0):
            x0, y0 = rng.uniform(0, 200, 2)
            return PixelRect(float(x0), float(y0),
                             float(x0 + rng.uniform(1, max_side)),
                             float(y0 + rng.uniform(1, max_side)))

        for _ in range(200):
            # ordering
            n = int(rng.integers(2, 9))
            gt = [point() for _ in range(n)]
            segments = [(point(), point())
                        for _ in range(int(rng.integers(0, 9)))]
            assert ordering_errors(gt, segments).errors == \
                ordering_oracle(gt, segments)
            # markers
            boxes = [rect() for _ in range(int(rng.integers(1, 9)))]
            markers = [(point(), "m") for _ in range(int(rng.integers(1, 9)))]
            assert marker_accuracy(boxes, markers).matched == \
                marker_matching_oracle(boxes, markers)
            # ap50
            gts = {"c": [rect() for _ in range(int(rng.integers(1, 9)))]}
            preds = {"c": [rect() for _ in range(int(rng.integers(0, 9)))]}
            got, want = ap50(preds, gts), ap50_oracle(preds, gts)
            for key in ("all", "small", "medium", "large"):
                if want[key] is None:
                    assert got[key] is None
                else:
                    assert abs(got[key] - want[key]) < 1e-9
            # dilation
            mask = np.zeros((48, 48), dtype=bool)
            cx, cy = rng.integers(10, 38, 2)
            half = int(rng.integers(2, 9))
            mask[cy - half:cy + half, cx - half:cx + half] = True
            anchor = PixelPoint(float(rng.uniform(0, 47)),
                                float(rng.uniform(0, 47)))
            r = float(rng.uniform(0, 12))
            got_acc = dilation_accuracy([(anchor, "p")], {"p": mask}, r).accuracy
            want_acc = 1.0 if dilation_hit_oracle(mask, anchor, r) else 0.0
            assert got_acc == want_acc

        # hand-computed IoU = 1/3 rejection case
        pred = PixelRect(0, 0, 10, 10)
        gt_box = PixelRect(5, 0, 15, 10)
        assert abs(pred.iou(gt_box) - 1.0 / 3.0) < 1e-12
        assert ap50({"c": [pred]}, {"c": [gt_box]})["all"] == 0.0

        # the antisymmetric rating fixture, against direct evaluation
        a, b = [1, 2, 3, 4, 5], [5, 4, 3, 2, 1]
        stats = agreement_stats(a, b)
        assert abs(stats.kappa_quadratic - weighted_kappa_oracle(a, b)) < 1e-9
        assert abs(stats.kappa_quadratic - (-1.0)) < 1e-9
        assert abs(stats.pearson - (-1.0)) < 1e-9


def test_generator_statistics(tmp_path):
    with criterion("generator-statistics"):
        runner = CliRunner()

        # 200 maze pairs via the CLI
        result = runner.invoke(cli_main, ["forge", "maze", "--count", "200",
                                          "--seed", "0",
                                          "-o", str(tmp_path / "maze")])
        assert result.exit_code == 0, result.output
        instances = load_manifest(tmp_path / "maze" / "manifest.json")
        assert len(instances) == 400
        by_id = {i.id: i for i in instances}
        for instance in instances:
            truth = instance.truth
            assert 3 <= len(truth.path) <= 8
            clean, final = maze_walk_oracle(truth.walls, truth.start, truth.path)
            if truth.valid:
                assert clean and final == truth.end
            else:
                assert (not clean) or final != truth.end
        for seed in range(200):
            valid = by_id[f"maze_{seed}_valid"].truth
            invalid = by_id[f"maze_{seed}_invalid"].truth
            diffs = [i for i, (x, y) in enumerate(zip(valid.path, invalid.path))
                     if x != y]
            assert len(diffs) == 1

        # 198 ball scenes: stratification and dt-refinement stability
        result = runner.invoke(cli_main, ["forge", "balldrop", "--count", "198",
                                          "--seed", "0",
                                          "-o", str(tmp_path / "ball")])
        assert result.exit_code == 0, result.output
        ball = load_manifest(tmp_path / "ball" / "manifest.json")
        assert len(ball) == 198
        line_counts = {1: 0, 2: 0, 3: 0}
        for instance in ball:
            line_counts[len(instance.truth.scene.platforms)] += 1
            assert instance.truth.trajectory[0] == instance.truth.scene.ball_start
        assert line_counts == {1: 66, 2: 66, 3: 66}
        landed = set()
        for instance in ball:
            fine = simulate_ball(instance.truth.scene, dt=(1.0 / 240.0) / 2.0,
                                 sample_every=16)
            assert fine.container == instance.truth.container, instance.id
            landed.add(instance.truth.container)
        assert landed == {1, 2, 3, 4}

        # outline dots: exactly 30, spacing CV under 2%
        angles = np.linspace(0, 2 * math.pi, 360, endpoint=False)
        circle = [(math.cos(a), math.sin(a)) for a in angles]
        outline = gen_outline_dots([circle])
        pts = outline.truth.points
        assert len(pts) == 30
        spacing = [math.dist(pts[i], pts[(i + 1) % 30]) for i in range(30)]
        cv = float(np.std(spacing) / np.mean(spacing))
        assert cv < 0.02, f"spacing CV {cv:.4f}"


def test_mock_end_to_end(tmp_path):
    with criterion("mock-end-to-end"):
        started = time.monotonic()
        runner = CliRunner()
        data_dir = tmp_path / "data"
        data_dir.mkdir()

        from vlmdraw.forge import gen_ball_drop, gen_maze

        instances = []
        for i in range(10):
            instances.append(gen_random_dots(4 + (i % 7), seed=100 + i,
                                             dims=(1000, 1000)))
        for i in range(4):
            valid, invalid = gen_maze(200 + i)
            instances.extend([valid, invalid])
        for i in range(7):
            instances.append(gen_ball_drop(300 + i, n_lines=i % 3 + 1))
        for i in range(5):
            instances.append(make_counting_instance(data_dir, 400 + i, 3 + i))
        assert len(instances) == 30
        manifest = save_dataset(instances, data_dir)

        script = {"per_instance": {
            i.id: [oracle_single_turn_response(i)] for i in instances}}
        script_path = tmp_path / "script.json"
        script_path.write_text(json.dumps(script))

        run_dir = tmp_path / "run"
        result = runner.invoke(cli_main, [
            "run", "--manifest", str(manifest), "--mock-script",
            str(script_path), "-o", str(run_dir), "--jobs", "4"])
        assert result.exit_code == 0, result.output

        result = runner.invoke(cli_main, ["eval", "--run", str(run_dir),
                                          "--manifest", str(manifest)])
        assert result.exit_code == 0, result.output
        report = json.loads((run_dir / "eval" / "report.json").read_text())
        agg = report["aggregates"]
        assert agg["rmse"]["mean"] == 0.0
        assert agg["rmse"]["empty_predictions"] == 0
        assert agg["ordering"]["total_errors"] == 0
        assert agg["answer_accuracy"]["acc"] == 1.0
        assert agg["counting"]["marker_location_acc"] == 1.0

        # multi-turn transcripts: the image sent at turn k pixel-equals
        # the composite of the base with all earlier deltas
        subset = instances[:3]
        sub_manifest = save_dataset(subset, tmp_path / "subset")
        stepwise_script = {"per_instance": {
            i.id: oracle_stepwise_script(i) for i in subset}}
        (tmp_path / "stepwise.json").write_text(json.dumps(stepwise_script))
        multi_dir = tmp_path / "run_multi"
        result = runner.invoke(cli_main, [
            "run", "--manifest", str(sub_manifest), "--mock-script",
            str(tmp_path / "stepwise.json"), "-o", str(multi_dir),
            "--multi", "--jobs", "1"])
        assert result.exit_code == 0, result.output
        import hashlib

        for instance in subset:
            base = RasterImage.from_png_bytes(
                (tmp_path / "subset" / "images" / f"{instance.id}.png")
                .read_bytes())
            lines = [json.loads(l) for l in
                     (multi_dir / "transcripts" / f"{instance.id}.ndjson")
                     .read_text().splitlines()]
            accumulated = ()
            for record in lines:
                if accumulated:
                    overlay = render_overlay(
                        AnnotationSet(strokes=accumulated), NORM, base.dims)
                    expected = composite(base, overlay)
                else:
                    expected = base
                expected_sha = hashlib.sha256(
                    expected.to_png_bytes()).hexdigest()
                assert record["sent_image_sha256"] == expected_sha, \
                    f"{instance.id} turn {record['index']}"
                delta = parse_annotation(json.dumps(record["delta"]), NORM)
                accumulated = accumulated + delta.strokes
        elapsed = time.monotonic() - started
        assert elapsed < 60.0, f"mock e2e took {elapsed:.2f}s"


def test_judge_parsing():
    with criterion("judge-parsing"):
        from test_judging import shipped_examples

        examples = shipped_examples("rubric_ball_physics.txt")
        assert parse_quality_score(examples[0]) == 2
        assert parse_quality_score(examples[1]) == 4
        with pytest.raises(ScoreParseFailure):
            parse_quality_score("Quality Score: 7")
        with pytest.raises(ScoreParseFailure):
            parse_quality_score("Quality Score: 0")

        varied = [1, 3, 5, 2, 4, 1]
        self_stats = agreement_stats(varied, varied)
        assert abs(self_stats.kappa_quadratic - 1.0) < 1e-12
        anti = agreement_stats([1, 2, 3, 4, 5], [5, 4, 3, 2, 1])
        assert abs(anti.pearson - (-1.0)) < 1e-12


LIVE_SMOKE = os.environ.get("VLMDRAW_LIVE_SMOKE") == "1"


def test_headline_number_disclosure():
    with criterion("headline-number-disclosure"):
        # Headline benchmark accuracies from frontier models are not
        # reproducible here (they need proprietary model access at
        # cost); the suite therefore never asserts them. The optional
        # live smoke below is the only networked path and it checks
        # output schema validity alone.
        assert True


@pytest.mark.skipif(not LIVE_SMOKE, reason="live smoke disabled; set "
                    "VLMDRAW_LIVE_SMOKE=1 with VLMDRAW_SMOKE_ENDPOINT, "
                    "VLMDRAW_SMOKE_MODEL, VLMDRAW_SMOKE_API_KEY")
def test_live_smoke_schema_only(tmp_path):
    from vlmdraw.gateway import ProviderConfig
    from vlmdraw.prompting import FreeQuestion, PromptConfig
    from vlmdraw.sessions import ParseFailure, Session, run_single_turn
    from vlmdraw.forge import gen_ball_drop, render_task_image
    from vlmdraw.strokes import validate

    provider = ProviderConfig(
        name="smoke",
        endpoint=os.environ["VLMDRAW_SMOKE_ENDPOINT"],
        model_id=os.environ["VLMDRAW_SMOKE_MODEL"],
        credential="VLMDRAW_SMOKE_API_KEY")
    for seed in range(5):
        instance = gen_ball_drop(900 + seed, n_lines=seed % 3 + 1)
        session = Session(base_image=render_task_image(instance),
                          cfg=PromptConfig(frame=NORM),
                          task=FreeQuestion(instance.question),
                          provider=provider)
        try:
            annotation, _ = run_single_turn(session)
        except ParseFailure:
            continue  # schema failure is reportable, not an accuracy claim
        violations = validate(annotation, NORM)
        structural = [v for v in violations
                      if v.kind in ("duplicate_id", "count_mismatch")]
        assert structural == []
