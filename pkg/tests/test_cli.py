"""CLI pipeline tests with the scripted mock provider (no network)."""

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from vlmdraw.cli import main
from vlmdraw.forge import gen_random_dots, load_manifest, save_dataset

from fixtures import (
    make_counting_instance,
    oracle_single_turn_response,
    oracle_stepwise_script,
)


@pytest.fixture()
def runner():
    return CliRunner()


def forge_small_dots(tmp_path):
    instances = [gen_random_dots(4 + i, seed=i, dims=(1000, 1000))
                 for i in range(3)]
    manifest = save_dataset(instances, tmp_path / "data")
    return manifest, instances


def write_mock_script(tmp_path, instances, stepwise=False):
    script = {"per_instance": {
        i.id: (oracle_stepwise_script(i) if stepwise
               else [oracle_single_turn_response(i)])
        for i in instances}}
    path = tmp_path / "script.json"
    path.write_text(json.dumps(script))
    return path


class TestForge:
    def test_maze_pairs_and_manifest(self, runner, tmp_path):
        result = runner.invoke(main, ["forge", "maze", "--count", "5",
                                      "--seed", "1", "-o", str(tmp_path / "m")])
        assert result.exit_code == 0, result.output
        instances = load_manifest(tmp_path / "m" / "manifest.json")
        assert len(instances) == 10
        valids = [i for i in instances if i.truth.valid]
        assert len(valids) == 5
        for i in valids:
            assert 3 <= len(i.truth.path) <= 8

    def test_forge_idempotent(self, runner, tmp_path):
        args = ["forge", "dots", "--count", "3", "--seed", "2",
                "-o", str(tmp_path / "d")]
        first = runner.invoke(main, args)
        digest1 = [l for l in first.output.splitlines() if "sha256" in l]
        second = runner.invoke(main, args)
        digest2 = [l for l in second.output.splitlines() if "sha256" in l]
        assert first.exit_code == 0 and second.exit_code == 0
        assert digest1 == digest2

    def test_balldrop_stratification(self, runner, tmp_path):
        result = runner.invoke(main, ["forge", "balldrop", "--count", "6",
                                      "--seed", "3", "-o", str(tmp_path / "b")])
        assert result.exit_code == 0, result.output
        instances = load_manifest(tmp_path / "b" / "manifest.json")
        counts = sorted(len(i.truth.scene.platforms) for i in instances)
        assert counts == [1, 1, 2, 2, 3, 3]


class TestRunEval:
    def test_mock_run_writes_artifacts(self, runner, tmp_path):
        manifest, instances = forge_small_dots(tmp_path)
        script = write_mock_script(tmp_path, instances)
        result = runner.invoke(main, [
            "run", "--manifest", str(manifest), "--mock-script", str(script),
            "-o", str(tmp_path / "run"), "--jobs", "1"])
        assert result.exit_code == 0, result.output
        for instance in instances:
            assert (tmp_path / "run" / "annotations" /
                    f"{instance.id}.anno.json").exists()
            assert (tmp_path / "run" / "overlays" /
                    f"{instance.id}.overlay.svg").exists()
            assert (tmp_path / "run" / "composites" /
                    f"{instance.id}.composite.png").exists()
            assert (tmp_path / "run" / "transcripts" /
                    f"{instance.id}.ndjson").exists()
        run_doc = json.loads((tmp_path / "run" / "run.json").read_text())
        assert run_doc["completed"] == 3

    def test_eval_oracle_run_scores_perfectly(self, runner, tmp_path):
        manifest, instances = forge_small_dots(tmp_path)
        script = write_mock_script(tmp_path, instances)
        runner.invoke(main, ["run", "--manifest", str(manifest),
                             "--mock-script", str(script),
                             "-o", str(tmp_path / "run"), "--jobs", "1"])
        result = runner.invoke(main, ["eval", "--run", str(tmp_path / "run"),
                                      "--manifest", str(manifest)])
        assert result.exit_code == 0, result.output
        report = json.loads((tmp_path / "run" / "eval" / "report.json").read_text())
        assert report["aggregates"]["rmse"]["mean"] == 0.0
        assert report["aggregates"]["ordering"]["total_errors"] == 0
        assert report["aggregates"]["answer_accuracy"]["acc"] == 1.0

    def test_pipeline_deterministic_reports(self, runner, tmp_path):
        manifest, instances = forge_small_dots(tmp_path)
        script = write_mock_script(tmp_path, instances)
        blobs = []
        for name in ("run_a", "run_b"):
            runner.invoke(main, ["run", "--manifest", str(manifest),
                                 "--mock-script", str(script),
                                 "-o", str(tmp_path / name), "--jobs", "1"])
            runner.invoke(main, ["eval", "--run", str(tmp_path / name),
                                 "--manifest", str(manifest)])
            blobs.append((
                (tmp_path / name / "eval" / "report.json").read_bytes(),
                (tmp_path / name / "eval" / "instances.csv").read_bytes()))
        assert blobs[0] == blobs[1]

    def test_resume_skips_completed(self, runner, tmp_path):
        manifest, instances = forge_small_dots(tmp_path)
        script = write_mock_script(tmp_path, instances)
        runner.invoke(main, ["run", "--manifest", str(manifest),
                             "--mock-script", str(script),
                             "-o", str(tmp_path / "run"), "--jobs", "1"])
        # remove one annotation, then resume: only that one reruns
        removed = instances[1].id
        (tmp_path / "run" / "annotations" / f"{removed}.anno.json").unlink()
        result = runner.invoke(main, [
            "run", "--manifest", str(manifest), "--mock-script", str(script),
            "-o", str(tmp_path / "run"), "--jobs", "1", "--resume"])
        assert result.exit_code == 0, result.output
        assert "1 ok, 0 failed, 2 skipped" in result.output
        assert (tmp_path / "run" / "annotations" /
                f"{removed}.anno.json").exists()

    def test_multi_turn_run(self, runner, tmp_path):
        manifest, instances = forge_small_dots(tmp_path)
        script = write_mock_script(tmp_path, instances, stepwise=True)
        result = runner.invoke(main, [
            "run", "--manifest", str(manifest), "--mock-script", str(script),
            "-o", str(tmp_path / "run"), "--multi", "--jobs", "1"])
        assert result.exit_code == 0, result.output
        transcript = (tmp_path / "run" / "transcripts" /
                      f"{instances[0].id}.ndjson").read_text().splitlines()
        n_strokes = len(instances[0].truth.points) - 1
        assert len(transcript) == n_strokes + 2  # strokes + empty + final

    def test_counting_eval(self, runner, tmp_path):
        data_dir = tmp_path / "data"
        data_dir.mkdir()
        instances = [make_counting_instance(data_dir, seed, 3 + seed)
                     for seed in range(2)]
        manifest = save_dataset(instances, data_dir)
        script = write_mock_script(tmp_path, load_manifest(manifest))
        runner.invoke(main, ["run", "--manifest", str(manifest),
                             "--mock-script", str(script),
                             "-o", str(tmp_path / "run"), "--jobs", "1"])
        result = runner.invoke(main, ["eval", "--run", str(tmp_path / "run"),
                                      "--manifest", str(manifest)])
        assert result.exit_code == 0, result.output
        report = json.loads(
            (tmp_path / "run" / "eval" / "report.json").read_text())
        assert report["aggregates"]["counting"]["marker_location_acc"] == 1.0
        assert report["aggregates"]["counting"]["count_acc"] == 1.0

    def test_run_schema_error_exit_code(self, runner, tmp_path):
        bad = tmp_path / "manifest.json"
        bad.write_text('{"schema_version": 42, "instances": []}')
        result = runner.invoke(main, ["run", "--manifest", str(bad),
                                      "-o", str(tmp_path / "run")])
        assert result.exit_code == 2


class TestJudgeAgreeRender:
    def test_judge_mock(self, runner, tmp_path):
        result = runner.invoke(main, ["forge", "maze", "--count", "2",
                                      "--seed", "7", "-o", str(tmp_path / "m")])
        assert result.exit_code == 0
        manifest = tmp_path / "m" / "manifest.json"
        instances = load_manifest(manifest)
        script = write_mock_script(tmp_path, instances)
        runner.invoke(main, ["run", "--manifest", str(manifest),
                             "--mock-script", str(script),
                             "-o", str(tmp_path / "run"), "--jobs", "1"])
        judge_script = tmp_path / "judge_script.json"
        judge_script.write_text(json.dumps({
            "default": ["The path is clean.\nQuality Score: 5"],
            "per_instance": {}}))
        result = runner.invoke(main, [
            "judge", "--run", str(tmp_path / "run"), "--manifest",
            str(manifest), "--rubric", "maze", "--mock-script",
            str(judge_script)])
        assert result.exit_code == 0, result.output
        verdicts = [json.loads(l) for l in
                    (tmp_path / "run" / "verdicts.ndjson").read_text().splitlines()]
        assert len(verdicts) == 4
        assert all(v["score"] == 5 for v in verdicts)

    def test_agree(self, runner, tmp_path):
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        a.write_text("[1, 2, 3, 4, 5]")
        b.write_text("[1, 2, 3, 4, 5]")
        result = runner.invoke(main, ["agree", str(a), str(b)])
        assert result.exit_code == 0
        doc = json.loads(result.output)
        assert doc["kappa_quadratic"] == pytest.approx(1.0)
        assert doc["pearson"] == pytest.approx(1.0)

    def test_render_command(self, runner, tmp_path):
        from vlmdraw.rendering import RasterImage

        from fixtures import TRAJECTORY_OUTPUT, TRAJECTORY_STROKE_IDS
        from vlmdraw.strokes import (CoordinateFrame, Dialect,
                                     parse_annotation, serialize_annotation)

        anno = tmp_path / "a.anno.json"
        frame = CoordinateFrame.normalized(1000)
        anno.write_text(serialize_annotation(
            parse_annotation(TRAJECTORY_OUTPUT, frame), Dialect.JSON))
        image = tmp_path / "base.png"
        image.write_bytes(RasterImage.blank(1000, 1000).to_png_bytes())
        result = runner.invoke(main, ["render", "--anno", str(anno),
                                      "--image", str(image),
                                      "-o", str(tmp_path / "out")])
        assert result.exit_code == 0, result.output
        svg = (tmp_path / "out.overlay.svg").read_text()
        assert svg.count("<g id=") == len(TRAJECTORY_STROKE_IDS)
        assert (tmp_path / "out.png").exists()
