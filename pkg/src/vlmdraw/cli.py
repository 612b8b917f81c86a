"""Command-line pipelines: dataset forging, annotation runs, scoring,
judging, agreement statistics, rendering, and the HTTP studio service.

Exit codes: 0 success, 1 some instances failed, 2 configuration or
schema errors.
"""

from __future__ import annotations

import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from . import __version__
from .forge import (
    SchemaError,
    MissingFile,
    gen_ball_drop,
    gen_maze,
    gen_outline_dots,
    gen_random_dots,
    load_manifest,
    save_dataset,
)
from .evaluation import evaluate_instances, write_report
from .gateway import ProviderConfig, mock_provider
from .judging import Rubric, ScoreParseFailure, agreement_stats, judge_quality
from .prompting import FreeQuestion, PromptConfig, SessionMode
from .rendering import RasterImage, composite, render_overlay
from .sessions import ParseFailure, Session, run_multi_turn, run_single_turn
from .strokes import (
    CoordinateFrame,
    Dialect,
    Origin,
    ParseError,
    parse_annotation,
    serialize_annotation,
)


def _fail(message: str, code: int = 2):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _parse_frame(spec: str, origin: str) -> CoordinateFrame:
    origin_enum = Origin.BOTTOM_LEFT if origin == "bottom_left" else Origin.TOP_LEFT
    if spec.startswith("grid"):
        parts = spec.split(":")
        res = int(parts[1]) if len(parts) > 1 else 50
        return CoordinateFrame.grid(res, res, origin_enum)
    parts = spec.split(":")
    scale = int(parts[1]) if len(parts) > 1 else 1000
    return CoordinateFrame.normalized(scale, origin_enum)


@click.group()
@click.version_option(__version__)
def main():
    """Vector-stroke annotation harness for vision-language models."""


# ---------------------------------------------------------------------------
# forge

@main.command()
@click.argument("kind", type=click.Choice(["dots", "maze", "balldrop"]))
@click.option("--count", type=int, required=True,
              help="Instances to generate (maze: valid+invalid pairs).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("-o", "--out", "out_dir", required=True, type=click.Path())
def forge(kind, count, seed, out_dir):
    """Generate a synthetic benchmark with ground truth."""
    try:
        instances = []
        if kind == "maze":
            for i in range(count):
                valid, invalid = gen_maze(seed + i)
                instances.extend([valid, invalid])
        elif kind == "balldrop":
            for i in range(count):
                instances.append(gen_ball_drop(seed + i, n_lines=i % 3 + 1))
        else:
            for i in range(count):
                n = 4 + (i % 7)
                instances.append(gen_random_dots(n, seed=seed + i))
        manifest_path = save_dataset(instances, out_dir)
    except Exception as exc:  # generation failures are config-level
        _fail(f"generation failed: {exc}", 2)
    digest = hashlib.sha256(Path(manifest_path).read_bytes()).hexdigest()
    click.echo(f"wrote {len(instances)} instances to {manifest_path}")
    click.echo(f"manifest sha256: {digest}")


# ---------------------------------------------------------------------------
# run

def _provider_for(name, providers_file, mock_script, instance_id):
    if mock_script is not None:
        per_instance = mock_script.get("per_instance", {})
        script = per_instance.get(instance_id, mock_script.get("default"))
        if not script:
            raise SchemaError(f"mock script has no responses for {instance_id!r}")
        return mock_provider(script)
    if providers_file is None:
        raise SchemaError("--providers-file is required for live providers")
    doc = json.loads(Path(providers_file).read_text())
    if name not in doc:
        raise SchemaError(f"provider {name!r} not in {providers_file}")
    return ProviderConfig(name=name, **doc[name])


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--provider", "provider_name", default="mock", show_default=True)
@click.option("--providers-file", type=click.Path(), default=None,
              help="JSON map of provider name -> ProviderConfig fields.")
@click.option("--mock-script", type=click.Path(), default=None,
              help="Canned responses: {'per_instance': {id: [...]},"
                   " 'default': [...]}.")
@click.option("-o", "--out", "out_dir", required=True, type=click.Path())
@click.option("--grid/--no-grid", default=False, show_default=True)
@click.option("--multi/--single", "multi_turn", default=False, show_default=True)
@click.option("--frame", default="normalized:1000", show_default=True,
              help="normalized[:scale] or grid[:res].")
@click.option("--origin", type=click.Choice(["top_left", "bottom_left"]),
              default="top_left", show_default=True)
@click.option("--max-turns", type=int, default=40, show_default=True)
@click.option("--jobs", type=int, default=4, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--resume", is_flag=True, default=False,
              help="Skip instances whose annotations already exist.")
def run(manifest_path, provider_name, providers_file, mock_script, out_dir,
        grid, multi_turn, frame, origin, max_turns, jobs, seed, resume):
    """Run every manifest instance through an annotation session."""
    try:
        instances = load_manifest(manifest_path)
        frame_obj = _parse_frame(frame, origin)
        cfg = PromptConfig(
            frame=frame_obj, grid_enabled=grid,
            mode=SessionMode.STEPWISE if multi_turn else SessionMode.SINGLE_TURN)
        script_doc = (json.loads(Path(mock_script).read_text())
                      if mock_script else None)
    except (SchemaError, MissingFile, ValueError, OSError) as exc:
        _fail(str(exc), 2)

    out = Path(out_dir)
    for sub in ("annotations", "overlays", "composites", "transcripts"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    config = {
        "provider": provider_name, "grid": grid,
        "mode": "multi" if multi_turn else "single",
        "frame": frame, "origin": origin, "seed": seed,
        "manifest_sha256": hashlib.sha256(
            Path(manifest_path).read_bytes()).hexdigest(),
    }
    run_id = hashlib.sha256(
        json.dumps(config, sort_keys=True).encode()).hexdigest()[:16]

    failures: dict[str, str] = {}

    def process(instance):
        anno_path = out / "annotations" / f"{instance.id}.anno.json"
        if resume and anno_path.exists():
            return "skipped"
        base = RasterImage.from_png_bytes(Path(instance.image_path).read_bytes())
        provider = _provider_for(provider_name, providers_file, script_doc,
                                 instance.id)
        session = Session(
            base_image=base, cfg=cfg, task=FreeQuestion(instance.question),
            provider=provider,
            event_log_path=str(out / "transcripts" / f"{instance.id}.ndjson"))
        try:
            if multi_turn:
                annotation, answer = run_multi_turn(session, max_turns=max_turns)
            else:
                annotation, answer = run_single_turn(session)
        except ParseFailure as exc:
            failures[instance.id] = f"parse_failure: {exc.cause}"
            return "failed"
        anno_path.write_text(serialize_annotation(annotation, Dialect.JSON))
        overlay = render_overlay(annotation, frame_obj, base.dims,
                                 background_ref=f"../{instance.id}.png")
        (out / "overlays" / f"{instance.id}.overlay.svg").write_text(
            overlay.to_svg())
        (out / "composites" / f"{instance.id}.composite.png").write_bytes(
            composite(base, overlay).to_png_bytes())
        return "ok"

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        outcomes = list(pool.map(process, instances))

    (out / "run.json").write_text(json.dumps(
        {"run_id": run_id, "config": config, "tool_version": __version__,
         "manifest": str(manifest_path),
         "completed": sum(1 for o in outcomes if o != "failed"),
         "failed": sorted(failures)},
        indent=2, sort_keys=True) + "\n")
    if failures:
        (out / "failures.json").write_text(
            json.dumps(failures, indent=2, sort_keys=True))
    ok = sum(1 for o in outcomes if o == "ok")
    click.echo(f"run {run_id}: {ok} ok, {len(failures)} failed, "
               f"{sum(1 for o in outcomes if o == 'skipped')} skipped")
    if failures and len(failures) == len(instances):
        sys.exit(2)
    sys.exit(1 if failures else 0)


# ---------------------------------------------------------------------------
# eval

@main.command("eval")
@click.option("--run", "run_dir", required=True, type=click.Path())
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("-o", "--out", "out_dir", default=None, type=click.Path())
def eval_cmd(run_dir, manifest_path, out_dir):
    """Score a run directory against its manifest's ground truth."""
    run_path = Path(run_dir)
    try:
        instances = load_manifest(manifest_path)
        run_doc = json.loads((run_path / "run.json").read_text())
        frame_obj = _parse_frame(run_doc["config"]["frame"],
                                 run_doc["config"]["origin"])
    except (SchemaError, MissingFile, OSError, KeyError,
            json.JSONDecodeError) as exc:
        _fail(str(exc), 2)
    results = []
    for instance in instances:
        anno_path = run_path / "annotations" / f"{instance.id}.anno.json"
        if not anno_path.exists():
            continue
        try:
            annotation = parse_annotation(anno_path.read_text(), frame_obj)
        except ParseError as exc:
            _fail(f"{anno_path}: {exc}", 2)
        results.append((instance, annotation, annotation.final_answer))
    report = evaluate_instances(results, frame_obj,
                                run_id=run_doc["run_id"],
                                config=run_doc["config"])
    target = Path(out_dir) if out_dir else run_path / "eval"
    write_report(report, target)
    click.echo(f"evaluated {len(results)} instances -> {target}")
    click.echo(report.to_json())


# ---------------------------------------------------------------------------
# judge

@main.command()
@click.option("--run", "run_dir", required=True, type=click.Path())
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--rubric", type=click.Choice(["ball", "maze"]), required=True)
@click.option("--provider", "provider_name", default="mock", show_default=True)
@click.option("--providers-file", type=click.Path(), default=None)
@click.option("--mock-script", type=click.Path(), default=None)
@click.option("-o", "--out", "out_path", default=None, type=click.Path())
def judge(run_dir, manifest_path, rubric, provider_name, providers_file,
          mock_script, out_path):
    """Judge composited annotations against a quality rubric."""
    run_path = Path(run_dir)
    try:
        instances = load_manifest(manifest_path)
        script_doc = (json.loads(Path(mock_script).read_text())
                      if mock_script else None)
    except (SchemaError, MissingFile, OSError) as exc:
        _fail(str(exc), 2)
    rubric_enum = Rubric.BALL_PHYSICS if rubric == "ball" else Rubric.MAZE_NAV
    target = Path(out_path) if out_path else run_path / "verdicts.ndjson"
    n_done = n_failed = 0
    with open(target, "w") as fh:
        for instance in instances:
            comp = run_path / "composites" / f"{instance.id}.composite.png"
            if not comp.exists():
                continue
            original = RasterImage.from_png_bytes(
                Path(instance.image_path).read_bytes())
            annotated = RasterImage.from_png_bytes(comp.read_bytes())
            proposed = None
            if rubric == "maze" and instance.truth is not None:
                proposed = ", ".join(instance.truth.path)
            try:
                provider = _provider_for(provider_name, providers_file,
                                         script_doc, instance.id)
                verdict = judge_quality(original, annotated, rubric_enum,
                                        provider, proposed_path=proposed)
            except (ScoreParseFailure, SchemaError) as exc:
                fh.write(json.dumps({"id": instance.id,
                                     "error": str(exc)}) + "\n")
                n_failed += 1
                continue
            fh.write(json.dumps({"id": instance.id, "score": verdict.score,
                                 "reasoning": verdict.reasoning}) + "\n")
            n_done += 1
    click.echo(f"judged {n_done} instances ({n_failed} failures) -> {target}")
    sys.exit(1 if n_failed and n_done else (2 if n_failed else 0))


# ---------------------------------------------------------------------------
# agree

@main.command()
@click.argument("ratings_a", type=click.Path(exists=True))
@click.argument("ratings_b", type=click.Path(exists=True))
def agree(ratings_a, ratings_b):
    """Agreement statistics between two JSON rating files (1..5 lists)."""
    try:
        a = json.loads(Path(ratings_a).read_text())
        b = json.loads(Path(ratings_b).read_text())
        stats = agreement_stats(a, b)
    except (ValueError, json.JSONDecodeError) as exc:
        _fail(str(exc), 2)
    click.echo(json.dumps({"kappa_quadratic": stats.kappa_quadratic,
                           "pearson": stats.pearson, "n": stats.n},
                          indent=2))


# ---------------------------------------------------------------------------
# render

@main.command()
@click.option("--anno", "anno_path", required=True, type=click.Path(exists=True))
@click.option("--image", "image_path", required=True, type=click.Path(exists=True))
@click.option("--frame", default="normalized:1000", show_default=True)
@click.option("--origin", type=click.Choice(["top_left", "bottom_left"]),
              default="top_left", show_default=True)
@click.option("-o", "--out", "out_base", required=True,
              help="Output basename; writes <out>.overlay.svg and <out>.png.")
def render(anno_path, image_path, frame, origin, out_base):
    """Render an annotation file over an image as SVG and composited PNG."""
    try:
        frame_obj = _parse_frame(frame, origin)
        annotation = parse_annotation(Path(anno_path).read_text(), frame_obj)
        base = RasterImage.from_png_bytes(Path(image_path).read_bytes())
    except (ParseError, ValueError, OSError) as exc:
        _fail(str(exc), 2)
    overlay = render_overlay(annotation, frame_obj, base.dims,
                             background_ref=str(image_path))
    Path(f"{out_base}.overlay.svg").write_text(overlay.to_svg())
    Path(f"{out_base}.png").write_bytes(composite(base, overlay).to_png_bytes())
    click.echo(f"wrote {out_base}.overlay.svg and {out_base}.png "
               f"({len(overlay.layers)} layers)")


# ---------------------------------------------------------------------------
# serve

@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8008, show_default=True)
@click.option("--state-dir", type=click.Path(), default="studio_state",
              show_default=True)
@click.option("--mock-script", type=click.Path(), default=None,
              help="Serve with a scripted mock provider (JSON: "
                   "{'scripts': [[...], ...]} assigned per session).")
@click.option("--providers-file", type=click.Path(), default=None)
def serve(host, port, state_dir, mock_script, providers_file):
    """Serve the annotation studio HTTP API."""
    import uvicorn

    from .service import create_app

    script_doc = json.loads(Path(mock_script).read_text()) if mock_script else None
    providers = (json.loads(Path(providers_file).read_text())
                 if providers_file else {})
    app = create_app(state_dir=state_dir, providers=providers,
                     mock_scripts=script_doc)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
