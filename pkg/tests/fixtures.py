"""Shared test fixtures: canned model outputs and generators."""

# A real single-turn trajectory answer: five strokes tracing a ball's
# path into a container, followed by the container number.
TRAJECTORY_OUTPUT = """<s1>
  <points>'x500y100','x500y270','x500y270','x350y400'</points>
  <t_values>0.00,0.50,0.50,1.00</t_values>
  <id>path_1</id>
</s1>
<s2>
  <points>'x350y400','x325y470','x300y540'</points>
  <t_values>0.00,0.50,1.00</t_values>
  <id>drop_1</id>
</s2>
<s3>
  <points>'x300y540','x390y470','x500y670'</points>
  <t_values>0.00,0.50,1.00</t_values>
  <id>path_2</id>
</s3>
<s4>
  <points>'x500y670','x570y690','x640y710'</points>
  <t_values>0.00,0.50,1.00</t_values>
  <id>path_bounce</id>
</s4>
<s5>
  <points>'x640y710','x700y850','x730y950'</points>
  <t_values>0.00,0.60,1.00</t_values>
  <id>drop_2</id>
</s5>
<final_answer>3</final_answer>"""

TRAJECTORY_STROKE_IDS = ["path_1", "drop_1", "path_2", "path_bounce", "drop_2"]

WRAPPED_TRAJECTORY_OUTPUT = f"<answer>\n<strokes>\n{TRAJECTORY_OUTPUT}\n</strokes>\n</answer>"

def _token(x, y):
    return f"x{int(round(x))}y{int(round(y))}"


def _stroke_block(n, tokens, ts, stroke_id, text=None):
    lines = [f"<s{n}>"]
    if text is not None:
        lines.append(f'  <text size="2.0" color="#ff0066">\'{text}\'</text>')
    points = ",".join(f"'{t}'" for t in tokens)
    lines.append(f"  <points>{points}</points>")
    lines.append("  <t_values>" + ",".join(f"{t:.2f}" for t in ts) + "</t_values>")
    lines.append(f"  <id>{stroke_id}</id>")
    lines.append(f"</s{n}>")
    return "\n".join(lines)


def oracle_strokes(instance):
    """Ground-truth strokes for a generated instance, as (tokens, ts,
    id, text) tuples in the instance's pixel space. Instances must be
    sized so that a normalized frame of scale == width maps tokens to
    pixels exactly (1000x1000 images with scale 1000)."""
    from vlmdraw.forge.types import BallGT, CountGT, DotsGT, MazeGT

    truth = instance.truth
    strokes = []
    if isinstance(truth, DotsGT):
        pts = truth.points
        for i in range(len(pts) - 1):
            tokens = [_token(*pts[i]), _token(*pts[i + 1])]
            strokes.append((tokens, [0.0, 1.0], f"connect_{i + 1}", None))
    elif isinstance(truth, CountGT):
        for i, box in enumerate(truth.boxes, start=1):
            cx = (box.x0 + box.x1) / 2
            cy = (box.y0 + box.y1) / 2
            strokes.append(([_token(cx, cy)], [0.0], f"marker_{i}", str(i)))
    elif isinstance(truth, BallGT):
        path = list(truth.trajectory)
        sampled = path[:: max(1, len(path) // 6)]
        if tuple(sampled[-1]) != tuple(path[-1]):
            sampled.append(path[-1])
        tokens = [_token(*p) for p in sampled]
        ts = [round(k / (len(tokens) - 1), 2) for k in range(len(tokens))]
        ts[-1] = 1.0
        strokes.append((tokens, ts, "trajectory", None))
    elif isinstance(truth, MazeGT):
        strokes.append((["x100y100", "x500y500"], [0.0, 1.0], "path_sketch", None))
    return strokes


def oracle_single_turn_response(instance):
    """A full single-turn answer emitting the instance's ground truth."""
    from vlmdraw.forge.types import expected_answer

    blocks = [_stroke_block(n, *spec)
              for n, spec in enumerate(oracle_strokes(instance), start=1)]
    answer = expected_answer(instance)
    final = (f"\n<final_answer>{answer}</final_answer>"
             if answer is not None else "")
    return ("<answer>\n<strokes>\n" + "\n".join(blocks)
            + "\n</strokes>" + final + "\n</answer>")


def oracle_stepwise_script(instance):
    """One stroke per response, then an empty answer, then the final
    answer, per the stepwise protocol."""
    from vlmdraw.forge.types import expected_answer

    responses = []
    for spec in oracle_strokes(instance):
        block = _stroke_block(1, *spec)
        responses.append(f"<answer>\n<strokes>\n{block}\n</strokes>\n</answer>")
    responses.append("<answer></answer>")
    answer = expected_answer(instance)
    responses.append(f"<final_answer>{answer}</final_answer>"
                     if answer is not None else "<final_answer>done</final_answer>")
    return responses


def make_counting_instance(out_dir, seed, n_objects, dims=(1000, 1000)):
    """Synthetic counting fixture: colored rectangles at known boxes,
    written under out_dir/images/, truth boxes in the instance."""
    import numpy as np
    from PIL import Image, ImageDraw

    from vlmdraw.forge.types import CountGT, TaskInstance, TaskKind
    from vlmdraw.metrics import PixelRect

    rng = np.random.default_rng(seed)
    w, h = dims
    boxes = []
    while len(boxes) < n_objects:
        x0 = int(rng.integers(50, w - 150))
        y0 = int(rng.integers(50, h - 150))
        box = PixelRect(x0, y0, x0 + 80, y0 + 80)
        if all(box.iou(b) == 0 for b in boxes):
            boxes.append(box)
    img = Image.new("RGBA", dims, (255, 255, 255, 255))
    draw = ImageDraw.Draw(img)
    for box in boxes:
        draw.rectangle([box.x0, box.y0, box.x1, box.y1],
                       fill=(30, 90, 200, 255))
    images_dir = out_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    instance_id = f"count_{seed}_{n_objects}"
    img.save(images_dir / f"{instance_id}.png")
    return TaskInstance(
        id=instance_id, kind=TaskKind.COUNTING, width=w, height=h,
        question=f"Count the blue squares by numbering each one.",
        truth=CountGT(object="blue squares", boxes=tuple(boxes)),
        image_path=f"images/{instance_id}.png")


COUNTING_OUTPUT = """<answer>
<concept>Numbering each apple</concept>
<strokes>
<s1>
    <text size="1.6" color="#ff0066">'1'</text>
    <points>'x15y31'</points>
    <t_values>0.00</t_values>
    <id>marker_apple1</id>
</s1>
<s2>
    <text size="1.6" color="#ff0066">'2'</text>
    <points>'x40y12'</points>
    <t_values>0.00</t_values>
    <id>marker_apple2</id>
</s2>
</strokes>
<final_answer>2</final_answer>
</answer>"""
