"""Generate one of each synthetic benchmark and write a dataset.

Run from the repo root:  python demos/demo_benchmarks.py
Writes demo_out/benchmarks/ with images and a manifest.
"""

import math
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).parent.parent / "src"))

from vlmdraw.forge import (
    gen_ball_drop,
    gen_maze,
    gen_outline_dots,
    gen_random_dots,
    save_dataset,
)

instances = []

dots = gen_random_dots(7, seed=42)
print(f"{dots.id}: {len(dots.truth.points)} dots, "
      f"min spacing >= {3 * dots.truth.dot_radius:.0f}px")
instances.append(dots)

angles = [i * 2 * math.pi / 360 for i in range(360)]
heart = [(16 * math.sin(a) ** 3,
          -(13 * math.cos(a) - 5 * math.cos(2 * a)
            - 2 * math.cos(3 * a) - math.cos(4 * a))) for a in angles]
outline = gen_outline_dots([heart])
print(f"{outline.id}: {len(outline.truth.points)} outline dots")
instances.append(outline)

valid, invalid = gen_maze(seed=13)
print(f"{valid.id}: path {' -> '.join(valid.truth.path)}")
print(f"{invalid.id}: corrupted path {' -> '.join(invalid.truth.path)}")
instances.extend([valid, invalid])

ball = gen_ball_drop(seed=5, n_lines=2)
print(f"{ball.id}: ball from {ball.truth.scene.ball_start}, "
      f"lands in container {ball.truth.container} after "
      f"{len(ball.truth.trajectory)} trajectory samples")
instances.append(ball)

out = pathlib.Path("demo_out/benchmarks")
manifest = save_dataset(instances, out)
print(f"wrote {len(instances)} instances -> {manifest}")
