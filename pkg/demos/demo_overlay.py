"""Parse a canned model answer and render it as a vector overlay.

Run from the repo root:  python demos/demo_overlay.py
Writes demo_out/overlay.overlay.svg and demo_out/overlay.png.
"""

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).parent.parent / "src"))

from vlmdraw.rendering import RasterImage, composite, render_overlay
from vlmdraw.strokes import CoordinateFrame, parse_annotation, validate

MODEL_OUTPUT = """<answer>
<strokes>
<s1>
  <points>'x150y800','x400y400','x500y350','x650y500'</points>
  <t_values>0.00,0.40,0.60,1.00</t_values>
  <id>swoop</id>
</s1>
<s2>
  <points>'x650y500','x650y500','x850y820'</points>
  <t_values>0.50,0.50,1.00</t_values>
  <id>drop</id>
</s2>
<s3>
  <points>'x850y870'</points>
  <t_values>0.00</t_values>
  <id>landing_dot</id>
</s3>
<s4>
  <text size="28px" color="#0057ff">'lands here'</text>
  <points>'x850y930'</points>
  <t_values>0.00</t_values>
  <id>label_landing</id>
</s4>
</strokes>
<final_answer>4</final_answer>
</answer>"""

frame = CoordinateFrame.normalized(1000)
annotation = parse_annotation(MODEL_OUTPUT, frame)
print(f"parsed {len(annotation.strokes)} strokes, "
      f"final answer {annotation.final_answer!r}")
print(f"violations: {validate(annotation, frame) or 'none'}")

base = RasterImage.blank(1000, 1000, "#f8f4e8")
overlay = render_overlay(annotation, frame, base.dims)
for layer in overlay.layers:
    kind = "text" if layer.text else f"{len(layer.primitives)} primitives"
    print(f"  layer {layer.stroke_id}: {kind}, color {layer.color}")

out = pathlib.Path("demo_out")
out.mkdir(exist_ok=True)
(out / "overlay.overlay.svg").write_text(overlay.to_svg())
(out / "overlay.png").write_bytes(composite(base, overlay).to_png_bytes())
print(f"wrote {out}/overlay.overlay.svg and {out}/overlay.png")
