"""Drive a stepwise annotation session against the scripted mock
provider and watch the feedback loop: each turn the model sees its own
prior strokes composited onto the image plus their text form.

Run from the repo root:  python demos/demo_mock_session.py
"""

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).parent.parent / "src"))

from vlmdraw.gateway import mock_provider
from vlmdraw.prompting import FreeQuestion, PromptConfig, SessionMode
from vlmdraw.rendering import RasterImage
from vlmdraw.sessions import Session, run_multi_turn
from vlmdraw.strokes import CoordinateFrame

script = [
    "<answer><strokes><s1><points>'x200y200','x500y450'</points>"
    "<t_values>0.00,1.00</t_values><id>leg_1</id></s1></strokes></answer>",
    "<answer><strokes><s1><points>'x500y450','x800y300'</points>"
    "<t_values>0.00,1.00</t_values><id>leg_2</id></s1></strokes></answer>",
    "<answer></answer>",
    "<final_answer>2</final_answer>",
]

session = Session(
    base_image=RasterImage.blank(1000, 1000),
    cfg=PromptConfig(frame=CoordinateFrame.normalized(1000),
                     mode=SessionMode.STEPWISE),
    task=FreeQuestion("Which region does the path end in?"),
    provider=mock_provider(script),
)

annotation, answer = run_multi_turn(session)
print(f"session {session.id}: {len(session.turns)} turns, "
      f"status {session.status.value}")
for record in session.turns:
    delta = ([s.id for s in record.delta.strokes] or
             (f"final answer {record.final_answer!r}"
              if record.final_answer else "no stroke"))
    print(f"  turn {record.index}: sent image "
          f"{record.sent_image.width}x{record.sent_image.height}, "
          f"history {len(record.sent_text_history)} chars, delta {delta}")
print(f"accumulated strokes: {[s.id for s in annotation.strokes]}")
print(f"final answer: {answer!r}")
