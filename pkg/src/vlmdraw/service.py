"""HTTP facade for interactive annotation sessions: create a session
from an image and question, step turns, toggle stroke visibility, and
export overlays. Backs the browser studio.

Persistence is an append-only per-session event log plus the ingested
base image; replaying the log reconstructs the resource state (status,
strokes, visibility) without re-calling any model.
"""

from __future__ import annotations

import base64
import binascii
import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .gateway import GatewayError, ProviderConfig, mock_provider
from .prompting import FreeQuestion, PromptConfig, SessionMode
from .rendering import OverlayDocument, RasterImage, composite, render_overlay
from .sessions import (
    ParseFailure,
    Session,
    SessionStateError,
    SessionStatus,
    TurnRecord,
    run_single_turn,
    step,
)
from .strokes import (
    AnnotationSet,
    CoordinateFrame,
    Dialect,
    Origin,
    parse_annotation,
    serialize_annotation,
)

__all__ = ["create_app"]

MAX_UPLOAD_BYTES = 20 * 1024 * 1024


class CreateSessionRequest(BaseModel):
    image_b64: str
    question: str
    provider: str = "mock"
    grid: bool = False
    mode: str = "stepwise"  # or "single"
    frame: str = "normalized:1000"
    origin: str = "top_left"


class TurnRequest(BaseModel):
    user_text: Optional[str] = None
    image_b64: Optional[str] = None


class VisibilityRequest(BaseModel):
    visible: bool


@dataclass
class StudioSession:
    session: Session
    lock: threading.Lock = field(default_factory=threading.Lock)
    visibility: dict[str, bool] = field(default_factory=dict)
    overlay_version: int = 0
    created_at: float = field(default_factory=time.time)

    def overlay(self) -> OverlayDocument:
        doc = render_overlay(self.session.accumulated_set(),
                             self.session.cfg.frame,
                             self.session.base_image.dims)
        for stroke_id, visible in self.visibility.items():
            if not visible:
                doc = doc.with_visibility(stroke_id, False)
        return doc

    def resource(self) -> dict:
        return {
            "id": self.session.id,
            "status": self.session.status.value,
            "turn_count": len(self.session.turns),
            "overlay_version": self.overlay_version,
            "created_at": self.created_at,
            "final_answer": self.session.final_answer,
        }

    def layers(self) -> list[dict]:
        return [{"stroke_id": layer.stroke_id,
                 "visible": layer.visible,
                 "color": layer.color,
                 "is_text": layer.text is not None}
                for layer in self.overlay().layers]


def _decode_image(image_b64: str) -> RasterImage:
    if not image_b64:
        raise HTTPException(400, "empty image")
    try:
        raw = base64.b64decode(image_b64, validate=True)
    except (binascii.Error, ValueError):
        raise HTTPException(400, "image is not valid base64")
    if not raw:
        raise HTTPException(400, "empty image")
    if len(raw) > MAX_UPLOAD_BYTES:
        raise HTTPException(400, "image exceeds the 20 MB upload cap")
    try:
        return RasterImage.from_png_bytes(raw)
    except Exception:
        raise HTTPException(400, "image could not be decoded")


def _parse_frame(spec: str, origin: str) -> CoordinateFrame:
    origin_enum = (Origin.BOTTOM_LEFT if origin == "bottom_left"
                   else Origin.TOP_LEFT)
    try:
        if spec.startswith("grid"):
            res = int(spec.split(":")[1]) if ":" in spec else 50
            return CoordinateFrame.grid(res, res, origin_enum)
        scale = int(spec.split(":")[1]) if ":" in spec else 1000
        return CoordinateFrame.normalized(scale, origin_enum)
    except ValueError:
        raise HTTPException(400, f"bad frame spec {spec!r}")


def create_app(state_dir: str = "studio_state",
               providers: Optional[dict] = None,
               mock_scripts: Optional[dict] = None,
               studio_dist: Optional[str] = None) -> FastAPI:
    """Build the service. `providers` maps names to ProviderConfig
    fields; `mock_scripts` ({"scripts": [[...], ...]}) hands each new
    session the next canned script under the provider name "mock"."""
    state = Path(state_dir)
    state.mkdir(parents=True, exist_ok=True)
    app = FastAPI(title="vlmdraw studio service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    sessions: dict[str, StudioSession] = {}
    registry = dict(providers or {})
    script_queue = list((mock_scripts or {}).get("scripts", []))
    script_default = (mock_scripts or {}).get("default")
    script_cursor = {"next": 0}
    registry_lock = threading.Lock()

    def _event_path(session_id: str) -> Path:
        return state / f"{session_id}.events.ndjson"

    def _append_event(session_id: str, event: dict):
        with open(_event_path(session_id), "a") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")

    def _resolve_provider(name: str) -> ProviderConfig:
        if name == "mock" and (script_queue or script_default):
            with registry_lock:
                if script_cursor["next"] < len(script_queue):
                    script = script_queue[script_cursor["next"]]
                    script_cursor["next"] += 1
                elif script_default:
                    script = script_default
                else:
                    raise HTTPException(422, "mock scripts exhausted")
            return mock_provider(script)
        if name not in registry:
            raise HTTPException(422, f"unknown provider {name!r}")
        return ProviderConfig(name=name, **registry[name])

    def _get(session_id: str) -> StudioSession:
        studio = sessions.get(session_id)
        if studio is None:
            raise HTTPException(404, "no such session")
        return studio

    @app.post("/sessions", status_code=201)
    def create_session(request: CreateSessionRequest):
        image = _decode_image(request.image_b64)
        provider = _resolve_provider(request.provider)
        frame = _parse_frame(request.frame, request.origin)
        try:
            cfg = PromptConfig(
                frame=frame, grid_enabled=request.grid,
                mode=(SessionMode.SINGLE_TURN if request.mode == "single"
                      else SessionMode.STEPWISE))
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        session = Session(base_image=image, cfg=cfg,
                          task=FreeQuestion(request.question),
                          provider=provider)
        studio = StudioSession(session=session)
        sessions[session.id] = studio
        (state / f"{session.id}.base.png").write_bytes(image.to_png_bytes())
        _append_event(session.id, {
            "type": "created", "id": session.id,
            "question": request.question, "grid": request.grid,
            "mode": request.mode, "frame": request.frame,
            "origin": request.origin, "provider": request.provider,
            "created_at": studio.created_at,
        })
        return studio.resource()

    @app.post("/sessions/{session_id}/turns")
    def post_turn(session_id: str, request: TurnRequest):
        studio = _get(session_id)
        with studio.lock:
            session = studio.session
            if session.status in (SessionStatus.DONE, SessionStatus.FAILED):
                raise HTTPException(409, f"session is {session.status.value}")
            new_image = (_decode_image(request.image_b64)
                         if request.image_b64 else None)
            try:
                if session.cfg.mode is SessionMode.SINGLE_TURN:
                    annotation, _ = run_single_turn(session)
                    record = session.turns[-1]
                    delta = annotation
                else:
                    if new_image is not None:
                        studio.visibility.clear()
                        (state / f"{session.id}.base.png").write_bytes(
                            new_image.to_png_bytes())
                    record = step(session, user_text=request.user_text,
                                  new_image=new_image)
                    delta = record.delta
            except ParseFailure as exc:
                _append_event(session_id, {"type": "turn_failed",
                                           "raw": exc.raw_text})
                raise HTTPException(502, f"model output unparseable: {exc.cause}")
            except SessionStateError as exc:
                raise HTTPException(409, str(exc))
            except GatewayError as exc:
                raise HTTPException(502, str(exc))
            if delta.strokes or new_image is not None:
                studio.overlay_version += 1
            _append_event(session_id, {
                "type": "turn", "index": record.index,
                "delta": json.loads(serialize_annotation(delta, Dialect.JSON)),
                "final_answer": session.final_answer,
                "status": session.status.value,
                "new_image": request.image_b64 is not None,
                "overlay_version": studio.overlay_version,
            })
            return {
                "index": record.index,
                "delta": json.loads(serialize_annotation(delta, Dialect.JSON)),
                "overlay_version": studio.overlay_version,
                "status": session.status.value,
                "final_answer": session.final_answer,
                "violations": list(record.violations),
            }

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        studio = _get(session_id)
        with studio.lock:
            resource = studio.resource()
            resource["layers"] = studio.layers()
            return resource

    @app.get("/sessions/{session_id}/overlay.svg")
    def get_overlay(session_id: str):
        studio = _get(session_id)
        with studio.lock:
            return Response(studio.overlay().to_svg(),
                            media_type="image/svg+xml")

    @app.patch("/sessions/{session_id}/strokes/{stroke_id}")
    def patch_stroke(session_id: str, stroke_id: str,
                     request: VisibilityRequest):
        studio = _get(session_id)
        with studio.lock:
            known = {s.id for s in studio.session.accumulated}
            if stroke_id not in known:
                raise HTTPException(400, f"unknown stroke {stroke_id!r}")
            studio.visibility[stroke_id] = request.visible
            studio.overlay_version += 1
            _append_event(session_id, {
                "type": "visibility", "stroke_id": stroke_id,
                "visible": request.visible,
                "overlay_version": studio.overlay_version,
            })
            return {"stroke_id": stroke_id, "visible": request.visible,
                    "overlay_version": studio.overlay_version}

    @app.get("/sessions/{session_id}/export")
    def export(session_id: str, kind: str = "svg"):
        studio = _get(session_id)
        with studio.lock:
            if kind == "svg":
                return Response(studio.overlay().to_svg(),
                                media_type="image/svg+xml")
            if kind == "png":
                raster = composite(studio.session.base_image, studio.overlay())
                return Response(raster.to_png_bytes(), media_type="image/png")
            if kind == "anno.json":
                return Response(
                    serialize_annotation(studio.session.accumulated_set(),
                                         Dialect.JSON),
                    media_type="application/json")
            raise HTTPException(400, f"unknown export kind {kind!r}")

    def _replay_logs():
        for log_path in sorted(state.glob("*.events.ndjson")):
            session_id = log_path.name.removesuffix(".events.ndjson")
            if session_id in sessions:
                continue
            base_path = state / f"{session_id}.base.png"
            if not base_path.exists():
                continue
            events = [json.loads(line)
                      for line in log_path.read_text().splitlines() if line]
            if not events or events[0].get("type") != "created":
                continue
            head = events[0]
            frame = _parse_frame(head["frame"], head["origin"])
            cfg = PromptConfig(
                frame=frame, grid_enabled=head["grid"],
                mode=(SessionMode.SINGLE_TURN if head["mode"] == "single"
                      else SessionMode.STEPWISE))
            session = Session(
                base_image=RasterImage.from_png_bytes(base_path.read_bytes()),
                cfg=cfg, task=FreeQuestion(head["question"]),
                provider=mock_provider(["<answer></answer>"]), id=session_id)
            studio = StudioSession(session=session,
                                   created_at=head.get("created_at", 0.0))
            for event in events[1:]:
                if event["type"] == "turn":
                    delta = parse_annotation(json.dumps(event["delta"]), frame)
                    if event.get("new_image"):
                        session.accumulated = ()
                        studio.visibility.clear()
                    session.accumulated = session.accumulated + delta.strokes
                    session.final_answer = event.get("final_answer")
                    session.status = SessionStatus(event["status"])
                    session.turns.append(TurnRecord(
                        index=event["index"], sent_image=session.base_image,
                        sent_text_history="", response="", delta=delta,
                        final_answer=event.get("final_answer")))
                    studio.overlay_version = event["overlay_version"]
                elif event["type"] == "visibility":
                    studio.visibility[event["stroke_id"]] = event["visible"]
                    studio.overlay_version = event["overlay_version"]
                elif event["type"] == "turn_failed":
                    session.status = SessionStatus.FAILED
            sessions[session_id] = studio

    _replay_logs()

    dist = Path(studio_dist) if studio_dist else None
    if dist and dist.exists():
        from fastapi.staticfiles import StaticFiles

        app.mount("/studio", StaticFiles(directory=str(dist), html=True),
                  name="studio")

    return app
