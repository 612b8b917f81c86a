"""Provider-agnostic chat-completion client with image parts, retries,
an audit log, and a scripted mock provider for offline tests.

The wire shape is the de-facto chat-completions JSON (role + content
parts, images as base64 data URLs). Mock providers are addressed with a
``mock://`` endpoint and replay a canned script while recording every
request, so everything above this module is testable without a network.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import httpx

from .rendering import RasterImage

__all__ = [
    "Role",
    "TextPart",
    "ImagePart",
    "ChatMessage",
    "ProviderConfig",
    "GatewayError",
    "AuthError",
    "RequestTimeout",
    "RateLimited",
    "MalformedResponse",
    "ScriptExhausted",
    "complete",
    "mock_provider",
    "mock_state",
    "set_inflight_limit",
    "set_default_audit_path",
]


class Role(Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"


@dataclass(frozen=True)
class TextPart:
    text: str


@dataclass(frozen=True)
class ImagePart:
    image: Union[RasterImage, str]  # raster or path to an image file

    def png_bytes(self) -> bytes:
        if isinstance(self.image, RasterImage):
            return self.image.to_png_bytes()
        return Path(self.image).read_bytes()


Part = Union[TextPart, ImagePart]


@dataclass(frozen=True)
class ChatMessage:
    role: Role
    parts: tuple[Part, ...]

    def __post_init__(self):
        if self.role is Role.SYSTEM and any(isinstance(p, ImagePart) for p in self.parts):
            raise ValueError("system messages carry text only")

    @classmethod
    def system(cls, text: str) -> "ChatMessage":
        return cls(Role.SYSTEM, (TextPart(text),))

    @classmethod
    def user(cls, *parts: Part) -> "ChatMessage":
        return cls(Role.USER, tuple(parts))

    @classmethod
    def assistant(cls, text: str) -> "ChatMessage":
        return cls(Role.ASSISTANT, (TextPart(text),))


@dataclass(frozen=True)
class ProviderConfig:
    name: str
    endpoint: str
    model_id: str
    credential: str = ""  # env var name holding the API key
    temperature: Optional[float] = None
    request_timeout: float = 120.0
    max_retries: int = 2

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if not (self.endpoint.startswith("http://")
                or self.endpoint.startswith("https://")
                or self.endpoint.startswith("mock://")):
            raise ValueError(f"not a valid endpoint URL: {self.endpoint!r}")

    def is_mock(self) -> bool:
        return self.endpoint.startswith("mock://")


class GatewayError(Exception):
    pass


class AuthError(GatewayError):
    pass


class RequestTimeout(GatewayError):
    pass


class RateLimited(GatewayError):
    pass


class MalformedResponse(GatewayError):
    pass


class ScriptExhausted(GatewayError):
    pass


# Global in-flight limiter for live calls; sessions serialize their own
# turns, this just bounds parallel batch traffic.
_inflight = threading.BoundedSemaphore(8)

# Audit destination for calls that don't pass audit_path explicitly;
# seeded from the environment so batch runs capture every live call.
_default_audit_path: Optional[str] = os.environ.get("VLMDRAW_AUDIT_LOG")


def set_inflight_limit(n: int):
    global _inflight
    _inflight = threading.BoundedSemaphore(n)


def set_default_audit_path(path: Optional[str]):
    global _default_audit_path
    _default_audit_path = path


# ---------------------------------------------------------------------------
# mock provider

class _MockScript:
    def __init__(self, responses: list[str]):
        self.responses = list(responses)
        self.cursor = 0
        self.requests: list[list[dict]] = []
        self.lock = threading.Lock()

    def next_response(self, request_payload: list[dict]) -> str:
        with self.lock:
            self.requests.append(request_payload)
            if self.cursor >= len(self.responses):
                raise ScriptExhausted(
                    f"mock script exhausted after {len(self.responses)} responses")
            text = self.responses[self.cursor]
            self.cursor += 1
            return text


_mock_registry: dict[str, _MockScript] = {}


def mock_provider(script: list[str], name: str = "mock") -> ProviderConfig:
    """Register a canned-response provider; each complete() call
    consumes the next response and records the request for assertions."""
    if not script:
        raise ValueError("mock script must be non-empty")
    key = uuid.uuid4().hex
    _mock_registry[key] = _MockScript(script)
    return ProviderConfig(name=name, endpoint=f"mock://{key}", model_id="mock")


def mock_state(provider: ProviderConfig) -> _MockScript:
    """The recorder behind a mock provider (requests, cursor)."""
    return _mock_registry[provider.endpoint.removeprefix("mock://")]


# ---------------------------------------------------------------------------
# wire encoding

def _encode_part(part: Part) -> dict:
    if isinstance(part, TextPart):
        return {"type": "text", "text": part.text}
    b64 = base64.b64encode(part.png_bytes()).decode("ascii")
    return {"type": "image_url",
            "image_url": {"url": f"data:image/png;base64,{b64}"}}


def encode_messages(messages: list[ChatMessage]) -> list[dict]:
    return [{"role": m.role.value, "content": [_encode_part(p) for p in m.parts]}
            for m in messages]


def _audit(audit_path: Optional[str], record: dict):
    if not audit_path:
        return
    with open(audit_path, "a") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")


def complete(messages: list[ChatMessage], provider: ProviderConfig, *,
             audit_path: Optional[str] = None,
             transport: Optional[httpx.BaseTransport] = None,
             backoff_base: float = 0.5) -> str:
    """One chat completion; returns the assistant text.

    Transport failures, 5xx, and 429 responses are retried with
    exponential backoff up to max_retries, then the last error is
    raised. Every attempt appends an audit record under a shared
    request id. Missing credentials fail before any network traffic.
    """
    payload_messages = encode_messages(messages)
    if audit_path is None:
        audit_path = _default_audit_path
    request_id = uuid.uuid4().hex
    request_hash = hashlib.sha256(
        json.dumps(payload_messages, sort_keys=True).encode()).hexdigest()

    if provider.is_mock():
        started = time.monotonic()
        text = mock_state(provider).next_response(payload_messages)
        _audit(audit_path, {
            "request_id": request_id, "provider": provider.name,
            "model": provider.model_id, "attempt": 1, "status": "ok",
            "mock": True, "request_sha256": request_hash,
            "latency_ms": round(1000 * (time.monotonic() - started), 3),
        })
        return text

    if not provider.credential or not os.environ.get(provider.credential):
        raise AuthError(
            f"credential env var {provider.credential!r} is not set for "
            f"provider {provider.name!r}")

    body = {"model": provider.model_id, "messages": payload_messages}
    if provider.temperature is not None:
        body["temperature"] = provider.temperature
    headers = {"Authorization": f"Bearer {os.environ[provider.credential]}"}

    last_error: GatewayError = GatewayError("no attempt made")
    with _inflight:
        for attempt in range(provider.max_retries + 1):
            started = time.monotonic()
            record = {
                "request_id": request_id, "provider": provider.name,
                "model": provider.model_id, "attempt": attempt + 1,
                "request_sha256": request_hash,
            }
            try:
                with httpx.Client(timeout=provider.request_timeout,
                                  transport=transport) as client:
                    response = client.post(provider.endpoint, json=body,
                                           headers=headers)
            except httpx.TimeoutException as exc:
                last_error = RequestTimeout(str(exc))
                record["status"] = "timeout"
            except httpx.TransportError as exc:
                last_error = GatewayError(str(exc))
                record["status"] = "transport_error"
            else:
                record["latency_ms"] = round(1000 * (time.monotonic() - started), 3)
                if response.status_code == 429:
                    last_error = RateLimited("rate limited (429)")
                    record["status"] = "rate_limited"
                elif response.status_code >= 500:
                    last_error = GatewayError(f"server error {response.status_code}")
                    record["status"] = f"http_{response.status_code}"
                elif response.status_code in (401, 403):
                    record["status"] = f"http_{response.status_code}"
                    _audit(audit_path, record)
                    raise AuthError(f"auth rejected ({response.status_code})")
                elif response.status_code >= 400:
                    record["status"] = f"http_{response.status_code}"
                    _audit(audit_path, record)
                    raise GatewayError(
                        f"request rejected ({response.status_code}): "
                        f"{response.text[:500]}")
                else:
                    try:
                        data = response.json()
                        text = data["choices"][0]["message"]["content"]
                        if not isinstance(text, str):
                            raise TypeError
                        usage = data.get("usage") or {}
                    except (KeyError, IndexError, TypeError, ValueError):
                        record["status"] = "malformed"
                        _audit(audit_path, record)
                        raise MalformedResponse(
                            "response missing choices[0].message.content")
                    record["status"] = "ok"
                    if usage:
                        record["tokens"] = usage
                    _audit(audit_path, record)
                    return text
            _audit(audit_path, record)
            if attempt < provider.max_retries:
                time.sleep(backoff_base * (2 ** attempt))
    raise last_error
