"""Chat-completion backends: a live HTTP client and a scripted replay.

The live backend speaks the de-facto HTTP chat-completion protocol with
function calling (messages array, tools array, tool_calls in the
assistant reply, usage object), so any provider exposing that protocol
works unmodified. The scripted backend replays a fixed list of responses
for deterministic, offline testing; exhausting the script is an error,
never a silent repetition.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .core import (
    Message,
    ToolCall,
    ToolSpec,
    Usage,
    message_to_json,
    tool_call_to_json,
    usage_from_json,
    usage_to_json,
)

FINISH_REASONS = ("stop", "tool_calls", "length", "error")

DEFAULT_MAX_RETRIES = 3
DEFAULT_HTTP_TIMEOUT = 120.0

# Environment variables consulted by backend_from_env / the CLI.
ENV_BASE_URL = "LITEAGENT_BASE_URL"
ENV_API_KEY = "LITEAGENT_API_KEY"
ENV_MODEL_ID = "LITEAGENT_MODEL_ID"


class BackendError(Exception):
    """Base class for completion failures."""

    retryable = False


class TransportError(BackendError):
    """Network or HTTP-level failure, including auth; retried with backoff."""

    retryable = True

    def __init__(self, message: str, status: int | None = None) -> None:
        super().__init__(message)
        self.status = status


class ProtocolError(BackendError):
    """The provider replied, but the reply is not a valid completion."""


class ContextOverflowError(BackendError):
    """The provider rejected the request as too large for its context."""


class ScriptExhaustedError(BackendError):
    """A scripted backend ran past the end of its script (a test bug)."""


class ScriptParseError(ValueError):
    """A script file is malformed; message carries the line number."""


@dataclass
class ChatRequest:
    messages: list[Message]
    tools: list[ToolSpec]
    temperature: float
    top_p: float
    model_id: str

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("a chat request needs at least one message")


@dataclass
class ChatResponse:
    """One assistant completion. finish_reason is 'tool_calls' exactly
    when the message carries tool calls."""

    message: Message
    usage: Usage = field(default_factory=Usage)
    finish_reason: str = "stop"

    def __post_init__(self) -> None:
        if self.finish_reason not in FINISH_REASONS:
            raise ValueError(f"unknown finish_reason '{self.finish_reason}'")
        has_calls = bool(self.message.tool_calls)
        if has_calls != (self.finish_reason == "tool_calls"):
            raise ValueError("finish_reason must be 'tool_calls' iff the message has tool calls")


def response_to_json(resp: ChatResponse) -> dict[str, Any]:
    return {
        "message": message_to_json(resp.message),
        "usage": usage_to_json(resp.usage),
        "finish_reason": resp.finish_reason,
    }


def response_from_json(doc: dict[str, Any]) -> ChatResponse:
    from .core import message_from_json

    message = message_from_json(doc["message"])
    finish = doc.get("finish_reason")
    if finish is None:
        finish = "tool_calls" if message.tool_calls else "stop"
    return ChatResponse(
        message=message,
        usage=usage_from_json(doc.get("usage", {})),
        finish_reason=finish,
    )


class ScriptedBackend:
    """Replays a fixed response list; single-consumer (one run per instance)."""

    def __init__(self, script: list[ChatResponse], model_id: str = "scripted") -> None:
        self.script = script
        self.model_id = model_id
        self.cursor = 0
        self.requests_seen = 0

    def complete(self, req: ChatRequest) -> ChatResponse:
        self.requests_seen += 1
        if self.cursor >= len(self.script):
            raise ScriptExhaustedError(
                f"script exhausted after {len(self.script)} responses"
            )
        resp = self.script[self.cursor]
        self.cursor += 1
        return resp


def load_script(path: str | Path) -> ScriptedBackend:
    """Load a script file: one ChatResponse JSON record per line."""
    script: list[ChatResponse] = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            script.append(response_from_json(doc))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ScriptParseError(f"{path}: line {lineno}: {exc}") from None
    return ScriptedBackend(script)


# ---------------------------------------------------------------------------
# Wire encoding for the HTTP chat-completion protocol.
# ---------------------------------------------------------------------------

_PARAM_TYPE_TO_SCHEMA: dict[str, dict[str, Any]] = {
    "text": {"type": "string"},
    "integer": {"type": "integer"},
    "boolean": {"type": "boolean"},
    "list_of_text": {"type": "array", "items": {"type": "string"}},
}


def tool_to_wire(spec: ToolSpec) -> dict[str, Any]:
    properties: dict[str, Any] = {}
    required: list[str] = []
    for param in spec.parameters:
        schema = dict(_PARAM_TYPE_TO_SCHEMA[param.type])
        schema["description"] = param.description
        properties[param.name] = schema
        if param.required:
            required.append(param.name)
    parameters: dict[str, Any] = {"type": "object", "properties": properties}
    if required:
        parameters["required"] = required
    return {
        "type": "function",
        "function": {
            "name": spec.name,
            "description": spec.description,
            "parameters": parameters,
        },
    }


def tools_to_wire(specs: list[ToolSpec]) -> list[dict[str, Any]]:
    return [tool_to_wire(s) for s in specs]


def message_to_wire(msg: Message) -> dict[str, Any]:
    doc: dict[str, Any] = {"role": msg.role, "content": msg.content}
    if msg.tool_calls:
        doc["tool_calls"] = [
            {
                "id": call.call_id,
                "type": "function",
                "function": {
                    "name": call.tool_name,
                    "arguments": json.dumps(call.arguments, ensure_ascii=False),
                },
            }
            for call in msg.tool_calls
        ]
    if msg.tool_call_id is not None:
        doc["tool_call_id"] = msg.tool_call_id
    return doc


def _tool_call_from_wire(doc: dict[str, Any], index: int) -> ToolCall:
    function = doc.get("function", {})
    call_id = doc.get("id") or f"call_{index}"
    name = function.get("name", "")
    raw = function.get("arguments", "")
    arguments: dict[str, Any] = {}
    argument_error = None
    raw_arguments = None
    if isinstance(raw, dict):
        arguments = raw
    else:
        try:
            parsed = json.loads(raw) if raw else {}
            if isinstance(parsed, dict):
                arguments = parsed
            else:
                argument_error = f"arguments are not an object: {type(parsed).__name__}"
                raw_arguments = raw
        except json.JSONDecodeError as exc:
            argument_error = f"arguments are not valid JSON: {exc.msg}"
            raw_arguments = raw
    return ToolCall(
        call_id=call_id,
        tool_name=name,
        arguments=arguments,
        argument_error=argument_error,
        raw_arguments=raw_arguments,
    )


_OVERFLOW_HINTS = ("context length", "context_length", "maximum context", "too many tokens")


def _default_post(url: str, headers: dict[str, str], payload: dict[str, Any], timeout: float):
    # Imported lazily so scripted runs never touch the HTTP stack.
    import requests

    try:
        resp = requests.post(url, headers=headers, json=payload, timeout=timeout)
    except requests.RequestException as exc:
        raise TransportError(f"request failed: {exc}") from None
    return resp.status_code, resp.text


class HttpBackend:
    """Client for a chat-completion endpoint with function calling.

    Transport and auth failures are retried up to ``max_retries`` times
    with exponential backoff; a well-formed reply is never retried and a
    malformed one is a hard ProtocolError. Safe for concurrent use by
    independent agent loops.
    """

    def __init__(
        self,
        base_url: str,
        api_key: str,
        model_id: str,
        *,
        timeout: float = DEFAULT_HTTP_TIMEOUT,
        max_retries: int = DEFAULT_MAX_RETRIES,
        post: Callable[..., tuple[int, str]] | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.model_id = model_id
        self.timeout = timeout
        self.max_retries = max_retries
        self._post = post or _default_post
        self._sleep = sleep

    def complete(self, req: ChatRequest) -> ChatResponse:
        url = f"{self.base_url}/chat/completions"
        headers = {
            "Content-Type": "application/json",
            "Authorization": f"Bearer {self.api_key}",
        }
        payload: dict[str, Any] = {
            "model": req.model_id or self.model_id,
            "messages": [message_to_wire(m) for m in req.messages],
            "temperature": req.temperature,
            "top_p": req.top_p,
        }
        if req.tools:
            payload["tools"] = tools_to_wire(req.tools)

        attempt = 0
        while True:
            try:
                status, body = self._post(url, headers, payload, self.timeout)
                if status >= 400:
                    excerpt = body[:500]
                    if status == 400 and any(h in excerpt.lower() for h in _OVERFLOW_HINTS):
                        raise ContextOverflowError(f"provider rejected oversize request: {excerpt}")
                    raise TransportError(f"provider returned HTTP {status}: {excerpt}", status)
                return self._parse_reply(body)
            except TransportError:
                if attempt >= self.max_retries:
                    raise
                self._sleep(2.0**attempt)
                attempt += 1

    def _parse_reply(self, body: str) -> ChatResponse:
        try:
            doc = json.loads(body)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"reply is not valid JSON: {exc.msg}") from None
        try:
            choice = doc["choices"][0]
            wire_msg = choice["message"]
        except (KeyError, IndexError, TypeError):
            raise ProtocolError(f"reply has no choices[0].message: {body[:200]}") from None
        calls = [
            _tool_call_from_wire(c, i)
            for i, c in enumerate(wire_msg.get("tool_calls") or [])
        ]
        message = Message(
            role="assistant",
            content=wire_msg.get("content") or "",
            tool_calls=calls,
        )
        usage_doc = doc.get("usage") or {}
        usage = Usage(
            int(usage_doc.get("prompt_tokens", 0)),
            int(usage_doc.get("completion_tokens", 0)),
        )
        # finish_reason is coerced so the ChatResponse invariant holds even
        # when a provider reports it inconsistently.
        provider_reason = choice.get("finish_reason")
        if calls:
            reason = "tool_calls"
        elif provider_reason == "length":
            reason = "length"
        else:
            reason = "stop"
        return ChatResponse(message=message, usage=usage, finish_reason=reason)


def backend_from_env(env: dict[str, str]) -> HttpBackend:
    """Build a live backend from environment variables; raises ValueError
    naming any missing variable."""
    missing = [name for name in (ENV_BASE_URL, ENV_API_KEY, ENV_MODEL_ID) if not env.get(name)]
    if missing:
        raise ValueError(f"missing environment variables: {', '.join(missing)}")
    return HttpBackend(env[ENV_BASE_URL], env[ENV_API_KEY], env[ENV_MODEL_ID])
