"""Shared domain types and the serialization contracts built on them.

Every other module depends on the types defined here: benchmark task
instances, the tool-calling records exchanged with the model, chat
messages, per-run transcripts, and the agent configuration presets.
Instances are treated as immutable once constructed and may be shared
freely across threads.

Transcripts persist as line-delimited JSON (one record per line, UTF-8):
a ``meta`` record, one ``turn`` record per assistant response, and a
final ``end`` record. One line per turn keeps long runs crash-safe --
nothing already written is ever rewritten. Serialization is canonical
(compact separators, fixed key order), so serializing the same
transcript twice yields byte-identical output.
"""

from __future__ import annotations

import json
import base64
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any

TRANSCRIPT_VERSION = 1
MANIFEST_VERSION = 1

ROLES = ("system", "user", "assistant", "tool")

# Run outcomes. context_overflow is deliberately distinct from
# backend_error: budget exhaustion and provider faults are analyzed
# separately downstream.
OUTCOME_FINISHED = "finished"
OUTCOME_MAX_TURNS = "max_turns"
OUTCOME_BACKEND_ERROR = "backend_error"
OUTCOME_CONTEXT_OVERFLOW = "context_overflow"
OUTCOMES = (
    OUTCOME_FINISHED,
    OUTCOME_MAX_TURNS,
    OUTCOME_BACKEND_ERROR,
    OUTCOME_CONTEXT_OVERFLOW,
)

VARIANTS = ("lita", "lita_diff", "lita_mini", "lita_reason")
MEMORY_STRATEGIES = ("linear", "summarized")

# Semantic parameter types a tool may declare. Kept deliberately small so
# every chat-completion provider can represent them.
PARAM_TYPES = ("text", "integer", "boolean", "list_of_text")

_CONFIG_DIR = Path(__file__).parent / "config"


class ManifestError(ValueError):
    """A task manifest could not be loaded; message carries the position."""


class TranscriptError(ValueError):
    """A transcript document could not be decoded."""


@lru_cache(maxsize=1)
def default_system_prompt() -> str:
    """The canonical system prompt shipped with the package.

    The wording is frozen in a versioned text file so preloaded-token
    measurements stay reproducible.
    """
    return (_CONFIG_DIR / "system_prompt.txt").read_text(encoding="utf-8")


def check_seed_path(path: str) -> None:
    """Reject workspace seed paths that could escape the workspace root."""
    if not path:
        raise ValueError("seed path is empty")
    if path.startswith("/") or path.startswith("\\"):
        raise ValueError(f"seed path is absolute: '{path}'")
    if any(part == ".." for part in path.replace("\\", "/").split("/")):
        raise ValueError(f"seed path escapes the workspace: '{path}'")


@dataclass
class TaskInstance:
    """One agentic benchmark item: workspace seed, prompt sections, checks.

    The four prompt-section texts are rendered into the initial user
    message by the bench module; ``validation_commands`` define task
    success (all commands exit 0).
    """

    id: str
    workspace_seed: list[tuple[str, bytes]]
    initial_state: str
    task_description: str
    output_state: str
    validation_steps: str
    validation_commands: list[str]
    language_tag: str = ""

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("task id is empty")
        for name in ("initial_state", "task_description", "output_state", "validation_steps"):
            if not getattr(self, name):
                raise ValueError(f"task '{self.id}': section '{name}' is empty")
        for path, _ in self.workspace_seed:
            try:
                check_seed_path(path)
            except ValueError as exc:
                raise ValueError(f"task '{self.id}': {exc}") from None


@dataclass(frozen=True)
class ToolParam:
    """One declared parameter of a tool."""

    name: str
    type: str
    required: bool
    description: str

    def __post_init__(self) -> None:
        if self.type not in PARAM_TYPES:
            raise ValueError(f"unknown parameter type '{self.type}'")
        if not self.description:
            raise ValueError(f"parameter '{self.name}' has an empty description")


@dataclass
class ToolSpec:
    """Name, description, and parameter schema of one tool."""

    name: str
    description: str
    parameters: list[ToolParam]

    def __post_init__(self) -> None:
        if not self.description:
            raise ValueError(f"tool '{self.name}' has an empty description")
        names = [p.name for p in self.parameters]
        if len(names) != len(set(names)):
            raise ValueError(f"tool '{self.name}' declares duplicate parameter names")


@dataclass
class ToolCall:
    """A single function call emitted by the model.

    When a live provider sends arguments that are not a valid JSON object,
    the call is kept with ``arguments={}`` and the failure recorded in
    ``argument_error`` (with the raw text in ``raw_arguments``); dispatch
    turns it into a failed ToolResult instead of aborting the run.
    """

    call_id: str
    tool_name: str
    arguments: dict[str, Any] = field(default_factory=dict)
    argument_error: str | None = None
    raw_arguments: str | None = None


@dataclass(frozen=True)
class ToolResult:
    """The environment's reply to one ToolCall."""

    call_id: str
    ok: bool
    content: str
    truncated: bool = False


@dataclass
class Message:
    """One chat message. Role ``tool`` requires ``tool_call_id``;
    ``tool_calls`` may only appear on assistant messages."""

    role: str
    content: str = ""
    tool_calls: list[ToolCall] = field(default_factory=list)
    tool_call_id: str | None = None

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown role '{self.role}'")
        if (self.role == "tool") != (self.tool_call_id is not None):
            raise ValueError("tool_call_id must be present exactly when role is 'tool'")
        if self.tool_calls and self.role != "assistant":
            raise ValueError("tool_calls are only valid on assistant messages")


@dataclass(frozen=True)
class Usage:
    """Token counts for one completion; additive across turns."""

    input_tokens: int = 0
    output_tokens: int = 0

    def __post_init__(self) -> None:
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValueError("token counts must be >= 0")

    def __add__(self, other: "Usage") -> "Usage":
        return Usage(
            self.input_tokens + other.input_tokens,
            self.output_tokens + other.output_tokens,
        )


@dataclass
class Turn:
    """One assistant response plus everything the environment did with it.

    ``skipped_call_ids`` records calls the model emitted after ``finish``
    in the same response; they are never dispatched. ``injected_user``
    holds the fixed nudge message appended when the response carried no
    tool call.
    """

    assistant: Message
    results: list[ToolResult] = field(default_factory=list)
    usage: Usage = field(default_factory=Usage)
    skipped_call_ids: list[str] = field(default_factory=list)
    injected_user: str | None = None


@dataclass
class Transcript:
    """Ordered, serializable record of one agent run."""

    task_id: str
    agent_variant: str
    turns: list[Turn]
    outcome: str
    wall_time: float = 0.0
    hit_wall_clock: bool = False

    def __post_init__(self) -> None:
        if self.outcome not in OUTCOMES:
            raise ValueError(f"unknown outcome '{self.outcome}'")

    def total_usage(self) -> Usage:
        total = Usage()
        for turn in self.turns:
            total = total + turn.usage
        return total


@dataclass
class AgentConfig:
    """A full agent configuration.

    ``variant`` selects the default tool set (see the toolkit module);
    ``enabled_tools`` overrides it when set. Sampling defaults are
    temperature 0.0 and top_p 1.0. ``max_turns`` counts assistant
    responses; common budgets are 50 (exercise-style runs), 100
    (repo-bugfix runs), and 30 or 1 (completion-style runs).
    """

    variant: str = "lita"
    enabled_tools: frozenset[str] | None = None
    memory_strategy: str = "linear"
    max_turns: int = 50
    temperature: float = 0.0
    top_p: float = 1.0
    system_prompt: str = field(default_factory=default_system_prompt)
    wall_clock_seconds: float = 3600.0

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant '{self.variant}'")
        if self.memory_strategy not in MEMORY_STRATEGIES:
            raise ValueError(f"unknown memory strategy '{self.memory_strategy}'")
        if self.max_turns < 1:
            raise ValueError("max_turns must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not (0 < self.top_p <= 1):
            raise ValueError("top_p must be in (0, 1]")


# ---------------------------------------------------------------------------
# JSON codecs.
#
# Encoders emit keys in a fixed order and omit optional fields at their
# defaults; decoders apply the same defaults. Together this makes
# deserialize(serialize(t)) == t and keeps serialization deterministic.
# ---------------------------------------------------------------------------


def _dumps(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def tool_call_to_json(call: ToolCall) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "id": call.call_id,
        "name": call.tool_name,
        "arguments": call.arguments,
    }
    if call.argument_error is not None:
        doc["argument_error"] = call.argument_error
    if call.raw_arguments is not None:
        doc["raw_arguments"] = call.raw_arguments
    return doc


def tool_call_from_json(doc: dict[str, Any]) -> ToolCall:
    return ToolCall(
        call_id=doc["id"],
        tool_name=doc["name"],
        arguments=doc.get("arguments", {}),
        argument_error=doc.get("argument_error"),
        raw_arguments=doc.get("raw_arguments"),
    )


def message_to_json(msg: Message) -> dict[str, Any]:
    doc: dict[str, Any] = {"role": msg.role, "content": msg.content}
    if msg.tool_calls:
        doc["tool_calls"] = [tool_call_to_json(c) for c in msg.tool_calls]
    if msg.tool_call_id is not None:
        doc["tool_call_id"] = msg.tool_call_id
    return doc


def message_from_json(doc: dict[str, Any]) -> Message:
    return Message(
        role=doc["role"],
        content=doc.get("content", ""),
        tool_calls=[tool_call_from_json(c) for c in doc.get("tool_calls", [])],
        tool_call_id=doc.get("tool_call_id"),
    )


def usage_to_json(usage: Usage) -> dict[str, int]:
    return {"input_tokens": usage.input_tokens, "output_tokens": usage.output_tokens}


def usage_from_json(doc: dict[str, Any]) -> Usage:
    return Usage(doc.get("input_tokens", 0), doc.get("output_tokens", 0))


def tool_result_to_json(result: ToolResult) -> dict[str, Any]:
    doc: dict[str, Any] = {"id": result.call_id, "ok": result.ok, "content": result.content}
    if result.truncated:
        doc["truncated"] = True
    return doc


def tool_result_from_json(doc: dict[str, Any]) -> ToolResult:
    return ToolResult(
        call_id=doc["id"],
        ok=doc["ok"],
        content=doc.get("content", ""),
        truncated=doc.get("truncated", False),
    )


def turn_to_json(turn: Turn) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "kind": "turn",
        "assistant": message_to_json(turn.assistant),
        "results": [tool_result_to_json(r) for r in turn.results],
        "usage": usage_to_json(turn.usage),
    }
    if turn.skipped_call_ids:
        doc["skipped_call_ids"] = list(turn.skipped_call_ids)
    if turn.injected_user is not None:
        doc["injected_user"] = turn.injected_user
    return doc


def turn_from_json(doc: dict[str, Any]) -> Turn:
    return Turn(
        assistant=message_from_json(doc["assistant"]),
        results=[tool_result_from_json(r) for r in doc.get("results", [])],
        usage=usage_from_json(doc.get("usage", {})),
        skipped_call_ids=doc.get("skipped_call_ids", []),
        injected_user=doc.get("injected_user"),
    )


def serialize_transcript(t: Transcript) -> bytes:
    """Encode a transcript as line-delimited JSON records.

    Deterministic: the same transcript always serializes to the same
    bytes, and ``deserialize_transcript`` inverts it exactly.
    """
    meta: dict[str, Any] = {
        "kind": "meta",
        "version": TRANSCRIPT_VERSION,
        "task_id": t.task_id,
        "agent_variant": t.agent_variant,
    }
    end: dict[str, Any] = {"kind": "end", "outcome": t.outcome, "wall_time": t.wall_time}
    if t.hit_wall_clock:
        end["hit_wall_clock"] = True
    lines = [_dumps(meta)]
    lines.extend(_dumps(turn_to_json(turn)) for turn in t.turns)
    lines.append(_dumps(end))
    return ("\n".join(lines) + "\n").encode("utf-8")


def deserialize_transcript(data: bytes) -> Transcript:
    lines = data.decode("utf-8").splitlines()
    if not lines:
        raise TranscriptError("empty transcript document")
    records = []
    for lineno, line in enumerate(lines, start=1):
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise TranscriptError(f"line {lineno}: invalid JSON: {exc.msg}") from None
    meta = records[0]
    if meta.get("kind") != "meta":
        raise TranscriptError("first record must be the meta record")
    if meta.get("version") != TRANSCRIPT_VERSION:
        raise TranscriptError(f"unsupported transcript version {meta.get('version')!r}")
    end = records[-1]
    if end.get("kind") != "end":
        raise TranscriptError("last record must be the end record")
    turns = []
    for lineno, doc in enumerate(records[1:-1], start=2):
        if doc.get("kind") != "turn":
            raise TranscriptError(f"line {lineno}: expected a turn record")
        turns.append(turn_from_json(doc))
    return Transcript(
        task_id=meta["task_id"],
        agent_variant=meta["agent_variant"],
        turns=turns,
        outcome=end["outcome"],
        wall_time=end.get("wall_time", 0.0),
        hit_wall_clock=end.get("hit_wall_clock", False),
    )


# ---------------------------------------------------------------------------
# Task manifests.
#
# One JSON document per benchmark: {"version": 1, "tasks": [...]}. Seed
# file content is carried as "content" (UTF-8 text) or "content_b64"
# (arbitrary bytes). The format is ours and versioned; see README.
# ---------------------------------------------------------------------------


def _seed_from_json(entry: dict[str, Any]) -> tuple[str, bytes]:
    path = entry.get("path", "")
    if "content_b64" in entry:
        return path, base64.b64decode(entry["content_b64"])
    return path, entry.get("content", "").encode("utf-8")


def _seed_to_json(path: str, content: bytes) -> dict[str, Any]:
    try:
        text = content.decode("utf-8")
        if "\x00" not in text:
            return {"path": path, "content": text}
    except UnicodeDecodeError:
        pass
    return {"path": path, "content_b64": base64.b64encode(content).decode("ascii")}


def task_to_json(task: TaskInstance) -> dict[str, Any]:
    return {
        "id": task.id,
        "language": task.language_tag,
        "initial_state": task.initial_state,
        "task_description": task.task_description,
        "output_state": task.output_state,
        "validation_steps": task.validation_steps,
        "validation_commands": list(task.validation_commands),
        "files": [_seed_to_json(p, c) for p, c in task.workspace_seed],
    }


def task_from_json(doc: dict[str, Any]) -> TaskInstance:
    return TaskInstance(
        id=doc.get("id", ""),
        workspace_seed=[_seed_from_json(f) for f in doc.get("files", [])],
        initial_state=doc.get("initial_state", ""),
        task_description=doc.get("task_description", ""),
        output_state=doc.get("output_state", ""),
        validation_steps=doc.get("validation_steps", ""),
        validation_commands=list(doc.get("validation_commands", [])),
        language_tag=doc.get("language", ""),
    )


def load_manifest(path: str | Path) -> list[TaskInstance]:
    """Load a task manifest, preserving task order.

    Raises ManifestError with a position for malformed JSON, a duplicate
    task id, or a seed path that escapes the workspace.
    """
    path = Path(path)
    raw = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ManifestError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from None
    if not isinstance(doc, dict):
        raise ManifestError(f"{path}: manifest must be a JSON object")
    if doc.get("version") != MANIFEST_VERSION:
        raise ManifestError(f"{path}: unsupported manifest version {doc.get('version')!r}")
    entries = doc.get("tasks")
    if not isinstance(entries, list):
        raise ManifestError(f"{path}: 'tasks' must be a list")
    tasks: list[TaskInstance] = []
    seen: set[str] = set()
    for pos, entry in enumerate(entries):
        where = f"{path}: task at index {pos}"
        if not isinstance(entry, dict):
            raise ManifestError(f"{where}: not an object")
        try:
            task = task_from_json(entry)
        except (ValueError, TypeError, KeyError) as exc:
            raise ManifestError(f"{where}: {exc}") from None
        if task.id in seen:
            raise ManifestError(f"{where}: duplicate task id '{task.id}'")
        seen.add(task.id)
        tasks.append(task)
    return tasks


def dump_manifest(tasks: list[TaskInstance], path: str | Path) -> None:
    """Write tasks as a manifest document (used by the importers)."""
    doc = {"version": MANIFEST_VERSION, "tasks": [task_to_json(t) for t in tasks]}
    Path(path).write_text(json.dumps(doc, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
