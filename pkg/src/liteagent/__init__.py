"""liteagent: a minimal, model-agnostic autonomous coding-agent framework
with a benchmark harness and quantitative metrics."""

from .core import (
    AgentConfig,
    Message,
    TaskInstance,
    ToolCall,
    ToolResult,
    ToolSpec,
    Transcript,
    Usage,
    load_manifest,
    serialize_transcript,
    deserialize_transcript,
)
from .llm import ChatRequest, ChatResponse, HttpBackend, ScriptedBackend, load_script
from .loop import run_task
from .toolkit import Toolbox, Workspace, registry_for

__version__ = "0.1.0"

__all__ = [
    "AgentConfig",
    "ChatRequest",
    "ChatResponse",
    "HttpBackend",
    "Message",
    "ScriptedBackend",
    "TaskInstance",
    "Toolbox",
    "ToolCall",
    "ToolResult",
    "ToolSpec",
    "Transcript",
    "Usage",
    "Workspace",
    "deserialize_transcript",
    "load_manifest",
    "load_script",
    "registry_for",
    "run_task",
    "serialize_transcript",
    "__version__",
]
