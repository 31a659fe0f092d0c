"""Shared test helpers: scripted responses and toy tasks."""

from __future__ import annotations

import pytest

from liteagent.core import Message, TaskInstance, ToolCall, Usage
from liteagent.llm import ChatResponse, ScriptedBackend


def tool_response(*calls: ToolCall, content: str = "", usage: Usage | None = None) -> ChatResponse:
    return ChatResponse(
        message=Message("assistant", content, tool_calls=list(calls)),
        usage=usage or Usage(100, 10),
        finish_reason="tool_calls",
    )


def text_response(content: str, finish_reason: str = "stop") -> ChatResponse:
    return ChatResponse(
        message=Message("assistant", content),
        usage=Usage(100, 10),
        finish_reason=finish_reason,
    )


def call(cid: str, name: str, **arguments) -> ToolCall:
    return ToolCall(call_id=cid, tool_name=name, arguments=arguments)


def scripted(*responses: ChatResponse) -> ScriptedBackend:
    return ScriptedBackend(list(responses))


@pytest.fixture
def toy_task() -> TaskInstance:
    return TaskInstance(
        id="toy",
        workspace_seed=[
            ("hello.py", b'def hello():\n    return "hi"\n'),
            ("check.py", b'from hello import hello\nassert hello() == "hey"\nprint("ok")\n'),
        ],
        initial_state="The working directory contains: check.py, hello.py.",
        task_description="Make hello() return \"hey\".",
        output_state="hello.py contains the fix; check.py passes.",
        validation_steps="Run `python3 check.py`; it exits 0 on success.",
        validation_commands=["python3 check.py"],
        language_tag="python",
    )
