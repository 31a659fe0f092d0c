"""The autonomous agent driver: render context, complete, dispatch tool
calls, repeat until finish, budget exhaustion, overflow, or backend
failure.

A "turn" is one assistant response, which may carry several tool calls;
max_turns counts turns, not calls. Tool calls are dispatched in the
order the model emitted them, each result appended to memory before the
next request. Calls emitted after finish in the same response are logged
as skipped and never executed. An assistant response with no tool call
receives a fixed nudge user message rather than ending the run, so plain
chat text is never mistaken for completion.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

from .bench import render_prompt
from .core import (
    OUTCOME_BACKEND_ERROR,
    OUTCOME_CONTEXT_OVERFLOW,
    OUTCOME_FINISHED,
    OUTCOME_MAX_TURNS,
    AgentConfig,
    Message,
    TaskInstance,
    ToolCall,
    ToolResult,
    Transcript,
    Turn,
)
from .llm import BackendError, ChatRequest, ContextOverflowError
from .memory import Memory
from .toolkit import Limits, Toolbox, Workspace

NUDGE_MESSAGE = "Continue with a tool call, or call finish."

STEP_CONTINUE = "continue"
STEP_FINISHED = "finished"
STEP_OVERFLOW = "overflow"
STEP_BACKEND_ERROR = "backend_error"

# Invoked after each dispatched call; used by the harness to snapshot
# the workspace when the agent runs a validation command.
ToolObserver = Callable[[ToolCall, ToolResult, int], None]


@dataclass
class RunState:
    """Mutable state of one in-flight run; owned by a single loop."""

    config: AgentConfig
    ws: Workspace
    mem: Memory
    toolbox: Toolbox
    turns: list[Turn] = field(default_factory=list)
    turn_index: int = 0


def step(state: RunState, backend, *, on_tool_result: ToolObserver | None = None) -> str:
    """One render -> complete -> dispatch cycle; exactly one turn."""
    req = ChatRequest(
        messages=state.mem.render(),
        tools=state.toolbox.specs,
        temperature=state.config.temperature,
        top_p=state.config.top_p,
        model_id=getattr(backend, "model_id", ""),
    )
    try:
        resp = backend.complete(req)
    except ContextOverflowError:
        return STEP_OVERFLOW
    except BackendError:
        return STEP_BACKEND_ERROR

    msg = resp.message
    state.mem.append(msg)
    turn = Turn(assistant=msg, usage=resp.usage)
    state.turns.append(turn)
    state.turn_index += 1

    if resp.finish_reason == "length":
        return STEP_OVERFLOW

    if not msg.tool_calls:
        state.mem.append(Message("user", NUDGE_MESSAGE))
        turn.injected_user = NUDGE_MESSAGE
        return STEP_CONTINUE

    finished = False
    for call in msg.tool_calls:
        if finished:
            turn.skipped_call_ids.append(call.call_id)
            continue
        result = state.toolbox.dispatch(call, state.ws, state.mem)
        turn.results.append(result)
        state.mem.append(Message("tool", result.content, tool_call_id=call.call_id))
        if on_tool_result is not None:
            on_tool_result(call, result, state.turn_index)
        if call.tool_name == "finish" and result.ok:
            finished = True
    return STEP_FINISHED if finished else STEP_CONTINUE


def run_task(
    task: TaskInstance,
    config: AgentConfig,
    backend,
    ws: Workspace,
    *,
    limits: Limits | None = None,
    on_tool_result: ToolObserver | None = None,
    clock: Callable[[], float] = time.monotonic,
) -> Transcript:
    """Drive one task to completion; the workspace must already be
    materialized. Never raises: every failure mode becomes a transcript
    outcome. Identical (task, config, script) triples yield byte-identical
    transcripts when a fixed clock is supplied.
    """
    mem = Memory(config.memory_strategy, config.system_prompt, render_prompt(task))
    toolbox = Toolbox(config, limits)
    state = RunState(config=config, ws=ws, mem=mem, toolbox=toolbox)
    start = clock()
    outcome = None
    hit_wall_clock = False
    while state.turn_index < config.max_turns:
        if clock() - start > config.wall_clock_seconds:
            outcome = OUTCOME_MAX_TURNS
            hit_wall_clock = True
            break
        step_outcome = step(state, backend, on_tool_result=on_tool_result)
        if step_outcome == STEP_CONTINUE:
            continue
        outcome = {
            STEP_FINISHED: OUTCOME_FINISHED,
            STEP_OVERFLOW: OUTCOME_CONTEXT_OVERFLOW,
            STEP_BACKEND_ERROR: OUTCOME_BACKEND_ERROR,
        }[step_outcome]
        break
    if outcome is None:
        outcome = OUTCOME_MAX_TURNS
    return Transcript(
        task_id=task.id,
        agent_variant=config.variant,
        turns=state.turns,
        outcome=outcome,
        wall_time=clock() - start,
        hit_wall_clock=hit_wall_clock,
    )
