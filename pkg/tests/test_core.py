"""Core types, transcript serialization, and manifest loading."""

from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liteagent.core import (
    MANIFEST_VERSION,
    AgentConfig,
    ManifestError,
    Message,
    TaskInstance,
    ToolCall,
    ToolResult,
    Transcript,
    TranscriptError,
    Turn,
    Usage,
    deserialize_transcript,
    dump_manifest,
    load_manifest,
    serialize_transcript,
)

# ---------------------------------------------------------------------------
# Type invariants
# ---------------------------------------------------------------------------


def test_message_tool_role_requires_call_id():
    Message("tool", "out", tool_call_id="c1")
    with pytest.raises(ValueError):
        Message("tool", "out")
    with pytest.raises(ValueError):
        Message("user", "hello", tool_call_id="c1")


def test_tool_calls_only_on_assistant():
    with pytest.raises(ValueError):
        Message("user", "x", tool_calls=[ToolCall("c1", "finish")])


def test_usage_rejects_negative_and_adds():
    with pytest.raises(ValueError):
        Usage(-1, 0)
    assert Usage(3, 4) + Usage(10, 20) == Usage(13, 24)


def test_agent_config_validation():
    with pytest.raises(ValueError):
        AgentConfig(variant="mega")
    with pytest.raises(ValueError):
        AgentConfig(max_turns=0)
    with pytest.raises(ValueError):
        AgentConfig(top_p=0.0)
    with pytest.raises(ValueError):
        AgentConfig(temperature=-0.5)
    assert AgentConfig().system_prompt  # shipped default is nonempty


def test_task_instance_rejects_bad_sections_and_paths():
    kwargs = dict(
        initial_state="a",
        task_description="b",
        output_state="c",
        validation_steps="d",
        validation_commands=["true"],
    )
    TaskInstance(id="t", workspace_seed=[("a/b.txt", b"x")], **kwargs)
    with pytest.raises(ValueError):
        TaskInstance(id="", workspace_seed=[], **kwargs)
    with pytest.raises(ValueError):
        TaskInstance(id="t", workspace_seed=[("../x", b"")], **kwargs)
    with pytest.raises(ValueError):
        TaskInstance(id="t", workspace_seed=[("/abs", b"")], **kwargs)
    bad = dict(kwargs)
    bad["task_description"] = ""
    with pytest.raises(ValueError):
        TaskInstance(id="t", workspace_seed=[], **bad)


# ---------------------------------------------------------------------------
# Transcript serialization
# ---------------------------------------------------------------------------


def _transcript(turns) -> Transcript:
    return Transcript(
        task_id="t1", agent_variant="lita", turns=turns, outcome="finished", wall_time=1.25
    )


def test_empty_transcript_roundtrip():
    t = _transcript([])
    data = serialize_transcript(t)
    assert b'"outcome":"finished"' in data
    assert deserialize_transcript(data) == t


def test_three_turn_roundtrip():
    turns = [
        Turn(
            assistant=Message(
                "assistant", "working", tool_calls=[ToolCall("c1", "terminal", {"cmd": "ls"})]
            ),
            results=[ToolResult("c1", True, "file.txt")],
            usage=Usage(10, 2),
        ),
        Turn(assistant=Message("assistant", "no call"), injected_user="nudge"),
        Turn(
            assistant=Message(
                "assistant",
                tool_calls=[ToolCall("c2", "finish"), ToolCall("c3", "terminal", {"cmd": "x"})],
            ),
            results=[ToolResult("c2", True, "done")],
            skipped_call_ids=["c3"],
            usage=Usage(5, 1),
        ),
    ]
    t = _transcript(turns)
    assert deserialize_transcript(serialize_transcript(t)) == t


def test_serialization_is_deterministic():
    t = _transcript([Turn(assistant=Message("assistant", "hi"), usage=Usage(1, 1))])
    assert serialize_transcript(t) == serialize_transcript(t)


def test_line_delimited_one_turn_per_line():
    t = _transcript([Turn(assistant=Message("assistant", "a")), Turn(assistant=Message("assistant", "b"))])
    lines = serialize_transcript(t).decode().splitlines()
    assert len(lines) == 4  # meta, 2 turns, end
    assert json.loads(lines[0])["kind"] == "meta"
    assert json.loads(lines[-1])["kind"] == "end"


def test_deserialize_rejects_malformed():
    with pytest.raises(TranscriptError):
        deserialize_transcript(b"")
    with pytest.raises(TranscriptError):
        deserialize_transcript(b"not json\n")
    with pytest.raises(TranscriptError):
        deserialize_transcript(b'{"kind":"turn"}\n{"kind":"end","outcome":"finished"}\n')


# Property: roundtrip identity over generated transcripts.

_texts = st.text(max_size=40)
_ids = st.text(
    alphabet=st.characters(whitelist_categories=("Ll", "Nd")), min_size=1, max_size=8
)

_tool_calls = st.builds(
    ToolCall,
    call_id=_ids,
    tool_name=st.sampled_from(["editor", "terminal", "think", "finish"]),
    arguments=st.dictionaries(_ids, st.one_of(_texts, st.integers(), st.booleans()), max_size=3),
    argument_error=st.none() | _texts,
    raw_arguments=st.none() | _texts,
)

_assistant = st.builds(
    Message,
    role=st.just("assistant"),
    content=_texts,
    tool_calls=st.lists(_tool_calls, max_size=3),
    tool_call_id=st.none(),
)

_turns = st.builds(
    Turn,
    assistant=_assistant,
    results=st.lists(
        st.builds(ToolResult, call_id=_ids, ok=st.booleans(), content=_texts, truncated=st.booleans()),
        max_size=3,
    ),
    usage=st.builds(Usage, input_tokens=st.integers(0, 10**6), output_tokens=st.integers(0, 10**6)),
    skipped_call_ids=st.lists(_ids, max_size=2),
    injected_user=st.none() | _texts,
)


@settings(max_examples=200, deadline=None)
@given(
    turns=st.lists(_turns, max_size=5),
    outcome=st.sampled_from(["finished", "max_turns", "backend_error", "context_overflow"]),
    wall=st.floats(0, 1e6, allow_nan=False),
)
def test_roundtrip_property(turns, outcome, wall):
    t = Transcript("task", "lita", turns, outcome, wall)
    assert deserialize_transcript(serialize_transcript(t)) == t


def test_usage_additivity_total():
    turns = [
        Turn(assistant=Message("assistant", "a"), usage=Usage(7, 3)),
        Turn(assistant=Message("assistant", "b"), usage=Usage(11, 5)),
    ]
    assert _transcript(turns).total_usage() == Usage(18, 8)


# ---------------------------------------------------------------------------
# Manifest loading
# ---------------------------------------------------------------------------


def _manifest_doc(tasks):
    return {"version": MANIFEST_VERSION, "tasks": tasks}


def _task_doc(tid="t1", files=None):
    return {
        "id": tid,
        "initial_state": "i",
        "task_description": "t",
        "output_state": "o",
        "validation_steps": "v",
        "validation_commands": ["true"],
        "files": files or [],
    }


def test_load_single_task(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps(_manifest_doc([_task_doc(files=[{"path": "a.txt", "content": "x"}])])))
    tasks = load_manifest(path)
    assert len(tasks) == 1
    assert tasks[0].workspace_seed == [("a.txt", b"x")]


def test_duplicate_ids_rejected(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps(_manifest_doc([_task_doc("same"), _task_doc("same")])))
    with pytest.raises(ManifestError, match="duplicate task id 'same'"):
        load_manifest(path)


def test_path_escape_rejected(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(
        json.dumps(_manifest_doc([_task_doc(files=[{"path": "../x", "content": ""}])]))
    )
    with pytest.raises(ManifestError, match="escapes the workspace: '\\.\\./x'"):
        load_manifest(path)


def test_parse_error_is_positioned(tmp_path):
    path = tmp_path / "m.json"
    path.write_text('{"version": 1,\n  "tasks": [oops]}')
    with pytest.raises(ManifestError, match="line 2"):
        load_manifest(path)


def test_order_preserved_and_binary_roundtrip(tmp_path):
    raw = bytes(range(256))
    docs = [_task_doc("b"), _task_doc("a", files=[{"path": "bin", "content_b64": None}])]
    # write through dump_manifest for the binary path
    tasks = [
        TaskInstance(
            id=tid,
            workspace_seed=seed,
            initial_state="i",
            task_description="t",
            output_state="o",
            validation_steps="v",
            validation_commands=["true"],
        )
        for tid, seed in [("b", []), ("a", [("bin", raw)])]
    ]
    path = tmp_path / "m.json"
    dump_manifest(tasks, path)
    loaded = load_manifest(path)
    assert [t.id for t in loaded] == ["b", "a"]
    assert loaded[1].workspace_seed == [("bin", raw)]
