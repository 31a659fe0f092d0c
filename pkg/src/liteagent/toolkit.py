"""The fixed agent tool set: specs, implementations, and dispatch.

Six tools cover typical software-engineering work: editor (create / view
/ modify files), terminal (run commands), search (find a literal snippet
in files), finish (signal completion), and the two reasoning tools think
and plan. A seventh, summary, appears when the summarized memory
strategy is active.

Every file-touching operation resolves inside the workspace root;
escapes via "..", absolute paths, or symlinks are refused. Tool failures
are always returned to the model as ok=false results -- dispatch never
raises.
"""

from __future__ import annotations

import os
import signal
import subprocess
import time
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any

from .core import AgentConfig, ToolCall, ToolParam, ToolResult, ToolSpec
from .edits import (
    DIFF_BLOCK,
    STRING_REPLACE,
    EditError,
    EditLedger,
    EditOperation,
    apply_diff_block,
    apply_string_replace,
    parse_diff_blocks,
)
from .memory import Memory, SummaryError

_DESCRIPTION_DIR = Path(__file__).parent / "config" / "tool_descriptions"

# Canonical tool order; registries always list tools in this sequence so
# the serialized schema (and with it the preloaded-token count) is
# byte-stable for a fixed configuration.
CANONICAL_ORDER = ("editor", "terminal", "search", "think", "plan", "summary", "finish")

VARIANT_TOOLS: dict[str, tuple[str, ...]] = {
    "lita": ("editor", "terminal", "search", "think", "plan", "finish"),
    "lita_diff": ("editor", "terminal", "search", "think", "plan", "finish"),
    "lita_mini": ("terminal", "finish"),
    "lita_reason": ("terminal", "think", "plan", "finish"),
}

THINK_ACK = "Noted."
PLAN_ACK = "Noted."
FINISH_ACK = "Task marked complete."


@dataclass(frozen=True)
class Limits:
    """Operational caps; all values are configuration, not behavior."""

    terminal_timeout: float = 120.0
    result_cap: int = 16_000
    result_head: int = 10_000
    search_cap: int = 100
    search_max_file_bytes: int = 1_000_000
    validation_timeout: float = 300.0


ELISION_MARKER = "\n[... output truncated ...]\n"


def truncate_middle(text: str, limits: Limits) -> tuple[str, bool]:
    """Cap text at limits.result_cap keeping head and tail around an
    elision marker; total length never exceeds the cap."""
    if len(text) <= limits.result_cap:
        return text, False
    head = limits.result_head
    tail = limits.result_cap - head - len(ELISION_MARKER)
    return text[:head] + ELISION_MARKER + text[-tail:], True


class WorkspaceEscapeError(Exception):
    def __init__(self, path: str) -> None:
        super().__init__(f"path escapes the workspace: '{path}'")


@dataclass
class Workspace:
    """A per-run working directory; owned by exactly one agent loop."""

    root: Path
    created_at: float = field(default_factory=time.time)

    def resolve(self, raw: str) -> Path:
        """Resolve a tool-supplied path inside the root, following
        symlinks; anything that lands outside is an escape."""
        if not raw:
            raise WorkspaceEscapeError(raw)
        candidate = Path(raw)
        if not candidate.is_absolute():
            candidate = self.root / candidate
        resolved = candidate.resolve()
        root = self.root.resolve()
        if resolved != root and root not in resolved.parents:
            raise WorkspaceEscapeError(raw)
        return resolved


@dataclass
class ExecResult:
    """Outcome of one terminal command."""

    exit_code: int | None
    stdout: str
    stderr: str
    duration: float
    timed_out: bool = False


@dataclass
class MatchList:
    matches: list[tuple[str, int, str]]
    capped: bool = False


def run_command(root: Path, cmd: str, timeout: float) -> ExecResult:
    """Run cmd in a fresh subshell with cwd=root.

    Environment and working-directory changes never persist across
    calls. On timeout the whole process group is killed and the result
    carries the timeout marker instead of an exit code.
    """
    start = time.perf_counter()
    proc = subprocess.Popen(
        cmd,
        shell=True,
        cwd=str(root),
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
        errors="replace",
        start_new_session=True,
    )
    try:
        stdout, stderr = proc.communicate(timeout=timeout)
        return ExecResult(proc.returncode, stdout, stderr, time.perf_counter() - start)
    except subprocess.TimeoutExpired:
        try:
            os.killpg(os.getpgid(proc.pid), signal.SIGKILL)
        except (ProcessLookupError, PermissionError):
            pass
        stdout, stderr = proc.communicate()
        duration = max(time.perf_counter() - start, timeout)
        return ExecResult(None, stdout or "", stderr or "", duration, timed_out=True)


def _looks_binary(data: bytes) -> bool:
    return b"\x00" in data[:8192]


def search(ws: Workspace, pattern: str, directory: str = "", *, limits: Limits = Limits()) -> MatchList:
    """Literal-substring search over text files under a directory.

    Recursive with deterministic (sorted) path order; symlinks, binary
    files, and oversize files are skipped. Case-sensitive.
    """
    base = ws.resolve(directory) if directory else ws.root.resolve()
    if not base.is_dir():
        raise FileNotFoundError(f"directory not found: '{directory or '.'}'")
    matches: list[tuple[str, int, str]] = []
    capped = False
    root = ws.root.resolve()
    for dirpath, dirnames, filenames in os.walk(base, followlinks=False):
        dirnames.sort()
        filenames.sort()
        for filename in filenames:
            path = Path(dirpath) / filename
            if path.is_symlink():
                continue
            try:
                if path.stat().st_size > limits.search_max_file_bytes:
                    continue
                data = path.read_bytes()
            except OSError:
                continue
            if _looks_binary(data):
                continue
            text = data.decode("utf-8", errors="replace")
            rel = str(path.relative_to(root))
            for lineno, line in enumerate(text.split("\n"), start=1):
                if pattern in line:
                    if len(matches) >= limits.search_cap:
                        capped = True
                        return MatchList(matches, capped)
                    matches.append((rel, lineno, line))
    return MatchList(matches, capped)


def _numbered(lines: list[str], start: int = 1) -> str:
    return "\n".join(f"{start + i:6d}\t{line}" for i, line in enumerate(lines))


def editor_view(ws: Workspace, path: str, start_line: int | None = None, end_line: int | None = None) -> str:
    """File content with 1-based line numbers; ranges clamp to the file."""
    resolved = ws.resolve(path)
    if not resolved.is_file():
        raise FileNotFoundError(f"file not found: '{path}'")
    data = resolved.read_bytes()
    if _looks_binary(data):
        raise ValueError(f"binary file ({len(data)} bytes); refusing to display")
    lines = data.decode("utf-8", errors="replace").split("\n")
    if start_line is None and end_line is None:
        return _numbered(lines)
    first = max(1, start_line or 1)
    last = min(len(lines), end_line or len(lines))
    clamped = first != (start_line or 1) or last != (end_line or len(lines))
    first = min(first, len(lines))
    if last < first:
        last = first
    out = _numbered(lines[first - 1 : last], start=first)
    if clamped:
        out += f"\n(range clamped to {first}-{last} of {len(lines)} lines)"
    return out


def editor_create(ws: Workspace, path: str, content: str, overwrite: bool = False) -> str:
    """Write a new file (parents created); existing files need overwrite."""
    resolved = ws.resolve(path)
    if resolved.exists() and not overwrite:
        raise FileExistsError(f"file already exists: '{path}' (set overwrite to replace it)")
    resolved.parent.mkdir(parents=True, exist_ok=True)
    resolved.write_bytes(content.encode("utf-8"))
    return f"created '{path}' ({len(content)} characters)"


def _changed_region(text: str, at: int, inserted: str) -> str:
    """Numbered view of the lines covered by an insertion at offset ``at``."""
    first = text[:at].count("\n") + 1
    last = first + inserted.count("\n")
    lines = text.split("\n")
    return _numbered(lines[first - 1 : last], start=first)


def editor_modify(ws: Workspace, path: str, edit: EditOperation, ledger: EditLedger) -> str:
    """Apply one edit operation to a file under the configured format.

    Every attempt, clean or not, is recorded in the ledger; failures
    re-raise for dispatch to wrap. On success the result echoes a
    numbered view of the changed region.
    """
    try:
        resolved = ws.resolve(path)
        if not resolved.is_file():
            raise FileNotFoundError(f"file not found: '{path}'")
        content = resolved.read_bytes().decode("utf-8")
        if edit.format == STRING_REPLACE:
            new_content = apply_string_replace(content, edit.old_text, edit.new_text)
            at = content.index(edit.old_text)
            region = _changed_region(new_content, at, edit.new_text)
            note = ""
        else:
            blocks = parse_diff_blocks(edit.block_text)
            if not blocks:
                raise EditError("no edit blocks found in the diff text")
            new_content = content
            regions = []
            fallbacks = 0
            for block in blocks:
                applied = apply_diff_block(new_content, block)
                joined = "\n".join(block.replace_lines)
                if applied.used_fallback:
                    fallbacks += 1
                # Locate the replacement to echo the changed region.
                at = applied.text.index(joined) if joined and joined in applied.text else 0
                regions.append(_changed_region(applied.text, at, joined))
                new_content = applied.text
            region = "\n".join(regions)
            note = (
                f"\n({fallbacks} block(s) matched ignoring trailing whitespace)"
                if fallbacks
                else ""
            )
        resolved.write_bytes(new_content.encode("utf-8"))
    except Exception:
        ledger.record(False)
        raise
    ledger.record(True)
    return f"edited '{path}'; changed region:\n{region}{note}"


def annotate(kind: str, text: str) -> str:
    """Record a think/plan note; the note itself lives in the transcript
    via the tool call, so the result is a constant acknowledgment."""
    if not text:
        raise ValueError(f"{kind} text is empty")
    return THINK_ACK if kind == "think" else PLAN_ACK


@lru_cache(maxsize=None)
def _description(name: str) -> str:
    return (_DESCRIPTION_DIR / f"{name}.txt").read_text(encoding="utf-8").strip()


def _editor_spec(diff_format: bool) -> ToolSpec:
    params = [
        ToolParam("command", "text", True, "One of 'view', 'create', or 'modify'."),
        ToolParam("path", "text", True, "File path relative to the workspace root."),
        ToolParam("start_line", "integer", False, "view: first line to show (1-based)."),
        ToolParam("end_line", "integer", False, "view: last line to show (inclusive)."),
        ToolParam("content", "text", False, "create: full text of the new file."),
        ToolParam("overwrite", "boolean", False, "create: replace the file if it exists."),
    ]
    if diff_format:
        params.append(
            ToolParam("diff", "text", False, "modify: one or more fenced SEARCH/REPLACE blocks.")
        )
        return ToolSpec("editor", _description("editor_diff"), params)
    params.extend(
        [
            ToolParam("old_text", "text", False, "modify: exact text to replace (must be unique in the file)."),
            ToolParam("new_text", "text", False, "modify: replacement text."),
        ]
    )
    return ToolSpec("editor", _description("editor"), params)


def _build_spec(name: str, diff_editor: bool) -> ToolSpec:
    if name == "editor":
        return _editor_spec(diff_editor)
    if name == "terminal":
        return ToolSpec(
            "terminal",
            _description("terminal"),
            [
                ToolParam("cmd", "text", True, "Shell command to execute."),
                ToolParam("timeout", "integer", False, "Seconds before the command is killed."),
            ],
        )
    if name == "search":
        return ToolSpec(
            "search",
            _description("search"),
            [
                ToolParam("pattern", "text", True, "Literal text to look for (case-sensitive)."),
                ToolParam("dir", "text", False, "Directory to search, relative to the workspace root."),
            ],
        )
    if name == "think":
        return ToolSpec(
            "think",
            _description("think"),
            [ToolParam("thought", "text", True, "The reflection to record.")],
        )
    if name == "plan":
        return ToolSpec(
            "plan",
            _description("plan"),
            [ToolParam("plan", "text", True, "The outline of next steps to record.")],
        )
    if name == "summary":
        return ToolSpec(
            "summary",
            _description("summary"),
            [
                ToolParam("first_turn", "integer", True, "First conversation turn to condense (0-based)."),
                ToolParam("last_turn", "integer", True, "Last conversation turn to condense (inclusive)."),
                ToolParam("summary", "text", True, "The replacement summary text."),
            ],
        )
    if name == "finish":
        return ToolSpec(
            "finish",
            _description("finish"),
            [ToolParam("summary", "text", False, "Optional summary of the work done.")],
        )
    raise ValueError(f"unknown tool name '{name}'")


def registry_for(config: AgentConfig) -> list[ToolSpec]:
    """The tool specs for a configuration, in canonical order.

    Variant defaults apply unless enabled_tools overrides them; the
    summary tool joins the default set whenever the summarized memory
    strategy is active. Output is wording-stable: the same config always
    yields byte-identical specs.
    """
    if config.enabled_tools is not None:
        names = set(config.enabled_tools)
        unknown = names - set(CANONICAL_ORDER)
        if unknown:
            raise ValueError(f"unknown tool name(s) in override: {', '.join(sorted(unknown))}")
    else:
        names = set(VARIANT_TOOLS[config.variant])
        if config.memory_strategy == "summarized":
            names.add("summary")
    diff_editor = config.variant == "lita_diff"
    return [_build_spec(name, diff_editor) for name in CANONICAL_ORDER if name in names]


def _coerce_int(value: Any) -> int | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        try:
            return int(value)
        except ValueError:
            return None
    return None


def _coerce_bool(value: Any) -> bool | None:
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.lower() in ("true", "false"):
        return value.lower() == "true"
    return None


class Toolbox:
    """Registry plus dispatcher for one agent run.

    Owns the edit ledger and the editor's edit-format binding. Dispatch
    is total: every call yields exactly one ToolResult with the matching
    call id, and no tool error escapes.
    """

    def __init__(self, config: AgentConfig, limits: Limits | None = None) -> None:
        self.config = config
        self.limits = limits or Limits()
        self.specs = registry_for(config)
        self.edit_format = DIFF_BLOCK if config.variant == "lita_diff" else STRING_REPLACE
        self.ledger = EditLedger()
        self._by_name = {spec.name: spec for spec in self.specs}

    def dispatch(self, call: ToolCall, ws: Workspace, mem: Memory) -> ToolResult:
        try:
            ok, content = self._route(call, ws, mem)
        except Exception as exc:  # dispatch totality: nothing raises past here
            ok, content = False, f"tool '{call.tool_name}' failed: {exc}"
        # The concrete root is a per-run temporary path; mapping it to a
        # stable token keeps transcripts byte-reproducible and host paths
        # out of the model's context.
        for concrete in {str(ws.root.resolve()), str(ws.root)}:
            content = content.replace(concrete, "<workspace>")
        content, truncated = truncate_middle(content, self.limits)
        return ToolResult(call_id=call.call_id, ok=ok, content=content, truncated=truncated)

    def _route(self, call: ToolCall, ws: Workspace, mem: Memory) -> tuple[bool, str]:
        if call.argument_error is not None:
            return False, (
                f"arguments could not be parsed: {call.argument_error}; "
                "send a JSON object matching the tool's parameters"
            )
        spec = self._by_name.get(call.tool_name)
        if spec is None:
            available = ", ".join(s.name for s in self.specs)
            return False, f"unknown tool '{call.tool_name}'; available tools: {available}"
        args = call.arguments
        missing = [p.name for p in spec.parameters if p.required and p.name not in args]
        if missing:
            return False, f"missing required parameter '{missing[0]}' for tool '{spec.name}'"

        name = spec.name
        if name == "editor":
            return self._editor(args, ws)
        if name == "terminal":
            return self._terminal(args, ws)
        if name == "search":
            return self._search(args, ws)
        if name in ("think", "plan"):
            key = "thought" if name == "think" else "plan"
            text = str(args.get(key) or "")
            if not text:
                return False, f"missing required parameter '{key}' for tool '{name}'"
            return True, annotate(name, text)
        if name == "summary":
            return self._summary(args, mem)
        if name == "finish":
            return True, FINISH_ACK
        return False, f"unknown tool '{name}'"

    def _editor(self, args: dict[str, Any], ws: Workspace) -> tuple[bool, str]:
        command = str(args.get("command") or "")
        path = str(args.get("path") or "")
        if command not in ("view", "create", "modify"):
            return False, f"invalid parameter 'command': expected view, create, or modify, got '{command}'"
        try:
            if command == "view":
                start = _coerce_int(args["start_line"]) if "start_line" in args else None
                end = _coerce_int(args["end_line"]) if "end_line" in args else None
                return True, editor_view(ws, path, start, end)
            if command == "create":
                overwrite = _coerce_bool(args.get("overwrite", False))
                return True, editor_create(ws, path, str(args.get("content") or ""), bool(overwrite))
            return self._modify(args, ws, path)
        except (WorkspaceEscapeError, FileNotFoundError, FileExistsError, ValueError, OSError) as exc:
            return False, str(exc)

    def _modify(self, args: dict[str, Any], ws: Workspace, path: str) -> tuple[bool, str]:
        if self.edit_format == STRING_REPLACE:
            old = args.get("old_text")
            if not old:
                self.ledger.record(False)
                return False, "missing required parameter 'old_text' for editor modify"
            edit = EditOperation(STRING_REPLACE, old_text=str(old), new_text=str(args.get("new_text") or ""))
        else:
            diff = args.get("diff")
            if not diff:
                self.ledger.record(False)
                return False, "missing required parameter 'diff' for editor modify"
            edit = EditOperation(DIFF_BLOCK, block_text=str(diff))
        try:
            return True, editor_modify(ws, path, edit, self.ledger)
        except (EditError, WorkspaceEscapeError, FileNotFoundError, OSError, UnicodeDecodeError) as exc:
            return False, str(exc)

    def _terminal(self, args: dict[str, Any], ws: Workspace) -> tuple[bool, str]:
        cmd = str(args.get("cmd") or "")
        if not cmd:
            return False, "missing required parameter 'cmd' for tool 'terminal'"
        timeout = self.limits.terminal_timeout
        if "timeout" in args:
            requested = _coerce_int(args["timeout"])
            if requested is None or requested < 1:
                return False, "invalid parameter 'timeout': expected a positive integer"
            timeout = min(float(requested), self.limits.terminal_timeout)
        try:
            result = run_command(ws.root, cmd, timeout)
        except OSError as exc:
            return False, f"failed to spawn command: {exc}"
        parts = []
        if result.timed_out:
            parts.append(f"command timed out after {timeout:g}s")
        else:
            parts.append(f"exit code: {result.exit_code}")
        if result.stdout:
            parts.append(f"stdout:\n{result.stdout}")
        if result.stderr:
            parts.append(f"stderr:\n{result.stderr}")
        if not result.stdout and not result.stderr:
            parts.append("(no output)")
        return True, "\n".join(parts)

    def _search(self, args: dict[str, Any], ws: Workspace) -> tuple[bool, str]:
        pattern = str(args.get("pattern") or "")
        if not pattern:
            return False, "missing required parameter 'pattern' for tool 'search'"
        directory = str(args.get("dir") or "")
        try:
            found = search(ws, pattern, directory, limits=self.limits)
        except (WorkspaceEscapeError, FileNotFoundError) as exc:
            return False, str(exc)
        if not found.matches:
            return True, "no matches"
        lines = [f"{path}:{lineno}: {text}" for path, lineno, text in found.matches]
        if found.capped:
            lines.append(f"(results capped at {self.limits.search_cap})")
        return True, "\n".join(lines)

    def _summary(self, args: dict[str, Any], mem: Memory) -> tuple[bool, str]:
        first = _coerce_int(args.get("first_turn"))
        last = _coerce_int(args.get("last_turn"))
        if first is None or last is None:
            return False, "invalid parameters: first_turn and last_turn must be integers"
        text = str(args.get("summary") or "")
        if not text:
            return False, "missing required parameter 'summary' for tool 'summary'"
        try:
            return True, mem.summarize(first, last, text)
        except SummaryError as exc:
            return False, str(exc)
