"""Benchmark transformation: task instances become workspaces plus a
four-section initial prompt, and validation commands decide success.

The prompt template has exactly four headed sections -- Initial State,
Task Description, Output State, Validation Steps -- rendered verbatim
from the task with no model- or variant-specific phrasing. Three thin
importers translate common benchmark source shapes (function-completion
items, exercise directories, repo-bugfix bundles) into the unified
manifest; they are pure format translators.
"""

from __future__ import annotations

import json
import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .core import TaskInstance, Transcript
from .toolkit import Limits, Workspace, run_command

SECTION_HEADERS = (
    "## Initial State",
    "## Task Description",
    "## Output State",
    "## Validation Steps",
)


class WorkspaceCollisionError(Exception):
    """The target directory for a workspace already has content."""


@dataclass
class ValidationOutcome:
    """Result of one harness-run validation command."""

    command: str
    exit_code: int | None
    passed: bool
    output_excerpt: str
    index: int

    def to_json(self) -> dict[str, Any]:
        return {
            "command": self.command,
            "exit_code": self.exit_code,
            "passed": self.passed,
            "output_excerpt": self.output_excerpt,
            "index": self.index,
        }


def _escape_body(body: str) -> str:
    # Bodies are verbatim except that a line colliding with a structural
    # header is pushed off the line start, keeping exactly four headers.
    lines = body.split("\n")
    return "\n".join(" " + line if line in SECTION_HEADERS else line for line in lines)


def render_prompt(task: TaskInstance) -> str:
    """The initial user message: four headed sections in fixed order.

    Depends only on the task fields, so identical tasks render to
    identical prompts regardless of model or variant.
    """
    bodies = (
        task.initial_state,
        task.task_description,
        task.output_state,
        task.validation_steps,
    )
    sections = [
        f"{header}\n{_escape_body(body)}" for header, body in zip(SECTION_HEADERS, bodies)
    ]
    return "\n\n".join(sections)


def materialize_workspace(task: TaskInstance, root: str | Path) -> Workspace:
    """Write the task's seed files byte-exactly into ``root``.

    ``root`` must be empty or absent; collisions are refused so
    concurrent runs can never share a directory.
    """
    root = Path(root)
    if root.exists() and any(root.iterdir()):
        raise WorkspaceCollisionError(f"workspace root is not empty: {root}")
    root.mkdir(parents=True, exist_ok=True)
    ws = Workspace(root=root)
    for rel, content in task.workspace_seed:
        target = ws.resolve(rel)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(content)
    return ws


def snapshot_workspace(ws_root: Path, dest: Path) -> None:
    """Full directory copy used for checkpoint grading; symlinks are
    copied as links, never followed."""
    shutil.copytree(ws_root, dest, symlinks=True)


def validate(
    task: TaskInstance,
    ws_root: Path,
    *,
    short_circuit: bool = True,
    timeout: float | None = None,
    start_ordinal: int = 1,
) -> list[ValidationOutcome]:
    """Run the task's validation commands in order at ``ws_root``.

    Each command runs in a fresh subshell; with short_circuit the first
    failure ends the list. Ordinals number validation runs globally
    within a run's log, continuing from ``start_ordinal``.
    """
    timeout = timeout if timeout is not None else Limits().validation_timeout
    outcomes: list[ValidationOutcome] = []
    ordinal = start_ordinal
    for cmd in task.validation_commands:
        try:
            result = run_command(ws_root, cmd, timeout)
            combined = result.stdout + (("\n" + result.stderr) if result.stderr else "")
            if result.timed_out:
                combined += f"\n(validation timed out after {timeout:g}s)"
            outcome = ValidationOutcome(
                command=cmd,
                exit_code=result.exit_code,
                passed=result.exit_code == 0,
                output_excerpt=combined[:2000],
                index=ordinal,
            )
        except OSError as exc:
            outcome = ValidationOutcome(
                command=cmd,
                exit_code=None,
                passed=False,
                output_excerpt=f"failed to spawn: {exc}",
                index=ordinal,
            )
        outcomes.append(outcome)
        ordinal += 1
        if not outcome.passed and short_circuit:
            break
    return outcomes


def _normalize_command(cmd: str) -> str:
    return " ".join(cmd.split())


def matches_validation(cmd: str, task: TaskInstance) -> bool:
    """Whether an agent terminal command counts as running a task
    validation: whitespace-normalized prefix match at a token boundary."""
    norm = _normalize_command(cmd)
    for val_cmd in task.validation_commands:
        target = _normalize_command(val_cmd)
        if norm == target or norm.startswith(target + " "):
            return True
    return False


def detect_agent_validations(transcript: Transcript, task: TaskInstance) -> list[int]:
    """1-based turn ordinals at which the agent ran a validation command.

    Only dispatched terminal calls count (calls skipped after finish have
    no result); a turn with two matching calls contributes two entries.
    """
    ordinals: list[int] = []
    for turn_no, turn in enumerate(transcript.turns, start=1):
        dispatched = {r.call_id for r in turn.results}
        for call in turn.assistant.tool_calls:
            if call.call_id not in dispatched or call.tool_name != "terminal":
                continue
            cmd = call.arguments.get("cmd")
            if isinstance(cmd, str) and matches_validation(cmd, task):
                ordinals.append(turn_no)
    return ordinals


# ---------------------------------------------------------------------------
# Importers. Each translates one source shape into the unified manifest
# with mechanically generated prompt sections; the task statement itself
# is always copied verbatim from the source.
# ---------------------------------------------------------------------------


def _file_listing(seed: list[tuple[str, bytes]]) -> str:
    return ", ".join(sorted(path for path, _ in seed))


def import_completion_items(path: str | Path) -> list[TaskInstance]:
    """Function-completion items: one JSON record per line with id,
    statement, stub_path/stub, test_path/test, and command fields."""
    tasks: list[TaskInstance] = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            item = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: line {lineno}: invalid JSON: {exc.msg}") from None
        seed = [
            (item["stub_path"], item["stub"].encode("utf-8")),
            (item["test_path"], item["test"].encode("utf-8")),
        ]
        command = item["command"]
        tasks.append(
            TaskInstance(
                id=item["id"],
                workspace_seed=seed,
                initial_state=(
                    f"The working directory contains: {_file_listing(seed)}. "
                    f"{item['stub_path']} holds the code to complete and "
                    f"{item['test_path']} holds the checks."
                ),
                task_description=item["statement"],
                output_state=(
                    f"{item['stub_path']} contains the completed implementation; all other files are unchanged."
                ),
                validation_steps=f"Run `{command}`; it exits 0 when the solution is correct.",
                validation_commands=[command],
                language_tag=item.get("language", ""),
            )
        )
    return tasks


def _read_seed_tree(base: Path) -> list[tuple[str, bytes]]:
    seed = []
    for file in sorted(base.rglob("*")):
        if file.is_file():
            seed.append((str(file.relative_to(base)), file.read_bytes()))
    return seed


def import_exercise_dir(path: str | Path) -> list[TaskInstance]:
    """Exercise directories: one subdirectory per task holding
    config.json, an instructions file, and a workspace/ seed tree."""
    path = Path(path)
    tasks: list[TaskInstance] = []
    for task_dir in sorted(d for d in path.iterdir() if d.is_dir()):
        config = json.loads((task_dir / "config.json").read_text(encoding="utf-8"))
        statement_file = config.get("statement_file", "instructions.md")
        statement = (task_dir / statement_file).read_text(encoding="utf-8").strip()
        seed = _read_seed_tree(task_dir / "workspace")
        commands = config["commands"]
        tasks.append(
            TaskInstance(
                id=config.get("id", task_dir.name),
                workspace_seed=seed,
                initial_state=f"The working directory contains: {_file_listing(seed)}.",
                task_description=statement,
                output_state="The files named in the task contain the working solution; the checks pass.",
                validation_steps="Run, in order: "
                + "; ".join(f"`{c}`" for c in commands)
                + ". Each exits 0 on success.",
                validation_commands=list(commands),
                language_tag=config.get("language", ""),
            )
        )
    return tasks


def import_bugfix_dir(path: str | Path) -> list[TaskInstance]:
    """Repo-bugfix bundles: one subdirectory per task holding
    config.json, issue.md, and a repo/ tree. The issue report is seeded
    into the workspace and the task points at it rather than inlining it."""
    path = Path(path)
    tasks: list[TaskInstance] = []
    for task_dir in sorted(d for d in path.iterdir() if d.is_dir()):
        config = json.loads((task_dir / "config.json").read_text(encoding="utf-8"))
        seed = _read_seed_tree(task_dir / "repo")
        seed.append(("issue.md", (task_dir / "issue.md").read_bytes()))
        seed.sort(key=lambda pair: pair[0])
        commands = config["commands"]
        tasks.append(
            TaskInstance(
                id=config.get("id", task_dir.name),
                workspace_seed=seed,
                initial_state=(
                    f"The working directory contains the project tree: {_file_listing(seed)}. "
                    "The bug report is in issue.md; read it first."
                ),
                task_description="Fix the bug described in issue.md.",
                output_state="The project tree with the fix applied in place; the checks pass.",
                validation_steps="Run, in order: "
                + "; ".join(f"`{c}`" for c in commands)
                + ". Each exits 0 on success.",
                validation_commands=list(commands),
                language_tag=config.get("language", ""),
            )
        )
    return tasks
