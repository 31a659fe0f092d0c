"""Run orchestration and metrics: pass checkpoints, token and cost
accounting, tool histograms, edit adherence, agent-complexity
measurement, and the relative performance gap.

Token counting is pluggable. The deterministic default approximates one
token per four UTF-8 bytes (rounded up); live runs additionally carry
the provider-reported usage, which is authoritative for cost. The
counter id is stamped into every complexity report. Costs are computed
with decimals and rounded to two digits only at report time.
"""

from __future__ import annotations

import json
import math
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Any, Callable

from .bench import (
    ValidationOutcome,
    WorkspaceCollisionError,
    detect_agent_validations,
    materialize_workspace,
    matches_validation,
    render_prompt,
    snapshot_workspace,
    validate,
)
from .core import (
    AgentConfig,
    TaskInstance,
    Transcript,
    Usage,
    serialize_transcript,
)
from .edits import EditLedger, adherence
from .llm import tools_to_wire
from .loop import run_task
from .toolkit import Limits, registry_for

DEFAULT_PRICING_PATH = Path(__file__).parent / "config" / "pricing.json"


# ---------------------------------------------------------------------------
# Token counters.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TokenCounter:
    """A deterministic text -> token-count function with an identity."""

    id: str
    fn: Callable[[str], int]

    def count(self, text: str) -> int:
        return self.fn(text)


def _bytes4(text: str) -> int:
    return math.ceil(len(text.encode("utf-8")) / 4)


BYTES4_COUNTER = TokenCounter("bytes4", _bytes4)


def external_counter(cmd: str) -> TokenCounter:
    """Adapter for an external tokenizer: the command reads text on stdin
    and prints a single integer."""

    def count(text: str) -> int:
        proc = subprocess.run(
            cmd, shell=True, input=text.encode("utf-8"), capture_output=True, timeout=60
        )
        if proc.returncode != 0:
            raise RuntimeError(f"token counter '{cmd}' failed: {proc.stderr.decode()[:200]}")
        return int(proc.stdout.strip())

    return TokenCounter(f"external:{cmd}", count)


# ---------------------------------------------------------------------------
# Pricing and cost.
# ---------------------------------------------------------------------------

PricingTable = dict[str, tuple[Decimal, Decimal]]


def load_pricing(path: str | Path | None = None) -> PricingTable:
    """Load per-1M-token prices. Prices drift; the shipped file holds
    reference values and is meant to be edited."""
    doc = json.loads(Path(path or DEFAULT_PRICING_PATH).read_text(encoding="utf-8"))
    table: PricingTable = {}
    for model_id, entry in doc.items():
        input_price = Decimal(str(entry["input_per_1m"]))
        output_price = Decimal(str(entry["output_per_1m"]))
        if input_price < 0 or output_price < 0:
            raise ValueError(f"negative price for model '{model_id}'")
        table[model_id] = (input_price, output_price)
    return table


def cost(usage: Usage, model_id: str, pricing: PricingTable) -> Decimal:
    """input_tokens/1M * input price + output_tokens/1M * output price."""
    if model_id not in pricing:
        raise ValueError(f"unknown model id '{model_id}' in pricing table")
    input_price, output_price = pricing[model_id]
    million = Decimal(1_000_000)
    return (
        Decimal(usage.input_tokens) * input_price / million
        + Decimal(usage.output_tokens) * output_price / million
    )


def format_cost(value: Decimal) -> str:
    return str(value.quantize(Decimal("0.01")))


# ---------------------------------------------------------------------------
# Pure metric functions.
# ---------------------------------------------------------------------------


def tool_histogram(transcripts: list[Transcript]) -> dict[str, tuple[int, float]]:
    """Counts and proportions of every dispatched tool call by name.

    Calls skipped after finish were never dispatched and do not count.
    """
    counts: dict[str, int] = {}
    for t in transcripts:
        for turn in t.turns:
            dispatched = {r.call_id for r in turn.results}
            for call in turn.assistant.tool_calls:
                if call.call_id in dispatched:
                    counts[call.tool_name] = counts.get(call.tool_name, 0) + 1
    total = sum(counts.values())
    if total == 0:
        return {}
    return {name: (n, n / total) for name, n in sorted(counts.items())}


def relative_gap(p_simple: float, p_complex: float) -> float | None:
    """(p_simple - p_complex) / p_complex; None when p_complex is zero."""
    if p_complex == 0:
        return None
    return (p_simple - p_complex) / p_complex


def ledger_from_transcript(t: Transcript) -> EditLedger:
    """Rebuild the edit ledger from a transcript.

    Mirrors dispatch exactly: every dispatched editor call with
    command="modify" is one attempt, successful iff its result is ok.
    """
    ledger = EditLedger()
    for turn in t.turns:
        results = {r.call_id: r for r in turn.results}
        for call in turn.assistant.tool_calls:
            result = results.get(call.call_id)
            if result is None or call.tool_name != "editor":
                continue
            if call.arguments.get("command") == "modify":
                ledger.record(result.ok)
    return ledger


# ---------------------------------------------------------------------------
# Agent complexity.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComplexityReport:
    """The (action count, preloaded tokens) pair plus its breakdown.

    The two components are never collapsed into one scalar; report both.
    """

    action_count: int
    preloaded_tokens: int
    system_prompt_tokens: int
    user_prompt_tokens: int
    tool_schema_tokens: int
    token_counter_id: str


def schema_json(config: AgentConfig) -> str:
    """Canonical serialization of the tool schema as sent on the wire;
    byte-stable for a fixed configuration."""
    return json.dumps(
        tools_to_wire(registry_for(config)), ensure_ascii=False, separators=(",", ":")
    )


def complexity(config: AgentConfig, task: TaskInstance, counter: TokenCounter) -> ComplexityReport:
    """Action count and system preloaded tokens for one configuration.

    Preloaded tokens cover the context paid before the agent acts: the
    system prompt, the rendered initial user prompt, and the serialized
    tool schema.
    """
    system_tokens = counter.count(config.system_prompt)
    user_tokens = counter.count(render_prompt(task))
    schema_tokens = counter.count(schema_json(config))
    return ComplexityReport(
        action_count=len(registry_for(config)),
        preloaded_tokens=system_tokens + user_tokens + schema_tokens,
        system_prompt_tokens=system_tokens,
        user_prompt_tokens=user_tokens,
        tool_schema_tokens=schema_tokens,
        token_counter_id=counter.id,
    )


# ---------------------------------------------------------------------------
# Checkpoints.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckpointResult:
    pass_in_2_tests: bool
    pass_in_budget: bool
    turns_used: int
    validations_used: int


def _grades_ok(outcomes: list[ValidationOutcome], task: TaskInstance) -> bool:
    return len(outcomes) == len(task.validation_commands) and all(o.passed for o in outcomes)


def checkpoints(
    task: TaskInstance,
    transcript: Transcript,
    validation_turns: list[int],
    snapshot_dirs: list[Path],
    final_dir: Path,
    budget: int,
    *,
    timeout: float | None = None,
    log: list[tuple[str, ValidationOutcome]] | None = None,
) -> CheckpointResult:
    """Grade the two pass checkpoints from workspace snapshots.

    pass_in_2_tests: the task validates cleanly at (or before) the state
    of the agent's second validation run; when the agent ran fewer than
    two validations, the final state stands in for the checkpoint.
    pass_in_budget: the final workspace validates within the turn budget.
    All grading runs against copies, so it cannot disturb the live
    workspace.
    """
    ordinal = 1

    def grade(root: Path, phase: str) -> bool:
        nonlocal ordinal
        outcomes = validate(task, root, timeout=timeout, start_ordinal=ordinal)
        ordinal += len(outcomes)
        if log is not None:
            log.extend((phase, o) for o in outcomes)
        return _grades_ok(outcomes, task)

    early = [grade(d, f"snapshot-{i}") for i, d in enumerate(snapshot_dirs[:2], start=1)]
    final_ok = grade(final_dir, "final")
    if len(snapshot_dirs) < 2:
        pass_in_2 = any(early) or final_ok
    else:
        pass_in_2 = any(early)
    return CheckpointResult(
        pass_in_2_tests=pass_in_2,
        pass_in_budget=final_ok and len(transcript.turns) <= budget,
        turns_used=len(transcript.turns),
        validations_used=len(validation_turns),
    )


# ---------------------------------------------------------------------------
# Running tasks and assembling reports.
# ---------------------------------------------------------------------------


@dataclass
class TaskRunRecord:
    """Everything the report needs from a single (task, run) execution."""

    task_id: str
    run_index: int
    outcome: str = ""
    checkpoint: CheckpointResult | None = None
    usage: Usage = field(default_factory=Usage)
    transcript: Transcript | None = None
    wall_time: float = 0.0
    error: str | None = None

    def to_json(self) -> dict[str, Any]:
        doc: dict[str, Any] = {"run_index": self.run_index}
        if self.error is not None:
            doc["error"] = self.error
            return doc
        assert self.checkpoint is not None
        ledger = ledger_from_transcript(self.transcript) if self.transcript else EditLedger()
        doc.update(
            {
                "outcome": self.outcome,
                "turns_used": self.checkpoint.turns_used,
                "validations_used": self.checkpoint.validations_used,
                "pass_in_2_tests": self.checkpoint.pass_in_2_tests,
                "pass_in_budget": self.checkpoint.pass_in_budget,
                "input_tokens": self.usage.input_tokens,
                "output_tokens": self.usage.output_tokens,
                "edit_attempts": ledger.attempts,
                "edit_successes": ledger.successes,
                "wall_time": self.wall_time,
            }
        )
        return doc


def run_one_task(
    task: TaskInstance,
    config: AgentConfig,
    backend,
    run_dir: Path,
    *,
    limits: Limits | None = None,
    clock: Callable[[], float] = time.monotonic,
    snapshots_enabled: bool = True,
    run_index: int = 1,
) -> TaskRunRecord:
    """Materialize, run, snapshot at agent validations, grade, and log.

    Artifacts land under run_dir: ws/ (the live workspace), snap-<n>/
    (one per detected agent validation), final/ (the graded end state),
    transcript.jsonl, and validations.jsonl.
    """
    limits = limits or Limits()
    run_dir = Path(run_dir)
    record = TaskRunRecord(task_id=task.id, run_index=run_index)
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
        ws = materialize_workspace(task, run_dir / "ws")
    except (WorkspaceCollisionError, OSError, ValueError) as exc:
        record.error = f"workspace materialization failed: {exc}"
        return record

    snapshot_dirs: list[Path] = []

    def on_tool_result(call, result, turn_index) -> None:
        if not snapshots_enabled or call.tool_name != "terminal":
            return
        cmd = call.arguments.get("cmd")
        if isinstance(cmd, str) and matches_validation(cmd, task):
            dest = run_dir / f"snap-{len(snapshot_dirs) + 1}"
            snapshot_workspace(ws.root, dest)
            snapshot_dirs.append(dest)

    transcript = run_task(
        task, config, backend, ws, limits=limits, on_tool_result=on_tool_result, clock=clock
    )
    (run_dir / "transcript.jsonl").write_bytes(serialize_transcript(transcript))

    # Grade a fresh copy of the end state so later commands cannot
    # corrupt the result.
    final_dir = run_dir / "final"
    snapshot_workspace(ws.root, final_dir)

    validation_turns = detect_agent_validations(transcript, task)
    log: list[tuple[str, ValidationOutcome]] = []
    checkpoint = checkpoints(
        task,
        transcript,
        validation_turns,
        snapshot_dirs,
        final_dir,
        budget=config.max_turns,
        timeout=limits.validation_timeout,
        log=log,
    )
    with (run_dir / "validations.jsonl").open("w", encoding="utf-8") as handle:
        for phase, outcome in log:
            entry = {"phase": phase, **outcome.to_json()}
            handle.write(json.dumps(entry, ensure_ascii=False) + "\n")

    record.outcome = transcript.outcome
    record.checkpoint = checkpoint
    record.usage = transcript.total_usage()
    record.transcript = transcript
    record.wall_time = transcript.wall_time
    return record


BackendFactory = Callable[[TaskInstance, int], Any]


def _as_factory(backend) -> BackendFactory:
    if callable(backend) and not hasattr(backend, "complete"):
        return backend
    return lambda task, run_index: backend


@dataclass
class RunReport:
    """Aggregated metrics over every (task, run) of one evaluation."""

    variant: str
    model_id: str
    runs_per_task: int
    task_summaries: list[dict[str, Any]]
    infra_failures: list[dict[str, Any]]
    pass_rate_in_2_tests: float | None
    pass_rate_in_budget: float | None
    usage: Usage
    cost: Decimal | None
    histogram: dict[str, tuple[int, float]]
    edit_adherence_micro: float | None
    edit_adherence_macro: float | None
    wall_time: float

    def to_json(self) -> dict[str, Any]:
        return {
            "version": 1,
            "variant": self.variant,
            "model_id": self.model_id,
            "runs_per_task": self.runs_per_task,
            "aggregation": "best-of-runs" if self.runs_per_task > 1 else "single-run",
            "tasks": self.task_summaries,
            "infra_failures": self.infra_failures,
            "pass_rate_in_2_tests": self.pass_rate_in_2_tests,
            "pass_rate_in_budget": self.pass_rate_in_budget,
            "input_tokens": self.usage.input_tokens,
            "output_tokens": self.usage.output_tokens,
            "cost": format_cost(self.cost) if self.cost is not None else None,
            "tool_histogram": {
                name: {"count": n, "proportion": p} for name, (n, p) in self.histogram.items()
            },
            "edit_adherence_micro": self.edit_adherence_micro,
            "edit_adherence_macro": self.edit_adherence_macro,
            "wall_time": self.wall_time,
        }


def evaluate(
    tasks: list[TaskInstance],
    config: AgentConfig,
    backend,
    runs_per_task: int = 1,
    *,
    runs_dir: Path,
    workers: int = 1,
    pricing: PricingTable | None = None,
    limits: Limits | None = None,
    clock: Callable[[], float] = time.monotonic,
) -> RunReport:
    """Run every task runs_per_task times and aggregate.

    Per-task aggregation takes the best result over runs (a task counts
    as solved if any run solved it). ``backend`` is either a shared live
    backend or a factory (task, run_index) -> backend; scripted backends
    are single-consumer, so evaluation always goes through a factory.
    Tasks whose workspace cannot be materialized are excluded from pass
    rates and reported separately.
    """
    if runs_per_task < 1:
        raise ValueError("runs_per_task must be >= 1")
    factory = _as_factory(backend)
    runs_dir = Path(runs_dir)

    jobs = [(task, run_index) for task in tasks for run_index in range(1, runs_per_task + 1)]

    model_ids: list[str] = []

    def execute(job: tuple[TaskInstance, int]) -> TaskRunRecord:
        task, run_index = job
        task_backend = factory(task, run_index)
        model_ids.append(getattr(task_backend, "model_id", ""))
        run_dir = runs_dir / task.id / f"{config.variant}-r{run_index}"
        return run_one_task(
            task,
            config,
            task_backend,
            run_dir,
            limits=limits,
            clock=clock,
            run_index=run_index,
        )

    if workers <= 1:
        records = [execute(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(execute, jobs))

    by_task: dict[str, list[TaskRunRecord]] = {task.id: [] for task in tasks}
    for record in records:
        by_task[record.task_id].append(record)

    task_summaries: list[dict[str, Any]] = []
    infra_failures: list[dict[str, Any]] = []
    solved_2 = solved_budget = counted = 0
    total_usage = Usage()
    transcripts: list[Transcript] = []
    macro_ratios: list[float] = []
    total_ledger = EditLedger()
    total_wall = 0.0

    for task in tasks:
        runs = sorted(by_task[task.id], key=lambda r: r.run_index)
        errors = [r for r in runs if r.error is not None]
        if errors:
            infra_failures.append(
                {"task_id": task.id, "errors": [r.error for r in errors]}
            )
            continue
        counted += 1
        task_ledger = EditLedger()
        for r in runs:
            total_usage = total_usage + r.usage
            total_wall += r.wall_time
            if r.transcript is not None:
                transcripts.append(r.transcript)
                run_ledger = ledger_from_transcript(r.transcript)
                task_ledger.attempts += run_ledger.attempts
                task_ledger.successes += run_ledger.successes
        total_ledger.attempts += task_ledger.attempts
        total_ledger.successes += task_ledger.successes
        task_ratio = adherence(task_ledger)
        if task_ratio is not None:
            macro_ratios.append(task_ratio)
        pass_2 = any(r.checkpoint.pass_in_2_tests for r in runs)
        pass_budget = any(r.checkpoint.pass_in_budget for r in runs)
        solved_2 += pass_2
        solved_budget += pass_budget
        task_summaries.append(
            {
                "task_id": task.id,
                "pass_in_2_tests": pass_2,
                "pass_in_budget": pass_budget,
                "runs": [r.to_json() for r in runs],
            }
        )

    model_id = model_ids[0] if model_ids else ""
    report_cost = None
    if pricing is not None and model_id in pricing:
        report_cost = cost(total_usage, model_id, pricing)

    return RunReport(
        variant=config.variant,
        model_id=model_id,
        runs_per_task=runs_per_task,
        task_summaries=task_summaries,
        infra_failures=infra_failures,
        pass_rate_in_2_tests=(solved_2 / counted) if counted else None,
        pass_rate_in_budget=(solved_budget / counted) if counted else None,
        usage=total_usage,
        cost=report_cost,
        histogram=tool_histogram(transcripts),
        edit_adherence_micro=adherence(total_ledger),
        edit_adherence_macro=(sum(macro_ratios) / len(macro_ratios)) if macro_ratios else None,
        wall_time=total_wall,
    )


def render_report_table(doc: dict[str, Any]) -> str:
    """Human-readable table mirroring the report's headline columns."""

    def pct(value: float | None) -> str:
        return "-" if value is None else f"{100 * value:.1f}"

    lines = [
        f"variant: {doc['variant']}   model: {doc['model_id'] or '-'}   "
        f"runs/task: {doc['runs_per_task']} ({doc.get('aggregation', 'single-run')})",
        "",
        f"{'Task':<28} {'In 2 Tests':>10} {'In Budget':>10} {'Turns':>6}",
    ]
    for task in doc["tasks"]:
        best = max(task["runs"], key=lambda r: r.get("pass_in_budget", False))
        lines.append(
            f"{task['task_id']:<28} "
            f"{'yes' if task['pass_in_2_tests'] else 'no':>10} "
            f"{'yes' if task['pass_in_budget'] else 'no':>10} "
            f"{best.get('turns_used', 0):>6}"
        )
    for failure in doc["infra_failures"]:
        lines.append(f"{failure['task_id']:<28} {'infrastructure failure':>21}")
    lines.append("")
    lines.append(
        f"pass rate: {pct(doc['pass_rate_in_2_tests'])}% in 2 tests, "
        f"{pct(doc['pass_rate_in_budget'])}% in budget"
    )
    adherence_micro = doc["edit_adherence_micro"]
    lines.append(
        "edit adherence: "
        + ("-" if adherence_micro is None else f"{100 * adherence_micro:.1f}%")
        + f"   tokens: {doc['input_tokens']} in / {doc['output_tokens']} out"
        + (f"   cost: ${doc['cost']}" if doc["cost"] is not None else "")
    )
    if doc["tool_histogram"]:
        parts = [
            f"{name} {entry['count']} ({100 * entry['proportion']:.1f}%)"
            for name, entry in doc["tool_histogram"].items()
        ]
        lines.append("tool calls: " + ", ".join(parts))
    return "\n".join(lines)
