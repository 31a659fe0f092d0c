"""Operator entry point: run one task, evaluate a manifest, measure
configuration complexity, print saved reports, import benchmark sources.

Exit codes: 0 completed, 1 internal fault, 2 operator error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .bench import import_bugfix_dir, import_completion_items, import_exercise_dir
from .core import AgentConfig, ManifestError, TaskInstance, dump_manifest, load_manifest
from .evaluation import (
    BYTES4_COUNTER,
    complexity,
    evaluate,
    external_counter,
    load_pricing,
    render_report_table,
    run_one_task,
)
from .llm import ScriptParseError, backend_from_env, load_script

EXIT_OK = 0
EXIT_FAULT = 1
EXIT_OPERATOR = 2


class OperatorError(Exception):
    """Bad invocation or environment; reported with exit code 2."""


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="liteagent")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--manifest", required=True, help="task manifest (JSON)")
        p.add_argument("--variant", default="lita",
                       choices=["lita", "lita_diff", "lita_mini", "lita_reason"])
        p.add_argument("--max-turns", type=int, default=None)

    run = sub.add_parser("run", help="run a single task")
    common(run)
    run.add_argument("--task", required=True, help="task id in the manifest")
    run.add_argument("--backend", default="live", help="'live' or 'script:<path>'")
    run.add_argument("--memory", default="linear", choices=["linear", "summarized"])
    run.add_argument("--runs-dir", default="runs")

    ev = sub.add_parser("eval", help="evaluate every task in a manifest")
    common(ev)
    ev.add_argument("--backend", default="live", help="'live' or 'script:<path>'")
    ev.add_argument("--memory", default="linear", choices=["linear", "summarized"])
    ev.add_argument("--runs", type=int, default=1, help="runs per task (best-of aggregation)")
    ev.add_argument("--workers", type=int, default=1)
    ev.add_argument("--pricing", default=None, help="pricing table (JSON)")
    ev.add_argument("--runs-dir", default="runs")
    ev.add_argument("--out", default=None, help="report path (default <runs-dir>/report.json)")

    cx = sub.add_parser("complexity", help="action count and preloaded tokens")
    common(cx)
    cx.add_argument("--task", required=True)
    cx.add_argument("--memory", default="linear", choices=["linear", "summarized"])
    cx.add_argument("--counter", default="bytes4",
                    help="'bytes4' or 'external:<cmd>' ('usage' is live-only and not accepted here)")

    rp = sub.add_parser("report", help="print the table for a saved report")
    rp.add_argument("path", help="report JSON written by eval")

    imp = sub.add_parser("import", help="translate a benchmark source into a manifest")
    imp.add_argument("--format", required=True, choices=["completion", "exercises", "bugfix"])
    imp.add_argument("--src", required=True)
    imp.add_argument("--out", required=True)

    return parser


def _load_tasks(path: str) -> list[TaskInstance]:
    try:
        return load_manifest(path)
    except FileNotFoundError:
        raise OperatorError(f"manifest not found: {path}") from None
    except ManifestError as exc:
        raise OperatorError(str(exc)) from None


def _find_task(tasks: list[TaskInstance], task_id: str) -> TaskInstance:
    for task in tasks:
        if task.id == task_id:
            return task
    raise OperatorError(f"unknown task id '{task_id}'")


def _make_config(args) -> AgentConfig:
    kwargs = {"variant": args.variant, "memory_strategy": getattr(args, "memory", "linear")}
    if args.max_turns is not None:
        kwargs["max_turns"] = args.max_turns
    return AgentConfig(**kwargs)


def _backend_factory(spec: str):
    """Returns (factory, uses_network). Scripted backends are rebuilt per
    run because a script instance is single-consumer."""
    if spec == "live":
        try:
            shared = backend_from_env(dict(os.environ))
        except ValueError as exc:
            raise OperatorError(str(exc)) from None
        return (lambda task, run_index: shared), True
    if spec.startswith("script:"):
        base = Path(spec[len("script:"):])
        if not base.exists():
            raise OperatorError(f"script path not found: {base}")

        def factory(task: TaskInstance, run_index: int):
            path = base / f"{task.id}.jsonl" if base.is_dir() else base
            if not path.is_file():
                raise OperatorError(f"no script for task '{task.id}': {path}")
            try:
                return load_script(path)
            except ScriptParseError as exc:
                raise OperatorError(str(exc)) from None

        return factory, False
    raise OperatorError(f"unknown backend '{spec}' (expected 'live' or 'script:<path>')")


def _next_run_dir(runs_dir: Path, task_id: str, variant: str) -> Path:
    index = 1
    while (runs_dir / task_id / f"{variant}-r{index}").exists():
        index += 1
    return runs_dir / task_id / f"{variant}-r{index}"


def _parse_counter(spec: str):
    if spec == "bytes4":
        return BYTES4_COUNTER
    if spec.startswith("external:"):
        return external_counter(spec[len("external:"):])
    if spec == "usage":
        raise OperatorError(
            "counter 'usage' reflects provider-reported tokens on live runs and "
            "cannot measure preloaded text offline; use 'bytes4' or 'external:<cmd>'"
        )
    raise OperatorError(f"unknown counter '{spec}'")


def cmd_run(args) -> int:
    tasks = _load_tasks(args.manifest)
    task = _find_task(tasks, args.task)
    factory, _ = _backend_factory(args.backend)
    config = _make_config(args)
    run_dir = _next_run_dir(Path(args.runs_dir), task.id, config.variant)
    record = run_one_task(task, config, factory(task, 1), run_dir)
    if record.error is not None:
        print(f"run failed: {record.error}", file=sys.stderr)
        return EXIT_FAULT
    assert record.checkpoint is not None
    print(f"task {task.id}: outcome={record.outcome} turns={record.checkpoint.turns_used}")
    print(
        f"pass_in_2_tests={record.checkpoint.pass_in_2_tests} "
        f"pass_in_budget={record.checkpoint.pass_in_budget}"
    )
    print(f"artifacts: {run_dir}")
    return EXIT_OK


def cmd_eval(args) -> int:
    tasks = _load_tasks(args.manifest)
    factory, _ = _backend_factory(args.backend)
    config = _make_config(args)
    if args.runs < 1:
        raise OperatorError("--runs must be >= 1")
    if args.workers < 1:
        raise OperatorError("--workers must be >= 1")
    try:
        pricing = load_pricing(args.pricing) if args.pricing else load_pricing()
    except (OSError, ValueError) as exc:
        raise OperatorError(f"cannot load pricing: {exc}") from None
    runs_dir = Path(args.runs_dir)
    report = evaluate(
        tasks,
        config,
        factory,
        runs_per_task=args.runs,
        runs_dir=runs_dir,
        workers=args.workers,
        pricing=pricing,
    )
    doc = report.to_json()
    out = Path(args.out) if args.out else runs_dir / "report.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(doc, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    print(render_report_table(doc))
    print(f"\nreport written to {out}")
    return EXIT_OK


def cmd_complexity(args) -> int:
    tasks = _load_tasks(args.manifest)
    task = _find_task(tasks, args.task)
    counter = _parse_counter(args.counter)
    config = _make_config(args)
    report = complexity(config, task, counter)
    print(f"variant: {config.variant} (memory: {config.memory_strategy})")
    print(f"action_count: {report.action_count}")
    print(f"preloaded_tokens: {report.preloaded_tokens} (counter: {report.token_counter_id})")
    print(f"  system prompt:  {report.system_prompt_tokens}")
    print(f"  initial prompt: {report.user_prompt_tokens}")
    print(f"  tool schema:    {report.tool_schema_tokens}")
    return EXIT_OK


def cmd_report(args) -> int:
    path = Path(args.path)
    if not path.is_file():
        raise OperatorError(f"report not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise OperatorError(f"{path}: invalid JSON: {exc.msg}") from None
    print(render_report_table(doc))
    return EXIT_OK


def cmd_import(args) -> int:
    importers = {
        "completion": import_completion_items,
        "exercises": import_exercise_dir,
        "bugfix": import_bugfix_dir,
    }
    src = Path(args.src)
    if not src.exists():
        raise OperatorError(f"source not found: {src}")
    try:
        tasks = importers[args.format](src)
    except (ValueError, KeyError, OSError) as exc:
        raise OperatorError(f"import failed: {exc}") from None
    dump_manifest(tasks, args.out)
    print(f"wrote {len(tasks)} task(s) to {args.out}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": cmd_run,
        "eval": cmd_eval,
        "complexity": cmd_complexity,
        "report": cmd_report,
        "import": cmd_import,
    }
    try:
        return handlers[args.command](args)
    except OperatorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OPERATOR
    except Exception as exc:  # internal fault
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
