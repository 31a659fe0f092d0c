"""Regenerate the committed fixture artifacts from their sources.

Run as ``python -m liteagent.fixtures.regen`` after editing the fixture
sources or scripts. Rebuilds the unified manifest through the three
importers, then replays every scripted session with a fixed clock and
freezes the transcript digests and checkpoint outcomes into golden.json.
Tests compare against the committed values; they never call this.
"""

from __future__ import annotations

import json
import tempfile
from pathlib import Path

from ..bench import import_bugfix_dir, import_completion_items, import_exercise_dir
from ..core import AgentConfig, dump_manifest, load_manifest, serialize_transcript
from ..evaluation import run_one_task
from ..llm import load_script
from . import DATA_DIR, script_path, transcript_digest


def build_manifest() -> None:
    tasks = []
    tasks += import_completion_items(DATA_DIR / "sources" / "completion.jsonl")
    tasks += import_exercise_dir(DATA_DIR / "sources" / "exercises")
    tasks += import_bugfix_dir(DATA_DIR / "sources" / "bugfix")
    dump_manifest(tasks, DATA_DIR / "manifest.json")
    print(f"manifest.json: {len(tasks)} tasks")


def build_golden() -> None:
    tasks = load_manifest(DATA_DIR / "manifest.json")
    config = AgentConfig(variant="lita")
    entries = []
    for task in tasks:
        backend = load_script(script_path(task.id))
        with tempfile.TemporaryDirectory() as tmp:
            record = run_one_task(
                task, config, backend, Path(tmp) / "run", clock=lambda: 0.0
            )
        assert record.error is None, record.error
        assert record.checkpoint is not None and record.transcript is not None
        digest = transcript_digest(serialize_transcript(record.transcript))
        entries.append(
            {
                "task_id": task.id,
                "digest": digest,
                "pass_in_2_tests": record.checkpoint.pass_in_2_tests,
                "pass_in_budget": record.checkpoint.pass_in_budget,
                "turns": record.checkpoint.turns_used,
            }
        )
        print(f"{task.id}: {record.outcome}, digest {digest[:12]}…")
    (DATA_DIR / "golden.json").write_text(
        json.dumps(entries, indent=2) + "\n", encoding="utf-8"
    )


def main() -> None:
    build_manifest()
    build_golden()


if __name__ == "__main__":
    main()
