"""Desk-scale test corpus: toy tasks in all three source shapes, golden
scripted sessions with frozen transcript digests, and the reference
oracle the edit engines are property-tested against."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .oracle import brute_force_splice_oracle

DATA_DIR = Path(__file__).parent / "data"


def manifest_path() -> Path:
    return DATA_DIR / "manifest.json"


def sources_dir() -> Path:
    return DATA_DIR / "sources"


def script_path(task_id: str) -> Path:
    return DATA_DIR / "scripts" / f"{task_id}.jsonl"


def scripts_dir() -> Path:
    return DATA_DIR / "scripts"


def transcript_digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class GoldenSession:
    """One scripted session whose replay must be byte-reproducible."""

    task_id: str
    script: Path
    expected_digest: str
    expected_pass_in_2_tests: bool
    expected_pass_in_budget: bool
    expected_turns: int


def golden_sessions() -> list[GoldenSession]:
    doc = json.loads((DATA_DIR / "golden.json").read_text(encoding="utf-8"))
    return [
        GoldenSession(
            task_id=entry["task_id"],
            script=script_path(entry["task_id"]),
            expected_digest=entry["digest"],
            expected_pass_in_2_tests=entry["pass_in_2_tests"],
            expected_pass_in_budget=entry["pass_in_budget"],
            expected_turns=entry["turns"],
        )
        for entry in doc
    ]


__all__ = [
    "DATA_DIR",
    "GoldenSession",
    "brute_force_splice_oracle",
    "golden_sessions",
    "manifest_path",
    "script_path",
    "scripts_dir",
    "sources_dir",
    "transcript_digest",
]
