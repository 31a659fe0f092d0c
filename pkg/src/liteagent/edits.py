"""The two file-edit engines: exact string replacement and fenced
search/replace blocks, plus the attempt ledger behind the edit-adherence
metric.

Both engines require the search text to occur exactly once; ambiguity
errors carry the occurrence count so a model can enlarge its search
context and retry. Content is edited byte-exactly -- no newline or
whitespace normalization is ever applied to the file.

Block grammar (bit-exact; also documented in the README):

    block    ::= open NL search divider NL replace close
    open     ::= "<<<<<<< SEARCH"
    divider  ::= "======="
    close    ::= ">>>>>>> REPLACE"
    search   ::= (line NL)+        ; one or more lines, matched in the file
    replace  ::= (line NL)*        ; zero or more replacement lines

Marker lines must match exactly (no leading or trailing characters).
Text outside blocks is ignored, except that a stray close marker is a
parse error. A divider line outside any block is ordinary text (it is
too common in prose to reserve).
"""

from __future__ import annotations

from dataclasses import dataclass

SEARCH_MARKER = "<<<<<<< SEARCH"
DIVIDER_MARKER = "======="
REPLACE_MARKER = ">>>>>>> REPLACE"

_MARKERS = (SEARCH_MARKER, DIVIDER_MARKER, REPLACE_MARKER)

STRING_REPLACE = "string_replace"
DIFF_BLOCK = "diff_block"
EDIT_FORMATS = (STRING_REPLACE, DIFF_BLOCK)


class EditError(Exception):
    """Base class for edit-engine failures."""


class EmptySearchError(EditError):
    """The search text is empty; nothing can be located."""

    def __init__(self) -> None:
        super().__init__("search text is empty")


class SearchNotFoundError(EditError):
    """The search text does not occur in the content."""

    def __init__(self, fallback_tried: bool = False) -> None:
        detail = " (exact and whitespace-relaxed passes)" if fallback_tried else ""
        super().__init__(f"search text not found{detail}")
        self.fallback_tried = fallback_tried


class AmbiguousMatchError(EditError):
    """The search text occurs more than once; count and pass are reported."""

    def __init__(self, count: int, match_pass: str = "exact") -> None:
        super().__init__(f"search text matched {count} locations ({match_pass} pass)")
        self.count = count
        self.match_pass = match_pass


class DiffParseError(EditError):
    """A block document is malformed; ``line`` is the 1-based position."""

    def __init__(self, message: str, line: int) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class DiffBlock:
    """One parsed search/replace block."""

    search_lines: tuple[str, ...]
    replace_lines: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.search_lines:
            raise ValueError("a block needs at least one search line as an anchor")


@dataclass
class EditOperation:
    """A parsed edit intent in one of the two formats.

    ``string_replace`` uses ``old_text``/``new_text``; ``diff_block``
    carries the raw block document in ``block_text``.
    """

    format: str
    old_text: str = ""
    new_text: str = ""
    block_text: str = ""

    def __post_init__(self) -> None:
        if self.format not in EDIT_FORMATS:
            raise ValueError(f"unknown edit format '{self.format}'")


@dataclass
class EditLedger:
    """Counts edit attempts and clean applications for the Edit % metric."""

    attempts: int = 0
    successes: int = 0

    def record(self, ok: bool) -> None:
        self.attempts += 1
        if ok:
            self.successes += 1


@dataclass(frozen=True)
class DiffApplyResult:
    """Output of applying one block; ``used_fallback`` flags the
    trailing-whitespace-relaxed pass."""

    text: str
    used_fallback: bool = False


def apply_string_replace(content: str, old: str, new: str) -> str:
    """Replace the unique occurrence of ``old`` in ``content`` with ``new``.

    Raises EmptySearchError, SearchNotFoundError, or AmbiguousMatchError
    (with the occurrence count). Occurrences are counted left to right
    without overlap.
    """
    if old == "":
        raise EmptySearchError()
    count = content.count(old)
    if count == 0:
        raise SearchNotFoundError()
    if count > 1:
        raise AmbiguousMatchError(count)
    at = content.index(old)
    return content[:at] + new + content[at + len(old):]


def parse_diff_blocks(text: str) -> list[DiffBlock]:
    """Scan ``text`` for fenced search/replace blocks, in document order.

    Total over arbitrary input: returns a (possibly empty) block list or
    raises DiffParseError with the offending 1-based line number.
    """
    lines = text.split("\n")
    blocks: list[DiffBlock] = []
    i = 0
    while i < len(lines):
        line = lines[i]
        if line == SEARCH_MARKER:
            open_line = i + 1
            i += 1
            search: list[str] = []
            while i < len(lines) and lines[i] not in _MARKERS:
                search.append(lines[i])
                i += 1
            if i >= len(lines):
                raise DiffParseError("unterminated block: no divider before end of text", open_line)
            if lines[i] != DIVIDER_MARKER:
                raise DiffParseError(
                    f"misordered markers: expected '{DIVIDER_MARKER}', found '{lines[i]}'", i + 1
                )
            if not search:
                raise DiffParseError("block has no search lines (an anchor line is required)", open_line)
            i += 1
            replace: list[str] = []
            while i < len(lines) and lines[i] not in _MARKERS:
                replace.append(lines[i])
                i += 1
            if i >= len(lines):
                raise DiffParseError("unterminated block: no close marker before end of text", open_line)
            if lines[i] != REPLACE_MARKER:
                raise DiffParseError(
                    f"misordered markers: expected '{REPLACE_MARKER}', found '{lines[i]}'", i + 1
                )
            blocks.append(DiffBlock(tuple(search), tuple(replace)))
            i += 1
        elif line == REPLACE_MARKER:
            raise DiffParseError("close marker without a matching open marker", i + 1)
        else:
            i += 1
    return blocks


def apply_diff_block(content: str, block: DiffBlock) -> DiffApplyResult:
    """Apply one block to ``content`` by unique match of its search lines.

    The exact pass splices at the unique occurrence of the joined search
    text (plain substring match, so it agrees with apply_string_replace).
    If the exact pass finds nothing, a single fallback pass matches whole
    lines ignoring trailing whitespace; fallback use is flagged in the
    result. Ambiguity in either pass is an error naming that pass.
    """
    search_text = "\n".join(block.search_lines)
    if search_text == "":
        raise EmptySearchError()
    count = content.count(search_text)
    if count > 1:
        raise AmbiguousMatchError(count, "exact")
    if count == 1:
        at = content.index(search_text)
        new_text = content[:at] + "\n".join(block.replace_lines) + content[at + len(search_text):]
        return DiffApplyResult(new_text, used_fallback=False)

    # Fallback: line-aligned match with per-line trailing whitespace ignored.
    content_lines = content.split("\n")
    needles = [line.rstrip() for line in block.search_lines]
    width = len(needles)
    hits = [
        i
        for i in range(len(content_lines) - width + 1)
        if [line.rstrip() for line in content_lines[i : i + width]] == needles
    ]
    if not hits:
        raise SearchNotFoundError(fallback_tried=True)
    if len(hits) > 1:
        raise AmbiguousMatchError(len(hits), "fallback")
    at = hits[0]
    new_lines = content_lines[:at] + list(block.replace_lines) + content_lines[at + width:]
    return DiffApplyResult("\n".join(new_lines), used_fallback=True)


def adherence(ledger: EditLedger) -> float | None:
    """successes/attempts, or None when there were no attempts.

    The None marker keeps attempt-free runs out of aggregated averages
    instead of polluting them with 0 or 1.
    """
    if ledger.attempts == 0:
        return None
    return ledger.successes / ledger.attempts
