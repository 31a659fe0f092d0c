"""Conversation context management: linear and summarized strategies.

Linear memory accumulates the entire interaction history verbatim.
Summarized memory lets the model replace a contiguous range of past
events with a single summary message via the summary tool; the original
events are retained, so the persisted transcript is never lossy -- only
the rendered context shrinks.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import MEMORY_STRATEGIES, Message


class SummaryError(ValueError):
    """A summary request was rejected (wrong strategy, range, or overlap)."""


@dataclass(frozen=True)
class SummaryEntry:
    first: int
    last: int
    message: Message


class Memory:
    """Message history for one agent run, owned by a single loop."""

    def __init__(self, strategy: str, system_prompt: str, initial_user: str) -> None:
        if strategy not in MEMORY_STRATEGIES:
            raise ValueError(f"unknown memory strategy '{strategy}'")
        self.strategy = strategy
        self.system_prompt = system_prompt
        self.initial_user = initial_user
        self.events: list[Message] = []
        self.summaries: list[SummaryEntry] = []

    def append(self, msg: Message) -> None:
        self.events.append(msg)

    def _preamble(self) -> list[Message]:
        preamble = []
        if self.system_prompt:
            preamble.append(Message("system", self.system_prompt))
        preamble.append(Message("user", self.initial_user))
        return preamble

    def render(self) -> list[Message]:
        """The context sent to the model: preamble, then events with each
        summarized range replaced in place by its summary message."""
        rendered = self._preamble()
        if self.strategy == "linear" or not self.summaries:
            rendered.extend(self.events)
            return rendered
        by_start = {entry.first: entry for entry in self.summaries}
        i = 0
        while i < len(self.events):
            entry = by_start.get(i)
            if entry is not None:
                rendered.append(entry.message)
                i = entry.last + 1
            else:
                rendered.append(self.events[i])
                i += 1
        return rendered

    def summarize(self, first: int, last: int, text: str) -> str:
        """Record a summary replacing events ``first..last`` (inclusive).

        Raises SummaryError under the linear strategy, for an out-of-range
        or inverted range, or when the range overlaps an existing summary;
        summaries never nest. Returns a short acknowledgment.
        """
        if self.strategy != "summarized":
            raise SummaryError("summaries are disabled under the linear memory strategy")
        if not (0 <= first <= last < len(self.events)):
            raise SummaryError(
                f"turn range [{first}, {last}] is out of bounds (have {len(self.events)} turns)"
            )
        for entry in self.summaries:
            if first <= entry.last and entry.first <= last:
                raise SummaryError(
                    f"turn range [{first}, {last}] overlaps the existing summary "
                    f"[{entry.first}, {entry.last}]"
                )
        summary_msg = Message("user", f"[summary of turns {first}-{last}]\n{text}")
        self.summaries.append(SummaryEntry(first, last, summary_msg))
        return f"Summary recorded; turns {first}-{last} are now rendered as one message."
