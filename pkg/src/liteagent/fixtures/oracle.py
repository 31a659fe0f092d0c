"""Reference splice oracle for the edit engines.

A deliberately naive character-by-character scan, kept independent of
the engines it checks: it never uses str.count, str.index, or any code
from the edits module beyond the shared error types.
"""

from __future__ import annotations

from ..edits import AmbiguousMatchError, EmptySearchError, SearchNotFoundError


def brute_force_splice_oracle(content: str, search: str, replace: str) -> str:
    """Splice ``replace`` over the unique occurrence of ``search``.

    Occurrences are counted left to right without overlap. Raises the
    same error taxonomy as the engines: EmptySearchError,
    SearchNotFoundError, or AmbiguousMatchError with the count.
    """
    if search == "":
        raise EmptySearchError()
    positions = []
    i = 0
    while i + len(search) <= len(content):
        window = content[i : i + len(search)]
        if window == search:
            positions.append(i)
            i += len(search)
        else:
            i += 1
    if not positions:
        raise SearchNotFoundError()
    if len(positions) > 1:
        raise AmbiguousMatchError(len(positions))
    at = positions[0]
    return content[:at] + replace + content[at + len(search):]
