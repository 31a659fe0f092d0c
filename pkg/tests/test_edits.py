"""Edit engines: string replacement, block parsing/application, adherence."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liteagent.edits import (
    AmbiguousMatchError,
    DiffBlock,
    DiffParseError,
    EditLedger,
    EmptySearchError,
    SearchNotFoundError,
    adherence,
    apply_diff_block,
    apply_string_replace,
    parse_diff_blocks,
)
from liteagent.fixtures import brute_force_splice_oracle

# ---------------------------------------------------------------------------
# apply_string_replace
# ---------------------------------------------------------------------------


def test_string_replace_basic():
    assert apply_string_replace("a\nb\nc\n", "b", "B") == "a\nB\nc\n"


def test_string_replace_ambiguous_reports_count():
    with pytest.raises(AmbiguousMatchError) as err:
        apply_string_replace("x x", "x", "y")
    assert err.value.count == 2


def test_string_replace_noop_identity():
    assert apply_string_replace("abc", "abc", "abc") == "abc"


def test_string_replace_not_found_and_empty():
    with pytest.raises(SearchNotFoundError):
        apply_string_replace("abc", "zzz", "y")
    with pytest.raises(EmptySearchError):
        apply_string_replace("abc", "", "y")


def test_string_replace_locality():
    content = "prefix STABLE target STABLE suffix"
    out = apply_string_replace(content, "target", "X")
    assert out == "prefix STABLE X STABLE suffix"


# ---------------------------------------------------------------------------
# parse_diff_blocks
# ---------------------------------------------------------------------------

BLOCK = "<<<<<<< SEARCH\nold line\n=======\nnew line\n>>>>>>> REPLACE"


def test_parse_single_block():
    blocks = parse_diff_blocks(f"intro text\n{BLOCK}\ntrailing")
    assert blocks == [DiffBlock(("old line",), ("new line",))]


def test_parse_no_markers_empty():
    assert parse_diff_blocks("just prose\nwith ======= inside\n") == []


def test_parse_unterminated():
    with pytest.raises(DiffParseError) as err:
        parse_diff_blocks("<<<<<<< SEARCH\nabc\n")
    assert err.value.line == 1
    with pytest.raises(DiffParseError):
        parse_diff_blocks("<<<<<<< SEARCH\nabc\n=======\nxyz")  # parses: close missing
    # ... unless the text simply ends; that exact case:
    with pytest.raises(DiffParseError, match="close marker"):
        parse_diff_blocks("<<<<<<< SEARCH\nabc\n=======\nxyz\n")


def test_parse_misordered_markers():
    with pytest.raises(DiffParseError, match="misordered"):
        parse_diff_blocks("<<<<<<< SEARCH\nabc\n>>>>>>> REPLACE\n")
    with pytest.raises(DiffParseError, match="without a matching open"):
        parse_diff_blocks("text\n>>>>>>> REPLACE\n")
    with pytest.raises(DiffParseError, match="misordered"):
        parse_diff_blocks("<<<<<<< SEARCH\na\n<<<<<<< SEARCH\nb\n=======\nc\n>>>>>>> REPLACE\n")


def test_parse_empty_search_section_rejected():
    with pytest.raises(DiffParseError, match="no search lines"):
        parse_diff_blocks("<<<<<<< SEARCH\n=======\nnew\n>>>>>>> REPLACE\n")


def test_parse_multiple_blocks_in_order():
    text = f"{BLOCK}\nmiddle\n<<<<<<< SEARCH\nsecond\n=======\n>>>>>>> REPLACE\n"
    blocks = parse_diff_blocks(text)
    assert len(blocks) == 2
    assert blocks[1] == DiffBlock(("second",), ())


# ---------------------------------------------------------------------------
# apply_diff_block
# ---------------------------------------------------------------------------


def test_apply_block_exact():
    block = DiffBlock(("b",), ("B",))
    result = apply_diff_block("a\nb\nc\n", block)
    assert result.text == "a\nB\nc\n"
    assert not result.used_fallback


def test_apply_block_fallback_on_trailing_whitespace():
    # search carries trailing spaces the file does not have
    block = DiffBlock(("b  ",), ("B",))
    result = apply_diff_block("a\nb\nc\n", block)
    assert result.text == "a\nB\nc\n"
    assert result.used_fallback


def test_apply_block_fallback_file_has_trailing_whitespace():
    block = DiffBlock(("b",), ("B",))
    result = apply_diff_block("a\nb  \nc\n", block)
    assert result.text == "a\nB\nc\n"
    assert result.used_fallback


def test_apply_block_not_found():
    with pytest.raises(SearchNotFoundError):
        apply_diff_block("a\nb\n", DiffBlock(("zzz",), ("x",)))


def test_apply_block_ambiguity_passes_are_distinct():
    with pytest.raises(AmbiguousMatchError) as err:
        apply_diff_block("dup\ndup\n", DiffBlock(("dup",), ("x",)))
    assert err.value.match_pass == "exact"
    assert err.value.count == 2
    with pytest.raises(AmbiguousMatchError) as err:
        apply_diff_block("dup \ndup\t\n", DiffBlock(("dup",), ("x",)))
    assert err.value.match_pass == "fallback"


def test_apply_block_multiline_deletion():
    block = DiffBlock(("b", "c"), ())
    result = apply_diff_block("a\nb\nc\nd\n", block)
    assert result.text == "a\n\nd\n"  # splice of empty replacement keeps the join point


def test_block_requires_search_anchor():
    with pytest.raises(ValueError):
        DiffBlock((), ("x",))
    with pytest.raises(EmptySearchError):
        apply_diff_block("abc", DiffBlock(("",), ("x",)))


# ---------------------------------------------------------------------------
# adherence
# ---------------------------------------------------------------------------


def test_adherence_ratio():
    assert adherence(EditLedger(attempts=10, successes=9)) == pytest.approx(0.9)


def test_adherence_undefined_on_zero_attempts():
    assert adherence(EditLedger()) is None


def test_adherence_fleet_micro_average():
    # hand-computed micro-average over ledgers (2/2) and (1/2): 3/4
    fleet = EditLedger()
    for ledger in (EditLedger(2, 2), EditLedger(2, 1)):
        fleet.attempts += ledger.attempts
        fleet.successes += ledger.successes
    assert adherence(fleet) == pytest.approx(0.75)


# ---------------------------------------------------------------------------
# Property tests against the splice oracle
# ---------------------------------------------------------------------------

_alphabet = st.sampled_from(list("ab \n"))
_content = st.text(alphabet=_alphabet, max_size=40)
_search = st.text(alphabet=_alphabet, min_size=1, max_size=6)
_replace = st.text(alphabet=_alphabet, max_size=6)


def _outcome(fn, *args):
    try:
        return ("ok", fn(*args))
    except EmptySearchError:
        return ("empty",)
    except SearchNotFoundError:
        return ("notfound",)
    except AmbiguousMatchError as err:
        return ("ambiguous", err.count)


@settings(max_examples=400, deadline=None)
@given(content=_content, search=_search, replace=_replace)
def test_string_replace_agrees_with_oracle(content, search, replace):
    assert _outcome(apply_string_replace, content, search, replace) == _outcome(
        brute_force_splice_oracle, content, search, replace
    )


@settings(max_examples=400, deadline=None)
@given(content=_content, search=_search, replace=_replace)
def test_diff_block_exact_path_agrees_with_string_replace(content, search, replace):
    block = DiffBlock(tuple(search.split("\n")), tuple(replace.split("\n")))
    oracle = _outcome(brute_force_splice_oracle, content, search, replace)
    if oracle[0] == "ok":
        result = apply_diff_block(content, block)
        if not result.used_fallback:
            assert result.text == oracle[1]
    elif oracle[0] == "ambiguous":
        with pytest.raises(AmbiguousMatchError) as err:
            apply_diff_block(content, block)
        if err.value.match_pass == "exact":
            assert err.value.count == oracle[1]


@settings(max_examples=300, deadline=None)
@given(content=_content, search=_search, replace=_replace)
def test_locality_outside_bytes_untouched(content, search, replace):
    try:
        out = apply_string_replace(content, search, replace)
    except (EmptySearchError, SearchNotFoundError, AmbiguousMatchError):
        return
    at = content.index(search)
    assert out[:at] == content[:at]
    assert out[at + len(replace):] == content[at + len(search):]
