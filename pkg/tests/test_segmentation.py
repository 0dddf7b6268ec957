"""Tests for tokenization and heuristic discourse segmentation."""

from __future__ import annotations

import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tutorgraph.segmentation import (
    EDU,
    apply_boundary_labels,
    extract_boundary_labels,
    heuristic_boundary_labels,
    load_labeled_segments,
    segment_heuristic,
    tokenize,
)


def texts(edus: list[EDU]) -> list[str]:
    return [e.text for e in edus]


def test_attribution_and_cue_segmentation() -> None:
    got = segment_heuristic(
        "I think it's a classification task because we are choosing between continuous values"
    )
    assert texts(got) == [
        "I think",
        "it's a classification task",
        "because we are choosing between continuous values",
    ]


def test_infinitive_cue_segmentation() -> None:
    got = segment_heuristic("It uses a logistic function to model a binary dependent variable")
    assert texts(got) == [
        "It uses a logistic function",
        "to model a binary dependent variable",
    ]


def test_to_before_determiner_does_not_split() -> None:
    got = segment_heuristic("We went to the store")
    assert texts(got) == ["We went to the store"]


def test_to_before_capitalized_word_does_not_split() -> None:
    got = segment_heuristic("They moved to Berlin")
    assert texts(got) == ["They moved to Berlin"]


def test_sentence_punctuation_starts_new_unit() -> None:
    got = segment_heuristic("It is regression. The output is continuous")
    assert texts(got) == ["It is regression.", "The output is continuous"]


def test_tokenizer_splits_trailing_punctuation() -> None:
    toks = tokenize("it's a classification task.")
    assert [t.text for t in toks] == ["it's", "a", "classification", "task", "."]
    # char offsets reconstruct the source exactly
    source = "it's a classification task."
    rebuilt = ""
    pos = 0
    for t in toks:
        rebuilt += source[pos : t.char_start] + t.text
        pos = t.char_end
    rebuilt += source[pos:]
    assert rebuilt == source


def test_apply_boundary_labels_exact_spans() -> None:
    text = "I think it's classification"
    toks = tokenize(text)
    got = apply_boundary_labels(text, toks, [1, 0, 1, 0])
    assert texts(got) == ["I think", "it's classification"]
    # brute force: every label suffix yields spans that cover all tokens
    for bits in itertools.product([0, 1], repeat=3):
        labels = [1, *bits]
        edus = apply_boundary_labels(text, toks, labels)
        covered = []
        for e in edus:
            covered.extend(range(*e.token_range))
        assert covered == list(range(len(toks)))


def test_apply_boundary_labels_errors() -> None:
    text = "two tokens"
    toks = tokenize(text)
    with pytest.raises(ValueError, match="first token must open an EDU"):
        apply_boundary_labels(text, toks, [0, 1])
    with pytest.raises(ValueError, match="mismatch"):
        apply_boundary_labels(text, toks, [1])


def test_positions_and_solution_len() -> None:
    got = segment_heuristic("I think it is classification because categories are discrete")
    assert [e.position for e in got] == [0, 1, 2]
    assert all(e.solution_len == 3 for e in got)


_WORDS = ["alpha", "beta", "because", "so", "The", "model", "it", "works.", "but", "to", "run"]


@given(st.lists(st.sampled_from(_WORDS), min_size=1, max_size=12))
@settings(max_examples=200)
def test_segments_partition_tokens_and_positions_are_monotone(words: list[str]) -> None:
    text = " ".join(words)
    toks = tokenize(text)
    edus = segment_heuristic(text)
    covered: list[int] = []
    for e in edus:
        covered.extend(range(*e.token_range))
    assert covered == list(range(len(toks)))
    assert [e.position for e in edus] == list(range(len(edus)))
    assert all(e.solution_len == len(edus) for e in edus)
    # concatenating unit texts with original gaps reconstructs the source
    rebuilt = ""
    pos = 0
    for e in edus:
        start = toks[e.token_range[0]].char_start
        end = toks[e.token_range[1] - 1].char_end
        rebuilt += text[pos:start] + e.text
        pos = end
    rebuilt += text[pos:]
    assert rebuilt == text


@given(st.lists(st.sampled_from(_WORDS), min_size=1, max_size=12))
@settings(max_examples=200)
def test_apply_extract_roundtrip(words: list[str]) -> None:
    text = " ".join(words)
    toks = tokenize(text)
    labels = heuristic_boundary_labels(toks)
    edus = apply_boundary_labels(text, toks, labels)
    assert extract_boundary_labels(toks, edus) == labels


def test_load_labeled_segments(tmp_path) -> None:
    path = tmp_path / "labels.tsv"
    path.write_text(
        "I think it's classification\t1 0 1 0\nbad row\t1 0 7\n", encoding="utf-8"
    )
    with pytest.raises(ValueError, match=":2:"):
        load_labeled_segments(str(path))
    path.write_text("I think it's classification\t1 0 1 0\n", encoding="utf-8")
    rows = load_labeled_segments(str(path))
    assert rows == [("I think it's classification", [1, 0, 1, 0])]
    path.write_text("one two\t1\n", encoding="utf-8")
    with pytest.raises(ValueError, match="does not match tokenization"):
        load_labeled_segments(str(path))
