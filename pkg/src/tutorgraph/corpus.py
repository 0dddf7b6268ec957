"""Solution corpus ingestion.

A corpus file is tab-separated, one solution per line:

    <exercise_id>\t<reference|student>\t<text>

A fourth column may carry precomputed token boundary labels as
space-separated 0/1 bits; when absent the heuristic segmenter decides.
Exact duplicate lines are kept: repeated phrasings are evidence about
how common a formulation is, and the clustering weights reflect that.
"""

from __future__ import annotations

from dataclasses import dataclass

from .graph import REFERENCE, STUDENT

SOURCES = (REFERENCE, STUDENT)


@dataclass(frozen=True)
class SolutionRecord:
    exercise_id: str
    source: str
    text: str
    boundary_labels: tuple[int, ...] | None = None

    def __post_init__(self):
        if not self.exercise_id:
            raise ValueError("exercise_id must be non-empty")
        if self.source not in SOURCES:
            raise ValueError(f"unknown source: {self.source!r}")
        if not self.text.strip():
            raise ValueError("solution text must be non-empty")
        if self.boundary_labels is not None:
            if len(self.boundary_labels) == 0:
                raise ValueError("boundary labels must be non-empty when given")
            if any(b not in (0, 1) for b in self.boundary_labels):
                raise ValueError("boundary labels must be 0/1")
            if self.boundary_labels[0] != 1:
                raise ValueError("first token always opens a segment")


def parse_corpus_line(line: str, where: str) -> SolutionRecord:
    parts = line.split("\t")
    if len(parts) not in (3, 4):
        raise ValueError(f"{where}: expected 3 or 4 tab-separated fields, got {len(parts)}")
    exercise_id, source, text = parts[0], parts[1], parts[2]
    labels: tuple[int, ...] | None = None
    if len(parts) == 4 and parts[3]:
        raw = parts[3].split()
        if not all(b in ("0", "1") for b in raw):
            raise ValueError(f"{where}: boundary labels must be space-separated 0/1 bits")
        labels = tuple(int(b) for b in raw)
    try:
        return SolutionRecord(exercise_id=exercise_id, source=source, text=text, boundary_labels=labels)
    except ValueError as exc:
        raise ValueError(f"{where}: {exc}") from exc


def ingest(path: str) -> dict[str, list[SolutionRecord]]:
    """Read a corpus file into records grouped by exercise.

    Exercises appear in first-occurrence order; records keep file order.
    An exercise with no reference rows is accepted here and rejected
    later at graph-building time, so a partially written corpus can
    still be inspected.
    """
    grouped: dict[str, list[SolutionRecord]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            record = parse_corpus_line(line, f"{path}:{lineno}")
            grouped.setdefault(record.exercise_id, []).append(record)
    return grouped


def load_prompts(path: str) -> dict[str, str]:
    """Read an exercise prompt file: ``<exercise_id>\\t<prompt text>``."""
    prompts: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1].strip():
                raise ValueError(f"{path}:{lineno}: expected <exercise_id>\\t<prompt>")
            prompts[parts[0]] = parts[1]
    return prompts


def summarize(corpus: dict[str, list[SolutionRecord]]) -> dict[str, dict[str, int]]:
    """Per-exercise reference/student counts, for ingest reporting."""
    out: dict[str, dict[str, int]] = {}
    for exercise_id, records in corpus.items():
        refs = sum(1 for r in records if r.source == REFERENCE)
        out[exercise_id] = {
            "reference": refs,
            "student": len(records) - refs,
        }
    return out
