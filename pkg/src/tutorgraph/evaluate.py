"""Batch comparison of the three feedback modes.

Runs a labeled set of held-out attempts through each mode and writes a
delimited report, a JSON summary, and distribution figures, so the
modes can be ranked side by side.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

from .feedback import (
    ALREADY_CORRECT,
    CORRECT_RELATION,
    EXCESS,
    INCORRECT_RELATION,
    MISSING,
    NO_MATCH,
)
from .pipeline import MODES, FeedbackEngine

KNOWN_KINDS = (
    MISSING,
    EXCESS,
    CORRECT_RELATION,
    INCORRECT_RELATION,
    ALREADY_CORRECT,
    NO_MATCH,
)

REPORT_COLUMNS = (
    "mode",
    "exercise_id",
    "attempt",
    "expected",
    "diagnosis",
    "detail",
    "top_score",
    "matches_expected",
    "message",
)


@dataclass(frozen=True)
class EvalRecord:
    exercise_id: str
    text: str
    expected: str

    def __post_init__(self):
        if not self.exercise_id:
            raise ValueError("exercise_id must be non-empty")
        if not self.text.strip():
            raise ValueError("attempt text must be non-empty")
        if self.expected not in KNOWN_KINDS:
            raise ValueError(f"unknown diagnosis kind: {self.expected!r}")


def load_eval_records(path: str) -> list[EvalRecord]:
    """Parse an eval file: ``<exercise_id>\\t<attempt text>\\t<expected kind>``."""
    records: list[EvalRecord] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}")
            try:
                records.append(EvalRecord(parts[0], parts[1], parts[2]))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return records


@dataclass
class ModeReport:
    mode: str
    rows: list[dict]
    diagnosis_counts: dict[str, int]
    no_match_rate: float
    mean_top_score: float | None
    expected_match_rate: float

    def most_frequent_kind(self) -> str:
        # ties resolve in the fixed kind order
        return max(KNOWN_KINDS, key=lambda k: self.diagnosis_counts.get(k, 0))


@dataclass
class EvalReport:
    record_count: int
    modes: dict[str, ModeReport]


def evaluate_modes(
    engine: FeedbackEngine, records: list[EvalRecord], modes: tuple[str, ...] = MODES
) -> EvalReport:
    """Run every attempt through every mode and tally the diagnoses."""
    if not records:
        raise ValueError("eval set is empty")
    unknown = sorted({r.exercise_id for r in records} - set(engine.graphs))
    if unknown:
        raise ValueError(f"unknown exercises in eval set: {', '.join(unknown)}")
    reports: dict[str, ModeReport] = {}
    for mode in modes:
        rows: list[dict] = []
        counts: dict[str, int] = {kind: 0 for kind in KNOWN_KINDS}
        for record in records:
            outcome = engine.respond(record.exercise_id, record.text, mode)
            kind = outcome.result.diagnosis.kind
            counts[kind] += 1
            top_score = None
            if outcome.result.candidates:
                top_score = outcome.result.candidates[0]["score"]
            rows.append(
                {
                    "mode": mode,
                    "exercise_id": record.exercise_id,
                    "attempt": record.text,
                    "expected": record.expected,
                    "diagnosis": kind,
                    "detail": outcome.result.diagnosis.detail,
                    "top_score": top_score,
                    "matches_expected": kind == record.expected,
                    "message": outcome.result.message,
                }
            )
        scored = [r["top_score"] for r in rows if r["top_score"] is not None]
        reports[mode] = ModeReport(
            mode=mode,
            rows=rows,
            diagnosis_counts=counts,
            no_match_rate=counts[NO_MATCH] / len(records),
            mean_top_score=sum(scored) / len(scored) if scored else None,
            expected_match_rate=sum(1 for r in rows if r["matches_expected"]) / len(records),
        )
    return EvalReport(record_count=len(records), modes=reports)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_report_tsv(report: EvalReport, path: str) -> None:
    lines = ["\t".join(REPORT_COLUMNS)]
    for mode in report.modes:
        for row in report.modes[mode].rows:
            lines.append("\t".join(_cell(row[col]) for col in REPORT_COLUMNS))
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def summary_doc(report: EvalReport) -> dict:
    return {
        "record_count": report.record_count,
        "modes": {
            mode: {
                "diagnosis_counts": mr.diagnosis_counts,
                "no_match_rate": mr.no_match_rate,
                "mean_top_score": mr.mean_top_score,
                "expected_match_rate": mr.expected_match_rate,
                "most_frequent_kind": mr.most_frequent_kind(),
            }
            for mode, mr in report.modes.items()
        },
    }


def render_figures(report: EvalReport, out_dir: str) -> list[str]:
    """Diagnosis distribution per mode, and top-candidate score spread."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(out_dir, exist_ok=True)
    paths: list[str] = []

    modes = list(report.modes)
    fig, ax = plt.subplots(figsize=(8, 4))
    width = 0.8 / max(1, len(modes))
    for i, mode in enumerate(modes):
        counts = [report.modes[mode].diagnosis_counts.get(k, 0) for k in KNOWN_KINDS]
        xs = [j + i * width for j in range(len(KNOWN_KINDS))]
        ax.bar(xs, counts, width=width, label=mode)
    ax.set_xticks([j + width * (len(modes) - 1) / 2 for j in range(len(KNOWN_KINDS))])
    ax.set_xticklabels(KNOWN_KINDS, rotation=20, ha="right")
    ax.set_ylabel("attempts")
    ax.set_title("diagnosis distribution by mode")
    ax.legend()
    fig.tight_layout()
    path = os.path.join(out_dir, "diagnosis_distribution.png")
    fig.savefig(path)
    plt.close(fig)
    paths.append(path)

    scores = [
        row["top_score"]
        for mode in report.modes
        for row in report.modes[mode].rows
        if row["top_score"] is not None
    ]
    fig, ax = plt.subplots(figsize=(6, 4))
    if scores:
        ax.hist(scores, bins=20, range=(0.0, 1.0))
    ax.set_xlabel("top candidate score")
    ax.set_ylabel("attempts")
    ax.set_title("top-candidate score spread")
    fig.tight_layout()
    path = os.path.join(out_dir, "top_scores.png")
    fig.savefig(path)
    plt.close(fig)
    paths.append(path)
    return paths


def write_outputs(report: EvalReport, out_dir: str) -> dict:
    """Write the TSV report, the JSON summary, and the figures."""
    os.makedirs(out_dir, exist_ok=True)
    report_path = os.path.join(out_dir, "report.tsv")
    write_report_tsv(report, report_path)
    summary_path = os.path.join(out_dir, "summary.json")
    with open(summary_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(summary_doc(report), sort_keys=True, indent=2) + "\n")
    figures = render_figures(report, out_dir)
    return {"report": report_path, "summary": summary_path, "figures": figures}
