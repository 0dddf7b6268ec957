"""Build pipeline, artifact persistence, and the loaded feedback engine.

The pipeline turns an ingested corpus into the artifacts the tutor
serves from: one discourse graph per exercise, a relation decoder, a
transition classifier, and the sample splits that trained it. Every
artifact is structured text (JSON or TSV) so fixture diffs stay
readable, and every stage is seeded, so rebuilding from the same corpus
and config reproduces the files byte for byte.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field

from .config import EngineConfig
from .corpus import SolutionRecord, summarize
from .embeddings import Embedder
from .feedback import (
    DEFAULT_TEMPLATES,
    FeedbackResult,
    classifier_scorer,
    cluster_based_feedback,
    full_feedback,
    load_templates,
    match_attempt,
    minimal_feedback,
    validate_templates,
)
from .graph import (
    REFERENCE,
    ExerciseGraph,
    ParsedSolution,
    build_graph,
    graph_from_json,
    graph_to_json,
)
from .relations import (
    EXPLICIT,
    IMPLICIT,
    RelationDecoder,
    RelationSample,
    decoder_from_json,
    decoder_to_json,
    detect_cue,
    label_boundary_relations,
    strip_cue,
    train_relation_decoder,
)
from .segmentation import EDU, apply_boundary_labels, segment_heuristic, tokenize
from .triplet import (
    TripletClassifier,
    TripletSample,
    generate_samples,
    load_samples,
    save_samples,
    split_dataset,
    train,
)

MODES = ("minimal", "cluster", "full")

EXERCISES_FILE = "exercises.json"
DECODER_FILE = "relations.json"
INDEX_FILE = "exercise_index.json"
CLASSIFIER_FILE = "classifier.json"
METRICS_FILE = "metrics.json"
CONFIG_SNAPSHOT_FILE = "config_snapshot.json"
GRAPHS_DIR = "graphs"
SAMPLES_DIR = "samples"
SPLIT_NAMES = ("train", "val", "test")


class PipelineError(RuntimeError):
    """A stage failed; the message is prefixed with the stage name."""


class ArtifactsMissing(RuntimeError):
    """A required artifact file is absent; run the build verbs first."""


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(f"{name}: {exc}") from exc


def make_embedder(config: EngineConfig) -> Embedder:
    if config.store_path:
        return Embedder.with_store_file(config.store_path, dim=config.dim)
    return Embedder(dim=config.dim)


def segment_record(record: SolutionRecord) -> list[EDU]:
    """Segment one solution, honoring precomputed labels when present."""
    if record.boundary_labels is None:
        return segment_heuristic(record.text)
    tokens = tokenize(record.text)
    if len(record.boundary_labels) != len(tokens):
        raise ValueError(
            f"boundary labels cover {len(record.boundary_labels)} tokens, text has {len(tokens)}"
        )
    return apply_boundary_labels(record.text, tokens, list(record.boundary_labels))


def _relation_training_samples(
    segmented: list[tuple[SolutionRecord, list[str]]], embedder: Embedder
) -> tuple[list[RelationSample], dict[str, int]]:
    """Cue-labeled boundaries train the explicit branch directly; the
    same pairs with the cue word deleted train the implicit branch by
    distant supervision."""
    samples: list[RelationSample] = []
    counts = {EXPLICIT: 0, IMPLICIT: 0}
    for _, edu_texts in segmented:
        for i in range(1, len(edu_texts)):
            left_text, right_text = edu_texts[i - 1], edu_texts[i]
            hit = detect_cue(left_text, right_text)
            if hit is None:
                continue
            category = hit[1]
            left = embedder.embed(left_text)
            right = embedder.embed(right_text)
            samples.append(RelationSample(left, right, EXPLICIT, category))
            counts[EXPLICIT] += 1
            stripped = strip_cue(left_text, right_text)
            if stripped is None or not stripped[0].strip() or not stripped[1].strip():
                continue
            samples.append(
                RelationSample(
                    embedder.embed(stripped[0]), embedder.embed(stripped[1]), IMPLICIT, category
                )
            )
            counts[IMPLICIT] += 1
    return samples, counts


@dataclass
class PipelineResult:
    parsed: dict[str, list[ParsedSolution]]
    decoder: RelationDecoder
    graphs: dict[str, ExerciseGraph]
    exercise_index: dict[str, int]
    classifier: TripletClassifier
    splits: dict[str, list[TripletSample]]
    history: dict
    relation_counts: dict[str, int]
    warnings: list[str] = field(default_factory=list)

    def metrics(self) -> dict:
        return {
            "exercises": {
                exercise_id: {"nodes": len(g.nodes), "edges": len(g.edges)}
                for exercise_id, g in self.graphs.items()
            },
            "relation_samples": dict(self.relation_counts),
            "samples": {name: len(part) for name, part in self.splits.items()},
            "val_accuracy_per_epoch": self.history.get("val_accuracy_per_epoch", []),
            "warnings": list(self.warnings),
        }


def parse_corpus(
    corpus: dict[str, list[SolutionRecord]], config: EngineConfig, embedder: Embedder
) -> tuple[dict[str, list[ParsedSolution]], RelationDecoder, dict[str, int]]:
    """Segment and embed every record, then train the relation decoder
    and label all boundaries with it."""
    segmented: list[tuple[SolutionRecord, list[str]]] = []
    for records in corpus.values():
        for record in records:
            edus = _stage("segment", segment_record, record)
            if not edus:
                raise PipelineError(f"segment: no tokens in solution {record.text!r}")
            segmented.append((record, [e.text for e in edus]))

    rel_samples, rel_counts = _stage(
        "relations", _relation_training_samples, segmented, embedder
    )
    if rel_samples:
        decoder = _stage(
            "relations",
            train_relation_decoder,
            rel_samples,
            epochs=config.relation_epochs,
            lr=config.relation_lr,
            batch_size=config.relation_batch_size,
            seed=config.seed,
        )
    else:
        decoder = RelationDecoder(dim=config.dim)

    parsed: dict[str, list[ParsedSolution]] = {}
    for exercise_id, records in corpus.items():
        solutions: list[ParsedSolution] = []
        for record, edu_texts in (
            (rec, texts) for rec, texts in segmented if rec.exercise_id == exercise_id
        ):
            embeddings = [embedder.embed(t) for t in edu_texts]
            if len(edu_texts) >= 2:
                labeled = _stage(
                    "relations", label_boundary_relations, decoder, edu_texts, embeddings
                )
                relations = [r.category for r in labeled]
            else:
                relations = []
            solutions.append(
                ParsedSolution(
                    source=record.source,
                    edu_texts=edu_texts,
                    embeddings=embeddings,
                    relations=relations,
                )
            )
        parsed[exercise_id] = solutions
    return parsed, decoder, rel_counts


def build_graphs(
    corpus: dict[str, list[SolutionRecord]],
    parsed: dict[str, list[ParsedSolution]],
    config: EngineConfig,
) -> tuple[dict[str, ExerciseGraph], list[str]]:
    """One graph per exercise; exercises without references are skipped."""
    graphs: dict[str, ExerciseGraph] = {}
    warnings: list[str] = []
    for exercise_id, records in corpus.items():
        if not any(r.source == REFERENCE for r in records):
            warnings.append(f"exercise {exercise_id!r} skipped: no reference solutions")
            continue
        graphs[exercise_id] = _stage(
            "build-graphs",
            build_graph,
            exercise_id,
            parsed[exercise_id],
            eps=config.eps,
            min_samples=config.min_samples,
        )
    if not graphs:
        raise PipelineError("build-graphs: no exercise has reference solutions")
    return graphs, warnings


def index_exercises(graphs: dict[str, ExerciseGraph]) -> dict[str, int]:
    return {exercise_id: i for i, exercise_id in enumerate(sorted(graphs))}


def sample_transitions(
    graphs: dict[str, ExerciseGraph], exercise_index: dict[str, int], config: EngineConfig
) -> dict[str, list[TripletSample]]:
    """Draw per-exercise transition samples and split them group-safely."""
    combined: list[TripletSample] = []
    for exercise_id in sorted(graphs):
        idx = exercise_index[exercise_id]
        combined.extend(
            _stage(
                "gen-triplets",
                generate_samples,
                graphs[exercise_id],
                config.samples_per_exercise,
                idx,
                seed=config.seed + idx,
                random_branch_rate=config.random_branch_rate,
            )
        )
    parts = _stage("gen-triplets", split_dataset, combined, config.split_fractions)
    return dict(zip(SPLIT_NAMES, parts))


def train_classifier(
    splits: dict[str, list[TripletSample]],
    n_exercises: int,
    config: EngineConfig,
    embedder: Embedder,
) -> tuple[TripletClassifier, dict]:
    if not splits.get("val"):
        raise PipelineError("train: validation split is empty; raise samples_per_exercise")
    model = TripletClassifier.create(
        dim=config.dim, n_exercises=n_exercises, hidden=config.hidden, seed=config.seed
    )
    history = _stage(
        "train",
        train,
        model,
        splits["train"],
        splits["val"],
        embedder,
        epochs=config.epochs,
        lr=config.lr,
        batch_size=config.batch_size,
        seed=config.seed,
    )
    return model, history


def run_pipeline(
    corpus: dict[str, list[SolutionRecord]],
    config: EngineConfig,
    embedder: Embedder | None = None,
) -> PipelineResult:
    """Segment, embed, label, cluster, sample, and train in one pass."""
    if embedder is None:
        embedder = _stage("embed", make_embedder, config)
    parsed, decoder, rel_counts = parse_corpus(corpus, config, embedder)
    graphs, warnings = build_graphs(corpus, parsed, config)
    exercise_index = index_exercises(graphs)
    splits = sample_transitions(graphs, exercise_index, config)
    classifier, history = train_classifier(splits, len(exercise_index), config, embedder)
    return PipelineResult(
        parsed=parsed,
        decoder=decoder,
        graphs=graphs,
        exercise_index=exercise_index,
        classifier=classifier,
        splits=splits,
        history=history,
        relation_counts=rel_counts,
        warnings=warnings,
    )


# ---------------------------------------------------------------- artifacts


def _slug(exercise_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", exercise_id)


def graph_path(artifacts_dir: str, exercise_id: str) -> str:
    return os.path.join(artifacts_dir, GRAPHS_DIR, _slug(exercise_id) + ".json")


def _write_text(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _read_text(path: str) -> str:
    if not os.path.exists(path):
        raise ArtifactsMissing(f"missing artifact: {path}")
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def exercises_doc(
    corpus: dict[str, list[SolutionRecord]],
    graphs: dict[str, ExerciseGraph],
    prompts: dict[str, str],
) -> dict:
    counts = summarize(corpus)
    return {
        "exercises": [
            {
                "id": exercise_id,
                "prompt": prompts.get(exercise_id, ""),
                "reference_count": counts[exercise_id]["reference"],
                "student_count": counts[exercise_id]["student"],
                "node_count": len(graphs[exercise_id].nodes),
                "edge_count": len(graphs[exercise_id].edges),
            }
            for exercise_id in sorted(graphs)
        ]
    }


def write_graph_artifacts(
    corpus: dict[str, list[SolutionRecord]],
    graphs: dict[str, ExerciseGraph],
    decoder: RelationDecoder,
    config: EngineConfig,
    prompts: dict[str, str],
) -> None:
    out = config.artifacts_dir
    seen: dict[str, str] = {}
    for exercise_id in sorted(graphs):
        slug = _slug(exercise_id)
        if slug in seen:
            raise PipelineError(
                f"build-graphs: exercises {seen[slug]!r} and {exercise_id!r} "
                f"collide on graph file name {slug!r}"
            )
        seen[slug] = exercise_id
        _write_text(graph_path(out, exercise_id), graph_to_json(graphs[exercise_id]))
    _write_text(os.path.join(out, DECODER_FILE), decoder_to_json(decoder))
    _write_text(
        os.path.join(out, INDEX_FILE),
        json.dumps(index_exercises(graphs), sort_keys=True, indent=2) + "\n",
    )
    _write_text(
        os.path.join(out, EXERCISES_FILE),
        json.dumps(exercises_doc(corpus, graphs, prompts), sort_keys=True, indent=2) + "\n",
    )


def write_sample_artifacts(splits: dict[str, list[TripletSample]], config: EngineConfig) -> None:
    os.makedirs(os.path.join(config.artifacts_dir, SAMPLES_DIR), exist_ok=True)
    for name in SPLIT_NAMES:
        save_samples(os.path.join(config.artifacts_dir, SAMPLES_DIR, name + ".tsv"), splits[name])


def write_model_artifacts(result_metrics: dict, classifier: TripletClassifier, config: EngineConfig) -> None:
    out = config.artifacts_dir
    _write_text(os.path.join(out, CLASSIFIER_FILE), classifier.to_json())
    _write_text(os.path.join(out, METRICS_FILE), json.dumps(result_metrics, sort_keys=True, indent=2) + "\n")
    _write_text(os.path.join(out, CONFIG_SNAPSHOT_FILE), config.to_json())


def write_artifacts(
    result: PipelineResult,
    corpus: dict[str, list[SolutionRecord]],
    config: EngineConfig,
    prompts: dict[str, str] | None = None,
) -> None:
    prompts = prompts if prompts is not None else {}
    write_graph_artifacts(corpus, result.graphs, result.decoder, config, prompts)
    write_sample_artifacts(result.splits, config)
    write_model_artifacts(result.metrics(), result.classifier, config)


def load_graph_artifacts(config: EngineConfig) -> tuple[dict[str, ExerciseGraph], dict[str, int], list[dict]]:
    out = config.artifacts_dir
    exercises = json.loads(_read_text(os.path.join(out, EXERCISES_FILE)))["exercises"]
    index = json.loads(_read_text(os.path.join(out, INDEX_FILE)))
    graphs: dict[str, ExerciseGraph] = {}
    for entry in exercises:
        graphs[entry["id"]] = graph_from_json(_read_text(graph_path(out, entry["id"])))
    return graphs, index, exercises


def load_sample_artifacts(config: EngineConfig) -> dict[str, list[TripletSample]]:
    return {
        name: load_samples(os.path.join(config.artifacts_dir, SAMPLES_DIR, name + ".tsv"))
        for name in SPLIT_NAMES
    }


# ------------------------------------------------------------------ engine


@dataclass
class AttemptOutcome:
    """One processed attempt: the feedback plus inspection data."""

    exercise_id: str
    mode: str
    result: FeedbackResult
    edus: list[dict]

    def feedback_payload(self, alpha: float) -> dict:
        diag = self.result.diagnosis
        return {
            "diagnosis": {
                "kind": diag.kind,
                "detail": diag.detail,
                "affected": [dict(entry) for entry in diag.affected],
            },
            "correct_edus": list(self.result.correct_edus),
            "message": self.result.message,
            "diagnostics": {
                "mode": self.mode,
                "alpha": alpha,
                "edus": self.edus,
                "trace": dict(self.result.trace),
                "candidates": [dict(c) for c in self.result.candidates],
            },
        }


@dataclass
class FeedbackEngine:
    """Immutable bundle of loaded artifacts serving attempt feedback."""

    config: EngineConfig
    embedder: Embedder
    decoder: RelationDecoder
    graphs: dict[str, ExerciseGraph]
    exercise_index: dict[str, int]
    classifier: TripletClassifier
    templates: dict
    exercises: list[dict]

    @classmethod
    def load(cls, config: EngineConfig) -> "FeedbackEngine":
        embedder = make_embedder(config)
        graphs, index, exercises = load_graph_artifacts(config)
        decoder = decoder_from_json(_read_text(os.path.join(config.artifacts_dir, DECODER_FILE)))
        classifier = TripletClassifier.from_json(
            _read_text(os.path.join(config.artifacts_dir, CLASSIFIER_FILE))
        )
        if config.templates_path:
            templates = load_templates(config.templates_path)
        else:
            templates = validate_templates(dict(DEFAULT_TEMPLATES))
        return cls(
            config=config,
            embedder=embedder,
            decoder=decoder,
            graphs=graphs,
            exercise_index=index,
            classifier=classifier,
            templates=templates,
            exercises=exercises,
        )

    def exercise_ids(self) -> list[str]:
        return [entry["id"] for entry in self.exercises]

    def respond(self, exercise_id: str, text: str, mode: str) -> AttemptOutcome:
        if exercise_id not in self.graphs:
            raise KeyError(f"unknown exercise: {exercise_id!r}")
        if mode not in MODES:
            raise ValueError(f"unknown mode: {mode!r}")
        if not text.strip():
            raise ValueError("attempt text must be non-empty")
        graph = self.graphs[exercise_id]
        tokens = tokenize(text)
        edus = segment_heuristic(text)
        edu_texts = [e.text for e in edus]
        embeddings = [self.embedder.embed(t) for t in edu_texts]
        if len(edu_texts) >= 2:
            relations = [
                r.category
                for r in label_boundary_relations(self.decoder, edu_texts, embeddings)
            ]
        else:
            relations = []
        attempt = match_attempt(graph, edu_texts, embeddings, relations)
        if mode == "minimal":
            result = minimal_feedback(self.templates)
        elif mode == "cluster":
            result = cluster_based_feedback(graph, attempt, self.templates)
        else:
            scorer = classifier_scorer(
                self.classifier, self.exercise_index[exercise_id], self.embedder
            )
            result = full_feedback(
                graph,
                scorer,
                attempt,
                self.templates,
                alpha=self.config.alpha,
                max_iters=self.config.max_iters,
            )
        edu_info = [
            {
                "text": edu.text,
                "char_start": tokens[edu.token_range[0]].char_start,
                "char_end": tokens[edu.token_range[1] - 1].char_end,
                "cluster": int(node_id),
            }
            for edu, node_id in zip(edus, attempt.assignments)
        ]
        return AttemptOutcome(exercise_id=exercise_id, mode=mode, result=result, edus=edu_info)
