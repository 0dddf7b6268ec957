"""Command-line entry points.

Each verb runs one pipeline stage against the resolved config, so a
build is the chain: ingest, build-graphs, gen-triplets, train. After
that `feedback`, `eval`, and `serve` consume the written artifacts.
"""

from __future__ import annotations

import json
import os

import click

from .config import ENV_CONFIG, EngineConfig, resolve_config
from .corpus import ingest as ingest_corpus
from .corpus import load_prompts, summarize
from .evaluate import evaluate_modes, load_eval_records, write_outputs
from .pipeline import (
    MODES,
    ArtifactsMissing,
    FeedbackEngine,
    PipelineError,
    build_graphs,
    load_graph_artifacts,
    load_sample_artifacts,
    make_embedder,
    parse_corpus,
    sample_transitions,
    train_classifier,
    write_graph_artifacts,
    write_model_artifacts,
    write_sample_artifacts,
)

_FAILURES = (PipelineError, ArtifactsMissing, ValueError, KeyError, OSError)


def _fail(exc: Exception) -> click.ClickException:
    message = exc.args[0] if exc.args else str(exc)
    return click.ClickException(str(message))


@click.group()
@click.option(
    "--config",
    "config_path",
    type=click.Path(),
    default=None,
    help=f"Config file; falls back to ${ENV_CONFIG}, then built-in defaults.",
)
@click.pass_context
def main(ctx: click.Context, config_path: str | None) -> None:
    """Discourse-graph feedback engine."""
    try:
        ctx.obj = resolve_config(config_path)
    except (ValueError, OSError) as exc:
        raise _fail(exc)


@main.command()
@click.pass_obj
def ingest(config: EngineConfig) -> None:
    """Validate the corpus file and report per-exercise counts."""
    try:
        corpus = ingest_corpus(config.corpus_path)
    except _FAILURES as exc:
        raise _fail(exc)
    counts = summarize(corpus)
    total = 0
    for exercise_id in sorted(counts):
        c = counts[exercise_id]
        total += c["reference"] + c["student"]
        click.echo(f"{exercise_id}\treference={c['reference']}\tstudent={c['student']}")
        if c["reference"] == 0:
            click.echo(f"warning: exercise {exercise_id!r} has no reference solutions", err=True)
    click.echo(f"{len(counts)} exercises, {total} solutions")


@main.command("build-graphs")
@click.pass_obj
def build_graphs_cmd(config: EngineConfig) -> None:
    """Segment, embed, label relations, and build one graph per exercise."""
    try:
        corpus = ingest_corpus(config.corpus_path)
        embedder = make_embedder(config)
        parsed, decoder, _ = parse_corpus(corpus, config, embedder)
        graphs, warnings = build_graphs(corpus, parsed, config)
        prompts = load_prompts(config.prompts_path) if config.prompts_path else {}
        write_graph_artifacts(corpus, graphs, decoder, config, prompts)
    except _FAILURES as exc:
        raise _fail(exc)
    for warning in warnings:
        click.echo(f"warning: {warning}", err=True)
    for exercise_id in sorted(graphs):
        g = graphs[exercise_id]
        click.echo(f"{exercise_id}\tnodes={len(g.nodes)}\tedges={len(g.edges)}")


@main.command("gen-triplets")
@click.pass_obj
def gen_triplets(config: EngineConfig) -> None:
    """Sample transition triplets from the built graphs and split them."""
    try:
        graphs, index, _ = load_graph_artifacts(config)
        splits = sample_transitions(graphs, index, config)
        write_sample_artifacts(splits, config)
    except _FAILURES as exc:
        raise _fail(exc)
    click.echo(
        "\t".join(f"{name}={len(splits[name])}" for name in ("train", "val", "test"))
    )


@main.command()
@click.pass_obj
def train(config: EngineConfig) -> None:
    """Train the transition classifier on the sampled splits."""
    try:
        graphs, index, _ = load_graph_artifacts(config)
        splits = load_sample_artifacts(config)
        embedder = make_embedder(config)
        classifier, history = train_classifier(splits, len(index), config, embedder)
        metrics = {
            "exercises": {
                exercise_id: {"nodes": len(g.nodes), "edges": len(g.edges)}
                for exercise_id, g in graphs.items()
            },
            "samples": {name: len(part) for name, part in splits.items()},
            "val_accuracy_per_epoch": history.get("val_accuracy_per_epoch", []),
        }
        write_model_artifacts(metrics, classifier, config)
    except _FAILURES as exc:
        raise _fail(exc)
    accs = ", ".join(f"{a:.3f}" for a in metrics["val_accuracy_per_epoch"])
    click.echo(f"val accuracy per epoch: {accs}")


@main.command()
@click.option("--exercise", "exercise_id", required=True)
@click.option("--text", required=True)
@click.option("--mode", type=click.Choice(MODES), default="full", show_default=True)
@click.option("--json", "as_json", is_flag=True, help="Print the full feedback payload.")
@click.pass_obj
def feedback(config: EngineConfig, exercise_id: str, text: str, mode: str, as_json: bool) -> None:
    """Run one attempt through the engine and print the feedback."""
    try:
        engine = FeedbackEngine.load(config)
        outcome = engine.respond(exercise_id, text, mode)
    except _FAILURES as exc:
        raise _fail(exc)
    if as_json:
        click.echo(json.dumps(outcome.feedback_payload(config.alpha), sort_keys=True, indent=2))
    else:
        click.echo(outcome.result.message)


@main.command("eval")
@click.option("--eval-file", "eval_path", required=True, type=click.Path())
@click.option("--out", "out_dir", default=None, help="Output directory; defaults to <artifacts>/eval.")
@click.pass_obj
def eval_cmd(config: EngineConfig, eval_path: str, out_dir: str | None) -> None:
    """Compare the three feedback modes on a labeled attempt file."""
    try:
        engine = FeedbackEngine.load(config)
        records = load_eval_records(eval_path)
        report = evaluate_modes(engine, records)
        outputs = write_outputs(report, out_dir or os.path.join(config.artifacts_dir, "eval"))
    except _FAILURES as exc:
        raise _fail(exc)
    for mode, mr in report.modes.items():
        mean_top = "n/a" if mr.mean_top_score is None else f"{mr.mean_top_score:.3f}"
        click.echo(
            f"{mode}\tattempts={report.record_count}"
            f"\tmost_frequent={mr.most_frequent_kind()}"
            f"\tno_match_rate={mr.no_match_rate:.2f}"
            f"\tmean_top_score={mean_top}"
        )
    click.echo(f"report: {outputs['report']}")
    for fig in outputs["figures"]:
        click.echo(f"figure: {fig}")


@main.command()
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.pass_obj
def serve(config: EngineConfig, port: int, host: str) -> None:
    """Serve the tutoring HTTP API over the built artifacts."""
    import uvicorn

    from .server import create_app

    uvicorn.run(create_app(config), host=host, port=port)


if __name__ == "__main__":
    main()
