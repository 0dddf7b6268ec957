"""Release gate: one test per headline guarantee, one pass/fail line each.

Every test is self-contained apart from the shared fixture engine, so a
failure names exactly which guarantee broke. Wall-clock budgets are
asserted where a guarantee carries one; they are generous, so blowing
one signals a real regression rather than machine noise.
"""

from __future__ import annotations

import hashlib
import os
import time

import numpy as np
from click.testing import CliRunner

from conftest import EVAL_PATH, FIRST_ATTEMPT, FIRST_MESSAGE, fixture_config
from tutorgraph.cli import main
from tutorgraph.embeddings import Embedder, EmbeddingVector
from tutorgraph.evaluate import evaluate_modes, load_eval_records
from tutorgraph.feedback import (
    DEFAULT_TEMPLATES,
    MISSING,
    CandidateSolution,
    Element,
    diagnose,
    generate_candidates,
    local_search,
    render_feedback,
    score_candidate,
)
from tutorgraph.graph import OUTLIER, ParsedSolution, build_graph, dbscan
from tutorgraph.relations import CONTINGENCY
from tutorgraph.segmentation import segment_heuristic
from tutorgraph.triplet import (
    BRANCH_MATCHED,
    BRANCH_RANDOM,
    START_TOKEN,
    TERMINAL_TOKEN,
    TripletClassifier,
    TripletSample,
    accuracy,
    generate_samples,
    loss_and_grads,
    majority_rate,
    split_dataset,
    train,
)

ATTEMPT_TEXT = "I think it's classification"
CAT_TEXT = "because it uses categories"
DISC_TEXT = "because the outputs are discrete"


def worked_example_graph():
    """Answer concept in three phrasings plus two reason clauses; the
    extra bare "classification" makes it the majority wording."""
    e_cls, e_cat, e_disc = (EmbeddingVector(np.eye(8)[i]) for i in range(3))
    solutions = [
        ParsedSolution("reference", [ATTEMPT_TEXT], [e_cls], []),
        ParsedSolution(
            "reference",
            ["it's a classification task", CAT_TEXT],
            [e_cls, e_cat],
            [CONTINGENCY],
        ),
        ParsedSolution("reference", ["classification", DISC_TEXT], [e_cls, e_disc], [CONTINGENCY]),
        ParsedSolution("reference", ["classification"], [e_cls], []),
    ]
    return build_graph("ml-task", solutions, eps=0.15, min_samples=2)


def toy_graph():
    e_cls, e_cat, e_disc = (EmbeddingVector(np.eye(8)[i]) for i in range(3))
    solutions = [
        ParsedSolution("reference", ["I think it's classification"], [e_cls], []),
        ParsedSolution(
            "reference",
            ["it's a classification task", CAT_TEXT],
            [e_cls, e_cat],
            [CONTINGENCY],
        ),
        ParsedSolution("reference", ["classification", DISC_TEXT], [e_cls, e_disc], [CONTINGENCY]),
    ]
    return build_graph("toy", solutions, eps=0.15, min_samples=2)


def test_segmentation_fixture_sentences_split_exactly():
    started = time.perf_counter()
    three = segment_heuristic(
        "I think it's a classification task because we are choosing between continuous values"
    )
    two = segment_heuristic("It uses a logistic function to model a binary dependent variable")
    elapsed = time.perf_counter() - started
    assert [e.text for e in three] == [
        "I think",
        "it's a classification task",
        "because we are choosing between continuous values",
    ]
    assert [e.text for e in two] == [
        "It uses a logistic function",
        "to model a binary dependent variable",
    ]
    assert elapsed < 1.0


def _partition_oracle(vectors, eps, min_samples):
    # brute force: cores by pairwise counting (self included), clusters as
    # connected components of cores, borders keep every adjacent option
    n = len(vectors)
    dist = [[1.0 - float(np.dot(vectors[i], vectors[j])) for j in range(n)] for i in range(n)]
    core = [sum(d <= eps for d in row) >= min_samples for row in dist]
    comp = [None] * n
    nxt = 0
    for i in range(n):
        if not core[i] or comp[i] is not None:
            continue
        stack = [i]
        comp[i] = nxt
        while stack:
            a = stack.pop()
            for b in range(n):
                if core[b] and comp[b] is None and dist[a][b] <= eps:
                    comp[b] = nxt
                    stack.append(b)
        nxt += 1
    border_options = {}
    noise = set()
    for i in range(n):
        if core[i]:
            continue
        options = {comp[j] for j in range(n) if core[j] and dist[i][j] <= eps}
        if options:
            border_options[i] = options
        else:
            noise.add(i)
    return core, comp, border_options, noise


def test_clustering_matches_brute_force_oracle_on_100_instances():
    rng = np.random.default_rng(977)
    started = time.perf_counter()
    for trial in range(100):
        n = int(rng.integers(1, 13))
        eps = float(rng.choice([0.05, 0.1, 0.2, 0.3, 0.5]))
        min_samples = int(rng.integers(1, 4))
        base = rng.normal(size=(max(2, n // 2), 6))
        points = []
        for _ in range(n):
            if rng.random() < 0.6:
                points.append(EmbeddingVector(base[rng.integers(0, base.shape[0])] + rng.normal(0, 0.05, size=6)))
            else:
                points.append(EmbeddingVector(rng.normal(size=6)))
        labels = dbscan(points, eps, min_samples)
        core, comp, border_options, noise = _partition_oracle([p.values for p in points], eps, min_samples)

        assert {i for i, l in enumerate(labels) if l == OUTLIER} == noise, f"trial {trial}"
        mapping = {}
        for i in range(n):
            if not core[i]:
                continue
            assert labels[i] != OUTLIER, f"trial {trial}"
            if labels[i] in mapping:
                assert mapping[labels[i]] == comp[i], f"trial {trial}: core cluster split"
            else:
                mapping[labels[i]] = comp[i]
        assert len(set(mapping.values())) == len(mapping), f"trial {trial}: clusters merged"
        for i, options in border_options.items():
            assert mapping[labels[i]] in options, f"trial {trial}: border misassigned"
    assert time.perf_counter() - started < 10.0


def test_toy_exercise_graph_has_exact_hand_derived_shape():
    graph = toy_graph()
    assert len(graph.nodes) == 3

    answer = graph.nodes[0]
    assert len(answer.members) == 3
    assert answer.is_start and not answer.is_terminal
    assert not answer.promoted_outlier

    by_text = {m.text: nid for nid, node in graph.nodes.items() for m in node.members}
    cat_id = by_text[CAT_TEXT]
    disc_id = by_text[DISC_TEXT]
    for nid in (cat_id, disc_id):
        node = graph.nodes[nid]
        assert len(node.members) == 1
        assert node.promoted_outlier
        assert node.is_terminal and not node.is_start

    edges = {(e.source, e.target, e.category, e.weight) for e in graph.edges}
    assert edges == {
        (0, cat_id, CONTINGENCY, 1),
        (0, disc_id, CONTINGENCY, 1),
    }


def test_triplet_sampling_properties_on_toy_graph():
    graph = toy_graph()
    started = time.perf_counter()
    samples = generate_samples(graph, 10_000, exercise_index=0, seed=0, random_branch_rate=0.2)
    train_set, val_set, test_set = split_dataset(samples)
    elapsed = time.perf_counter() - started

    positives = [s for s in samples if s.label == 1]
    negatives = [s for s in samples if s.label == 0]
    assert len(positives) == len(negatives) == 5_000

    by_text = {m.text: nid for nid, node in graph.nodes.items() for m in node.members}
    edge_pairs = {(e.source, e.target) for e in graph.edges}
    for s in positives:
        if s.left == START_TOKEN or s.right == TERMINAL_TOKEN:
            continue
        assert (by_text[s.left], by_text[s.right]) in edge_pairs

    successors = {nid: set(graph.successors(nid)) for nid in graph.nodes}
    matched = [s for s in negatives if s.branch == BRANCH_MATCHED]
    for s in matched:
        assert by_text[s.right] not in successors[by_text[s.left]]

    random_branch = [s for s in negatives if s.branch == BRANCH_RANDOM]
    transition_negatives = len(matched) + len(random_branch)
    assert transition_negatives > 0
    fraction = len(random_branch) / transition_negatives
    assert abs(fraction - 0.20) <= 0.02

    assert len(train_set) + len(val_set) + len(test_set) == 10_000
    keys = [set(s.group_key() for s in part) for part in (train_set, val_set, test_set)]
    assert not (keys[0] & keys[1]) and not (keys[0] & keys[2]) and not (keys[1] & keys[2])
    groups = {}
    for s in samples:
        groups[s.group_key()] = groups.get(s.group_key(), 0) + 1
    top3 = [k for k, _ in sorted(groups.items(), key=lambda kv: (-kv[1], kv[0]))[:3]]
    assert all(k in keys[0] for k in top3)
    assert elapsed < 30.0


def _ordered_pair_dataset(n, seed):
    rng = np.random.default_rng(seed)
    first = [f"alpha{i}" for i in range(10)]
    second = [f"omega{i}" for i in range(10)]
    samples = []
    for _ in range(n):
        a = first[int(rng.integers(0, 10))]
        b = second[int(rng.integers(0, 10))]
        if rng.random() < 0.5:
            samples.append(TripletSample(a, b, 0, 1))
        else:
            samples.append(TripletSample(b, a, 0, 0))
    return samples


def test_classifier_gradients_and_synthetic_accuracy():
    started = time.perf_counter()

    rng = np.random.default_rng(7)
    model = TripletClassifier.create(dim=8, n_exercises=2, hidden=16, seed=3)
    xs = rng.normal(size=(6, 2 * 8 + 2))
    ys = rng.integers(0, 2, size=6)
    _, grads = loss_and_grads(model, xs, ys)
    eps = 1e-6
    checked = 0
    for name in ("w1", "b1", "w2", "b2"):
        flat = getattr(model, name).reshape(-1)
        for _ in range(5):
            pos = int(rng.integers(0, flat.size))
            old = flat[pos]
            flat[pos] = old + eps
            up, _ = loss_and_grads(model, xs, ys)
            flat[pos] = old - eps
            down, _ = loss_and_grads(model, xs, ys)
            flat[pos] = old
            numeric = (up - down) / (2 * eps)
            analytic = grads[name].reshape(-1)[pos]
            denom = max(abs(numeric), abs(analytic), 1e-8)
            assert abs(numeric - analytic) / denom < 1e-4
            checked += 1
    assert checked == 20

    emb = Embedder(dim=16)
    data = _ordered_pair_dataset(2400, seed=0)
    train_set, held_out = data[:2000], data[2000:]
    for seed in range(5):
        fresh = TripletClassifier.create(dim=16, n_exercises=1, hidden=32, seed=seed)
        train(fresh, train_set, held_out, emb, epochs=12, lr=0.5, batch_size=32, seed=seed)
        acc = accuracy(fresh, held_out, emb)
        assert acc >= 0.70, f"seed {seed}: accuracy {acc:.3f}"
        assert acc > majority_rate(held_out), f"seed {seed}: no better than majority"
    assert time.perf_counter() - started < 120.0


def test_local_search_worked_example_is_exact():
    graph = worked_example_graph()
    attempt = [Element(0, ATTEMPT_TEXT)]

    texts = {c.display_text() for c in generate_candidates(graph, attempt)}
    assert texts == {
        "⟨start⟩ classification",
        f"{ATTEMPT_TEXT} {CAT_TEXT}",
        f"{ATTEMPT_TEXT} {DISC_TEXT}",
    }

    pairs = {
        (START_TOKEN, "classification"): 0.6,
        (ATTEMPT_TEXT, CAT_TEXT): 0.9,
        (ATTEMPT_TEXT, DISC_TEXT): 0.5,
        (START_TOKEN, ATTEMPT_TEXT): 0.2,
        (ATTEMPT_TEXT, TERMINAL_TOKEN): 0.2,
    }

    def scorer_for(table):
        return lambda left, right: table.get((left, right), 0.1)

    result = local_search(graph, scorer_for(pairs), attempt)
    diagnosis = diagnose(graph, attempt, result.first_best)
    assert diagnosis.kind == MISSING
    assert diagnosis.detail == CONTINGENCY

    message = render_feedback(diagnosis, ["it's a classification task"], DEFAULT_TEMPLATES)
    assert message == "'it's a classification task' is correct. Try supplying a reason for this idea."
    assert message == FIRST_MESSAGE

    # mutate a pair only reachable in the second iteration: the final best
    # moves, the first-iteration diagnosis must not
    boosted = dict(pairs)
    boosted[(CAT_TEXT, TERMINAL_TOKEN)] = 0.99
    alt = local_search(graph, scorer_for(boosted), attempt)
    assert alt.final_best.display_text() != result.final_best.display_text()
    assert diagnose(graph, attempt, alt.first_best) == diagnosis


def test_candidate_score_is_mean_of_pair_scores_and_iteration_bound_holds():
    table = {}
    rng = np.random.default_rng(31)

    def scorer(left, right):
        if (left, right) not in table:
            table[(left, right)] = float(rng.random())
        return table[(left, right)]

    elems = [Element(i, f"unit {i}") for i in range(4)]
    cand = CandidateSolution(elems)
    score = score_candidate(scorer, cand)
    pair_scores = [scorer(a.text, b.text) for a, b in zip(elems, elems[1:])]
    assert score == sum(pair_scores) / len(pair_scores)

    lone = CandidateSolution([Element(0, "only")])
    expected = (scorer(START_TOKEN, "only") + scorer("only", TERMINAL_TOKEN)) / 2.0
    assert score_candidate(scorer, lone) == expected

    graph = worked_example_graph()
    attempt = [Element(0, ATTEMPT_TEXT)]
    for max_iters in (1, 2, 3):
        for trial in range(5):
            noisy = np.random.default_rng(100 * max_iters + trial)
            result = local_search(
                graph, lambda a, b: float(noisy.random()), attempt, max_iters=max_iters
            )
            assert result.trace["iterations"] <= max_iters
            assert result.trace["candidates_scored"] <= result.trace["scored_bound"]


def _tree_digest(root):
    digests = {}
    for dirpath, _, filenames in os.walk(root):
        for filename in filenames:
            path = os.path.join(dirpath, filename)
            with open(path, "rb") as fh:
                digests[os.path.relpath(path, root)] = hashlib.sha256(fh.read()).hexdigest()
    return digests


def test_cli_build_chain_end_to_end_under_budget_and_reproducible(tmp_path):
    config_path = str(tmp_path / "config.json")
    fixture_config(str(tmp_path / "artifacts")).save(config_path)
    runner = CliRunner()
    chain = (
        ["ingest"],
        ["build-graphs"],
        ["gen-triplets"],
        ["train"],
        ["feedback", "--exercise", "ml-task", "--text", FIRST_ATTEMPT, "--mode", "full"],
    )

    started = time.perf_counter()
    for verb in chain:
        outcome = runner.invoke(main, ["--config", config_path, *verb])
        assert outcome.exit_code == 0, f"{verb[0]} failed: {outcome.output}"
    elapsed = time.perf_counter() - started
    assert FIRST_MESSAGE in outcome.output
    assert elapsed < 60.0

    before = _tree_digest(tmp_path / "artifacts")
    for verb in chain[:-1]:
        outcome = runner.invoke(main, ["--config", config_path, *verb])
        assert outcome.exit_code == 0, f"rerun {verb[0]} failed: {outcome.output}"
    assert _tree_digest(tmp_path / "artifacts") == before


def test_full_mode_reports_missing_as_most_frequent_diagnosis(engine):
    report = evaluate_modes(engine, load_eval_records(EVAL_PATH))
    assert report.modes["full"].most_frequent_kind() == MISSING
