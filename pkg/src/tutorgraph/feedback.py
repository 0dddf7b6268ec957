"""Local-search feedback: candidates, diagnosis, rendered messages.

A student attempt is reduced to the sequence of its cluster-matched
EDUs. Candidate solutions are small edits of that sequence (swap in a
neighbor concept, insert a successor or predecessor, anchor against the
start/terminal markers). The transition classifier scores candidates by
averaging adjacent pair scores; the best candidate of the first
iteration is compared against the attempt to diagnose what the student
should change, and the diagnosis is rendered through a template table.

Also hosts the two comparison modes: minimal (constant retry message)
and cluster-based (echo matched concepts, fixed advice, no search).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

from .embeddings import Embedder, EmbeddingVector
from .graph import OUTLIER, ExerciseGraph, assign_to_clusters
from .relations import CATEGORIES, EXPANSION
from .triplet import START_TOKEN, TERMINAL_TOKEN, TripletClassifier

MISSING = "Missing"
EXCESS = "Excess"
CORRECT_RELATION = "CorrectRelation"
INCORRECT_RELATION = "IncorrectRelation"
ALREADY_CORRECT = "AlreadyCorrect"
NO_MATCH = "NoMatch"

DISPLAY_START = "⟨start⟩"
DISPLAY_TERMINAL = "⟨terminal⟩"

_ECHO_STRIP = ".,!?;:"

# scores one (left, right) pair of EDU texts or sentinel tokens
PairScorer = Callable[[str, str], float]


@dataclass(frozen=True)
class Element:
    """One slot of a candidate sequence: a matched EDU or a sentinel.

    cluster is None for sentinels. relation is the parsed discourse
    relation connecting this element to the EDU before it in the
    student's own text; graph-introduced elements carry None.
    """

    cluster: int | None
    text: str
    relation: str | None = None

    @property
    def is_sentinel(self) -> bool:
        return self.cluster is None

    def key(self) -> tuple:
        return (self.cluster, self.text)

    def display(self) -> str:
        if self.text == START_TOKEN:
            return DISPLAY_START
        if self.text == TERMINAL_TOKEN:
            return DISPLAY_TERMINAL
        return self.text


def start_element() -> Element:
    return Element(None, START_TOKEN)


def terminal_element() -> Element:
    return Element(None, TERMINAL_TOKEN)


@dataclass
class CandidateSolution:
    elements: list[Element]
    score: float | None = None

    def __post_init__(self):
        if not any(not e.is_sentinel for e in self.elements):
            raise ValueError("candidate needs at least one non-sentinel element")
        for pos, e in enumerate(self.elements):
            if e.text == START_TOKEN and pos != 0:
                raise ValueError("start marker only allowed at the head")
            if e.text == TERMINAL_TOKEN and pos != len(self.elements) - 1:
                raise ValueError("terminal marker only allowed at the tail")

    def key(self) -> tuple:
        return tuple(e.key() for e in self.elements)

    def display_text(self) -> str:
        return " ".join(e.display() for e in self.elements)


@dataclass(frozen=True)
class MatchedAttempt:
    """Cluster assignment of a segmented attempt.

    elements keeps only the EDUs that landed in a cluster; EDUs the
    graph cannot place carry no usable signal and are left out of the
    search, the same way graph building drops student outliers.
    assignments retains the per-EDU node id (or OUTLIER) for
    diagnostics.
    """

    edu_texts: list[str]
    assignments: list[int]
    elements: list[Element]


def match_attempt(
    graph: ExerciseGraph,
    edu_texts: list[str],
    embeddings: list[EmbeddingVector],
    relations: list[str],
) -> MatchedAttempt:
    if len(edu_texts) != len(embeddings):
        raise ValueError("texts and embeddings must align")
    if len(relations) != max(0, len(edu_texts) - 1):
        raise ValueError("need one relation per EDU boundary")
    assignments = assign_to_clusters(graph, embeddings)
    elements = []
    for idx, node_id in enumerate(assignments):
        if node_id == OUTLIER:
            continue
        relation = relations[idx - 1] if idx > 0 else None
        elements.append(Element(node_id, edu_texts[idx], relation))
    return MatchedAttempt(edu_texts=list(edu_texts), assignments=assignments, elements=elements)


def representative_element(graph: ExerciseGraph, node_id: int) -> Element:
    return Element(node_id, graph.nodes[node_id].representative_text())


def _neighbors(graph: ExerciseGraph, node_id: int) -> list[int]:
    seen: list[int] = []
    for other in graph.successors(node_id) + graph.predecessors(node_id):
        if other not in seen:
            seen.append(other)
    return seen


def generate_candidates(graph: ExerciseGraph, current: list[Element]) -> list[CandidateSolution]:
    """All single-edit candidates of a sequence, deduplicated, in a fixed order.

    Per matched element with cluster C: swap an adjacent EDU for each
    neighbor of C; insert each successor after / predecessor before C;
    if C opens reference answers, anchor the sequence at C behind the
    start marker (dropping what came before); if C closes them, cut
    after C and append the terminal marker.
    """
    current_key = tuple(e.key() for e in current)
    seen: set = {current_key}
    out: list[CandidateSolution] = []

    def emit(elements: list[Element]) -> None:
        key = tuple(e.key() for e in elements)
        if key in seen:
            return
        seen.add(key)
        out.append(CandidateSolution(elements))

    for i, elem in enumerate(current):
        if elem.is_sentinel:
            continue
        node_id = elem.cluster
        node = graph.nodes[node_id]
        neighbors = _neighbors(graph, node_id)
        for j in (i - 1, i + 1):
            if 0 <= j < len(current) and not current[j].is_sentinel:
                for other in neighbors:
                    swapped = list(current)
                    swapped[j] = representative_element(graph, other)
                    emit(swapped)
        for succ in graph.successors(node_id):
            grown = current[: i + 1] + [representative_element(graph, succ)] + current[i + 1 :]
            emit(grown)
        for pred in graph.predecessors(node_id):
            grown = current[:i] + [representative_element(graph, pred)] + current[i:]
            emit(grown)
        if node.is_start:
            emit([start_element(), representative_element(graph, node_id)] + list(current[i + 1 :]))
        if node.is_terminal:
            emit(list(current[:i]) + [representative_element(graph, node_id), terminal_element()])
    return out


def fanout_bound(graph: ExerciseGraph, length: int) -> int:
    """Upper bound on candidates one sequence of that length can generate."""
    per_node = 0
    for node_id in graph.nodes:
        per_node = max(per_node, len(graph.successors(node_id)) + len(graph.predecessors(node_id)))
    return length * (3 * per_node + 2)


def score_candidate(scorer: PairScorer, candidate: CandidateSolution) -> float:
    """Mean pair score over consecutive elements.

    A lone element is scored as if wrapped by both markers, otherwise
    one-EDU answers would be unscorable.
    """
    elems = candidate.elements
    if len(elems) == 1:
        return (scorer(START_TOKEN, elems[0].text) + scorer(elems[0].text, TERMINAL_TOKEN)) / 2.0
    total = 0.0
    for a, b in zip(elems, elems[1:]):
        total += scorer(a.text, b.text)
    return total / (len(elems) - 1)


def classifier_scorer(
    model: TripletClassifier, exercise_index: int, embedder: Embedder
) -> PairScorer:
    def scorer(left: str, right: str) -> float:
        return model.score(left, right, exercise_index, embedder)

    return scorer


@dataclass
class LocalSearchResult:
    first_best: CandidateSolution
    final_best: CandidateSolution
    trace: dict
    incumbent: CandidateSolution
    first_candidates: list[CandidateSolution]


def local_search(
    graph: ExerciseGraph,
    scorer: PairScorer,
    attempt: list[Element],
    alpha: float = 0.95,
    max_iters: int = 2,
) -> LocalSearchResult:
    """Hill-climb from the attempt; the first-iteration best drives diagnosis.

    The attempt is scored first and candidates must strictly beat the
    incumbent, so ties keep the student's own sequence. When the
    incumbent already clears alpha no candidates are generated at all.
    """
    if not attempt:
        raise ValueError("attempt matched no clusters")
    if any(e.is_sentinel for e in attempt):
        raise ValueError("attempt elements cannot be sentinels")
    incumbent = CandidateSolution(list(attempt))
    incumbent.score = score_candidate(scorer, incumbent)
    scored = 1
    bound = 1 + max_iters * fanout_bound(graph, len(attempt) + max_iters + 2)
    if incumbent.score >= alpha:
        trace = {
            "iterations": 0,
            "candidates_scored": scored,
            "top_score": incumbent.score,
            "scored_bound": bound,
        }
        return LocalSearchResult(incumbent, incumbent, trace, incumbent, [])

    current = incumbent
    first_best = incumbent
    first_candidates: list[CandidateSolution] = []
    iterations = 0
    for it in range(max_iters):
        candidates = generate_candidates(graph, current.elements)
        iterations = it + 1
        for cand in candidates:
            cand.score = score_candidate(scorer, cand)
            scored += 1
            if cand.score > current.score:
                current = cand
        if it == 0:
            first_best = current
            first_candidates = candidates
        if current.score >= alpha:
            break
    assert scored <= bound, "candidate fan-out exceeded its bound"
    trace = {
        "iterations": iterations,
        "candidates_scored": scored,
        "top_score": current.score,
        "scored_bound": bound,
    }
    return LocalSearchResult(first_best, current, trace, incumbent, first_candidates)


@dataclass(frozen=True)
class EditDiagnosis:
    kind: str
    detail: str | None
    affected: tuple = ()


def _lcs_anchor_pairs(a_ids: list[int], c_ids: list[int]) -> list[tuple[int, int]]:
    n, m = len(a_ids), len(c_ids)
    table = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        for j in range(m - 1, -1, -1):
            if a_ids[i] == c_ids[j]:
                table[i][j] = table[i + 1][j + 1] + 1
            else:
                table[i][j] = max(table[i + 1][j], table[i][j + 1])
    pairs: list[tuple[int, int]] = []
    i = j = 0
    while i < n and j < m:
        if a_ids[i] == c_ids[j]:
            pairs.append((i, j))
            i += 1
            j += 1
        elif table[i + 1][j] >= table[i][j + 1]:
            i += 1
        else:
            j += 1
    return pairs


def _relation_into(graph: ExerciseGraph, cand: list[Element], idx: int) -> str | None:
    if idx <= 0:
        return None
    prev = cand[idx - 1]
    if prev.cluster is None:
        return None
    return graph.edge_category(prev.cluster, cand[idx].cluster)


def _missing_detail(graph: ExerciseGraph, cand: list[Element], idx: int) -> str:
    relation = _relation_into(graph, cand, idx)
    if relation is None and idx + 1 < len(cand):
        relation = graph.edge_category(cand[idx].cluster, cand[idx + 1].cluster)
    return relation if relation is not None else EXPANSION


def diagnose(
    graph: ExerciseGraph, attempt: list[Element], first_best: CandidateSolution
) -> EditDiagnosis:
    """Compare the attempt against the first-iteration best candidate.

    Sequences are aligned by cluster id with a longest common
    subsequence; what only the candidate has is Missing, what only the
    attempt has is Excess, and a changed element is judged by whether
    the student's parsed relation matches the graph edge the candidate
    uses at that spot.
    """
    cand = [e for e in first_best.elements if not e.is_sentinel]
    anchors = _lcs_anchor_pairs([e.cluster for e in attempt], [e.cluster for e in cand])
    entries: list[dict] = []
    prev_a = prev_c = 0
    for ai, ci in anchors + [(len(attempt), len(cand))]:
        gap_a = range(prev_a, ai)
        gap_c = range(prev_c, ci)
        paired = min(len(gap_a), len(gap_c))
        for offset in range(paired):
            a_idx = prev_a + offset
            c_idx = prev_c + offset
            expected = _relation_into(graph, cand, c_idx)
            kind = CORRECT_RELATION if attempt[a_idx].relation == expected else INCORRECT_RELATION
            entries.append(
                {"kind": kind, "attempt_index": a_idx, "candidate_index": c_idx, "detail": expected}
            )
        for a_idx in range(prev_a + paired, ai):
            entries.append(
                {"kind": EXCESS, "attempt_index": a_idx, "candidate_index": None, "detail": None}
            )
        for c_idx in range(prev_c + paired, ci):
            entries.append(
                {
                    "kind": MISSING,
                    "attempt_index": None,
                    "candidate_index": c_idx,
                    "detail": _missing_detail(graph, cand, c_idx),
                }
            )
        prev_a, prev_c = ai + 1, ci + 1
    if not entries:
        return EditDiagnosis(ALREADY_CORRECT, None, ())
    for kind in (MISSING, INCORRECT_RELATION, CORRECT_RELATION, EXCESS):
        for entry in entries:
            if entry["kind"] == kind:
                return EditDiagnosis(kind, entry["detail"], tuple(entries))
    raise AssertionError("unreachable: entries carry unknown kinds")


TEMPLATE_KEYS = frozenset(
    [
        "echo_prefix",
        "excess",
        "correct_relation",
        "incorrect_relation",
        "already_correct",
        "no_match",
        "cluster_based",
    ]
    + [f"missing.{category}" for category in CATEGORIES]
)

DEFAULT_TEMPLATES = {
    "echo_prefix": "'{edu}' is correct.",
    "missing.Contingency": "Try supplying a reason for this idea.",
    "missing.Expansion": "Try adding more detail to your answer.",
    "missing.Comparison": "Try contrasting this with the alternative.",
    "missing.Temporal": "Try describing when or in what order this happens.",
    "excess": "Parts of your answer may be unnecessary. Try shortening it.",
    "correct_relation": "You have the right kind of answer, but part of it doesn't match. Try revising that part.",
    "incorrect_relation": "The way your ideas connect doesn't look right. Try relating them differently.",
    "already_correct": "That's correct!",
    "no_match": "That's not correct. Try again!",
    "cluster_based": "Try re-wording the other parts of your answer or adding additional details",
}


def validate_templates(templates: dict) -> dict:
    missing = sorted(TEMPLATE_KEYS - set(templates))
    if missing:
        raise ValueError(f"missing template keys: {', '.join(missing)}")
    return templates


def load_templates(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or not all(isinstance(v, str) for v in doc.values()):
        raise ValueError(f"{path}: template file must map keys to strings")
    return validate_templates(doc)


def _echo(correct_edus: list[str], templates: dict) -> list[str]:
    prefix = templates["echo_prefix"]
    return [prefix.format(edu=text.rstrip(_ECHO_STRIP)) for text in correct_edus]


def render_feedback(diagnosis: EditDiagnosis, correct_edus: list[str], templates: dict) -> str:
    validate_templates(templates)
    if diagnosis.kind == ALREADY_CORRECT:
        return templates["already_correct"]
    if diagnosis.kind == NO_MATCH:
        return templates["no_match"]
    if diagnosis.kind == MISSING:
        body = templates[f"missing.{diagnosis.detail}"]
    elif diagnosis.kind == EXCESS:
        body = templates["excess"]
    elif diagnosis.kind == CORRECT_RELATION:
        body = templates["correct_relation"]
    elif diagnosis.kind == INCORRECT_RELATION:
        body = templates["incorrect_relation"]
    else:
        raise ValueError(f"unknown diagnosis kind: {diagnosis.kind}")
    return " ".join(_echo(correct_edus, templates) + [body])


def correct_edu_texts(graph: ExerciseGraph, elements: list[Element]) -> list[str]:
    return [
        e.text
        for e in elements
        if not e.is_sentinel and graph.nodes[e.cluster].contains_reference
    ]


@dataclass
class FeedbackResult:
    diagnosis: EditDiagnosis
    correct_edus: list[str]
    message: str
    trace: dict
    candidates: list[dict] = field(default_factory=list)  # top scored, descending


_EMPTY_TRACE = {"iterations": 0, "candidates_scored": 0, "top_score": 0.0, "scored_bound": 0}


def full_feedback(
    graph: ExerciseGraph,
    scorer: PairScorer,
    attempt: MatchedAttempt,
    templates: dict,
    alpha: float = 0.95,
    max_iters: int = 2,
) -> FeedbackResult:
    validate_templates(templates)
    if not attempt.elements:
        diagnosis = EditDiagnosis(NO_MATCH, None, ())
        return FeedbackResult(diagnosis, [], templates["no_match"], dict(_EMPTY_TRACE))
    result = local_search(graph, scorer, attempt.elements, alpha=alpha, max_iters=max_iters)
    diagnosis = diagnose(graph, attempt.elements, result.first_best)
    correct = correct_edu_texts(graph, attempt.elements)
    message = render_feedback(diagnosis, correct, templates)
    pool = [result.incumbent] + result.first_candidates
    ranked = sorted(pool, key=lambda c: -(c.score if c.score is not None else 0.0))
    top = [{"text": c.display_text(), "score": c.score} for c in ranked[:5]]
    return FeedbackResult(diagnosis, correct, message, result.trace, top)


def minimal_feedback(templates: dict) -> FeedbackResult:
    """Constant retry message, independent of the attempt."""
    validate_templates(templates)
    return FeedbackResult(EditDiagnosis(NO_MATCH, None, ()), [], templates["no_match"], dict(_EMPTY_TRACE))


def cluster_based_feedback(
    graph: ExerciseGraph, attempt: MatchedAttempt, templates: dict
) -> FeedbackResult:
    """Echo reference-matched EDUs with fixed advice; no search, no classifier."""
    validate_templates(templates)
    correct = correct_edu_texts(graph, attempt.elements)
    if correct:
        message = " ".join(_echo(correct, templates) + [templates["cluster_based"]])
    else:
        message = templates["no_match"]
    return FeedbackResult(
        EditDiagnosis(NO_MATCH, None, ()), correct, message, dict(_EMPTY_TRACE)
    )
