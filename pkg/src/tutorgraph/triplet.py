"""Transition samples and the triplet classifier.

The classifier judges whether one EDU can follow another within an
exercise: input is the two EDU embeddings concatenated with a one-hot
exercise marker, passed through one tanh hidden layer to a two-way
softmax. Training pairs are sampled from the exercise graph: edges give
positives, relation-matched non-successors give negatives, and special
start/terminal markers bound the answer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .embeddings import Embedder, EmbeddingVector
from .graph import ExerciseGraph

START_TOKEN = "<START>"
TERMINAL_TOKEN = "<TERMINAL>"

BRANCH_MATCHED = "matched"
BRANCH_RANDOM = "random"


def is_sentinel(text: str) -> bool:
    return text in (START_TOKEN, TERMINAL_TOKEN)


@dataclass(frozen=True)
class TripletSample:
    left: str
    right: str
    exercise_index: int
    label: int
    # bookkeeping, not serialized: which negative branch produced the
    # sample, and whether a random-branch draw hit a true successor
    branch: str | None = None
    coincidental_successor: bool = False

    def __post_init__(self):
        if self.left == TERMINAL_TOKEN:
            raise ValueError("terminal marker cannot be a left element")
        if self.right == START_TOKEN:
            raise ValueError("start marker cannot be a right element")
        if self.left == START_TOKEN and self.right == TERMINAL_TOKEN:
            raise ValueError("a sample cannot be two sentinels")
        if self.label not in (0, 1):
            raise ValueError("label must be 0 or 1")
        if self.exercise_index < 0:
            raise ValueError("exercise index must be non-negative")

    def group_key(self) -> tuple[str, str, int, int]:
        return (self.left, self.right, self.exercise_index, self.label)


def generate_samples(
    graph: ExerciseGraph,
    n: int,
    exercise_index: int,
    seed: int = 0,
    random_branch_rate: float = 0.2,
) -> list[TripletSample]:
    """Draw n/2 positive and n/2 negative transition samples from a graph.

    Positives follow edges (cluster drawn by member count, successor by
    edge weight); negatives pair a cluster with a relation-matched
    non-successor, or with probability ``random_branch_rate`` a fully
    random cluster. Start/terminal clusters additionally emit boundary
    samples against the sentinel markers.
    """
    if n % 2 != 0:
        raise ValueError("sample count must be even")
    node_ids = sorted(graph.nodes)
    if not node_ids:
        raise ValueError("graph has nothing to sample")
    has_boundaries = any(graph.nodes[i].is_start or graph.nodes[i].is_terminal for i in node_ids)
    if not graph.edges and not has_boundaries:
        raise ValueError("graph has nothing to sample: no edges and no start/terminal nodes")
    if not graph.edges:
        transition_possible = False
    else:
        transition_possible = True

    rng = np.random.default_rng(seed)
    counts = np.array([len(graph.nodes[i].members) for i in node_ids], dtype=np.float64)
    probs = counts / counts.sum()

    def member_text(node_id: int) -> str:
        members = graph.nodes[node_id].members
        return members[int(rng.integers(0, len(members)))].text

    def draw_cluster() -> int:
        return node_ids[int(rng.choice(len(node_ids), p=probs))]

    incoming_categories: dict[int, set[str]] = {i: set() for i in node_ids}
    for e in graph.edges:
        incoming_categories[e.target].add(e.category)

    positives: list[TripletSample] = []
    negatives: list[TripletSample] = []
    half = n // 2
    guard = 0
    while len(positives) < half or len(negatives) < half:
        guard += 1
        if guard > 200 * n + 1000:
            raise RuntimeError("sampling failed to make progress; graph too degenerate")
        c = draw_cluster()
        node = graph.nodes[c]
        succs = graph.successors(c)

        if transition_possible and succs:
            if len(positives) < half:
                weights = np.array(
                    [sum(e.weight for e in graph.out_edges(c) if e.target == s) for s in succs],
                    dtype=np.float64,
                )
                target = succs[int(rng.choice(len(succs), p=weights / weights.sum()))]
                positives.append(
                    TripletSample(member_text(c), member_text(target), exercise_index, 1)
                )
            if len(negatives) < half:
                neg = _transition_negative(
                    graph, c, node_ids, incoming_categories, rng, exercise_index, random_branch_rate
                )
                if neg is not None:
                    negatives.append(neg)

        if node.is_start:
            if len(positives) < half:
                positives.append(TripletSample(START_TOKEN, member_text(c), exercise_index, 1))
            if len(negatives) < half:
                other = draw_cluster()
                negatives.append(
                    TripletSample(member_text(other), member_text(c), exercise_index, 0)
                )
        if node.is_terminal:
            if len(positives) < half:
                positives.append(TripletSample(member_text(c), TERMINAL_TOKEN, exercise_index, 1))
            if len(negatives) < half:
                other = draw_cluster()
                negatives.append(
                    TripletSample(member_text(c), member_text(other), exercise_index, 0)
                )
    return positives + negatives


def _transition_negative(
    graph: ExerciseGraph,
    c: int,
    node_ids: list[int],
    incoming_categories: dict[int, set[str]],
    rng: np.random.Generator,
    exercise_index: int,
    random_branch_rate: float,
) -> TripletSample | None:
    succs = set(graph.successors(c))
    if rng.random() < random_branch_rate:
        other = node_ids[int(rng.choice(len(node_ids)))]
        return TripletSample(
            _member(graph, c, rng),
            _member(graph, other, rng),
            exercise_index,
            0,
            branch=BRANCH_RANDOM,
            coincidental_successor=other in succs,
        )
    out = graph.out_edges(c)
    category = out[int(rng.integers(0, len(out)))].category
    candidates = [x for x in node_ids if x not in succs and category in incoming_categories[x]]
    if not candidates:
        # relax the relation constraint; non-successorship is kept
        candidates = [x for x in node_ids if x not in succs]
    if not candidates:
        return None
    other = candidates[int(rng.integers(0, len(candidates)))]
    return TripletSample(
        _member(graph, c, rng),
        _member(graph, other, rng),
        exercise_index,
        0,
        branch=BRANCH_MATCHED,
    )


def _member(graph: ExerciseGraph, node_id: int, rng: np.random.Generator) -> str:
    members = graph.nodes[node_id].members
    return members[int(rng.integers(0, len(members)))].text


def split_dataset(
    samples: list[TripletSample],
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
) -> tuple[list[TripletSample], list[TripletSample], list[TripletSample]]:
    """Group-aware split: identical samples never straddle splits.

    Samples are grouped by (left, right, exercise, label). The three
    most frequent groups always go to train; remaining groups are
    assigned largest-first to whichever split is furthest below its
    target sample count.
    """
    if not samples:
        raise ValueError("no samples to split")
    groups: dict[tuple, list[TripletSample]] = {}
    for s in samples:
        groups.setdefault(s.group_key(), []).append(s)
    ordered = sorted(groups.items(), key=lambda kv: (-len(kv[1]), kv[0]))
    total = len(samples)
    targets = [f * total for f in fractions]
    assigned = [0.0, 0.0, 0.0]
    splits: tuple[list[TripletSample], ...] = ([], [], [])
    for rank, (_, rows) in enumerate(ordered):
        if rank < 3:
            dest = 0
        else:
            deficits = [targets[i] - assigned[i] for i in range(3)]
            dest = max(range(3), key=lambda i: (deficits[i], -i))
        splits[dest].extend(rows)
        assigned[dest] += len(rows)
    return splits


def save_samples(path: str, samples: list[TripletSample]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            for side in (s.left, s.right):
                if "\t" in side:
                    raise ValueError("sample text may not contain tabs")
            fh.write(f"{s.left}\t{s.right}\t{s.exercise_index}\t{s.label}\n")


def load_samples(path: str) -> list[TripletSample]:
    out: list[TripletSample] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 tab-separated fields")
            left, right, raw_idx, raw_label = parts
            try:
                idx = int(raw_idx)
                label = int(raw_label)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-integer index or label") from exc
            if label not in (0, 1):
                raise ValueError(f"{path}:{lineno}: label must be 0 or 1")
            out.append(TripletSample(left, right, idx, label))
    return out


# ---------------------------------------------------------------------------
# classifier


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


@dataclass
class TripletClassifier:
    """One-hidden-layer softmax classifier over embedded EDU pairs."""

    dim: int
    n_exercises: int
    hidden: int
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    start_vector: np.ndarray
    terminal_vector: np.ndarray

    @classmethod
    def create(cls, dim: int, n_exercises: int, hidden: int = 200, seed: int = 0) -> "TripletClassifier":
        if n_exercises < 1:
            raise ValueError("need at least one exercise")
        rng = np.random.default_rng(seed)
        input_dim = 2 * dim + n_exercises
        scale1 = 1.0 / np.sqrt(input_dim)
        scale2 = 1.0 / np.sqrt(hidden)
        start = rng.normal(size=dim)
        terminal = rng.normal(size=dim)
        return cls(
            dim=dim,
            n_exercises=n_exercises,
            hidden=hidden,
            w1=rng.uniform(-scale1, scale1, size=(hidden, input_dim)),
            b1=np.zeros(hidden),
            w2=rng.uniform(-scale2, scale2, size=(2, hidden)),
            b2=np.zeros(2),
            # markers are frozen random unit vectors, fixed at creation
            start_vector=start / np.linalg.norm(start),
            terminal_vector=terminal / np.linalg.norm(terminal),
        )

    @classmethod
    def zeros(cls, dim: int, n_exercises: int, hidden: int = 200, seed: int = 0) -> "TripletClassifier":
        model = cls.create(dim, n_exercises, hidden, seed)
        model.w1 = np.zeros_like(model.w1)
        model.b1 = np.zeros_like(model.b1)
        model.w2 = np.zeros_like(model.w2)
        model.b2 = np.zeros_like(model.b2)
        return model

    def side_vector(self, text: str, embedder: Embedder) -> np.ndarray:
        if text == START_TOKEN:
            return self.start_vector
        if text == TERMINAL_TOKEN:
            return self.terminal_vector
        return embedder.embed(text).values

    def input_vector(self, left: str, right: str, exercise_index: int, embedder: Embedder) -> np.ndarray:
        if left == TERMINAL_TOKEN:
            raise ValueError("terminal marker cannot be a left element")
        if right == START_TOKEN:
            raise ValueError("start marker cannot be a right element")
        if not 0 <= exercise_index < self.n_exercises:
            raise ValueError(
                f"exercise index {exercise_index} out of range for {self.n_exercises} exercises"
            )
        onehot = np.zeros(self.n_exercises)
        onehot[exercise_index] = 1.0
        return np.concatenate(
            [self.side_vector(left, embedder), self.side_vector(right, embedder), onehot]
        )

    def forward(self, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        hidden = np.tanh(xs @ self.w1.T + self.b1)
        probs = _softmax(hidden @ self.w2.T + self.b2)
        return probs, hidden

    def score(self, left: str, right: str, exercise_index: int, embedder: Embedder) -> float:
        x = self.input_vector(left, right, exercise_index, embedder)
        probs, _ = self.forward(x[None, :])
        return float(probs[0, 1])

    def parameters(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2]

    def to_json(self) -> str:
        doc = {
            "dim": self.dim,
            "n_exercises": self.n_exercises,
            "hidden": self.hidden,
            "w1": {"shape": list(self.w1.shape), "values": self.w1.ravel().tolist()},
            "b1": {"shape": list(self.b1.shape), "values": self.b1.tolist()},
            "w2": {"shape": list(self.w2.shape), "values": self.w2.ravel().tolist()},
            "b2": {"shape": list(self.b2.shape), "values": self.b2.tolist()},
            "start_vector": self.start_vector.tolist(),
            "terminal_vector": self.terminal_vector.tolist(),
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "TripletClassifier":
        doc = json.loads(text)

        def arr(key: str) -> np.ndarray:
            spec = doc[key]
            return np.array(spec["values"], dtype=np.float64).reshape(spec["shape"])

        return cls(
            dim=doc["dim"],
            n_exercises=doc["n_exercises"],
            hidden=doc["hidden"],
            w1=arr("w1"),
            b1=arr("b1"),
            w2=arr("w2"),
            b2=arr("b2"),
            start_vector=np.array(doc["start_vector"], dtype=np.float64),
            terminal_vector=np.array(doc["terminal_vector"], dtype=np.float64),
        )


def loss_and_grads(
    model: TripletClassifier, xs: np.ndarray, ys: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy over a batch with analytic gradients."""
    probs, hidden = model.forward(xs)
    n = xs.shape[0]
    loss = -float(np.mean(np.log(probs[np.arange(n), ys] + 1e-12)))
    delta = probs.copy()
    delta[np.arange(n), ys] -= 1.0
    delta /= n
    grad_w2 = delta.T @ hidden
    grad_b2 = delta.sum(axis=0)
    dhidden = (delta @ model.w2) * (1.0 - hidden**2)
    grad_w1 = dhidden.T @ xs
    grad_b1 = dhidden.sum(axis=0)
    return loss, {"w1": grad_w1, "b1": grad_b1, "w2": grad_w2, "b2": grad_b2}


def _design_matrix(
    model: TripletClassifier, samples: list[TripletSample], embedder: Embedder
) -> tuple[np.ndarray, np.ndarray]:
    xs = np.stack(
        [model.input_vector(s.left, s.right, s.exercise_index, embedder) for s in samples]
    )
    ys = np.array([s.label for s in samples], dtype=np.int64)
    return xs, ys


def accuracy(model: TripletClassifier, samples: list[TripletSample], embedder: Embedder) -> float:
    if not samples:
        raise ValueError("no samples to evaluate")
    xs, ys = _design_matrix(model, samples, embedder)
    probs, _ = model.forward(xs)
    return float(np.mean((probs[:, 1] >= 0.5).astype(np.int64) == ys))


def train(
    model: TripletClassifier,
    train_samples: list[TripletSample],
    val_samples: list[TripletSample],
    embedder: Embedder,
    epochs: int = 2,
    lr: float = 0.5,
    batch_size: int = 32,
    seed: int = 0,
) -> dict:
    """Seeded mini-batch gradient descent; returns per-epoch validation accuracy."""
    if not train_samples:
        raise ValueError("no training samples")
    xs, ys = _design_matrix(model, train_samples, embedder)
    rng = np.random.default_rng(seed)
    history: list[float] = []
    for _ in range(epochs):
        order = rng.permutation(len(train_samples))
        for startpos in range(0, len(train_samples), batch_size):
            idx = order[startpos : startpos + batch_size]
            _, grads = loss_and_grads(model, xs[idx], ys[idx])
            model.w1 -= lr * grads["w1"]
            model.b1 -= lr * grads["b1"]
            model.w2 -= lr * grads["w2"]
            model.b2 -= lr * grads["b2"]
        history.append(accuracy(model, val_samples, embedder) if val_samples else float("nan"))
    return {"val_accuracy_per_epoch": history}


def majority_rate(samples: list[TripletSample]) -> float:
    if not samples:
        raise ValueError("no samples")
    positives = sum(s.label for s in samples)
    return max(positives, len(samples) - positives) / len(samples)
