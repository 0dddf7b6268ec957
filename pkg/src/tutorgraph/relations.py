"""Coarse discourse relations between adjacent EDUs.

Four top-level categories (Temporal, Contingency, Comparison,
Expansion) with an explicit/implicit split: a pair joined by a cue word
is routed through the cue rules and the explicit decoder, a pair
without one through the implicit decoder. Each decoder is a linear
softmax over the concatenated pair embedding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .embeddings import EmbeddingVector

TEMPORAL = "Temporal"
CONTINGENCY = "Contingency"
COMPARISON = "Comparison"
EXPANSION = "Expansion"

# fixed order; ties in softmax argmax resolve to the earliest entry
CATEGORIES = (TEMPORAL, CONTINGENCY, COMPARISON, EXPANSION)

EXPLICIT = "Explicit"
IMPLICIT = "Implicit"

# cue word -> category, applied as a rule on the explicit path
CUE_CATEGORIES = {
    "because": CONTINGENCY,
    "if": CONTINGENCY,
    "since": CONTINGENCY,
    "to": EXPANSION,
    "and": EXPANSION,
    "also": EXPANSION,
    "but": COMPARISON,
    "while": COMPARISON,
    "although": COMPARISON,
    "when": TEMPORAL,
    "after": TEMPORAL,
    "before": TEMPORAL,
    "then": TEMPORAL,
}

_PUNCT = set(".,!?;:\"')(][")


@dataclass(frozen=True)
class DiscourseRelation:
    category: str
    explicitness: str
    confidence: float  # softmax probability of the chosen category

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category: {self.category}")
        if self.explicitness not in (EXPLICIT, IMPLICIT):
            raise ValueError(f"unknown explicitness: {self.explicitness}")


def _content_words(text: str) -> list[str]:
    return [w.lower() for w in text.split() if w and not all(ch in _PUNCT for ch in w)]


def _strip_edge_punct(word: str) -> str:
    return word.strip("".join(_PUNCT))


def detect_cue(left_text: str, right_text: str) -> tuple[str, str] | None:
    """Find a cue word at the start of the right EDU or the end of the left.

    Returns (cue, category) or None. The right-EDU start is checked
    first; discourse cues are overwhelmingly clause-initial.
    """
    right_words = _content_words(right_text)
    if right_words:
        first = _strip_edge_punct(right_words[0])
        if first in CUE_CATEGORIES:
            return first, CUE_CATEGORIES[first]
    left_words = _content_words(left_text)
    if left_words:
        last = _strip_edge_punct(left_words[-1])
        if last in CUE_CATEGORIES:
            return last, CUE_CATEGORIES[last]
    return None


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def _check_unit(vec: EmbeddingVector, side: str) -> None:
    norm = float(np.linalg.norm(vec.values))
    if abs(norm - 1.0) > 1e-6:
        raise ValueError(f"{side} embedding is not unit norm: {norm}")


@dataclass
class RelationDecoder:
    """Two linear maps from the concatenated pair embedding to 4 logits."""

    dim: int
    implicit_weights: np.ndarray = field(default=None)  # (4, 2*dim)
    implicit_bias: np.ndarray = field(default=None)  # (4,)
    explicit_weights: np.ndarray = field(default=None)
    explicit_bias: np.ndarray = field(default=None)

    def __post_init__(self):
        two_d = 2 * self.dim
        if self.implicit_weights is None:
            self.implicit_weights = np.zeros((len(CATEGORIES), two_d))
        if self.implicit_bias is None:
            self.implicit_bias = np.zeros(len(CATEGORIES))
        if self.explicit_weights is None:
            self.explicit_weights = np.zeros((len(CATEGORIES), two_d))
        if self.explicit_bias is None:
            self.explicit_bias = np.zeros(len(CATEGORIES))
        for arr, shape in (
            (self.implicit_weights, (len(CATEGORIES), two_d)),
            (self.implicit_bias, (len(CATEGORIES),)),
            (self.explicit_weights, (len(CATEGORIES), two_d)),
            (self.explicit_bias, (len(CATEGORIES),)),
        ):
            if arr.shape != shape:
                raise ValueError(f"weight shape {arr.shape} != expected {shape}")

    def _probs(self, branch: str, x: np.ndarray) -> np.ndarray:
        if branch == EXPLICIT:
            return _softmax(self.explicit_weights @ x + self.explicit_bias)
        return _softmax(self.implicit_weights @ x + self.implicit_bias)


def classify_relation(
    decoder: RelationDecoder | None,
    left: EmbeddingVector,
    right: EmbeddingVector,
    left_text: str = "",
    right_text: str = "",
) -> DiscourseRelation:
    """Classify the relation holding between two adjacent EDUs.

    A detected cue fixes the category by rule and the explicit decoder
    only supplies the confidence; otherwise the implicit decoder picks
    the category (ties broken by the fixed category order).
    """
    if decoder is None:
        raise ValueError("relation decoder is untrained; train or load one first")
    _check_unit(left, "left")
    _check_unit(right, "right")
    if left.dim != decoder.dim or right.dim != decoder.dim:
        raise ValueError("embedding dimension does not match decoder")
    x = np.concatenate([left.values, right.values])
    cue = detect_cue(left_text, right_text)
    if cue is not None:
        _, category = cue
        probs = decoder._probs(EXPLICIT, x)
        return DiscourseRelation(category, EXPLICIT, float(probs[CATEGORIES.index(category)]))
    probs = decoder._probs(IMPLICIT, x)
    best = int(np.argmax(probs))  # argmax returns the first max: fixed tie order
    return DiscourseRelation(CATEGORIES[best], IMPLICIT, float(probs[best]))


@dataclass(frozen=True)
class RelationSample:
    left: EmbeddingVector
    right: EmbeddingVector
    explicitness: str
    category: str


def load_relation_samples(path: str, embed) -> list[tuple[str, str, str, str]]:
    """Parse a relation training file: ``<left>\\t<right>\\t<Explicit|Implicit>\\t<category>``."""
    rows: list[tuple[str, str, str, str]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 tab-separated fields")
            left, right, explicitness, category = parts
            if explicitness not in (EXPLICIT, IMPLICIT):
                raise ValueError(f"{path}:{lineno}: bad explicitness {explicitness!r}")
            if category not in CATEGORIES:
                raise ValueError(f"{path}:{lineno}: bad category {category!r}")
            rows.append((left, right, explicitness, category))
    return rows


def _branch_loss_grad(
    weights: np.ndarray, bias: np.ndarray, xs: np.ndarray, ys: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy and analytic gradients for one linear branch."""
    logits = xs @ weights.T + bias
    probs = _softmax(logits)
    n = xs.shape[0]
    loss = -float(np.mean(np.log(probs[np.arange(n), ys] + 1e-12)))
    delta = probs
    delta[np.arange(n), ys] -= 1.0
    delta /= n
    return loss, delta.T @ xs, delta.sum(axis=0)


def train_relation_decoder(
    samples: list[RelationSample],
    epochs: int = 30,
    lr: float = 0.5,
    batch_size: int = 16,
    seed: int = 0,
) -> RelationDecoder:
    """Train both decoder branches with seeded mini-batch gradient descent.

    A branch with no samples keeps its zero initialization.
    """
    if not samples:
        raise ValueError("no relation samples to train on")
    dim = samples[0].left.dim
    decoder = RelationDecoder(dim=dim)
    rng = np.random.default_rng(seed)
    for branch in (IMPLICIT, EXPLICIT):
        branch_samples = [s for s in samples if s.explicitness == branch]
        if not branch_samples:
            continue
        xs = np.stack([np.concatenate([s.left.values, s.right.values]) for s in branch_samples])
        ys = np.array([CATEGORIES.index(s.category) for s in branch_samples])
        if branch == IMPLICIT:
            weights, bias = decoder.implicit_weights, decoder.implicit_bias
        else:
            weights, bias = decoder.explicit_weights, decoder.explicit_bias
        n = xs.shape[0]
        for _ in range(epochs):
            order = rng.permutation(n)
            for start in range(0, n, batch_size):
                idx = order[start : start + batch_size]
                _, grad_w, grad_b = _branch_loss_grad(weights, bias, xs[idx], ys[idx])
                weights -= lr * grad_w
                bias -= lr * grad_b
    return decoder


def relation_loss_and_grads(
    decoder: RelationDecoder, branch: str, samples: list[RelationSample]
) -> tuple[float, np.ndarray, np.ndarray]:
    """Loss plus gradients for one branch; exposed for finite-difference checks."""
    xs = np.stack([np.concatenate([s.left.values, s.right.values]) for s in samples])
    ys = np.array([CATEGORIES.index(s.category) for s in samples])
    if branch == IMPLICIT:
        return _branch_loss_grad(decoder.implicit_weights.copy(), decoder.implicit_bias.copy(), xs, ys)
    return _branch_loss_grad(decoder.explicit_weights.copy(), decoder.explicit_bias.copy(), xs, ys)


def label_boundary_relations(
    decoder: RelationDecoder | None,
    edu_texts: list[str],
    edu_embeddings: list[EmbeddingVector],
) -> list[DiscourseRelation]:
    """Classify the relation at every boundary of a segmented solution."""
    if len(edu_texts) < 2:
        raise ValueError("need at least two EDUs to label boundary relations")
    if len(edu_texts) != len(edu_embeddings):
        raise ValueError("texts and embeddings must align")
    out: list[DiscourseRelation] = []
    for i in range(1, len(edu_texts)):
        out.append(
            classify_relation(
                decoder,
                edu_embeddings[i - 1],
                edu_embeddings[i],
                edu_texts[i - 1],
                edu_texts[i],
            )
        )
    return out


def boundary_cue_categories(edu_texts: list[str]) -> list[str | None]:
    """Per-boundary cue category, or None where no cue is present."""
    if len(edu_texts) < 2:
        raise ValueError("need at least two EDUs to inspect boundaries")
    out: list[str | None] = []
    for i in range(1, len(edu_texts)):
        cue = detect_cue(edu_texts[i - 1], edu_texts[i])
        out.append(cue[1] if cue else None)
    return out


def strip_cue(left_text: str, right_text: str) -> tuple[str, str] | None:
    """Remove the detected cue word from the pair it joins.

    Used for distant supervision of the implicit decoder: a cue-labeled
    pair with the cue deleted looks like an implicit pair whose category
    is known. Returns None when no cue is present.
    """
    hit = detect_cue(left_text, right_text)
    if hit is None:
        return None
    cue = hit[0]
    right_words = right_text.split()
    for i, word in enumerate(right_words):
        if word and all(ch in _PUNCT for ch in word):
            continue
        if _strip_edge_punct(word.lower()) == cue:
            return left_text, " ".join(right_words[:i] + right_words[i + 1 :])
        break
    left_words = left_text.split()
    for i in range(len(left_words) - 1, -1, -1):
        word = left_words[i]
        if word and all(ch in _PUNCT for ch in word):
            continue
        if _strip_edge_punct(word.lower()) == cue:
            return " ".join(left_words[:i] + left_words[i + 1 :]), right_text
        break
    return None


def decoder_to_json(decoder: RelationDecoder) -> str:
    doc = {
        "dim": decoder.dim,
        "implicit_weights": [float(v) for v in decoder.implicit_weights.ravel()],
        "implicit_bias": [float(v) for v in decoder.implicit_bias],
        "explicit_weights": [float(v) for v in decoder.explicit_weights.ravel()],
        "explicit_bias": [float(v) for v in decoder.explicit_bias],
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def decoder_from_json(text: str) -> RelationDecoder:
    doc = json.loads(text)
    dim = int(doc["dim"])
    shape = (len(CATEGORIES), 2 * dim)
    return RelationDecoder(
        dim=dim,
        implicit_weights=np.array(doc["implicit_weights"], dtype=np.float64).reshape(shape),
        implicit_bias=np.array(doc["implicit_bias"], dtype=np.float64),
        explicit_weights=np.array(doc["explicit_weights"], dtype=np.float64).reshape(shape),
        explicit_bias=np.array(doc["explicit_bias"], dtype=np.float64),
    )
