"""Text embeddings: a file-backed store with a deterministic hashed fallback.

The fallback embedding is fully specified so it can be reproduced
independently:

1. Lowercase the text.
2. Tokenize into maximal runs of ASCII alphanumeric characters
   (everything else is a separator).
3. The feature multiset is every token plus every contiguous
   3-character substring of every token.
4. Each feature is hashed with BLAKE2b (8-byte digest, big-endian)
   modulo the dimension to pick a bucket; bucket counts accumulate.
5. The count vector is L2-normalized.

Identical text therefore always embeds to the identical vector, with no
model download or network involved.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field

import numpy as np

DEFAULT_DIM = 128

SOURCE_BUILTIN = "builtin-hash"
SOURCE_STORE = "store"
SOURCE_EXTERNAL = "external"

_TOKEN_RE = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class EmbeddingVector:
    """A unit-norm vector plus a tag saying where it came from."""

    values: np.ndarray
    source: str = SOURCE_BUILTIN

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        norm = float(np.linalg.norm(values))
        if norm == 0.0:
            raise ValueError("embedding vector must be non-zero")
        # constructor normalizes so the unit-norm invariant always holds
        if abs(norm - 1.0) > 1e-9:
            values = values / norm
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


def _bucket(feature: str, dim: int) -> int:
    digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % dim


def hash_embed(text: str, dim: int = DEFAULT_DIM) -> EmbeddingVector:
    """Deterministic fallback embedding per the procedure in the module docstring."""
    tokens = _TOKEN_RE.findall(text.lower())
    if not tokens:
        raise ValueError("cannot embed empty text as a unit vector")
    counts = np.zeros(dim, dtype=np.float64)
    for token in tokens:
        counts[_bucket(token, dim)] += 1.0
        for i in range(len(token) - 2):
            counts[_bucket(token[i : i + 3], dim)] += 1.0
    return EmbeddingVector(counts, source=SOURCE_BUILTIN)


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    # both sides are unit norm, so the dot product is the cosine
    return float(np.dot(a.values, b.values))


def load_store(path: str, dim: int | None = None) -> dict[str, EmbeddingVector]:
    """Load a TSV embedding store: ``<text>\\t<v1 v2 ... vd>`` per line.

    Vectors are normalized on load. All rows must share one dimension;
    if ``dim`` is given it is enforced as well.
    """
    store: dict[str, EmbeddingVector] = {}
    expected = dim
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0]:
                raise ValueError(f"{path}:{lineno}: expected <text>\\t<values>")
            text, raw_values = parts
            try:
                values = np.array([float(v) for v in raw_values.split()], dtype=np.float64)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-numeric vector component") from exc
            if values.size == 0:
                raise ValueError(f"{path}:{lineno}: empty vector")
            if expected is None:
                expected = int(values.size)
            elif values.size != expected:
                raise ValueError(
                    f"{path}:{lineno}: dimension mismatch: got {values.size}, expected {expected}"
                )
            store[text] = EmbeddingVector(values, source=SOURCE_STORE)
    return store


@dataclass
class Embedder:
    """Embedding engine: exact-text store lookups with hashed fallback.

    The dimension is fixed per engine; store entries of a different
    dimension are rejected when the store is attached.
    """

    dim: int = DEFAULT_DIM
    store: dict[str, EmbeddingVector] = field(default_factory=dict)

    def __post_init__(self):
        for text, vec in self.store.items():
            if vec.dim != self.dim:
                raise ValueError(
                    f"dimension mismatch for store entry {text!r}: {vec.dim} != {self.dim}"
                )

    @classmethod
    def with_store_file(cls, path: str, dim: int | None = None) -> "Embedder":
        store = load_store(path, dim=dim)
        actual = dim if dim is not None else next(iter(store.values())).dim if store else DEFAULT_DIM
        return cls(dim=actual, store=store)

    def embed(self, text: str) -> EmbeddingVector:
        hit = self.store.get(text)
        if hit is not None:
            return hit
        return hash_embed(text, self.dim)
