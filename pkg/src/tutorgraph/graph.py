"""Per-exercise concept graphs built by clustering solution EDUs.

Every EDU of every ingested solution is embedded and clustered with
DBSCAN under cosine distance. Clusters become nodes; adjacent EDU pairs
become relation-typed weighted edges between the clusters they landed
in. Reference-solution outliers are kept as singleton nodes (a concept
a reference answer mentions is still a concept), student outliers are
dropped as noise.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .embeddings import EmbeddingVector
from .relations import CATEGORIES

OUTLIER = -1

REFERENCE = "reference"
STUDENT = "student"


def cosine_distances(points: list[EmbeddingVector]) -> np.ndarray:
    stacked = np.stack([p.values for p in points])
    dist = 1.0 - stacked @ stacked.T
    # float fuzz can push identical unit vectors slightly below zero
    np.clip(dist, 0.0, 2.0, out=dist)
    return dist


def dbscan(points: list[EmbeddingVector], eps: float, min_samples: int) -> list[int]:
    """Density clustering under cosine distance, deterministically ordered.

    min_samples counts the point itself. Points are scanned in
    ascending index order and cluster ids are assigned in order of
    creation, so border points join the first core cluster that
    reaches them.
    """
    n = len(points)
    if n == 0:
        return []
    dist = cosine_distances(points)
    neighbor_lists = [np.flatnonzero(dist[i] <= eps) for i in range(n)]
    labels = [OUTLIER] * n
    visited = [False] * n
    next_cluster = 0
    for i in range(n):
        if visited[i]:
            continue
        visited[i] = True
        if neighbor_lists[i].size < min_samples:
            continue
        cluster = next_cluster
        next_cluster += 1
        labels[i] = cluster
        queue = deque(int(j) for j in neighbor_lists[i] if j != i)
        while queue:
            j = queue.popleft()
            if labels[j] == OUTLIER:
                labels[j] = cluster
            elif labels[j] != cluster:
                continue
            if visited[j]:
                continue
            visited[j] = True
            if neighbor_lists[j].size >= min_samples:
                queue.extend(int(k) for k in neighbor_lists[j] if labels[k] == OUTLIER or not visited[k])
    return labels


@dataclass(frozen=True)
class ClusterMember:
    text: str
    source: str  # reference | student
    position: int
    solution_len: int
    vector: EmbeddingVector


@dataclass
class ClusterNode:
    node_id: int
    members: list[ClusterMember]
    centroid: EmbeddingVector
    is_start: bool
    is_terminal: bool
    contains_reference: bool
    promoted_outlier: bool = False

    def representative_text(self) -> str:
        """Member text shown when this concept is rendered in a suggestion.

        Texts backed by the most reference members win; ties go to the
        earliest member.
        """
        ref_counts: dict[str, int] = {}
        for m in self.members:
            if m.source == REFERENCE:
                ref_counts[m.text] = ref_counts.get(m.text, 0) + 1
        best_idx = 0
        best_count = -1
        for idx, m in enumerate(self.members):
            count = ref_counts.get(m.text, 0)
            if count > best_count:
                best_count = count
                best_idx = idx
        return self.members[best_idx].text


@dataclass(frozen=True)
class GraphEdge:
    source: int
    target: int
    category: str
    weight: int


@dataclass(frozen=True)
class ParsedSolution:
    """A segmented, embedded solution ready for graph building."""

    source: str
    edu_texts: list[str]
    embeddings: list[EmbeddingVector]
    relations: list[str]  # category per internal boundary, len == len(edus) - 1

    def __post_init__(self):
        if self.source not in (REFERENCE, STUDENT):
            raise ValueError(f"unknown solution source: {self.source}")
        if len(self.edu_texts) != len(self.embeddings):
            raise ValueError("texts and embeddings must align")
        if len(self.relations) != max(0, len(self.edu_texts) - 1):
            raise ValueError("need one relation per EDU boundary")
        for rel in self.relations:
            if rel not in CATEGORIES:
                raise ValueError(f"unknown relation category: {rel}")


@dataclass
class ExerciseGraph:
    exercise_id: str
    eps: float
    min_samples: int
    nodes: dict[int, ClusterNode] = field(default_factory=dict)
    edges: list[GraphEdge] = field(default_factory=list)

    def successors(self, node_id: int) -> list[int]:
        seen: list[int] = []
        for e in self.edges:
            if e.source == node_id and e.target not in seen:
                seen.append(e.target)
        return seen

    def predecessors(self, node_id: int) -> list[int]:
        seen: list[int] = []
        for e in self.edges:
            if e.target == node_id and e.source not in seen:
                seen.append(e.source)
        return seen

    def out_edges(self, node_id: int) -> list[GraphEdge]:
        return [e for e in self.edges if e.source == node_id]

    def in_edges(self, node_id: int) -> list[GraphEdge]:
        return [e for e in self.edges if e.target == node_id]

    def edge_category(self, source: int, target: int) -> str | None:
        """Dominant relation between two nodes: max weight, ties by category order."""
        best: GraphEdge | None = None
        for e in self.edges:
            if e.source == source and e.target == target:
                if (
                    best is None
                    or e.weight > best.weight
                    or (e.weight == best.weight and CATEGORIES.index(e.category) < CATEGORIES.index(best.category))
                ):
                    best = e
        return best.category if best else None

    def start_nodes(self) -> list[int]:
        return [nid for nid, n in sorted(self.nodes.items()) if n.is_start]

    def terminal_nodes(self) -> list[int]:
        return [nid for nid, n in sorted(self.nodes.items()) if n.is_terminal]


def build_graph(
    exercise_id: str,
    solutions: list[ParsedSolution],
    eps: float = 0.15,
    min_samples: int = 2,
) -> ExerciseGraph:
    """Cluster all solution EDUs and connect adjacent pairs with typed edges."""
    if not any(s.source == REFERENCE for s in solutions):
        raise ValueError(f"exercise {exercise_id!r} needs reference answers")
    flat: list[tuple[ParsedSolution, int]] = []
    points: list[EmbeddingVector] = []
    for sol in solutions:
        for idx, vec in enumerate(sol.embeddings):
            flat.append((sol, idx))
            points.append(vec)
    labels = dbscan(points, eps, min_samples) if points else []

    # promote reference-sourced outliers to singleton nodes, drop student ones
    node_of_point: list[int | None] = [None] * len(points)
    next_node = (max(labels) + 1) if labels and max(labels) >= 0 else 0
    for i, label in enumerate(labels):
        if label != OUTLIER:
            node_of_point[i] = label
        elif flat[i][0].source == REFERENCE:
            node_of_point[i] = next_node
            next_node += 1

    members_by_node: dict[int, list[ClusterMember]] = {}
    promoted: set[int] = set()
    for i, node_id in enumerate(node_of_point):
        if node_id is None:
            continue
        sol, edu_idx = flat[i]
        member = ClusterMember(
            text=sol.edu_texts[edu_idx],
            source=sol.source,
            position=edu_idx,
            solution_len=len(sol.edu_texts),
            vector=points[i],
        )
        members_by_node.setdefault(node_id, []).append(member)
        if labels[i] == OUTLIER:
            promoted.add(node_id)

    graph = ExerciseGraph(exercise_id=exercise_id, eps=eps, min_samples=min_samples)
    for node_id in sorted(members_by_node):
        members = members_by_node[node_id]
        start_frac = sum(m.position == 0 for m in members) / len(members)
        terminal_frac = sum(m.position == m.solution_len - 1 for m in members) / len(members)
        summed = np.sum([m.vector.values for m in members], axis=0)
        if float(np.linalg.norm(summed)) < 1e-12:
            centroid = members[0].vector
        else:
            centroid = EmbeddingVector(summed, source="external")
        graph.nodes[node_id] = ClusterNode(
            node_id=node_id,
            members=members,
            centroid=centroid,
            is_start=start_frac > 0.5,
            is_terminal=terminal_frac > 0.5,
            contains_reference=any(m.source == REFERENCE for m in members),
            promoted_outlier=node_id in promoted,
        )

    # edges from adjacent pairs; pairs touching a dropped outlier are skipped
    weights: dict[tuple[int, int, str], int] = {}
    offset = 0
    for sol in solutions:
        count = len(sol.edu_texts)
        for b in range(count - 1):
            a_node = node_of_point[offset + b]
            b_node = node_of_point[offset + b + 1]
            if a_node is None or b_node is None:
                continue
            key = (a_node, b_node, sol.relations[b])
            weights[key] = weights.get(key, 0) + 1
        offset += count
    graph.edges = [
        GraphEdge(source=s, target=t, category=c, weight=w)
        for (s, t, c), w in sorted(weights.items(), key=lambda kv: (kv[0][0], kv[0][1], CATEGORIES.index(kv[0][2])))
    ]
    return graph


def assign_to_clusters(graph: ExerciseGraph, embeddings: list[EmbeddingVector]) -> list[int]:
    """Map each embedding to the node of its nearest member point.

    Distances above the graph's eps give OUTLIER; exact ties go to the
    lowest node id.
    """
    assignments: list[int] = []
    for vec in embeddings:
        best_node = OUTLIER
        best_dist = None
        for node_id in sorted(graph.nodes):
            for member in graph.nodes[node_id].members:
                if member.vector.dim != vec.dim:
                    raise ValueError("dimension mismatch between attempt and graph embeddings")
                d = 1.0 - float(np.dot(member.vector.values, vec.values))
                if d <= graph.eps and (best_dist is None or d < best_dist - 1e-12):
                    best_dist = d
                    best_node = node_id
        assignments.append(best_node)
    return assignments


def graph_to_json(graph: ExerciseGraph) -> str:
    doc = {
        "exercise_id": graph.exercise_id,
        "eps": graph.eps,
        "min_samples": graph.min_samples,
        "nodes": [
            {
                "id": node.node_id,
                "is_start": node.is_start,
                "is_terminal": node.is_terminal,
                "contains_reference": node.contains_reference,
                "promoted_outlier": node.promoted_outlier,
                "centroid": list(node.centroid.values),
                "members": [
                    {
                        "text": m.text,
                        "source": m.source,
                        "position": m.position,
                        "solution_len": m.solution_len,
                        "vector": list(m.vector.values),
                    }
                    for m in node.members
                ],
            }
            for _, node in sorted(graph.nodes.items())
        ],
        "edges": [
            {"source": e.source, "target": e.target, "category": e.category, "weight": e.weight}
            for e in graph.edges
        ],
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def graph_from_json(text: str) -> ExerciseGraph:
    doc = json.loads(text)
    graph = ExerciseGraph(
        exercise_id=doc["exercise_id"], eps=doc["eps"], min_samples=doc["min_samples"]
    )
    for node_doc in doc["nodes"]:
        members = [
            ClusterMember(
                text=m["text"],
                source=m["source"],
                position=m["position"],
                solution_len=m["solution_len"],
                vector=EmbeddingVector(np.array(m["vector"]), source="external"),
            )
            for m in node_doc["members"]
        ]
        graph.nodes[node_doc["id"]] = ClusterNode(
            node_id=node_doc["id"],
            members=members,
            centroid=EmbeddingVector(np.array(node_doc["centroid"]), source="external"),
            is_start=node_doc["is_start"],
            is_terminal=node_doc["is_terminal"],
            contains_reference=node_doc["contains_reference"],
            promoted_outlier=node_doc["promoted_outlier"],
        )
    graph.edges = [
        GraphEdge(source=e["source"], target=e["target"], category=e["category"], weight=e["weight"])
        for e in doc["edges"]
    ]
    return graph
