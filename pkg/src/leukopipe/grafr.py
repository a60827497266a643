"""Graph-based feature reconstruction.

Feature vectors become nodes of a fully connected graph whose edges carry
Euclidean distances; similarities are their reciprocals. Every node is
then rewritten as the similarity-weighted convex combination of all other
nodes, and the nodes with the highest mean similarity form the hidden set
used for diagnostics.

Accumulations run in ascending node order so that results are bit-equal
to a naive double-loop evaluation; batches are small enough that this
costs nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, GraphError, ParameterError

ZERO_DISTANCE_EPS = 1e-12


@dataclass(frozen=True)
class FeatureGraph:
    nodes: np.ndarray          # (n, d) feature rows
    edge_weights: np.ndarray   # (n, n) symmetric distances, zero diagonal
    similarities: np.ndarray   # (n, n) reciprocal distances, zero diagonal (unused)


@dataclass(frozen=True)
class HiddenSet:
    """Indices ordered by descending mean similarity, ties by ascending index."""

    indices: tuple[int, ...]
    scores: tuple[float, ...]


@dataclass(frozen=True)
class GrafrResult:
    reconstructed: np.ndarray
    hidden: HiddenSet
    mean_similarities: np.ndarray   # per node, for diagnostics


def build_graph(features: np.ndarray) -> FeatureGraph:
    """Fully connected graph over the rows of ``features``.

    Distances are plain Euclidean; similarity is ``1 / max(d, eps)`` so
    duplicate rows stay finite. At least two finite rows are required.
    """
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[0] < 2:
        raise GraphError(f"need a 2-D matrix with >= 2 rows, got shape {feats.shape}")
    if not np.isfinite(feats).all():
        raise DataError("feature matrix contains non-finite values")
    n = feats.shape[0]
    dist = np.zeros((n, n))
    for u in range(n):
        diff = feats - feats[u]
        dist[u] = np.sqrt((diff * diff).sum(axis=1))
    sim = 1.0 / np.maximum(dist, ZERO_DISTANCE_EPS)
    np.fill_diagonal(sim, 0.0)
    return FeatureGraph(nodes=feats, edge_weights=dist, similarities=sim)


def mean_similarities(graph: FeatureGraph) -> np.ndarray:
    """Mean similarity of each node to all other nodes."""
    n = graph.nodes.shape[0]
    scores = np.empty(n)
    for u in range(n):
        row = graph.similarities[u]
        acc = 0.0
        for v in range(n):
            if v != u:
                acc += row[v]
        scores[u] = acc / (n - 1)
    return scores


def select_hidden(graph: FeatureGraph, k: int) -> HiddenSet:
    """The ``k`` nodes with the highest mean similarity to the rest."""
    n = graph.nodes.shape[0]
    if not 1 <= k <= n:
        raise ParameterError(f"k must be in [1, {n}], got {k}")
    scores = mean_similarities(graph)
    order = sorted(range(n), key=lambda i: (-scores[i], i))[:k]
    return HiddenSet(indices=tuple(order), scores=tuple(float(scores[i]) for i in order))


def reconstruct(graph: FeatureGraph) -> np.ndarray:
    """Rewrite every node as the similarity-weighted mean of the others."""
    feats = graph.nodes
    n, d = feats.shape
    out = np.empty((n, d))
    for u in range(n):
        row = graph.similarities[u]
        num = np.zeros(d)
        den = 0.0
        for v in range(n):
            if v != u:
                num += row[v] * feats[v]
                den += row[v]
        out[u] = num / den
    return out


def grafr_apply(global_features: np.ndarray, spatial_features: np.ndarray,
                k: int | None = None) -> GrafrResult:
    """Concatenate global and spatial rows, build the graph, reconstruct.

    ``k`` defaults to ``ceil(0.1 * n)`` hidden nodes.
    """
    g = np.asarray(global_features, dtype=np.float64)
    s = np.asarray(spatial_features, dtype=np.float64)
    if g.ndim != 2 or s.ndim != 2 or g.shape[0] != s.shape[0]:
        raise DataError(f"row counts disagree: global {g.shape} vs spatial {s.shape}")
    graph = build_graph(np.concatenate([g, s], axis=1))
    n = graph.nodes.shape[0]
    if k is None:
        k = math.ceil(0.1 * n)
    hidden = select_hidden(graph, k)
    return GrafrResult(
        reconstructed=reconstruct(graph),
        hidden=hidden,
        mean_similarities=mean_similarities(graph),
    )
