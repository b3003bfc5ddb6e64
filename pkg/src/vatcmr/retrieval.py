"""Euclidean ranking over a labeled embedding collection and MAP evaluation.

Relevance is class-level: an index entry is relevant to a query iff their
class labels match. Ranking ties are broken by ascending sample id so every
result, and therefore every MAP number, is bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .errors import InvalidArgumentError, UndefinedAveragePrecisionError
from .models import ModelState, TensorBatch, embed_space, samples_to_batch


def euclidean_distance(x, y) -> float:
    """L2 distance between two equal-length vectors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise InvalidArgumentError(f"vectors must be 1-D with equal length, got {x.shape} vs {y.shape}")
    return float(np.linalg.norm(x - y))


def space_tag(space: tuple[str, ...]) -> str:
    return space[0] if len(space) == 1 else f"fused({space[0]},{space[1]})"


@dataclass
class RetrievalIndex:
    """Labeled embedding collection ranked against queries."""

    vectors: np.ndarray  # [N, d] float64
    labels: np.ndarray  # [N] int64
    ids: np.ndarray  # [N] int64, unique
    space: str

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.ids = np.asarray(self.ids, dtype=np.int64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] == 0:
            raise InvalidArgumentError("index must hold a nonempty [N, d] vector array")
        if self.labels.shape != (len(self),) or self.ids.shape != (len(self),):
            raise InvalidArgumentError("labels and ids must have one entry per vector")
        if len(np.unique(self.ids)) != len(self):
            raise InvalidArgumentError("sample ids in an index must be unique")

    def __len__(self) -> int:
        return self.vectors.shape[0]


@dataclass
class RankedResult:
    """Full index ordering for one query, nearest first."""

    ids: np.ndarray
    distances: np.ndarray  # nondecreasing
    labels: np.ndarray  # index labels in ranked order
    query_label: int | None = None


def rank(query, index: RetrievalIndex, query_label: int | None = None) -> RankedResult:
    """Order all index entries by ascending distance, ids breaking ties."""
    query = np.asarray(query, dtype=np.float64)
    if query.ndim != 1 or query.shape[0] != index.vectors.shape[1]:
        raise InvalidArgumentError(
            f"query length {query.shape} does not match index width {index.vectors.shape[1]}"
        )
    distances = np.sqrt(((index.vectors - query[None, :]) ** 2).sum(axis=1))
    order = np.lexsort((index.ids, distances))
    return RankedResult(
        ids=index.ids[order],
        distances=distances[order],
        labels=index.labels[order],
        query_label=query_label,
    )


def average_precision(ranked_labels, query_label) -> float:
    """AP = mean over relevant ranks k of precision@k."""
    ranked = np.asarray(ranked_labels)
    relevant = ranked == query_label
    num_relevant = int(relevant.sum())
    if num_relevant == 0:
        raise UndefinedAveragePrecisionError(
            f"no item with label {query_label!r} in the ranking"
        )
    hits = np.cumsum(relevant)[relevant]
    ranks = np.nonzero(relevant)[0] + 1
    return float(np.mean(hits / ranks))


def mean_average_precision(queries, index: RetrievalIndex) -> float:
    """Mean AP over (vector, label) queries against one index."""
    queries = list(queries)
    if not queries:
        raise InvalidArgumentError("queries must be nonempty")
    total = 0.0
    for vector, label in queries:
        result = rank(vector, index, query_label=label)
        total += average_precision(result.labels, label)
    return total / len(queries)


def build_index(model: ModelState, samples, space: tuple[str, ...]) -> RetrievalIndex:
    """Embed a split into a retrieval index (single modality or fused pair)."""
    if isinstance(space, str):
        space = (space,)
    if isinstance(samples, TensorBatch):
        batch = samples
    else:
        samples = list(samples)
        if not samples:
            raise InvalidArgumentError("cannot build an index from an empty split")
        batch = samples_to_batch(samples)
    model.eval()
    with torch.no_grad():
        vectors = embed_space(model, batch, tuple(space)).numpy().astype(np.float64)
    return RetrievalIndex(
        vectors=vectors,
        labels=batch.classes.numpy(),
        ids=batch.ids,
        space=space_tag(tuple(space)),
    )


def index_as_queries(index: RetrievalIndex):
    """View an index's entries as (vector, label) query pairs."""
    return list(zip(index.vectors, index.labels))


def evaluate_map(
    model: ModelState,
    samples,
    query_space: tuple[str, ...],
    retrieval_space: tuple[str, ...],
) -> tuple[float, int]:
    """MAP of querying ``query_space`` vectors against a ``retrieval_space`` index."""
    queries = index_as_queries(build_index(model, samples, query_space))
    index = build_index(model, samples, retrieval_space)
    return mean_average_precision(queries, index), len(queries)
