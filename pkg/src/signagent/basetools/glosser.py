"""Dictionary retrieval by cosine nearest neighbour over reference embeddings."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from ..datamodel import DictionaryEntry
from ..errors import DimensionMismatch, ZeroVector


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if n == 0:
        raise ZeroVector("cosine similarity is undefined for a zero vector")
    return v / n


class DictionaryIndex:
    """Normalised reference embeddings, rows ordered by gloss_id."""

    def __init__(self, entries: Iterable[DictionaryEntry]):
        entries = sorted(entries, key=lambda e: e.gloss_id)
        if not entries:
            raise ValueError("empty dictionary index")
        self.gloss_ids = [e.gloss_id for e in entries]
        self._row = {g: i for i, g in enumerate(self.gloss_ids)}
        self.matrix = np.stack([unit(e.reference_embedding) for e in entries])
        if len({e.reference_embedding.size for e in entries}) != 1:
            raise DimensionMismatch("reference embeddings differ in dimension")

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def __len__(self) -> int:
        return len(self.gloss_ids)

    def similarities(self, query) -> np.ndarray:
        q = np.asarray(query, dtype=np.float64)
        if q.shape != (self.dim,):
            raise DimensionMismatch(f"query dim {q.shape} != index dim {self.dim}")
        return np.clip(self.matrix @ unit(q), -1.0, 1.0)

    def similarity(self, query, gloss_id: str) -> float:
        return float(self.similarities(query)[self._row[gloss_id]])


def gloss_retrieve(segment_embedding, index: DictionaryIndex, k: int = 10) -> list[tuple[str, float]]:
    """Top-k (gloss_id, cosine similarity), best first; ties by gloss_id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    sims = index.similarities(segment_embedding)
    order = sorted(range(len(sims)), key=lambda i: (-sims[i], index.gloss_ids[i]))
    return [(index.gloss_ids[i], float(sims[i])) for i in order[:k]]
