"""Visual ID glossing: thresholded greedy clustering under cosine distance."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

import numpy as np

from ..basetools.glosser import unit
from ..errors import DataError

DEFAULT_TAU = 0.35


def cosine_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(1.0 - np.clip(np.dot(unit(a), unit(b)), -1.0, 1.0))


@dataclass
class Cluster:
    cluster_id: str
    members: list[str]
    centroid: np.ndarray

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass
class JoinEvent:
    key: str
    cluster_id: str
    distance: float | None  # None when the sample seeded the cluster


@dataclass
class ClusterPartition:
    clusters: list[Cluster]
    distance_matrix: np.ndarray
    intra_mean: list[float]
    nearest_inter: list[tuple[str, float] | None]
    lone_variants: list[str]
    tau: float
    joins: list[JoinEvent] = field(default_factory=list)

    def ids(self) -> list[str]:
        return [c.cluster_id for c in self.clusters]

    def cluster(self, cluster_id: str) -> Cluster:
        for c in self.clusters:
            if c.cluster_id == cluster_id:
                return c
        raise KeyError(cluster_id)

    def assignment(self) -> dict[str, str]:
        return {k: c.cluster_id for c in self.clusters for k in c.members}

    def distance(self, a: str, b: str) -> float:
        ids = self.ids()
        return float(self.distance_matrix[ids.index(a), ids.index(b)])

    def to_dict(self) -> dict[str, Any]:
        return {
            "tau": self.tau,
            "clusters": [
                {
                    "cluster_id": c.cluster_id,
                    "members": list(c.members),
                    "centroid": [float(x) for x in c.centroid],
                    "intra_mean_distance": self.intra_mean[i],
                    "nearest_inter": None
                    if self.nearest_inter[i] is None
                    else {"cluster_id": self.nearest_inter[i][0], "distance": self.nearest_inter[i][1]},
                }
                for i, c in enumerate(self.clusters)
            ],
            "distance_matrix": {"ids": self.ids(), "values": self.distance_matrix.tolist()},
            "lone_variants": list(self.lone_variants),
        }


def centroid_distance_matrix(centroids: list[np.ndarray]) -> np.ndarray:
    n = len(centroids)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            D[i, j] = D[j, i] = cosine_distance(centroids[i], centroids[j])
    return D


def summarize(clusters: list[Cluster], vectors: Mapping[str, np.ndarray], tau: float, joins=()) -> ClusterPartition:
    """Distance matrix, intra/inter statistics and lone variants for a partition."""
    D = centroid_distance_matrix([c.centroid for c in clusters])
    intra = [
        float(np.mean([cosine_distance(vectors[k], c.centroid) for k in c.members])) if c.members else 0.0
        for c in clusters
    ]
    inter: list[tuple[str, float] | None] = []
    for i in range(len(clusters)):
        others = [(float(D[i, j]), clusters[j].cluster_id) for j in range(len(clusters)) if j != i]
        inter.append(None if not others else (min(others)[1], min(others)[0]))
    lone = [c.cluster_id for c in clusters if c.size == 1]
    return ClusterPartition(clusters, D, intra, inter, lone, tau, list(joins))


def visual_id_gloss(samples: Iterable[tuple[str, Any]], tau: float = DEFAULT_TAU) -> ClusterPartition:
    """Greedy pass in sorted-key order: join the nearest centroid if closer than
    ``tau``, otherwise seed a new cluster. Centroids are running means of the
    unit-normalised members; members are never reassigned.
    """
    if not 0 < tau < 2:
        raise ValueError("tau must lie in (0, 2)")
    vectors: dict[str, np.ndarray] = {}
    for key, emb in samples:
        if key in vectors:
            raise DataError(f"duplicate sample key {key!r}")
        vectors[key] = unit(emb)
    if not vectors:
        raise DataError("visual_id_gloss needs at least one sample")

    sums: list[np.ndarray] = []
    clusters: list[Cluster] = []
    joins = []
    for key in sorted(vectors):
        v = vectors[key]
        best = None
        for i, c in enumerate(clusters):
            d = cosine_distance(v, c.centroid)
            if best is None or d < best[0]:
                best = (d, i)
        if best is not None and best[0] < tau:
            d, i = best
            sums[i] = sums[i] + v
            clusters[i].members.append(key)
            clusters[i].centroid = sums[i] / clusters[i].size
            joins.append(JoinEvent(key, clusters[i].cluster_id, d))
        else:
            cid = f"c{len(clusters)}"
            sums.append(v.copy())
            clusters.append(Cluster(cid, [key], v.copy()))
            joins.append(JoinEvent(key, cid, None))

    seen = [k for c in clusters for k in c.members]
    if sorted(seen) != sorted(vectors):
        raise RuntimeError("greedy clustering produced an invalid partition")
    return summarize(clusters, vectors, tau, joins)
