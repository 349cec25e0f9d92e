"""Cluster-level phonological agreement and merge recommendations."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Any, Mapping

from ..basetools.prototypes import PhonoPrediction
from ..datamodel import COMPONENT_KINDS
from ..errors import EmptyCluster
from .clustering import ClusterPartition

DEFAULT_TAU_OVERLAP = 0.5
DEFAULT_MIN_AGREEING = 3


def jaccard(a: set, b: set) -> float:
    """|a & b| / |a | b|, with 0 for two empty sets."""
    union = a | b
    return len(a & b) / len(union) if union else 0.0


@dataclass
class MergeRecommendation:
    source: str
    target: str
    jaccard: dict[str, float]
    agreeing_count: int
    mean_overlap: float
    strongest_properties: list[str]
    recommended: bool
    canonical_agreement: dict[str, dict[str, int]] | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "source": self.source,
            "target": self.target,
            "jaccard": dict(self.jaccard),
            "agreeing_count": self.agreeing_count,
            "mean_overlap": self.mean_overlap,
            "strongest_properties": list(self.strongest_properties),
            "recommended": self.recommended,
            "canonical_agreement": self.canonical_agreement,
        }


def cluster_profiles(
    partition: ClusterPartition,
    predictions: Mapping[str, Mapping[str, PhonoPrediction]],
    top_k: int | None = None,
) -> dict[str, dict[str, set[str]]]:
    """Per cluster and kind, the union of top-k labels over members."""
    profiles = {}
    for c in partition.clusters:
        members = [predictions[k] for k in c.members if k in predictions]
        if not members:
            raise EmptyCluster(f"cluster {c.cluster_id} has no member predictions")
        prof = {}
        for kind in COMPONENT_KINDS:
            labels: set[str] = set()
            for m in members:
                if kind in m:
                    labels.update(m[kind].labels[:top_k] if top_k else m[kind].labels)
            prof[kind] = labels
        profiles[c.cluster_id] = prof
    return profiles


def canonical_agreement(
    partition: ClusterPartition,
    predictions: Mapping[str, Mapping[str, PhonoPrediction]],
    canonical: Mapping[str, str],
) -> dict[str, dict[str, int]]:
    """Per cluster and canonical kind, members whose top-1 label matches."""
    out = {}
    for c in partition.clusters:
        counts = {}
        for kind, label in canonical.items():
            counts[kind] = sum(
                1 for k in c.members if k in predictions and kind in predictions[k] and predictions[k][kind].top == label
            )
        out[c.cluster_id] = counts
    return out


def analyze_clusters_phonology(
    partition: ClusterPartition,
    per_sample_predictions: Mapping[str, Mapping[str, PhonoPrediction]],
    canonical: Mapping[str, str] | None = None,
    tau_overlap: float = DEFAULT_TAU_OVERLAP,
    min_agreeing: int = DEFAULT_MIN_AGREEING,
    top_k: int | None = None,
) -> list[MergeRecommendation]:
    """Jaccard overlap of label sets for every cluster pair, ranked.

    Within a pair the smaller cluster is the source (earlier id on ties). Pairs
    are sorted by agreeing feature types, then mean overlap, descending.
    """
    profiles = cluster_profiles(partition, per_sample_predictions, top_k)
    agree = canonical_agreement(partition, per_sample_predictions, canonical) if canonical else None
    order = {c.cluster_id: i for i, c in enumerate(partition.clusters)}
    sizes = {c.cluster_id: c.size for c in partition.clusters}
    recs = []
    for a, b in combinations(partition.ids(), 2):
        src, dst = (a, b) if (sizes[a], order[a]) <= (sizes[b], order[b]) else (b, a)
        J = {kind: jaccard(profiles[src][kind], profiles[dst][kind]) for kind in COMPONENT_KINDS}
        n_agree = sum(1 for v in J.values() if v >= tau_overlap)
        strongest = sorted(COMPONENT_KINDS, key=lambda k: (-J[k], COMPONENT_KINDS.index(k)))
        recs.append(
            MergeRecommendation(
                source=src,
                target=dst,
                jaccard=J,
                agreeing_count=n_agree,
                mean_overlap=sum(J.values()) / len(J),
                strongest_properties=strongest,
                recommended=n_agree >= min_agreeing,
                canonical_agreement=None if agree is None else {src: agree[src], dst: agree[dst]},
            )
        )
    recs.sort(key=lambda r: (-r.agreeing_count, -r.mean_overlap, order[r.source], order[r.target]))
    return recs
