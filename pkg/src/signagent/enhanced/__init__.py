"""Evidence fusion, learned reranking, visual clustering and cluster phonology."""

from .clustering import Cluster, ClusterPartition, visual_id_gloss
from .evidence import EvidenceCandidate, SegmentEvidence, collect_gloss_evidence, ranker_rows
from .phonoanalysis import MergeRecommendation, analyze_clusters_phonology, jaccard
from .phonoscore import score_phonological_agreement
from .ranker import GBDTRanker, RankerConfig, train_ranker

__all__ = [
    "Cluster",
    "ClusterPartition",
    "EvidenceCandidate",
    "GBDTRanker",
    "MergeRecommendation",
    "RankerConfig",
    "SegmentEvidence",
    "analyze_clusters_phonology",
    "collect_gloss_evidence",
    "jaccard",
    "ranker_rows",
    "score_phonological_agreement",
    "train_ranker",
    "visual_id_gloss",
]
