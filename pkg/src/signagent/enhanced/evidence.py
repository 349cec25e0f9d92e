"""Gloss Evidence Collector: hybrid visual + phonological candidates, reranked."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from ..basetools.classifiers import classify_all
from ..basetools.glosser import gloss_retrieve
from ..basetools.prototypes import PhonoPrediction
from ..basetools.segmentation import Segment, SegmenterConfig, segment_signs
from ..datamodel import FrameFeatures
from ..errors import EmptyPhonology, MissingFeatures, RankerUntrained
from ..knowledge import glosses_by_phonology
from ..resources import Lexicon
from .phonoscore import score_phonological_agreement
from .ranker import GBDTRanker

FEATURE_NAMES = ("visual_similarity", "s_phono", "reciprocal_visual_rank", "visual_margin", "frequency_prior")
MIN_PHONO_MATCHES = 2


@dataclass
class EvidenceCandidate:
    gloss_id: str
    visual_similarity: float
    s_phono: float
    feature_vector: tuple[float, ...]
    learned_relevance: float
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "gloss_id": self.gloss_id,
            "visual_similarity": self.visual_similarity,
            "s_phono": self.s_phono,
            "feature_vector": list(self.feature_vector),
            "learned_relevance": self.learned_relevance,
            "diagnostics": dict(self.diagnostics),
        }


@dataclass
class SegmentEvidence:
    segment: Segment
    candidates: list[EvidenceCandidate]
    phono_predictions: dict[str, PhonoPrediction]

    @property
    def M(self) -> int:
        return len(self.candidates)

    def candidate(self, gloss_id: str) -> EvidenceCandidate | None:
        for c in self.candidates:
            if c.gloss_id == gloss_id:
                return c
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "segment": self.segment.to_dict(),
            "candidates": [c.to_dict() for c in self.candidates],
            "phono_predictions": {k: p.to_dict() for k, p in self.phono_predictions.items()},
        }


def phono_score_or_zero(canonical: Mapping[str, str], predictions, k: int | None = None) -> float:
    try:
        return score_phonological_agreement(canonical, predictions, k)
    except EmptyPhonology:
        return 0.0


def phono_candidates(lexicon: Lexicon, predictions: Mapping[str, PhonoPrediction], k_phono: int) -> list[str]:
    """Glosses whose canonical labels appear in the top-k predictions for >= 2 kinds."""
    constraints = {kind: pred.labels[:k_phono] for kind, pred in predictions.items() if pred.ranked}
    return [g for g, n in glosses_by_phonology(lexicon.graph, constraints) if n >= MIN_PHONO_MATCHES]


def score_segment(
    embedding: np.ndarray,
    predictions: Mapping[str, PhonoPrediction],
    lexicon: Lexicon,
    k_visual: int,
    k_phono: int,
) -> list[tuple[str, float, float, tuple[float, ...], dict[str, bool]]]:
    """Candidate union with (gloss, visual, s_phono, ranker features, flags)."""
    visual = gloss_retrieve(embedding, lexicon.index, k_visual)
    visual_ids = {g for g, _ in visual}
    injected = phono_candidates(lexicon, predictions, k_phono)
    pool = sorted(visual_ids | set(injected))
    sims = lexicon.index.similarities(embedding)
    row = {g: i for i, g in enumerate(lexicon.index.gloss_ids)}
    vis = {g: float(sims[row[g]]) for g in pool}
    by_visual = sorted(pool, key=lambda g: (-vis[g], g))
    top_visual = by_visual[0]
    injected_set = set(injected)
    out = []
    for rank, g in enumerate(by_visual, start=1):
        nxt = vis[by_visual[rank]] if rank < len(by_visual) else vis[g]
        s_phono = phono_score_or_zero(lexicon.by_id[g].canonical_phonology, predictions, k_phono)
        feats = (vis[g], s_phono, 1.0 / rank, vis[g] - nxt, lexicon.frequency_prior[g])
        flags = {
            "visual_candidate": g in visual_ids,
            "phono_candidate": g in injected_set,
            "cross_modal_agreement": g in visual_ids and g in injected_set,
            "top_visual": g == top_visual,
        }
        out.append((g, vis[g], s_phono, feats, flags))
    return out


def collect_gloss_evidence(
    features: FrameFeatures,
    lexicon: Lexicon,
    provided_segments: Sequence[tuple[int, int]] | None = None,
    k_visual: int = 10,
    k_phono: int = 3,
    M: int = 10,
    ranker: GBDTRanker | None = None,
    bypass_ranker: bool = False,
    knn_k: int = 5,
    segmenter: SegmenterConfig | None = None,
) -> list[SegmentEvidence]:
    """Per-segment ranked gloss candidates with diagnostics.

    In bypass mode the relevance is ``(visual_similarity + s_phono) / 2``.
    """
    if ranker is None and not bypass_ranker:
        raise RankerUntrained("no trained ranker supplied and bypass not requested")
    if lexicon.bank is None:
        raise MissingFeatures("lexicon has no prototype bank for the phonological classifiers")
    out = []
    for seg in segment_signs(features, provided_segments, segmenter):
        if seg.pooled_embedding is None:
            raise MissingFeatures("sample has no frame embeddings to pool")
        predictions = classify_all(features.slice(seg.start_frame, seg.end_frame), lexicon.bank, knn_k)
        scored = score_segment(seg.pooled_embedding, predictions, lexicon, k_visual, k_phono)
        if bypass_ranker:
            relevance = [(v + s) / 2.0 for _, v, s, _, _ in scored]
        else:
            relevance = ranker.predict([f for _, _, _, f, _ in scored]).tolist()
        cands = [
            EvidenceCandidate(g, v, s, f, float(y), dict(flags))
            for (g, v, s, f, flags), y in zip(scored, relevance)
        ]
        cands.sort(key=lambda c: (-c.learned_relevance, c.gloss_id))
        cands = cands[:M]
        for i, c in enumerate(cands):
            nxt = cands[i + 1].learned_relevance if i + 1 < len(cands) else c.learned_relevance
            c.diagnostics["rank_margin"] = c.learned_relevance - nxt
        out.append(SegmentEvidence(seg, cands, predictions))
    return out


def ranker_rows(evidence: Iterable[SegmentEvidence], truths: Sequence[str | None]) -> list[tuple[tuple[float, ...], float]]:
    """Pointwise training rows: relevance 1 for the segment's true gloss, else 0."""
    rows = []
    for ev, truth in zip(evidence, truths):
        if truth is None:
            continue
        for c in ev.candidates:
            rows.append((c.feature_vector, 1.0 if c.gloss_id == truth else 0.0))
    return rows
