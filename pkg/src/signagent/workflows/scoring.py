"""Composite (token, segment, candidate) score used by the pseudo-gloss policy."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from ..enhanced.evidence import phono_score_or_zero
from ..errors import CandidateNotInEvidence
from ..resources import FUNCTION_WORDS

CUE_NAMES = ("visual", "phono", "activity", "temporal", "semantic")
DEFAULT_WEIGHTS = (0.35, 0.35, 0.10, 0.10, 0.10)
NEUTRAL = 0.5
SHORT_TOKEN_CHARS = 3


@dataclass
class ScoringContext:
    """What the scorer needs besides (token, segment, candidate).

    ``lookup`` maps each token to the dictionary entries it can denote, as
    dicts with ``gloss_id``, ``canonical_phonology`` and ``keywords``.
    """

    sentence_tokens: Sequence[str]
    lookup: Mapping[str, Sequence[Mapping[str, Any]]]
    median_duration: float
    weights: Sequence[float] = DEFAULT_WEIGHTS
    function_words: frozenset[str] = FUNCTION_WORDS
    phono_k: int | None = None
    candidate_keywords: Mapping[str, Sequence[str]] = field(default_factory=dict)


@dataclass
class ScoreBreakdown:
    total: float
    cues: dict[str, float]

    def to_dict(self) -> dict[str, Any]:
        return {"total": self.total, "cues": dict(self.cues)}


def is_function_like(token: str, function_words=FUNCTION_WORDS) -> bool:
    return len(token) <= SHORT_TOKEN_CHARS or token in function_words


def _find(segment: Mapping[str, Any], gloss_id: str) -> Mapping[str, Any]:
    for c in segment["candidates"]:
        if c["gloss_id"] == gloss_id:
            return c
    raise CandidateNotInEvidence(f"{gloss_id!r} is not among the segment's candidates")


def _predictions(segment: Mapping[str, Any]) -> dict[str, list[tuple[str, float]]]:
    return {kind: [(l, float(p)) for l, p in p_doc["ranked"]] for kind, p_doc in segment.get("phono_predictions", {}).items()}


def activity_cue(segment: Mapping[str, Any]) -> float:
    """Average hands detected per frame, capped at one."""
    seg = segment["segment"]
    duration = seg["end_frame"] - seg["start_frame"]
    det = seg.get("activity", {}).get("hand_detection_count", 0)
    return float(np.clip(det / duration, 0.0, 1.0)) if duration > 0 else 0.0


def temporal_cue(token: str, segment: Mapping[str, Any], ctx: ScoringContext) -> float:
    """Function-like tokens prefer brief segments; other tokens are neutral."""
    if not is_function_like(token, ctx.function_words):
        return NEUTRAL
    seg = segment["segment"]
    return 1.0 if seg["end_frame"] - seg["start_frame"] < ctx.median_duration else 0.0


def semantic_cue(token: str, keywords: Sequence[str], sentence_tokens: Sequence[str]) -> float:
    """1 if the candidate's gloss text names the token, 0 if it names a different
    sentence token instead, neutral otherwise."""
    kw = set(keywords)
    if token in kw:
        return 1.0
    if kw & set(sentence_tokens):
        return 0.0
    return NEUTRAL


def score_assignment(token: str, segment: Mapping[str, Any], candidate: str, ctx: ScoringContext) -> ScoreBreakdown:
    """Weighted sum of the five normalised cues for assigning ``token`` to
    ``segment`` via dictionary ``candidate``.

    ``segment`` is one entry of the evidence tool output. The phonological cue
    looks the token up in the dictionary and keeps the best agreement of its
    entries with the segment's component predictions.
    """
    cand = _find(segment, candidate)
    preds = _predictions(segment)
    phono = 0.0
    for entry in ctx.lookup.get(token, ()):
        phono = max(phono, phono_score_or_zero(entry["canonical_phonology"], preds, ctx.phono_k))
    keywords = cand.get("keywords", ctx.candidate_keywords.get(candidate, ()))
    cues = {
        "visual": float(np.clip(cand["visual_similarity"], 0.0, 1.0)),
        "phono": float(phono),
        "activity": activity_cue(segment),
        "temporal": temporal_cue(token, segment, ctx),
        "semantic": semantic_cue(token, keywords, ctx.sentence_tokens),
    }
    total = float(sum(w * cues[n] for w, n in zip(ctx.weights, CUE_NAMES)))
    return ScoreBreakdown(total, cues)
