"""Pseudo-gloss annotation: map sentence lemmas onto video segments.

The controller computes the token multiset T itself and checks the agent's
answer against it; invalid answers are recorded, never repaired.
"""

from __future__ import annotations

import json
import logging
import statistics
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from ..basetools.lemma import sign_lemma
from ..basetools.segmentation import SegmenterConfig
from ..datamodel import FrameFeatures, SampleRecord
from ..enhanced.evidence import collect_gloss_evidence
from ..enhanced.ranker import GBDTRanker
from ..errors import DataError
from ..knowledge import canonical_phonology, glosses_for_token, query_linguistic_graph
from ..orchestrator import EpisodeState, ToolRegistry, final_step, register_policy, run_episode, tool_step
from ..resources import Lexicon
from .scoring import DEFAULT_WEIGHTS, ScoringContext, score_assignment
from .validation import validate_tokens

log = logging.getLogger(__name__)

DEFAULT_CAP = 12
RECORD_VERSION = 1
ANCHOR_VISUAL = 0.8


@dataclass
class PseudoGlossConfig:
    cap: int = DEFAULT_CAP
    retries: int = 2
    k_visual: int = 10
    k_phono: int = 3
    M: int = 10
    knn_k: int = 5
    max_evidence_calls: int = 2
    weights: tuple[float, ...] = DEFAULT_WEIGHTS
    allow_multiple_per_segment: bool = False
    ranker: GBDTRanker | None = None
    segmenter: SegmenterConfig | None = None

    def __post_init__(self):
        if self.cap < 1:
            raise ValueError("cap N must be >= 1")
        if len(self.weights) != 5 or any(w < 0 for w in self.weights):
            raise ValueError("need five non-negative cue weights")


# --- tools -----------------------------------------------------------------------


def lemma_lookup(lexicon: Lexicon, tokens: Sequence[str]) -> dict[str, list[dict[str, Any]]]:
    """Inverse dictionary lookup: token -> entries whose keywords include it."""
    out = {}
    for tok in sorted(set(tokens)):
        out[tok] = [
            {
                "gloss_id": gid,
                "canonical_phonology": dict(lexicon.by_id[gid].canonical_phonology),
                "keywords": list(lexicon.keywords(gid)),
                "handedness": lexicon.by_id[gid].handedness,
            }
            for gid in glosses_for_token(lexicon.graph, tok)
        ]
    return out


def build_pseudogloss_tools(
    sample: SampleRecord, features: FrameFeatures, lexicon: Lexicon, config: PseudoGlossConfig
) -> ToolRegistry:
    reg = ToolRegistry()
    evidence_calls = [0]

    def _sign_lemma(sentence: str) -> dict[str, Any]:
        tokens = sign_lemma(sentence, lexicon.lemma_table, lexicon.stopwords, lexicon.vocabulary)
        return {"tokens": tokens, "lookup": lemma_lookup(lexicon, tokens)}

    def _evidence(k: int | None = None, m: int | None = None) -> dict[str, Any]:
        if evidence_calls[0] >= config.max_evidence_calls:
            raise RuntimeError(f"gloss_evidence_collector may be called at most {config.max_evidence_calls} times")
        evidence_calls[0] += 1
        k = k or config.k_visual
        ev = collect_gloss_evidence(
            features,
            lexicon,
            sample.segments,
            k_visual=k,
            k_phono=config.k_phono,
            M=m or config.M,
            ranker=config.ranker,
            bypass_ranker=config.ranker is None,
            knn_k=config.knn_k,
            segmenter=config.segmenter,
        )
        segments = []
        for i, e in enumerate(ev):
            d = e.to_dict()
            d["index"] = i
            for c in d["candidates"]:
                c["keywords"] = list(lexicon.keywords(c["gloss_id"]))
            segments.append(d)
        return {"k": k, "segments": segments}

    def _lookup(token: str) -> dict[str, Any]:
        return {"token": token, "entries": lemma_lookup(lexicon, [token])[token]}

    def _phonology(gloss_id: str) -> dict[str, Any]:
        return {"gloss_id": gloss_id, "canonical_phonology": canonical_phonology(lexicon.graph, gloss_id)}

    def _linguistic(terms: list[str], radius: int = 1) -> dict[str, Any]:
        if lexicon.linguistic_graph is None:
            raise RuntimeError("no linguistic graph loaded")
        return query_linguistic_graph(lexicon.linguistic_graph, terms, radius).to_dict()

    reg.register(
        "sign_lemma",
        {
            "type": "object",
            "properties": {"sentence": {"type": "string"}},
            "required": ["sentence"],
            "additionalProperties": False,
        },
        _sign_lemma,
        "Normalise the sentence into the pseudo-gloss token multiset T, with dictionary entries per token.",
    )
    reg.register(
        "gloss_evidence_collector",
        {
            "type": "object",
            "properties": {"k": {"type": "integer", "minimum": 1}, "m": {"type": "integer", "minimum": 1}},
            "additionalProperties": False,
        },
        _evidence,
        "Per-segment bounds, activity, phonological predictions and ranked gloss candidates (at most two calls).",
    )
    reg.register(
        "lexicon_lookup",
        {
            "type": "object",
            "properties": {"token": {"type": "string"}},
            "required": ["token"],
            "additionalProperties": False,
        },
        _lookup,
        "Dictionary entries whose keywords include the token.",
    )
    reg.register(
        "canonical_phonology",
        {
            "type": "object",
            "properties": {"gloss_id": {"type": "string"}},
            "required": ["gloss_id"],
            "additionalProperties": False,
        },
        _phonology,
        "Canonical component labels of a dictionary gloss.",
    )
    reg.register(
        "query_linguistic_graph",
        {
            "type": "object",
            "properties": {
                "terms": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                "radius": {"type": "integer", "minimum": 0},
            },
            "required": ["terms"],
            "additionalProperties": False,
        },
        _linguistic,
        "Concept nodes matching the terms plus their neighbourhood in the linguistic graph.",
    )
    return reg


# --- assignment ------------------------------------------------------------------


def _justify(cues: Mapping[str, float], total: float, overflow: bool) -> str:
    parts = ", ".join(f"{k} {v:.3f}" for k, v in cues.items())
    text = f"score {total:.3f} ({parts})"
    return text + "; segment already held a token" if overflow else text


def assign_tokens(
    tokens: Sequence[str],
    segments: Sequence[Mapping[str, Any]],
    lookup: Mapping[str, Sequence[Mapping[str, Any]]],
    weights: Sequence[float] = DEFAULT_WEIGHTS,
    allow_multiple: bool = False,
    phono_k: int | None = None,
) -> tuple[list[str], list[dict[str, Any]], list[str]]:
    """Greedy argmax assignment over all (token, segment, candidate) triples.

    Triples are taken best-first (ties: gloss id, then segment start, then token
    position); each token once, each segment once unless ``allow_multiple``.
    Tokens left over when T outnumbers the segments go to their best segment
    regardless and a warning is returned. Returns (sequence, alignment, warnings).
    """
    warnings: list[str] = []
    if not tokens:
        return [], [], warnings
    if not segments:
        return [], [], ["no segments available for assignment"]
    durations = [s["segment"]["end_frame"] - s["segment"]["start_frame"] for s in segments]
    ctx = ScoringContext(list(tokens), lookup, float(statistics.median(durations)), tuple(weights), phono_k=phono_k)
    triples = []
    for i, tok in enumerate(tokens):
        for j, seg in enumerate(segments):
            for c in seg["candidates"]:
                b = score_assignment(tok, seg, c["gloss_id"], ctx)
                triples.append((-b.total, c["gloss_id"], seg["segment"]["start_frame"], i, j, b))
    triples.sort(key=lambda x: x[:5])

    tok_done: dict[int, dict[str, Any]] = {}
    seg_used: set[int] = set()
    order = 0

    def take(tr, overflow=False):
        nonlocal order
        _, gid, start, i, j, b = tr
        seg = segments[j]
        top_visual = max(seg["candidates"], key=lambda c: c["visual_similarity"])["gloss_id"]
        tok_done[i] = {
            "token": tokens[i],
            "token_index": i,
            "segment_index": j,
            "segment": {"start_frame": seg["segment"]["start_frame"], "end_frame": seg["segment"]["end_frame"]},
            "gloss_id": gid,
            "score": b.total,
            "cues": b.cues,
            "anchor": gid == top_visual and b.cues["visual"] >= ANCHOR_VISUAL,
            "order": order,
            "justification": _justify(b.cues, b.total, overflow),
        }
        order += 1
        seg_used.add(j)

    for tr in triples:
        i, j = tr[3], tr[4]
        if i in tok_done or (j in seg_used and not allow_multiple):
            continue
        take(tr)
    if len(tok_done) < len(tokens):
        warnings.append(f"|T| = {len(tokens)} exceeds |S| = {len(segments)}; extra tokens share segments")
        for tr in triples:
            if tr[3] not in tok_done:
                take(tr, overflow=True)
    alignment = sorted(tok_done.values(), key=lambda a: (a["segment"]["start_frame"], a["segment_index"], a["order"]))
    return [a["token"] for a in alignment], alignment, warnings


# --- scripted policy -------------------------------------------------------------


@register_policy("pseudogloss-greedy")
def pseudogloss_policy(state: EpisodeState, params: Mapping[str, Any]) -> dict[str, Any]:
    """sign_lemma, then one evidence call (two when ``probe_k`` is set), then answer.

    Call budget: 2, or 3 with probing. When probing, the second evidence call
    is used only if its candidate lists are no shorter than the first.
    """
    lemma = state.results("sign_lemma")
    if not lemma:
        return tool_step("sign_lemma", {"sentence": state.context.get("sentence", "")}, "Normalise the sentence into T.")
    evidence = state.results("gloss_evidence_collector")
    k = int(params.get("k", 10))
    probe_k = params.get("probe_k")
    if not evidence:
        return tool_step("gloss_evidence_collector", {"k": k}, "Collect per-segment evidence.")
    if probe_k and len(evidence) == 1 and state.invocation_count < state.cap:
        return tool_step("gloss_evidence_collector", {"k": int(probe_k)}, "Probe candidate stability with a second k.")
    ev = evidence[-1]
    tokens = lemma[-1]["tokens"]
    seq, alignment, warnings = assign_tokens(
        tokens,
        ev["segments"],
        lemma[-1]["lookup"],
        params.get("weights", DEFAULT_WEIGHTS),
        bool(params.get("allow_multiple", False)),
        params.get("phono_k"),
    )
    return final_step(
        {"sequence": seq, "alignment": alignment, "warnings": warnings},
        f"Assigned {len(alignment)} of {len(tokens)} tokens greedily from the strongest anchors.",
    )


# --- controller ------------------------------------------------------------------


def pseudogloss_prompt(sample: SampleRecord) -> str:
    return (
        "Task: pseudo-gloss annotation.\n"
        f"Sentence: {json.dumps(sample.sentence)}\n"
        "1. Call sign_lemma on the sentence to obtain the token multiset T; every token must be used exactly once "
        "and no other token may appear.\n"
        "2. Call gloss_evidence_collector (at most twice, optionally varying k).\n"
        "3. Assign each token to one segment and one of that segment's candidate glosses, weighing visual "
        "similarity, phonological agreement, hand activity, temporal position and sentence context.\n"
        "Answer with {\"sequence\": [tokens in temporal order], \"alignment\": [{\"token\", \"segment_index\", "
        "\"segment\": {\"start_frame\", \"end_frame\"}, \"gloss_id\", \"justification\"}]}."
    )


@dataclass
class PseudoGlossRecord:
    sample_id: str
    sentence: str
    tokens: list[str]
    sequence: list[str]
    alignment: list[dict[str, Any]]
    status: str  # valid | invalid | rejected
    missing: list[str] = field(default_factory=list)
    extra: list[str] = field(default_factory=list)
    reasons: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    episode: dict[str, Any] = field(default_factory=dict)
    trace: dict[str, Any] | None = None
    subset: str | None = None

    @property
    def valid(self) -> bool:
        return self.status == "valid"

    def to_dict(self) -> dict[str, Any]:
        return {
            "task": "pseudogloss",
            "version": RECORD_VERSION,
            "sample_id": self.sample_id,
            "subset": self.subset,
            "sentence": self.sentence,
            "tokens": list(self.tokens),
            "sequence": list(self.sequence),
            "alignment": [dict(a) for a in self.alignment],
            "validation": {
                "status": self.status,
                "missing": list(self.missing),
                "extra": list(self.extra),
                "reasons": list(self.reasons),
                "warnings": list(self.warnings),
            },
            "episode": dict(self.episode),
            "trace": self.trace,
        }


_ALIGN_KEYS = ("token", "segment_index", "segment", "gloss_id", "justification")


def _normalise_alignment(raw: Any, reasons: list[str]) -> list[dict[str, Any]]:
    if raw is None:
        return []
    if not isinstance(raw, list):
        reasons.append("alignment is not a list")
        return []
    out = []
    for n, a in enumerate(raw):
        if not isinstance(a, dict):
            reasons.append(f"alignment entry {n} is not an object")
            continue
        a = dict(a)
        for key in _ALIGN_KEYS:
            if key not in a:
                reasons.append(f"alignment entry {n} lacks {key}")
                a[key] = "" if key in ("justification", "token", "gloss_id") else None
        out.append(a)
    return out


def check_answer(
    answer: Mapping[str, Any], tokens: Sequence[str], evidence: Mapping[str, Any] | None
) -> tuple[list[str], list[dict[str, Any]], list[str], list[str], list[str]]:
    """Validate an agent answer against T and the evidence it saw.

    Returns (sequence, alignment, missing, extra, reasons); no reasons means valid.
    """
    reasons: list[str] = []
    seq = answer.get("sequence")
    if not isinstance(seq, list) or not all(isinstance(t, str) for t in seq):
        reasons.append("answer lacks a list of string tokens under 'sequence'")
        seq = []
    alignment = _normalise_alignment(answer.get("alignment"), reasons)
    verdict = validate_tokens(tokens, seq)
    if not verdict.valid:
        reasons.append(f"token multiset differs from T (missing {verdict.missing}, extra {verdict.extra})")
    if alignment:
        try:
            temporal = [a["token"] for a in sorted(alignment, key=lambda a: (a["segment"]["start_frame"], a["segment_index"]))]
        except (TypeError, KeyError):
            temporal = None
            reasons.append("alignment segments lack start frames")
        if temporal is not None and temporal != list(seq):
            reasons.append("sequence is not in the temporal order of its aligned segments")
        if evidence is not None:
            segs = evidence["segments"]
            for n, a in enumerate(alignment):
                j = a.get("segment_index")
                if not isinstance(j, int) or not 0 <= j < len(segs):
                    reasons.append(f"alignment entry {n} names an unknown segment")
                elif a.get("gloss_id") not in {c["gloss_id"] for c in segs[j]["candidates"]}:
                    reasons.append(f"alignment entry {n}: gloss {a.get('gloss_id')!r} is not a candidate of segment {j}")
    elif seq:
        reasons.append("answer has no alignment")
    return list(seq), alignment, verdict.missing, verdict.extra, reasons


def run_pseudogloss_task(
    sample: SampleRecord,
    features: FrameFeatures,
    lexicon: Lexicon,
    backend,
    config: PseudoGlossConfig | None = None,
) -> PseudoGlossRecord:
    cfg = config or PseudoGlossConfig()
    if not sample.sentence:
        raise DataError(f"{sample.sample_id}: pseudo-gloss annotation needs a sentence")
    tokens = sign_lemma(sample.sentence, lexicon.lemma_table, lexicon.stopwords, lexicon.vocabulary)
    registry = build_pseudogloss_tools(sample, features, lexicon, cfg)
    context = {"task": "pseudogloss", "sample_id": sample.sample_id, "sentence": sample.sentence}
    answer, trace = run_episode(pseudogloss_prompt(sample), backend, registry, cfg.cap, cfg.retries, context)
    episode = {
        "status": trace.status,
        "invocation_count": trace.invocation_count,
        "cap": trace.cap,
        "rejection_reason": trace.rejection_reason,
        "backend": trace.backend,
    }
    rec = PseudoGlossRecord(sample.sample_id, sample.sentence, tokens, [], [], "rejected", episode=episode,
                            trace=trace.to_dict(), subset=sample.subset)
    if answer is None:
        rec.reasons = [trace.rejection_reason or "episode rejected"]
        return rec
    evidence = [o["result"] for o in trace.steps if o.get("tool") == "gloss_evidence_collector" and "result" in o]
    seq, alignment, missing, extra, reasons = check_answer(answer, tokens, evidence[-1] if evidence else None)
    n_segments = len(evidence[-1]["segments"]) if evidence else None
    warnings = [w for w in answer.get("warnings", []) if isinstance(w, str)] if isinstance(answer.get("warnings"), list) else []
    if n_segments is not None and len(tokens) > n_segments and not any("exceeds" in w for w in warnings):
        warnings.append(f"|T| = {len(tokens)} exceeds |S| = {n_segments}")
    rec.sequence, rec.alignment, rec.missing, rec.extra = seq, alignment, missing, extra
    rec.reasons, rec.warnings = reasons, warnings
    rec.status = "invalid" if reasons else "valid"
    if reasons:
        log.info("%s: invalid pseudo-gloss answer: %s", sample.sample_id, "; ".join(reasons))
    return rec
