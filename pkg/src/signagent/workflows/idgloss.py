"""ID glossing: refine a gloss's visual clusters into lexical variants.

The scripted policy applies MERGE when three gates pass for a cluster pair:
centroid distance below ``merge_distance_factor * tau``, enough agreeing
phonological feature types (3 of 5 when a singleton is involved, 4 otherwise)
and compatible handedness. Pairs that pass are merged transitively; every
other pair is logged as KEEP with its blocking statistics.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..basetools.classifiers import classify_all
from ..basetools.glosser import unit
from ..basetools.handedness import HandednessConfig, HandednessReport, detect_handedness
from ..basetools.prototypes import PhonoPrediction
from ..basetools.segmentation import make_segment
from ..datamodel import FrameFeatures
from ..enhanced.clustering import DEFAULT_TAU, ClusterPartition, cosine_distance, visual_id_gloss
from ..enhanced.phonoanalysis import DEFAULT_TAU_OVERLAP, analyze_clusters_phonology
from ..errors import DataError, MissingFeatures
from ..orchestrator import EpisodeState, ToolRegistry, final_step, register_policy, run_episode, tool_step
from ..resources import Lexicon
from .validation import PartitionVerdict, validate_partition

log = logging.getLogger(__name__)

DEFAULT_CAP = 10
RECORD_VERSION = 1
N_FEATURE_TYPES = 5
MIXED_CONFIDENCE = 0.5


@dataclass
class IDGlossConfig:
    cap: int = DEFAULT_CAP
    retries: int = 2
    tau: float = DEFAULT_TAU
    tau_overlap: float = DEFAULT_TAU_OVERLAP
    min_agreeing_singleton: int = 3
    min_agreeing_multi: int = 4
    merge_distance_factor: float = 2.0
    top_k: int | None = 1
    knn_k: int = 5
    handedness: HandednessConfig = field(default_factory=HandednessConfig)

    def __post_init__(self):
        if self.cap < 1:
            raise ValueError("cap N must be >= 1")
        if not 0 < self.tau < 2:
            raise ValueError("tau must lie in (0, 2)")
        if not 0 <= self.tau_overlap <= 1:
            raise ValueError("tau_overlap must lie in [0, 1]")
        for n in (self.min_agreeing_singleton, self.min_agreeing_multi):
            if not 0 <= n <= N_FEATURE_TYPES:
                raise ValueError("agreeing-feature thresholds must lie in 0..5")
        if self.merge_distance_factor <= 0:
            raise ValueError("merge_distance_factor must be positive")

    def policy_params(self) -> dict[str, Any]:
        return {
            "tau_overlap": self.tau_overlap,
            "min_agreeing_singleton": self.min_agreeing_singleton,
            "min_agreeing_multi": self.min_agreeing_multi,
            "merge_distance_factor": self.merge_distance_factor,
            "top_k": self.top_k,
        }


@dataclass
class GlossSample:
    key: str
    features: FrameFeatures
    segment: tuple[int, int] | None = None


@dataclass
class SampleEvidence:
    """Per-sample inputs for the three tools."""

    embeddings: dict[str, np.ndarray]
    predictions: dict[str, dict[str, PhonoPrediction]]
    handedness: dict[str, HandednessReport]


def sample_evidence(samples: Sequence[GlossSample], lexicon: Lexicon, config: IDGlossConfig) -> SampleEvidence:
    emb, preds, hand = {}, {}, {}
    for s in samples:
        a, b = s.segment or (0, s.features.frame_count)
        seg = make_segment(s.features, a, b)
        if seg.pooled_embedding is None:
            raise MissingFeatures(f"{s.key}: no frame embeddings")
        emb[s.key] = seg.pooled_embedding
        preds[s.key] = classify_all(s.features.slice(a, b), lexicon.bank, config.knn_k) if lexicon.bank else {}
        hand[s.key] = detect_handedness(seg, s.features, config.handedness)
    return SampleEvidence(emb, preds, hand)


# --- handedness compatibility ----------------------------------------------------

ONE_HANDED = {"left", "right"}


def cluster_handedness(labels: Sequence[str]) -> str:
    """Majority label of the members; ties read as mixed."""
    if not labels:
        return "mixed"
    counts = Counter(labels).most_common()
    if len(counts) > 1 and counts[0][1] == counts[1][1]:
        return "mixed"
    return counts[0][0]


def handedness_compatibility(a: str, b: str, agreeing: int, distance_ok: bool) -> tuple[bool, float]:
    """(compatible, gate credit). Left/right mirror pairs need full phonological
    agreement and a passing distance gate; mixed pairs pass at reduced credit."""
    if a == b:
        return True, 1.0
    if "mixed" in (a, b):
        return True, MIXED_CONFIDENCE
    if {a, b} == ONE_HANDED:
        ok = agreeing == N_FEATURE_TYPES and distance_ok
        return ok, 1.0 if ok else 0.0
    return False, 0.0


def correction_compatible(key_label: str, cluster_label: str) -> bool:
    """Placement rule for missing keys: only one- vs two-handed is excluded."""
    return not ({key_label, cluster_label} & ONE_HANDED and "both" in (key_label, cluster_label))


# --- tools -----------------------------------------------------------------------


def build_idgloss_tools(
    gloss_id: str,
    evidence: SampleEvidence,
    canonical: Mapping[str, str] | None,
    config: IDGlossConfig,
) -> ToolRegistry:
    reg = ToolRegistry()
    state: dict[str, ClusterPartition] = {}

    def _visual(tau: float | None = None) -> dict[str, Any]:
        part = visual_id_gloss(sorted(evidence.embeddings.items()), tau or config.tau)
        state["partition"] = part
        return part.to_dict()

    def _analysis(tau_overlap: float | None = None, min_agreeing: int | None = None, top_k: int | None = None) -> dict[str, Any]:
        if "partition" not in state:
            raise RuntimeError("call visual_id_gloss first")
        part = state["partition"]
        top = top_k if top_k is not None else config.top_k
        recs = analyze_clusters_phonology(
            part,
            evidence.predictions,
            canonical,
            config.tau_overlap if tau_overlap is None else tau_overlap,
            config.min_agreeing_singleton if min_agreeing is None else min_agreeing,
            top,
        )
        return {
            "gloss_id": gloss_id,
            "canonical_phonology": dict(canonical) if canonical else None,
            "recommendations": [r.to_dict() for r in recs],
        }

    def _handedness(sample_ids: list[str] | None = None) -> dict[str, Any]:
        keys = sorted(evidence.handedness) if sample_ids is None else sample_ids
        unknown = [k for k in keys if k not in evidence.handedness]
        if unknown:
            raise KeyError(f"unknown samples {unknown}")
        reports = {k: evidence.handedness[k].to_dict() for k in keys}
        labels = Counter(r["label"] for r in reports.values())
        lc = sum(evidence.handedness[k].left_count for k in keys)
        rc = sum(evidence.handedness[k].right_count for k in keys)
        out: dict[str, Any] = {
            "samples": reports,
            "aggregate": {"labels": dict(sorted(labels.items())), "left_count": lc, "right_count": rc,
                          "left_right_ratio": (lc / rc) if rc else ("inf" if lc else 0.0)},
        }
        if "partition" in state:
            out["clusters"] = {
                c.cluster_id: dict(sorted(Counter(reports[k]["label"] for k in c.members if k in reports).items()))
                for c in state["partition"].clusters
            }
        return out

    reg.register(
        "visual_id_gloss",
        {
            "type": "object",
            "properties": {"tau": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 2}},
            "additionalProperties": False,
        },
        _visual,
        "Baseline visual clusters: members, centroids, distance matrix D, intra/inter distances, lone variants.",
    )
    reg.register(
        "analyze_clusters_phonology",
        {
            "type": "object",
            "properties": {
                "tau_overlap": {"type": "number", "minimum": 0, "maximum": 1},
                "min_agreeing": {"type": "integer", "minimum": 0, "maximum": N_FEATURE_TYPES},
                "top_k": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        _analysis,
        "Per-pair Jaccard overlaps of cluster phonology, agreeing feature counts and ranked merge recommendations.",
    )
    reg.register(
        "detect_handedness",
        {
            "type": "object",
            "properties": {"sample_ids": {"type": "array", "items": {"type": "string"}}},
            "additionalProperties": False,
        },
        _handedness,
        "Per-sample left/right/both/mixed labels with counts, plus aggregate and per-cluster tallies.",
    )
    return reg


# --- scripted policy -------------------------------------------------------------


def _pair_gates(rec: Mapping[str, Any], dist: float, sizes: Mapping[str, int], hand: Mapping[str, str],
                tau: float, p: Mapping[str, Any]) -> dict[str, Any]:
    src, dst = rec["source"], rec["target"]
    singleton = min(sizes[src], sizes[dst]) == 1
    need = p["min_agreeing_singleton"] if singleton else p["min_agreeing_multi"]
    d_max = p["merge_distance_factor"] * tau
    distance_ok = dist < d_max
    phono_ok = rec["agreeing_count"] >= need
    hand_ok, hand_credit = handedness_compatibility(hand[src], hand[dst], rec["agreeing_count"], distance_ok)
    blocking = []
    if not distance_ok:
        blocking.append(f"D = {dist:.4f} >= {d_max:.4f}")
    if not phono_ok:
        weak = {k: round(v, 4) for k, v in rec["jaccard"].items() if v < p["tau_overlap"]}
        blocking.append(f"agreeing feature types {rec['agreeing_count']} < {need}; J below {p['tau_overlap']}: {weak}")
    if not hand_ok:
        blocking.append(f"handedness {hand[src]} vs {hand[dst]} incompatible")
    return {
        "source": src,
        "target": dst,
        "merge": distance_ok and phono_ok and hand_ok,
        "gates": {"distance": distance_ok, "phonology": phono_ok, "handedness": hand_ok},
        "hand_credit": hand_credit,
        "statistics": {
            "D": dist,
            "distance_threshold": d_max,
            "jaccard": dict(rec["jaccard"]),
            "agreeing_count": rec["agreeing_count"],
            "required_agreeing": need,
            "mean_overlap": rec["mean_overlap"],
            "strongest_properties": list(rec["strongest_properties"][:2]),
            "handedness": {src: hand[src], dst: hand[dst]},
        },
        "blocking": blocking,
    }


def refine_clusters(
    partition: Mapping[str, Any],
    analysis: Mapping[str, Any],
    handedness: Mapping[str, Any],
    params: Mapping[str, Any],
) -> dict[str, Any]:
    """Deterministic MERGE/KEEP decisions from the three tool outputs."""
    p = {**IDGlossConfig().policy_params(), **dict(params)}
    tau = partition["tau"]
    ids = partition["distance_matrix"]["ids"]
    D = partition["distance_matrix"]["values"]
    members = {c["cluster_id"]: list(c["members"]) for c in partition["clusters"]}
    sizes = {c: len(m) for c, m in members.items()}
    reports = handedness["samples"]
    hand = {c: cluster_handedness([reports[k]["label"] for k in m if k in reports]) for c, m in members.items()}
    order = {c: i for i, c in enumerate(ids)}

    pairs = [
        _pair_gates(r, D[order[r["source"]]][order[r["target"]]], sizes, hand, tau, p)
        for r in analysis["recommendations"]
    ]

    parent = {c: c for c in ids}

    def find(c):
        while parent[c] != c:
            parent[c] = parent[parent[c]]
            c = parent[c]
        return c

    for pr in pairs:
        if pr["merge"]:
            a, b = find(pr["source"]), find(pr["target"])
            if a != b:
                parent[max(a, b, key=order.get)] = min(a, b, key=order.get)
    groups: dict[str, list[str]] = {}
    for c in ids:
        groups.setdefault(find(c), []).append(c)

    def label_of(group: list[str]) -> str:
        return min(group, key=lambda c: (-sizes[c], order[c]))

    final_id = {c: label_of(g) for g in groups.values() for c in g}

    adjustments = []
    for pr in pairs:
        op = "MERGE" if pr["merge"] else "KEEP"
        st = pr["statistics"]
        if op == "MERGE":
            why = (f"merge {pr['source']} into {final_id[pr['target']]}: D = {st['D']:.4f} < {st['distance_threshold']:.4f}, "
                   f"{st['agreeing_count']}/5 feature types agree (need {st['required_agreeing']}), "
                   f"handedness {hand[pr['source']]}/{hand[pr['target']]} compatible")
        else:
            why = f"keep {pr['source']} apart from {pr['target']}: " + "; ".join(pr["blocking"])
        adjustments.append({
            "operation": op,
            "source": pr["source"],
            "target": pr["target"],
            "statistics": st,
            "gates": pr["gates"],
            "blocking": pr["blocking"],
            "rationale": why,
        })

    # confidence: per baseline cluster, share of gates backing its decisive operation
    conf = []
    for c in ids:
        involved = [pr for pr in pairs if c in (pr["source"], pr["target"])]
        if not involved:
            conf.append(1.0)
            continue
        merged = [pr for pr in involved if pr["merge"]]
        if merged:
            pr = merged[0]
            conf.append((2.0 + pr["hand_credit"]) / 3.0)
        else:
            pr = involved[0]
            conf.append(sum(1 for ok in pr["gates"].values() if not ok) / 3.0)
    confidence = float(np.mean(conf)) if conf else 1.0

    review = []
    for c in partition["lone_variants"]:
        involved = [(i, pr) for i, pr in enumerate(pairs) if c in (pr["source"], pr["target"])]
        merged = [(i, pr) for i, pr in involved if pr["merge"]]
        if merged:
            i, pr = merged[0]
            review.append({"cluster_id": c, "samples": members[c], "decision": "MERGE", "target": final_id[c],
                           "adjustment": i, "statistics": pr["statistics"]})
        elif involved:
            i, pr = involved[0]
            review.append({"cluster_id": c, "samples": members[c], "decision": "KEEP", "target": None,
                           "adjustment": i, "statistics": pr["statistics"], "blocking": pr["blocking"]})
        else:
            review.append({"cluster_id": c, "samples": members[c], "decision": "KEEP", "target": None,
                           "adjustment": None, "statistics": {}, "blocking": ["no other cluster for this gloss"]})

    clusters = []
    for root in sorted(groups, key=lambda r: order[label_of(groups[r])]):
        group = groups[root]
        cid = label_of(group)
        inside = set(group)
        outside = [c for c in ids if c not in inside]
        nearest = None
        if outside:
            d, other = min((D[order[a]][order[b]], b) for a in group for b in outside)
            nearest = {"cluster_id": final_id[other], "distance": d}
        ops = [i for i, pr in enumerate(pairs) if pr["source"] in inside or pr["target"] in inside]
        merged_pairs = [pairs[i]["statistics"] | {"source": pairs[i]["source"], "target": pairs[i]["target"]}
                        for i in ops if pairs[i]["merge"]]
        labels = Counter(reports[k]["label"] for c in group for k in members[c] if k in reports)
        intra = {c: partition["clusters"][order[c]]["intra_mean_distance"] for c in group}
        text = (f"{len(group)} baseline cluster(s) {sorted(group, key=order.get)}; "
                f"nearest other cluster at D = {nearest['distance']:.4f}" if nearest else
                f"{len(group)} baseline cluster(s) {sorted(group, key=order.get)}; no other cluster")
        clusters.append({
            "cluster_id": cid,
            "members": sorted(k for c in group for k in members[c]),
            "justification": {
                "visual_distance": {"intra_mean": intra, "nearest_inter": nearest},
                "phonology": {"merged_pairs": merged_pairs,
                              "kept_pairs": [i for i in ops if not pairs[i]["merge"]]},
                "handedness": dict(sorted(labels.items())),
                "operations": ops,
                "summary": text,
            },
        })
    return {"clusters": clusters, "singleton_review": review, "adjustments": adjustments, "confidence": confidence}


@register_policy("idgloss-gates")
def idgloss_policy(state: EpisodeState, params: Mapping[str, Any]) -> dict[str, Any]:
    """visual_id_gloss, analyze_clusters_phonology, detect_handedness, answer. Budget: 3 calls."""
    part = state.results("visual_id_gloss")
    if not part:
        return tool_step("visual_id_gloss", {}, "Obtain the visual baseline partition.")
    analysis = state.results("analyze_clusters_phonology")
    if not analysis:
        args = {} if params.get("top_k") is None else {"top_k": int(params["top_k"])}
        return tool_step("analyze_clusters_phonology", args, "Compare cluster phonology pairwise.")
    hand = state.results("detect_handedness")
    if not hand:
        return tool_step("detect_handedness", {}, "Check handedness of every sample.")
    answer = refine_clusters(part[-1], analysis[-1], hand[-1], params)
    n_merge = sum(1 for a in answer["adjustments"] if a["operation"] == "MERGE")
    return final_step(answer, f"{n_merge} merge(s) passed all three gates; other pairs kept with blocking statistics.")


# --- correction pass -------------------------------------------------------------


@dataclass
class CorrectionResult:
    clusters: list[tuple[str, list[str]]]
    verdict: PartitionVerdict
    notes: list[str]


def correct_partition(
    clusters: Sequence[tuple[str, Sequence[str]]],
    keys: Sequence[str],
    vectors: Mapping[str, np.ndarray],
    handedness: Mapping[str, str] | None = None,
) -> CorrectionResult:
    """One constrained repair of an invalid assignment; cluster ids never change.

    Unknown keys are dropped. A duplicated key stays in its nearest containing
    cluster, a missing key goes to the nearest compatible cluster (any cluster
    when none is compatible); ties go to the smaller cluster id. If that would
    empty a cluster, a minimum-distance matching first reserves one allowed key
    per cluster. Without such a matching the result stays invalid.
    """
    keyset = set(keys)
    ids = [cid for cid, _ in clusters]
    if len(set(ids)) != len(ids):
        raise ValueError("cluster ids must be unique")
    notes: list[str] = []
    known = {cid: sorted({k for k in m if k in keyset}) for cid, m in clusters}
    dropped = sorted({k for _, m in clusters for k in m if k not in keyset})
    if dropped:
        notes.append(f"dropped unknown keys {dropped}")
    unit_vec = {k: unit(vectors[k]) for k in keys}
    centroid = {cid: (np.mean([unit_vec[k] for k in m], axis=0) if m else None) for cid, m in known.items()}

    def dist(k: str, cid: str) -> float:
        c = centroid[cid]
        if c is None or not np.any(c):
            return 2.0
        return cosine_distance(unit_vec[k], c)

    hand_of_cluster = {}
    if handedness:
        hand_of_cluster = {cid: cluster_handedness([handedness[k] for k in m if k in handedness]) for cid, m in known.items()}
    allowed: dict[str, list[str]] = {}
    for k in sorted(keyset):
        holders = [cid for cid in ids if k in known[cid]]
        if holders:
            allowed[k] = holders
        else:
            ok = [cid for cid in ids if not handedness or k not in handedness
                  or correction_compatible(handedness[k], hand_of_cluster.get(cid, "mixed"))]
            allowed[k] = ok or list(ids)

    def nearest(k: str) -> str | None:
        opts = allowed[k]
        return min(opts, key=lambda cid: (dist(k, cid), cid)) if opts else None

    assign = {k: nearest(k) for k in sorted(keyset)}
    filled = Counter(assign.values())
    if ids and any(filled[cid] == 0 for cid in ids):
        uniq = ids
        klist = sorted(keyset)
        big = 1e6
        cost = np.full((len(uniq), len(klist)), big)
        for j, k in enumerate(klist):
            for cid in allowed[k]:
                cost[uniq.index(cid), j] = dist(k, cid)
        if len(uniq) <= len(klist):
            rows, cols = linear_sum_assignment(cost)
            if all(cost[r, c] < big for r, c in zip(rows, cols)):
                reserved = {klist[c]: uniq[r] for r, c in zip(rows, cols)}
                assign = {k: reserved.get(k, assign[k]) for k in klist}
                notes.append("reserved one key per cluster to keep every cluster non-empty")
            else:
                notes.append("no assignment keeps every cluster non-empty")
        else:
            notes.append("more clusters than samples")
    out = [(cid, sorted(k for k, c in assign.items() if c == cid)) for cid in ids]
    if not ids:
        notes.append("no clusters to place samples into")
        out = []
    verdict = validate_partition(keys, dict(out))
    if verdict.valid and any(not m for _, m in out):
        verdict = PartitionVerdict(False, [], [], [])
        notes.append("an empty cluster remains")
    return CorrectionResult(out, verdict, notes)


# --- controller and record ---------------------------------------------------------


def idgloss_prompt(gloss_id: str, keys: Sequence[str], config: IDGlossConfig) -> str:
    return (
        f"Task: ID glossing for gloss {gloss_id} ({len(keys)} samples).\n"
        "Call visual_id_gloss, analyze_clusters_phonology and detect_handedness, then propose MERGE/KEEP operations.\n"
        f"Guidelines: MERGE when D < {config.merge_distance_factor} x tau, at least {config.min_agreeing_singleton}/5 "
        f"(singletons) or {config.min_agreeing_multi}/5 (multi-cluster) feature types agree with J >= {config.tau_overlap}, "
        "and handedness is compatible (left/right mirror variants may merge). Justify any deviation.\n"
        "Every sample must be assigned exactly once. Answer with {\"clusters\": [{\"cluster_id\", \"members\", "
        "\"justification\"}], \"singleton_review\": [...], \"adjustments\": [{\"operation\", \"source\", \"target\", "
        "\"rationale\"}], \"confidence\": number in [0, 1]}.\n"
        f"Sample keys: {json.dumps(list(keys))}"
    )


@dataclass
class IDGlossRecord:
    gloss_id: str
    sample_keys: list[str]
    baseline: dict[str, Any]
    clusters: list[dict[str, Any]]
    singleton_review: list[dict[str, Any]]
    adjustments: list[dict[str, Any]]
    confidence: float
    status: str  # valid | uncorrectable | rejected
    corrected: bool = False
    duplicates: list[str] = field(default_factory=list)
    missing: list[str] = field(default_factory=list)
    extra: list[str] = field(default_factory=list)
    pre_correction: dict[str, list[str]] | None = None
    post_correction: dict[str, list[str]] | None = None
    reasons: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    episode: dict[str, Any] | None = None
    trace: dict[str, Any] | None = None

    @property
    def valid(self) -> bool:
        return self.status == "valid"

    def assignment(self) -> dict[str, list[str]]:
        return {c["cluster_id"]: list(c["members"]) for c in self.clusters}

    def to_dict(self) -> dict[str, Any]:
        return {
            "task": "idgloss",
            "version": RECORD_VERSION,
            "gloss_id": self.gloss_id,
            "sample_keys": list(self.sample_keys),
            "baseline": self.baseline,
            "clusters": self.clusters,
            "singleton_review": self.singleton_review,
            "adjustments": self.adjustments,
            "confidence": self.confidence,
            "validation": {
                "status": self.status,
                "corrected": self.corrected,
                "duplicates": list(self.duplicates),
                "missing": list(self.missing),
                "extra": list(self.extra),
                "pre_correction": self.pre_correction,
                "post_correction": self.post_correction,
                "reasons": list(self.reasons),
                "warnings": list(self.warnings),
            },
            "episode": self.episode,
            "trace": self.trace,
        }


def baseline_summary(part: ClusterPartition) -> dict[str, Any]:
    return {
        "tau": part.tau,
        "clusters": [{"cluster_id": c.cluster_id, "members": list(c.members)} for c in part.clusters],
        "lone_variants": list(part.lone_variants),
        "distance_matrix": {"ids": part.ids(), "values": part.distance_matrix.tolist()},
    }


def correction_pass(record: IDGlossRecord, evidence: SampleEvidence) -> IDGlossRecord:
    """Apply :func:`correct_partition` once; store both assignments on the record."""
    before = [(c["cluster_id"], list(c["members"])) for c in record.clusters]
    labels = {k: r.label for k, r in evidence.handedness.items()}
    res = correct_partition(before, record.sample_keys, evidence.embeddings, labels)
    record.pre_correction = {cid: list(m) for cid, m in before}
    record.post_correction = {cid: list(m) for cid, m in res.clusters}
    record.corrected = True
    record.warnings.extend(res.notes)
    by_id = {c["cluster_id"]: c for c in record.clusters}
    record.clusters = [{**by_id.get(cid, {"cluster_id": cid, "justification": {}}), "members": m} for cid, m in res.clusters]
    if res.verdict.valid:
        record.status = "valid"
        record.duplicates, record.missing, record.extra = [], [], []
    else:
        record.status = "uncorrectable"
        record.reasons.append("correction pass could not restore an exact partition without changing the topology")
    return record


def _parse_clusters(answer: Mapping[str, Any], reasons: list[str]) -> list[dict[str, Any]]:
    raw = answer.get("clusters")
    if not isinstance(raw, list):
        reasons.append("answer lacks a cluster list")
        return []
    out = []
    seen: set[str] = set()
    for n, c in enumerate(raw):
        if not isinstance(c, dict) or not isinstance(c.get("members"), list):
            reasons.append(f"cluster entry {n} is malformed")
            continue
        cid = str(c.get("cluster_id", f"r{n}"))
        if cid in seen:
            reasons.append(f"cluster id {cid!r} repeated; renamed {cid}#{n}")
            cid = f"{cid}#{n}"
        seen.add(cid)
        out.append({
            "cluster_id": cid,
            "members": [str(k) for k in c["members"]],
            "justification": c.get("justification") if isinstance(c.get("justification"), dict) else {},
        })
    return out


def _list_of_dicts(x: Any) -> list[dict[str, Any]]:
    return [d for d in x if isinstance(d, dict)] if isinstance(x, list) else []


def run_idgloss_task(
    gloss_id: str,
    samples: Sequence[GlossSample],
    lexicon: Lexicon,
    backend,
    config: IDGlossConfig | None = None,
) -> IDGlossRecord:
    cfg = config or IDGlossConfig()
    keys = sorted(s.key for s in samples)
    if len(set(keys)) != len(keys):
        raise DataError(f"{gloss_id}: duplicate sample keys")
    if not keys:
        raise DataError(f"{gloss_id}: no samples")
    warnings = []
    canonical = None
    if gloss_id in lexicon.by_id:
        canonical = dict(lexicon.by_id[gloss_id].canonical_phonology)
    else:
        warnings.append(f"gloss {gloss_id!r} is not in the dictionary; canonical agreement omitted")
        log.warning("%s: not in dictionary, canonical agreement omitted", gloss_id)

    if len(keys) == 1:
        only = {"cluster_id": "c0", "members": keys,
                "justification": {"summary": "single sample; nothing to compare", "visual_distance": {},
                                  "phonology": {}, "handedness": {}}}
        base = {"tau": cfg.tau, "clusters": [{"cluster_id": "c0", "members": keys}], "lone_variants": ["c0"],
                "distance_matrix": {"ids": ["c0"], "values": [[0.0]]}}
        return IDGlossRecord(gloss_id, keys, base, [only], [], [], 1.0, "valid", warnings=warnings)

    evidence = sample_evidence(samples, lexicon, cfg)
    baseline = visual_id_gloss(sorted(evidence.embeddings.items()), cfg.tau)
    registry = build_idgloss_tools(gloss_id, evidence, canonical, cfg)
    context = {"task": "idgloss", "gloss_id": gloss_id, "sample_keys": keys}
    answer, trace = run_episode(idgloss_prompt(gloss_id, keys, cfg), backend, registry, cfg.cap, cfg.retries, context)
    episode = {
        "status": trace.status,
        "invocation_count": trace.invocation_count,
        "cap": trace.cap,
        "rejection_reason": trace.rejection_reason,
        "backend": trace.backend,
    }
    rec = IDGlossRecord(gloss_id, keys, baseline_summary(baseline), [], [], [], 0.0, "rejected",
                        warnings=warnings, episode=episode, trace=trace.to_dict())
    if answer is None:
        rec.reasons.append(trace.rejection_reason or "episode rejected")
        return rec
    reasons: list[str] = []
    rec.clusters = _parse_clusters(answer, reasons)
    rec.singleton_review = _list_of_dicts(answer.get("singleton_review"))
    rec.adjustments = _list_of_dicts(answer.get("adjustments"))
    c = answer.get("confidence")
    rec.confidence = float(np.clip(c, 0.0, 1.0)) if isinstance(c, (int, float)) and np.isfinite(c) else 0.0
    if not isinstance(c, (int, float)):
        warnings.append("answer has no numeric confidence; recorded as 0")
    rec.reasons.extend(reasons)
    verdict = validate_partition(keys, [k for cl in rec.clusters for k in cl["members"]])
    rec.duplicates, rec.missing, rec.extra = verdict.duplicates, verdict.missing, verdict.extra
    if verdict.valid and all(cl["members"] for cl in rec.clusters):
        rec.status = "valid"
        return rec
    rec.reasons.append(f"partition invalid (duplicates {verdict.duplicates}, missing {verdict.missing}, extra {verdict.extra})")
    return correction_pass(rec, evidence)
