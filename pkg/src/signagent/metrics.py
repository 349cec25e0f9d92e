"""Sequence metrics for pseudo-gloss output and clustering metrics for ID glossing."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .basetools.glosser import unit
from .errors import DomainError, EmptyInput, EmptyReference, KeyMismatch, SingleCluster

COMBINED = "combined"


def normalize(tokens: Iterable[str]) -> list[str]:
    return [t.strip().lower() for t in tokens]


# --- sequences -------------------------------------------------------------------


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def lcs_percent(reference: Sequence[str], hypothesis: Sequence[str]) -> float:
    """100 * |LCS| / |reference| over lowercased tokens."""
    ref = normalize(reference)
    if not ref:
        raise EmptyReference("reference sequence is empty")
    return 100.0 * lcs_length(ref, normalize(hypothesis)) / len(ref)


def first_positions(tokens: Sequence[str]) -> dict[str, int]:
    pos: dict[str, int] = {}
    for i, t in enumerate(tokens):
        pos.setdefault(t, i)
    return pos


def kendall_tau_positions(reference: Sequence[str], hypothesis: Sequence[str]) -> float | None:
    """Kendall tau-a between first-occurrence positions of the shared types.

    Returns None when fewer than two types are shared.
    """
    pr, ph = first_positions(normalize(reference)), first_positions(normalize(hypothesis))
    shared = sorted(set(pr) & set(ph), key=pr.get)
    n = len(shared)
    if n < 2:
        return None
    h = [ph[t] for t in shared]
    conc = disc = 0
    for i in range(n):
        for j in range(i + 1, n):
            if h[i] < h[j]:
                conc += 1
            else:
                disc += 1
    return (conc - disc) / (n * (n - 1) / 2)


@dataclass
class SequenceEvalResult:
    lcs_percent: float
    kendall_tau: float | None
    matched_type_count: int

    def to_dict(self) -> dict[str, Any]:
        return {"lcs_percent": self.lcs_percent, "kendall_tau": self.kendall_tau, "matched_type_count": self.matched_type_count}


def evaluate_sequence(reference: Sequence[str], hypothesis: Sequence[str]) -> SequenceEvalResult:
    matched = len(set(normalize(reference)) & set(normalize(hypothesis)))
    return SequenceEvalResult(lcs_percent(reference, hypothesis), kendall_tau_positions(reference, hypothesis), matched)


@dataclass
class SubsetSummary:
    n: int = 0
    lcs_percent: float | None = None
    kendall_tau: float | None = None
    tau_defined: int = 0
    rejected: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "lcs_percent": self.lcs_percent,
            "kendall_tau": self.kendall_tau,
            "tau_defined": self.tau_defined,
            "rejected": self.rejected,
        }


@dataclass
class CorpusReport:
    subsets: dict[str, SubsetSummary]
    per_sample: dict[str, SequenceEvalResult]
    rejected: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "subsets": {k: v.to_dict() for k, v in self.subsets.items()},
            "per_sample": {k: v.to_dict() for k, v in sorted(self.per_sample.items())},
            "rejected": list(self.rejected),
        }


def _summary(results: list[SequenceEvalResult], rejected: int) -> SubsetSummary:
    taus = [r.kendall_tau for r in results if r.kendall_tau is not None]
    return SubsetSummary(
        n=len(results),
        lcs_percent=float(np.mean([r.lcs_percent for r in results])) if results else None,
        kendall_tau=float(np.mean(taus)) if taus else None,
        tau_defined=len(taus),
        rejected=rejected,
    )


def evaluate_pseudogloss_corpus(
    records: Mapping[str, Mapping[str, Any]],
    references: Mapping[str, Mapping[str, Any]],
) -> CorpusReport:
    """Per-subset and combined means over records whose status is valid.

    ``records`` maps sample id to a record document (``sequence``,
    ``validation.status``); ``references`` maps sample id to ``{"tokens": [...],
    "subset": name}``. Non-valid records are left out of the means and tallied.
    """
    if set(records) != set(references):
        only_r = sorted(set(records) - set(references))
        only_ref = sorted(set(references) - set(records))
        raise KeyMismatch(f"record/reference keys differ: records only {only_r}, references only {only_ref}")
    by_subset: dict[str, list[SequenceEvalResult]] = {}
    rejected_by: Counter = Counter()
    per_sample: dict[str, SequenceEvalResult] = {}
    rejected: list[str] = []
    for sid in sorted(records):
        rec, ref = records[sid], references[sid]
        subset = ref.get("subset") or rec.get("subset") or "all"
        status = rec.get("validation", {}).get("status", "valid")
        if status != "valid":
            rejected.append(sid)
            rejected_by[subset] += 1
            continue
        res = evaluate_sequence(ref["tokens"], rec.get("sequence", []))
        per_sample[sid] = res
        by_subset.setdefault(subset, []).append(res)
    subsets = {name: _summary(by_subset.get(name, []), rejected_by[name]) for name in sorted(set(by_subset) | set(rejected_by))}
    subsets[COMBINED] = _summary([r for v in by_subset.values() for r in v], len(rejected))
    return CorpusReport(subsets, per_sample, rejected)


# --- clustering ------------------------------------------------------------------


def cluster_entropy_bits(sizes: Sequence[int]) -> float:
    """Shannon entropy (bits) of the cluster-size distribution."""
    sizes = [int(s) for s in sizes]
    if not sizes:
        raise EmptyInput("no clusters")
    if any(s <= 0 for s in sizes):
        raise DomainError("cluster sizes must be positive")
    n = sum(sizes)
    return float(-sum((s / n) * math.log2(s / n) for s in sizes)) + 0.0


def _labels(assignment: Sequence[Any]) -> np.ndarray:
    _, inv = np.unique(np.asarray([str(a) for a in assignment]), return_inverse=True)
    return inv


def cosine_distance_matrix(X: np.ndarray) -> np.ndarray:
    U = np.stack([unit(x) for x in X])
    return np.clip(1.0 - U @ U.T, 0.0, 2.0)


def silhouette_samples(embeddings, assignment: Sequence[Any]) -> np.ndarray:
    """Per-sample silhouette under cosine distance; singletons score 0, as does a = b = 0."""
    X = np.asarray(embeddings, dtype=np.float64)
    lab = _labels(assignment)
    n = len(lab)
    if n != len(X):
        raise DomainError("embeddings and assignment differ in length")
    k = len(set(lab.tolist()))
    if k < 2:
        raise SingleCluster("silhouette needs at least two clusters")
    if n < 3:
        raise DomainError("silhouette needs at least three samples")
    D = cosine_distance_matrix(X)
    s = np.zeros(n)
    for i in range(n):
        same = lab == lab[i]
        if same.sum() == 1:
            continue
        a = D[i, same].sum() / (same.sum() - 1)
        b = min(D[i, lab == c].mean() for c in set(lab.tolist()) if c != lab[i])
        m = max(a, b)
        s[i] = (b - a) / m if m > 0 else 0.0
    return s


def silhouette_mean(embeddings, assignment: Sequence[Any]) -> float:
    return float(silhouette_samples(embeddings, assignment).mean())


def calinski_harabasz(embeddings, assignment: Sequence[Any]) -> float:
    """[tr(B)/(K-1)] / [tr(W)/(n-K)] with Euclidean scatter; +inf when tr(W) = 0."""
    X = np.asarray(embeddings, dtype=np.float64)
    lab = _labels(assignment)
    n, k = len(lab), len(set(lab.tolist()))
    if n != len(X):
        raise DomainError("embeddings and assignment differ in length")
    if k < 2 or n <= k:
        raise DomainError("Calinski-Harabasz needs 2 <= K < n")
    mean = X.mean(axis=0)
    B = W = 0.0
    for c in range(k):
        Xc = X[lab == c]
        mc = Xc.mean(axis=0)
        B += len(Xc) * float(((mc - mean) ** 2).sum())
        W += float(((Xc - mc) ** 2).sum())
    if W == 0:
        return math.inf
    return (B / (k - 1)) / (W / (n - k))


@dataclass
class ClusterEvalResult:
    ids_per_gloss: float
    total_ids: int
    entropy_bits: dict[str, float]
    mean_entropy_bits: float
    silhouette: float | None
    calinski_harabasz: float | None
    glosses: int
    silhouette_glosses: int = 0
    ch_glosses: int = 0
    ch_infinite: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "ids_per_gloss": self.ids_per_gloss,
            "total_ids": self.total_ids,
            "entropy_bits": dict(self.entropy_bits),
            "mean_entropy_bits": self.mean_entropy_bits,
            "silhouette": self.silhouette,
            "calinski_harabasz": self.calinski_harabasz,
            "glosses": self.glosses,
            "silhouette_glosses": self.silhouette_glosses,
            "ch_glosses": self.ch_glosses,
            "ch_infinite": self.ch_infinite,
        }


def evaluate_clusters(
    partitions: Mapping[str, Mapping[str, Sequence[str]]],
    embeddings: Mapping[str, Any],
) -> ClusterEvalResult:
    """Fragmentation summary over glosses.

    ``partitions`` maps gloss -> cluster id -> member keys. Silhouette is
    averaged over all samples of glosses where it is defined; CH is averaged
    over glosses with a finite value (infinite ones are counted separately).
    """
    if not partitions:
        raise EmptyInput("no glosses to evaluate")
    counts, ent = [], {}
    sil_values: list[float] = []
    ch_values: list[float] = []
    sil_g = ch_inf = 0
    for gloss in sorted(partitions):
        clusters = {c: list(m) for c, m in partitions[gloss].items() if m}
        counts.append(len(clusters))
        ent[gloss] = cluster_entropy_bits([len(m) for m in clusters.values()])
        keys = [k for c in sorted(clusters) for k in clusters[c]]
        lab = [c for c in sorted(clusters) for _ in clusters[c]]
        X = np.stack([np.asarray(embeddings[k], dtype=np.float64) for k in keys])
        try:
            sil_values.extend(silhouette_samples(X, lab).tolist())
            sil_g += 1
        except DomainError:
            pass
        try:
            ch = calinski_harabasz(X, lab)
        except DomainError:
            continue
        if math.isinf(ch):
            ch_inf += 1
        else:
            ch_values.append(ch)
    return ClusterEvalResult(
        ids_per_gloss=float(np.mean(counts)),
        total_ids=int(sum(counts)),
        entropy_bits=ent,
        mean_entropy_bits=float(np.mean(list(ent.values()))),
        silhouette=float(np.mean(sil_values)) if sil_values else None,
        calinski_harabasz=float(np.mean(ch_values)) if ch_values else None,
        glosses=len(counts),
        silhouette_glosses=sil_g,
        ch_glosses=len(ch_values),
        ch_infinite=ch_inf,
    )


# --- text tables -----------------------------------------------------------------


def _fmt(x: float | None, spec: str) -> str:
    return "n/a" if x is None else format(x, spec)


def format_sequence_table(reports: Mapping[str, CorpusReport]) -> str:
    """Rows = methods; LCS% and tau per subset, combined last."""
    names = sorted({s for r in reports.values() for s in r.subsets if s != COMBINED}) + [COMBINED]
    head = ["method"] + [f"{s} LCS%" for s in names] + [f"{s} tau" for s in names] + ["rejected"]
    rows = [head]
    for method, rep in reports.items():
        row = [method]
        row += [_fmt(rep.subsets[s].lcs_percent if s in rep.subsets else None, ".2f") for s in names]
        row += [_fmt(rep.subsets[s].kendall_tau if s in rep.subsets else None, ".3f") for s in names]
        row.append(str(len(rep.rejected)))
        rows.append(row)
    return _align(rows)


def format_cluster_table(results: Mapping[str, ClusterEvalResult]) -> str:
    rows = [["method", "IDs/gloss", "total IDs", "H (bits)", "silhouette", "CH"]]
    for method, r in results.items():
        rows.append([
            method,
            f"{r.ids_per_gloss:.2f}",
            str(r.total_ids),
            f"{r.mean_entropy_bits:.3f}",
            _fmt(r.silhouette, ".4f"),
            _fmt(r.calinski_harabasz, ".2f"),
        ])
    return _align(rows)


def _align(rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))) for r in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
