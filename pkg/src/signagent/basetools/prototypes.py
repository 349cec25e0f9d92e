"""Prototype banks and cosine k-NN voting shared by the phonological classifiers."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from ..datamodel import COMPONENT_KINDS, LABEL_SETS
from ..errors import DataError, ParseError


@dataclass(frozen=True)
class PhonoPrediction:
    """Top-k labels for one component kind, best first.

    Confidences lie in (0, 1], are non-increasing and sum to at most 1.
    """

    component_kind: str
    ranked: tuple[tuple[str, float], ...]

    @property
    def k(self) -> int:
        return len(self.ranked)

    @property
    def labels(self) -> list[str]:
        return [label for label, _ in self.ranked]

    @property
    def top(self) -> str | None:
        return self.ranked[0][0] if self.ranked else None

    def to_dict(self) -> dict[str, Any]:
        return {"component_kind": self.component_kind, "ranked": [[l, p] for l, p in self.ranked]}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PhonoPrediction":
        return cls(d["component_kind"], tuple((str(l), float(p)) for l, p in d["ranked"]))


class PrototypeBank:
    """Labelled reference vectors per component kind (the k-NN reference sets)."""

    def __init__(self, banks: Mapping[str, tuple[np.ndarray, Sequence[str]]], label_sets=None):
        label_sets = LABEL_SETS if label_sets is None else label_sets
        self._banks: dict[str, tuple[np.ndarray, tuple[str, ...]]] = {}
        for kind, (vectors, labels) in banks.items():
            vectors = np.asarray(vectors, dtype=np.float64)
            labels = tuple(labels)
            if vectors.ndim != 2 or vectors.shape[0] != len(labels) or not labels:
                raise DataError(f"{kind}: need a non-empty (n, dim) array with n labels")
            if not np.all(np.isfinite(vectors)):
                raise DataError(f"{kind}: non-finite prototype")
            if kind in label_sets:
                bad = sorted(set(labels) - label_sets[kind])
                if bad:
                    raise DataError(f"{kind}: labels outside the closed set: {bad}")
            self._banks[kind] = (vectors, labels)

    def __contains__(self, kind: str) -> bool:
        return kind in self._banks

    def kinds(self) -> list[str]:
        return [k for k in COMPONENT_KINDS if k in self._banks] + sorted(set(self._banks) - set(COMPONENT_KINDS))

    def get(self, kind: str) -> tuple[np.ndarray, tuple[str, ...]]:
        if kind not in self._banks:
            raise KeyError(f"prototype bank has no {kind!r} prototypes")
        return self._banks[kind]

    def dim(self, kind: str) -> int:
        return int(self._banks[kind][0].shape[1])

    def missing_labels(self, label_sets=None) -> dict[str, list[str]]:
        """Labels of the closed sets with no prototype, per kind present in the bank."""
        label_sets = LABEL_SETS if label_sets is None else label_sets
        return {
            kind: sorted(label_sets[kind] - set(labels))
            for kind, (_, labels) in self._banks.items()
            if kind in label_sets and label_sets[kind] - set(labels)
        }

    def to_dict(self) -> dict[str, Any]:
        return {
            kind: {
                "dim": int(vectors.shape[1]),
                "prototypes": [{"label": l, "vector": [float(x) for x in v]} for v, l in zip(vectors, labels)],
            }
            for kind, (vectors, labels) in self._banks.items()
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any], label_sets=None) -> "PrototypeBank":
        banks = {}
        for kind, body in doc.items():
            protos = body["prototypes"]
            vectors = np.array([p["vector"] for p in protos], dtype=np.float64)
            if "dim" in body and vectors.shape[1] != body["dim"]:
                raise DataError(f"{kind}: prototype dim {vectors.shape[1]} != declared {body['dim']}")
            banks[kind] = (vectors, [p["label"] for p in protos])
        return cls(banks, label_sets)


def load_prototype_bank(path, require_coverage: bool = True, label_sets=None) -> PrototypeBank:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    bank = PrototypeBank.from_dict(doc, label_sets)
    if require_coverage:
        missing = bank.missing_labels(label_sets)
        if missing:
            raise DataError(f"{path}: labels without prototypes: {missing}")
    return bank


def save_prototype_bank(bank: PrototypeBank, path) -> None:
    Path(path).write_text(json.dumps(bank.to_dict(), sort_keys=True) + "\n", encoding="utf-8")


def cosine_distances(query: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Cosine distance from ``query`` to every row of ``vectors``.

    Zero vectors: distance 0 between two zero vectors, 1 between a zero and a
    non-zero vector.
    """
    q = np.asarray(query, dtype=np.float64)
    qn = np.linalg.norm(q)
    norms = np.linalg.norm(vectors, axis=1)
    out = np.ones(len(vectors))
    if qn == 0:
        out[norms == 0] = 0.0
        return out
    ok = norms > 0
    sims = (vectors[ok] @ q) / (norms[ok] * qn)
    out[ok] = 1.0 - np.clip(sims, -1.0, 1.0)
    return out


def knn_vote(query, vectors: np.ndarray, labels: Sequence[str], k: int, kind: str = "") -> PhonoPrediction:
    """Rank labels by their share of the ``k`` nearest prototypes.

    Ties in vote count go to the label with the nearest voter, then by label.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    d = cosine_distances(query, vectors)
    order = np.lexsort((np.arange(len(d)), d))[: min(k, len(d))]
    votes: Counter[str] = Counter()
    best: dict[str, float] = {}
    for i in order:
        label = labels[i]
        votes[label] += 1
        best.setdefault(label, float(d[i]))
    n = len(order)
    ranked = sorted(votes, key=lambda l: (-votes[l], best[l], l))
    return PhonoPrediction(kind, tuple((l, votes[l] / n) for l in ranked))


def consensus(labels: Iterable[str], kind: str = "") -> PhonoPrediction:
    """Frame-level consensus: labels ranked by the fraction of frames voting for them."""
    counts = Counter(labels)
    n = sum(counts.values())
    if n == 0:
        return PhonoPrediction(kind, ())
    ranked = sorted(counts, key=lambda l: (-counts[l], l))
    return PhonoPrediction(kind, tuple((l, counts[l] / n) for l in ranked))
