"""Pointwise gradient-boosted regression trees for candidate reranking."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import DataError, ParseError

log = logging.getLogger(__name__)

FORMAT = "signagent-gbdt"
VERSION = 1


@dataclass(frozen=True)
class RankerConfig:
    n_trees: int = 50
    max_depth: int = 3
    learning_rate: float = 0.1
    min_samples_leaf: int = 1
    subsample: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 0 or self.max_depth < 1 or self.min_samples_leaf < 1:
            raise ValueError("n_trees >= 0, max_depth >= 1 and min_samples_leaf >= 1 required")
        if not 0 < self.learning_rate <= 1 or not 0 < self.subsample <= 1:
            raise ValueError("learning_rate and subsample must lie in (0, 1]")


@dataclass
class RegressionTree:
    """Array-encoded binary tree; ``feature == -1`` marks a leaf."""

    feature: list[int]
    threshold: list[float]
    left: list[int]
    right: list[int]
    value: list[float]

    def predict(self, X: np.ndarray) -> np.ndarray:
        feature = np.asarray(self.feature)
        threshold = np.asarray(self.threshold)
        left, right = np.asarray(self.left), np.asarray(self.right)
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            f = feature[node]
            inner = f >= 0
            if not inner.any():
                break
            go_left = X[rows[inner], f[inner]] <= threshold[node[inner]]
            node[inner] = np.where(go_left, left[node[inner]], right[node[inner]])
        return np.asarray(self.value, dtype=np.float64)[node]


def _best_split(X: np.ndarray, r: np.ndarray, min_leaf: int) -> tuple[int, float, float] | None:
    n = len(r)
    base = float(((r - r.mean()) ** 2).sum())
    pos = np.arange(min_leaf - 1, n - min_leaf)
    if len(pos) == 0:
        return None
    nl = pos + 1.0
    nr = n - nl
    best = None
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs, rs = X[order, j], r[order]
        csum = np.cumsum(rs)
        csq = np.cumsum(rs**2)
        sse_l = csq[pos] - csum[pos] ** 2 / nl
        sse_r = (csq[-1] - csq[pos]) - (csum[-1] - csum[pos]) ** 2 / nr
        gain = base - sse_l - sse_r
        gain[xs[pos] == xs[pos + 1]] = -np.inf
        i = int(np.argmax(gain))
        if np.isfinite(gain[i]) and (best is None or gain[i] > best[2]):
            best = (j, 0.5 * (xs[pos[i]] + xs[pos[i] + 1]), float(gain[i]))
    if best is None or best[2] <= 1e-12:
        return None
    return best


def fit_tree(X: np.ndarray, r: np.ndarray, max_depth: int, min_leaf: int = 1) -> RegressionTree:
    """Least-squares regression tree grown depth-first with exact greedy splits."""
    tree = RegressionTree([], [], [], [], [])

    def grow(idx: np.ndarray, depth: int) -> int:
        node = len(tree.feature)
        tree.feature.append(-1)
        tree.threshold.append(0.0)
        tree.left.append(-1)
        tree.right.append(-1)
        tree.value.append(float(r[idx].mean()))
        if depth >= max_depth or len(idx) < 2 * min_leaf:
            return node
        split = _best_split(X[idx], r[idx], min_leaf)
        if split is None:
            return node
        j, thr, _ = split
        mask = X[idx, j] <= thr
        tree.feature[node] = j
        tree.threshold[node] = float(thr)
        tree.left[node] = grow(idx[mask], depth + 1)
        tree.right[node] = grow(idx[~mask], depth + 1)
        return node

    grow(np.arange(len(r)), 0)
    return tree


@dataclass
class GBDTRanker:
    base: float
    learning_rate: float
    trees: list[RegressionTree]
    n_features: int
    degenerate: bool = False
    config: dict[str, Any] | None = None

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise DataError(f"ranker expects {self.n_features} features, got {X.shape[1]}")
        out = np.full(len(X), self.base, dtype=np.float64)
        for tree in self.trees:
            out += self.learning_rate * tree.predict(X)
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "format": FORMAT,
            "version": VERSION,
            "base": self.base,
            "learning_rate": self.learning_rate,
            "n_features": self.n_features,
            "degenerate": self.degenerate,
            "config": self.config,
            "trees": [asdict(t) for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "GBDTRanker":
        if d.get("format") != FORMAT:
            raise ParseError(f"not a {FORMAT} document")
        if d.get("version") != VERSION:
            raise ParseError(f"unsupported ranker version {d.get('version')}")
        return cls(
            base=float(d["base"]),
            learning_rate=float(d["learning_rate"]),
            trees=[RegressionTree(**t) for t in d["trees"]],
            n_features=int(d["n_features"]),
            degenerate=bool(d.get("degenerate", False)),
            config=d.get("config"),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "GBDTRanker":
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from None


def train_ranker(rows, config: RankerConfig | None = None) -> GBDTRanker:
    """Fit squared-loss boosted trees on ``(feature_vector, relevance)`` rows.

    All-equal labels give a constant model flagged ``degenerate``.
    """
    cfg = config or RankerConfig()
    rows = list(rows)
    if len(rows) < 10:
        raise DataError(f"need at least 10 training rows, got {len(rows)}")
    X = np.array([r[0] for r in rows], dtype=np.float64)
    y = np.array([r[1] for r in rows], dtype=np.float64)
    if X.ndim != 2 or not np.all(np.isfinite(X)):
        raise DataError("feature vectors must be finite and of equal length")
    if np.any((y < 0) | (y > 1)):
        raise DataError("relevance labels must lie in [0, 1]")

    base = float(y.mean())
    if np.all(y == y[0]):
        log.warning("degenerate ranker data: all %d labels equal %s", len(y), y[0])
        return GBDTRanker(float(y[0]), cfg.learning_rate, [], X.shape[1], True, asdict(cfg))

    rng = np.random.default_rng(cfg.seed)
    pred = np.full(len(y), base)
    trees = []
    for _ in range(cfg.n_trees):
        resid = y - pred
        if cfg.subsample < 1.0:
            m = max(2 * cfg.min_samples_leaf, int(round(cfg.subsample * len(y))))
            idx = np.sort(rng.choice(len(y), size=min(m, len(y)), replace=False))
        else:
            idx = np.arange(len(y))
        tree = fit_tree(X[idx], resid[idx], cfg.max_depth, cfg.min_samples_leaf)
        trees.append(tree)
        pred += cfg.learning_rate * tree.predict(X)
    return GBDTRanker(base, cfg.learning_rate, trees, X.shape[1], False, asdict(cfg))
