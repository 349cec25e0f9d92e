import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import kendalltau

from signagent.errors import DomainError, EmptyInput, EmptyReference, KeyMismatch, SingleCluster
from signagent.metrics import (
    calinski_harabasz,
    cluster_entropy_bits,
    evaluate_clusters,
    evaluate_pseudogloss_corpus,
    format_cluster_table,
    format_sequence_table,
    kendall_tau_positions,
    lcs_percent,
    silhouette_mean,
)

# --- sequences -------------------------------------------------------------------


def test_lcs_examples():
    assert lcs_percent(["a", "b", "c", "d"], ["a", "c", "d"]) == 75.0
    assert lcs_percent(["A", "b"], ["a", "B"]) == 100.0
    assert lcs_percent(["a"], []) == 0.0
    with pytest.raises(EmptyReference):
        lcs_percent([], ["a"])


def test_kendall_examples():
    assert kendall_tau_positions("abcd", "abcd") == 1.0
    assert kendall_tau_positions("abcd", "dcba") == -1.0
    assert kendall_tau_positions("ab", "ax") is None
    # repeats use first occurrences; unmatched types are ignored
    assert kendall_tau_positions("abca", "xbac") == pytest.approx(1 / 3)


@settings(max_examples=200, deadline=None)
@given(st.permutations(list("abcdefg")), st.integers(2, 7))
def test_kendall_matches_scipy_without_ties(perm, n):
    ref = list("abcdefg")[:n]
    hyp = [t for t in perm if t in ref]
    tau = kendall_tau_positions(ref, hyp)
    want = kendalltau(range(n), [hyp.index(t) for t in ref]).statistic
    assert tau == pytest.approx(want, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from("abcd"), min_size=1, max_size=8), st.lists(st.sampled_from("abcd"), max_size=8))
def test_lcs_bounds_and_symmetry_of_length(ref, hyp):
    p = lcs_percent(ref, hyp)
    assert 0.0 <= p <= 100.0
    assert lcs_percent(ref, ref) == 100.0
    # LCS length itself is symmetric
    if hyp:
        assert p * len(ref) == pytest.approx(lcs_percent(hyp, ref) * len(hyp))


def test_corpus_means_and_rejections():
    refs = {"s1": {"tokens": ["a", "b"], "subset": "fair"}, "s2": {"tokens": ["a", "b"], "subset": "poor"},
            "s3": {"tokens": ["a"], "subset": "poor"}}
    recs = {"s1": {"sequence": ["a", "b"], "validation": {"status": "valid"}},
            "s2": {"sequence": ["b"], "validation": {"status": "valid"}},
            "s3": {"sequence": [], "validation": {"status": "rejected"}}}
    rep = evaluate_pseudogloss_corpus(recs, refs)
    assert rep.subsets["fair"].lcs_percent == 100.0
    assert rep.subsets["poor"].lcs_percent == 50.0 and rep.subsets["poor"].rejected == 1
    assert rep.subsets["combined"].lcs_percent == 75.0
    assert rep.subsets["combined"].kendall_tau == 1.0 and rep.subsets["combined"].tau_defined == 1
    assert rep.rejected == ["s3"]
    table = format_sequence_table({"scripted": rep})
    assert "combined LCS%" in table and "75.00" in table
    with pytest.raises(KeyMismatch):
        evaluate_pseudogloss_corpus({"s1": recs["s1"]}, refs)


# --- clustering ------------------------------------------------------------------


def test_entropy_examples():
    assert cluster_entropy_bits([7]) == 0.0
    assert cluster_entropy_bits([4, 4]) == 1.0
    assert cluster_entropy_bits([3, 1]) == pytest.approx(0.8113, abs=1e-4)
    with pytest.raises(EmptyInput):
        cluster_entropy_bits([])
    with pytest.raises(DomainError):
        cluster_entropy_bits([2, 0])


def test_silhouette_degenerate_cases():
    assert silhouette_mean(np.ones((4, 3)), [0, 0, 1, 1]) == 0.0
    with pytest.raises(SingleCluster):
        silhouette_mean(np.eye(3), [0, 0, 0])
    with pytest.raises(DomainError):
        silhouette_mean(np.eye(2), [0, 1])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_silhouette_and_ch_match_sklearn(seed):
    metrics = pytest.importorskip("sklearn.metrics")
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 20))
    k = int(rng.integers(2, min(n - 1, 5) + 1))
    lab = np.concatenate([np.arange(k), rng.integers(0, k, n - k)])
    X = rng.normal(size=(n, 6)) + 3 * np.eye(6)[lab % 6]
    assert silhouette_mean(X, lab) == pytest.approx(metrics.silhouette_score(X, lab, metric="cosine"), abs=1e-9)
    assert calinski_harabasz(X, lab) == pytest.approx(metrics.calinski_harabasz_score(X, lab), rel=1e-9)


def test_ch_closed_form_and_sentinel():
    X = np.array([[0.0], [0.1], [10.0], [10.1]])
    # B = 4 * 5^2 = 100 over K-1 = 1; W = 4 * 0.05^2 = 0.01 over n-K = 2
    assert calinski_harabasz(X, [0, 0, 1, 1]) == pytest.approx(20000.0, rel=1e-9)
    assert calinski_harabasz(np.array([[0.0], [0.0], [1.0], [1.0]]), [0, 0, 1, 1]) == math.inf
    with pytest.raises(DomainError):
        calinski_harabasz(X, [0, 1, 2, 3])


def test_ch_grows_with_separation():
    rng = np.random.default_rng(5)
    base = rng.normal(size=(30, 4))
    lab = np.repeat([0, 1, 2], 10)
    shifts = np.eye(4)[lab]
    values = [calinski_harabasz(base + s * shifts, lab) for s in (0.5, 2.0, 8.0)]
    assert values == sorted(values)


def test_evaluate_clusters_summary():
    emb = {"a": [1.0, 0.0], "b": [0.99, 0.01], "c": [0.0, 1.0], "d": [0.01, 0.99], "e": [1.0, 1.0]}
    parts = {"G1": {"c0": ["a", "b"], "c1": ["c", "d"]}, "G2": {"c0": ["e"]}}
    r = evaluate_clusters(parts, emb)
    assert r.ids_per_gloss == 1.5 and r.total_ids == 3
    assert r.entropy_bits == {"G1": 1.0, "G2": 0.0}
    assert r.silhouette_glosses == 1 and r.silhouette > 0.9
    assert r.ch_glosses == 1
    assert "IDs/gloss" in format_cluster_table({"baseline": r})
    with pytest.raises(EmptyInput):
        evaluate_clusters({}, emb)
