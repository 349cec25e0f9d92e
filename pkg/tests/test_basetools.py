import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from signagent.basetools import (
    DictionaryIndex,
    PrototypeBank,
    Segment,
    classify_handshape,
    classify_location,
    classify_movement,
    detect_handedness,
    gloss_retrieve,
    handshape_feature,
    knn_vote,
    movement_feature,
    segment_signs,
    sign_lemma,
)
from signagent.basetools.classifiers import dft_magnitudes, velocity_stats
from signagent.basetools.segmentation import smoothed_speed
from signagent.datamodel import DictionaryEntry, FrameFeatures
from signagent.errors import DimensionMismatch, EmptySegment, MissingFeatures, NoActiveSpans, TooShort, ZeroVector


def features(right, left=None, present_left=None, present_right=None, emb=None):
    """Body track with shoulders at y = 0 and the nose at y = 0.6."""
    right = np.asarray(right, dtype=float)
    n = len(right)
    left = np.tile([-0.35, -0.95, 0.05], (n, 1)) if left is None else np.asarray(left, dtype=float)
    body = np.zeros((n, 7, 3))
    body[:, 0] = [0, 0.6, 0.1]
    body[:, 1] = [-0.5, 0, 0]
    body[:, 2] = [0.5, 0, 0]
    body[:, 5] = left
    body[:, 6] = right
    hands = np.zeros((n, 21, 3))
    pl = np.zeros(n, bool) if present_left is None else np.asarray(present_left, bool)
    pr = np.ones(n, bool) if present_right is None else np.asarray(present_right, bool)
    return FrameFeatures(body, hands, hands.copy(), pl, pr, 25.0, emb)


# --- k-NN and handshape ------------------------------------------------------------


def test_handshape_exact_prototype():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(21, 3)), rng.normal(size=(21, 3))
    bank = PrototypeBank({"handshape-base": (np.stack([handshape_feature(a), handshape_feature(b)]), ["flat-B", "claw-5"])})
    pred = classify_handshape(a[None], bank, k=1)["handshape-base"]
    assert pred.ranked == (("flat-B", 1.0),)
    with pytest.raises(MissingFeatures):
        classify_handshape(np.stack([a, b]), bank, k=1, present=np.zeros(2, bool))


def test_handshape_feature_is_rotation_and_scale_invariant():
    rng = np.random.default_rng(1)
    joints = rng.normal(size=(21, 3))
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    moved = 3.0 * joints @ q.T + np.array([1.0, -2.0, 0.5])
    assert np.allclose(handshape_feature(joints), handshape_feature(moved), atol=1e-10)


def test_knn_orthogonal_prototypes():
    vectors = np.eye(3)
    q = np.array([0.9, 0.1, 0.0])
    pred = knn_vote(q / np.linalg.norm(q), vectors, ["A", "B", "C"], k=3)
    # each label holds one of the three votes; the nearest voter breaks the tie
    assert pred.labels == ["A", "B", "C"]
    assert [p for _, p in pred.ranked] == pytest.approx([1 / 3] * 3)


def knn_oracle(query, vectors, labels, k):
    qn = query / np.linalg.norm(query)
    dist = [1.0 - float(np.dot(qn, v / np.linalg.norm(v))) for v in vectors]
    nearest = sorted(range(len(vectors)), key=lambda i: (dist[i], i))[:k]
    votes = Counter(labels[i] for i in nearest)
    best = {}
    for i in nearest:
        best.setdefault(labels[i], dist[i])
    return [(lab, votes[lab] / len(nearest)) for lab in sorted(votes, key=lambda l: (-votes[l], best[l], l))]


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 50), st.integers(1, 9), st.integers(0, 10_000))
def test_knn_matches_exhaustive_oracle(n, k, seed):
    rng = np.random.default_rng(seed)
    vectors = rng.normal(size=(n, 6))
    labels = [str(x) for x in rng.choice(list("ABCD"), size=n)]
    q = rng.normal(size=6)
    pred = knn_vote(q, vectors, labels, k)
    want = knn_oracle(q, vectors, labels, k)
    assert pred.labels == [l for l, _ in want]
    assert [p for _, p in pred.ranked] == pytest.approx([p for _, p in want])
    confs = [p for _, p in pred.ranked]
    assert sum(confs) <= 1 + 1e-12 and all(a >= b for a, b in zip(confs, confs[1:]))


# --- movement --------------------------------------------------------------------


def test_constant_trajectory_features_are_zero():
    still = np.tile([0.2, 0.1, 0.3], (12, 1))
    assert np.all(dft_magnitudes(still) == 0)
    assert velocity_stats(still).tolist() == [0.0, 0.0, 0.0, 0.0]


def test_linear_trajectory_is_straight():
    line = np.outer(np.arange(10), [1.0, 0.0, 0.0])
    assert velocity_stats(line)[3] == 1.0


def test_sinusoid_matches_oscillate_prototype():
    n, nc = 16, 8
    dim = 2 * 3 * nc + 8
    osc = np.zeros(dim)
    osc[2 - 1] = 1.0  # dominant wrist, x axis, bin 2
    bank = PrototypeBank({"movement": (np.stack([np.zeros(dim), osc]), ["hold", "oscillate"])})
    t = np.arange(n)
    right = np.zeros((n, 3))
    right[:, 0] = 0.05 * np.sin(2 * np.pi * 2 * t / n)
    left = np.zeros((n, 3))
    feat = movement_feature(left, right)
    assert np.argmax(feat[: 3 * nc]) == 1  # energy sits in bin 2 of the x axis
    pred = classify_movement(left, right, bank, k=1)
    assert pred.top == "oscillate"
    with pytest.raises(TooShort):
        classify_movement(left[:3], right[:3], bank)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (10, 3), elements=st.floats(-1, 1)), arrays(np.float64, (10, 3), elements=st.floats(-1, 1)),
       arrays(np.float64, (3,), elements=st.floats(-5, 5)))
def test_movement_feature_translation_invariant(left, right, shift):
    a = movement_feature(left, right)
    b = movement_feature(left + shift, right + shift)
    assert np.allclose(a, b, atol=1e-6)


def test_movement_feature_mirror_invariant():
    rng = np.random.default_rng(2)
    path = np.cumsum(rng.normal(scale=0.02, size=(12, 3)), axis=0)
    rest = np.zeros((12, 3))
    mirror = np.array([-1.0, 1.0, 1.0])
    assert np.allclose(movement_feature(rest, path), movement_feature(path * mirror, rest))


# --- location --------------------------------------------------------------------


def test_location_single_zone():
    f = features(np.tile([0.2, 0.0, 0.4], (10, 1)))
    pred = classify_location(f.body_keypoints)["location-major"]
    assert pred.ranked == (("chest", 1.0),)


def test_location_consensus_counts():
    right = np.array([[0.2, 1.0, 0.4]] * 7 + [[0.2, 0.0, 0.4]] * 3)
    pred = classify_location(features(right).body_keypoints)["location-major"]
    assert pred.ranked == (("head", 0.7), ("chest", 0.3))
    with pytest.raises(MissingFeatures):
        classify_location(np.zeros((0, 7, 3)))


# --- segmentation ----------------------------------------------------------------


def test_provided_boundaries_pass_through():
    f = features(np.zeros((20, 3)), emb=np.arange(40.0).reshape(20, 2))
    segs = segment_signs(f, [(10, 20), (0, 10)])
    assert [(s.start_frame, s.end_frame) for s in segs] == [(0, 10), (10, 20)]
    assert np.allclose(segs[0].pooled_embedding, np.arange(40.0).reshape(20, 2)[:10].mean(axis=0))


def test_static_sample_has_no_active_spans():
    with pytest.raises(NoActiveSpans):
        segment_signs(features(np.tile([0.2, 0.0, 0.4], (30, 1))))


def test_hysteresis_finds_single_burst():
    x = np.zeros(55)
    x[20:35] = 0.05 * np.arange(1, 16)
    x[35:] = x[34]
    right = np.stack([x, np.zeros(55), np.zeros(55)], axis=1)
    segs = segment_signs(features(right))
    assert len(segs) == 1
    w = 5
    assert abs(segs[0].start_frame - 20) <= w and abs(segs[0].end_frame - 35) <= w


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_heuristic_segments_sorted_disjoint_and_active(seed):
    rng = np.random.default_rng(seed)
    n = 80
    speed = np.where(rng.random(n) < 0.4, rng.uniform(0.02, 0.1, n), 0.0)
    right = np.zeros((n, 3))
    right[:, 0] = np.cumsum(speed)
    f = features(right)
    try:
        segs = segment_signs(f)
    except NoActiveSpans:
        return
    smooth = smoothed_speed(f)
    exit_level = 0.75 * np.median(smooth)
    for a, b in zip(segs, segs[1:]):
        assert a.end_frame <= b.start_frame
    for s in segs:
        assert smooth[s.start_frame : s.end_frame].mean() >= exit_level


# --- retrieval -------------------------------------------------------------------


def index_of(vectors, ids=None):
    ids = ids or [f"G{i}" for i in range(len(vectors))]
    return DictionaryIndex([DictionaryEntry(g, {}, v) for g, v in zip(ids, vectors)])


def test_retrieve_self_and_orthogonal():
    idx = index_of(np.eye(4)[:3], ["C", "A", "B"])
    assert gloss_retrieve(np.eye(4)[1], idx, k=1) == [("A", 1.0)]
    assert gloss_retrieve(np.eye(4)[3], idx, k=3) == [("A", 0.0), ("B", 0.0), ("C", 0.0)]
    with pytest.raises(DimensionMismatch):
        gloss_retrieve(np.ones(3), idx)
    with pytest.raises(ZeroVector):
        gloss_retrieve(np.zeros(4), idx)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 100))
def test_retrieve_matches_brute_force_and_scale(seed, scale):
    rng = np.random.default_rng(seed)
    vectors = rng.normal(size=(5, 8))
    q = rng.normal(size=8)
    idx = index_of(vectors)
    sims = {f"G{i}": float(np.dot(v, q) / (np.linalg.norm(v) * np.linalg.norm(q))) for i, v in enumerate(vectors)}
    want = sorted(sims, key=lambda g: (-sims[g], g))
    got = gloss_retrieve(q, idx, k=5)
    assert [g for g, _ in got] == want
    assert [s for _, s in got] == pytest.approx([sims[g] for g in want])
    assert [g for g, _ in gloss_retrieve(scale * q, idx, k=5)] == want


# --- lemmatisation -----------------------------------------------------------------


def test_sign_lemma_examples():
    assert sign_lemma("") == []
    table = {"dogs": "dog", "running": "run"}
    assert sign_lemma("The dogs are running", table, {"the", "are"}) == ["dog", "run"]
    assert sign_lemma("book the book", {}, {"the"}) == ["book", "book"]
    assert sign_lemma("Dogs, cats!", table, (), vocabulary={"dog"}) == ["dog"]
    # chains resolve to a fixed point
    assert sign_lemma("went", {"went": "goes", "goes": "go"}) == ["go"]


@settings(max_examples=80, deadline=None)
@given(st.lists(st.sampled_from("The dogs are running and a cat ran went goes, book! BOOK".split()), max_size=12))
def test_sign_lemma_idempotent(words):
    table = {"dogs": "dog", "running": "run", "ran": "run", "went": "goes", "goes": "go"}
    stop = {"the", "are", "a", "and"}
    once = sign_lemma(" ".join(words), table, stop)
    assert sign_lemma(" ".join(once), table, stop) == once


# --- handedness ------------------------------------------------------------------


def presence_features(left, right):
    n = len(left)
    return features(np.zeros((n, 3)), present_left=left, present_right=right)


def test_handedness_decision_table():
    f = presence_features([0] * 10, [1] * 10)
    r = detect_handedness(Segment(0, 10), f)
    assert (r.label, r.one_handed, r.two_handed, r.left_right_ratio) == ("right", True, False, 0.0)
    f = presence_features([1] * 8 + [0] * 2, [1] * 10)
    r = detect_handedness(Segment(0, 10), f)
    assert (r.label, r.two_handed) == ("both", True)
    f = presence_features([1] * 5 + [0] * 5, [0] * 5 + [1] * 5)
    r = detect_handedness(Segment(0, 10), f)
    assert (r.label, r.one_handed, r.two_handed) == ("mixed", False, False)
    f = presence_features([1] * 10, [0] * 10)
    r = detect_handedness(Segment(0, 10), f)
    assert r.label == "left" and math.isinf(r.left_right_ratio) and r.to_dict()["left_right_ratio"] == "inf"
    with pytest.raises(EmptySegment):
        detect_handedness(Segment(0, 20), f)
