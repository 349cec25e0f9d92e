import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from signagent.datamodel import SampleRecord
from signagent.errors import CandidateNotInEvidence, DataError
from signagent.orchestrator import SequenceBackend, final_step, scripted_backend, tool_step
from signagent.synth import concat_renders, features_from_render, render_sign
from signagent.workflows import (
    GlossSample,
    PseudoGlossConfig,
    ScoringContext,
    assign_tokens,
    correct_partition,
    handedness_compatibility,
    refine_clusters,
    run_idgloss_task,
    run_pseudogloss_task,
    score_assignment,
    validate_partition,
    validate_tokens,
)

# --- scoring ---------------------------------------------------------------------


def segment_doc(start, end, candidates, detections=None, preds=None):
    return {
        "segment": {"start_frame": start, "end_frame": end,
                    "activity": {"hand_detection_count": (end - start) if detections is None else detections}},
        "candidates": [{"gloss_id": g, "visual_similarity": v, "keywords": kw} for g, v, kw in candidates],
        "phono_predictions": preds or {},
    }


def test_score_with_neutral_cues_is_090():
    seg = segment_doc(0, 10, [("DOG", 1.0, ["hound"])], preds={"movement": {"ranked": [["arc", 1.0]]}})
    ctx = ScoringContext(["puppy"], {"puppy": [{"canonical_phonology": {"movement": "arc"}}]}, median_duration=5.0)
    b = score_assignment("puppy", seg, "DOG", ctx)
    assert b.cues == {"visual": 1.0, "phono": 1.0, "activity": 1.0, "temporal": 0.5, "semantic": 0.5}
    assert b.total == pytest.approx(0.90, abs=1e-12)


def test_score_all_cues_zero_and_unknown_candidate():
    # short function word on a long segment, keyword names another sentence token, no hands, no phonology
    seg = segment_doc(0, 10, [("X", 0.0, ["cat"])], detections=0)
    ctx = ScoringContext(["the", "cat"], {}, median_duration=5.0)
    assert score_assignment("the", seg, "X", ctx).total == 0.0
    with pytest.raises(CandidateNotInEvidence):
        score_assignment("the", seg, "Y", ctx)


def test_tied_triples_break_by_gloss_then_start():
    segs = [segment_doc(10, 20, [("B", 0.9, [])]), segment_doc(0, 10, [("A", 0.9, [])])]
    seq, alignment, _ = assign_tokens(["dog"], segs, {})
    assert alignment[0]["gloss_id"] == "A"
    segs = [segment_doc(10, 20, [("A", 0.9, [])]), segment_doc(0, 10, [("A", 0.9, [])])]
    _, alignment, _ = assign_tokens(["dog"], segs, {})
    assert alignment[0]["segment"]["start_frame"] == 0


def test_more_tokens_than_segments_warns_and_keeps_all():
    segs = [segment_doc(0, 10, [("A", 0.9, ["one"])])]
    seq, alignment, warnings = assign_tokens(["one", "two"], segs, {})
    assert sorted(seq) == ["one", "two"] and warnings


# --- validators ------------------------------------------------------------------


def test_validate_tokens_examples():
    assert validate_tokens("abc", "bac").valid
    v = validate_tokens("abc", "ab")
    assert not v.valid and v.missing == ["c"]
    v = validate_tokens("abc", "aabc")
    assert not v.valid and v.extra == ["a"] and v.missing == []


def test_validate_partition_examples():
    keys = ["s1", "s2", "s3", "s7"]
    assert validate_partition(keys, {"c0": ["s1", "s2"], "c1": ["s3", "s7"]}).valid
    v = validate_partition(keys, {"c0": ["s1", "s2", "s3"], "c1": ["s3", "s7"]})
    assert not v.valid and v.duplicates == ["s3"]
    v = validate_partition(keys, {"c0": ["s1", "s2"], "c1": ["s3"]})
    assert not v.valid and v.missing == ["s7"]


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from("abcd"), max_size=8), st.randoms(use_true_random=False))
def test_any_reordering_is_valid(tokens, rnd):
    out = list(tokens)
    rnd.shuffle(out)
    assert validate_tokens(tokens, out).valid


# --- task 1 ----------------------------------------------------------------------


def sentence_sample(lexicon, order, sid="perm", gap=6):
    """Render the entries in ``order`` back to back with each span's frames
    carrying that entry's reference embedding."""
    renders = [render_sign(e.canonical_phonology, 20) for e in order]
    joined, spans = concat_renders(renders, gap=gap, pad=4)
    emb = np.zeros((len(joined.body), len(order[0].reference_embedding)))
    emb[:] = order[0].reference_embedding
    for e, (a, b) in zip(order, spans):
        emb[a:b] = e.reference_embedding
    feats = features_from_render(joined, emb)
    return SampleRecord(sid, sentence=None, segments=spans), feats


def test_one_token_one_segment(small_fixture):
    lex = small_fixture.lexicon
    e = lex.entries[0]
    rec, feats = sentence_sample(lex, [e])
    rec.sentence = e.keywords[0]
    out = run_pseudogloss_task(rec, feats, lex, scripted_backend("pseudogloss-greedy"))
    assert out.status == "valid" and out.sequence == [e.keywords[0]]


def test_forced_permutation_matches_exhaustive_oracle(small_fixture):
    lex = small_fixture.lexicon
    a, b, c = lex.entries[:3]
    rec, feats = sentence_sample(lex, [b, a, c])
    rec.sentence = " ".join(x.keywords[0] for x in (a, b, c))
    out = run_pseudogloss_task(rec, feats, lex, scripted_backend("pseudogloss-greedy"))
    want = [b.keywords[0], a.keywords[0], c.keywords[0]]
    assert out.status == "valid" and out.sequence == want

    # oracle: best total score over all 6 token-to-segment bijections
    steps = out.trace["steps"]
    lemma = next(s["result"] for s in steps if s.get("tool") == "sign_lemma")
    segs = next(s["result"] for s in steps if s.get("tool") == "gloss_evidence_collector")["segments"]
    durations = [s["segment"]["end_frame"] - s["segment"]["start_frame"] for s in segs]
    ctx = ScoringContext(lemma["tokens"], lemma["lookup"], float(np.median(durations)))

    def best(tok, seg):
        return max(score_assignment(tok, seg, cand["gloss_id"], ctx).total for cand in seg["candidates"])

    totals = {}
    for perm in itertools.permutations(range(3)):
        order = [None] * 3
        for tok_i, seg_j in enumerate(perm):
            order[seg_j] = lemma["tokens"][tok_i]
        totals[tuple(order)] = sum(best(lemma["tokens"][i], segs[perm[i]]) for i in range(3))
    ranked = sorted(totals.items(), key=lambda kv: -kv[1])
    assert list(ranked[0][0]) == want and ranked[0][1] > ranked[1][1]


def test_invented_token_marks_record_invalid(small_fixture):
    lex = small_fixture.lexicon
    e = lex.entries[0]
    rec, feats = sentence_sample(lex, [e])
    rec.sentence = e.keywords[0]
    answer = {"sequence": ["zebra"], "alignment": [{"token": "zebra", "segment_index": 0, "gloss_id": e.gloss_id,
                                                    "segment": {"start_frame": 4, "end_frame": 24}, "justification": "x"}]}
    backend = SequenceBackend([tool_step("sign_lemma", {"sentence": rec.sentence}), tool_step("gloss_evidence_collector"),
                               final_step(answer)])
    out = run_pseudogloss_task(rec, feats, lex, backend)
    assert out.status == "invalid" and out.extra == ["zebra"] and out.missing == [e.keywords[0]]
    assert any("multiset" in r for r in out.reasons)


def test_pseudogloss_needs_sentence_and_is_deterministic(small_fixture):
    lex = small_fixture.lexicon
    s = small_fixture.task1[0]
    with pytest.raises(DataError):
        run_pseudogloss_task(SampleRecord("x"), s.features, lex, scripted_backend("pseudogloss-greedy"))
    r1 = run_pseudogloss_task(s.record, s.features, lex, scripted_backend("pseudogloss-greedy"))
    r2 = run_pseudogloss_task(s.record, s.features, lex, scripted_backend("pseudogloss-greedy"))
    assert r1.to_dict() == r2.to_dict()
    with pytest.raises(ValueError):
        PseudoGlossConfig(weights=(1.0, 0.0))


# --- task 2: gates ---------------------------------------------------------------


def partition_doc(clusters, D, tau=0.3):
    ids = [cid for cid, _ in clusters]
    return {
        "tau": tau,
        "clusters": [{"cluster_id": cid, "members": m, "intra_mean_distance": 0.0} for cid, m in clusters],
        "lone_variants": [cid for cid, m in clusters if len(m) == 1],
        "distance_matrix": {"ids": ids, "values": D},
    }


def analysis_doc(src, dst, agreeing, j=None):
    jac = j or {k: (1.0 if i < agreeing else 0.0) for i, k in
                enumerate(["handshape-base", "handshape-minor", "location-major", "location-minor", "movement"])}
    return {"recommendations": [{"source": src, "target": dst, "jaccard": jac, "agreeing_count": agreeing,
                                 "mean_overlap": sum(jac.values()) / 5, "strongest_properties": sorted(jac)}]}


def hands_doc(labels):
    return {"samples": {k: {"label": v} for k, v in labels.items()}}


def test_identical_singletons_merge():
    part = partition_doc([("c0", ["a"]), ("c1", ["b"])], [[0.0, 0.1], [0.1, 0.0]], tau=0.08)
    out = refine_clusters(part, analysis_doc("c1", "c0", 5), hands_doc({"a": "right", "b": "right"}), {})
    assert [c["members"] for c in out["clusters"]] == [["a", "b"]]
    assert out["adjustments"][0]["operation"] == "MERGE"
    assert out["adjustments"][0]["statistics"]["D"] == 0.1


def test_disjoint_far_clusters_keep_with_blocking_stats():
    part = partition_doc([("c0", ["a", "b"]), ("c1", ["c", "d"])], [[0.0, 1.0], [1.0, 0.0]])
    out = refine_clusters(part, analysis_doc("c1", "c0", 0), hands_doc(dict.fromkeys("abcd", "both")), {})
    adj = out["adjustments"][0]
    assert adj["operation"] == "KEEP" and len(out["clusters"]) == 2
    assert any(b.startswith("D = 1.0000") for b in adj["blocking"])
    assert any("agreeing feature types 0" in b for b in adj["blocking"])


def test_mirror_singleton_merges_into_right_handed_cluster():
    part = partition_doc([("c0", ["a", "b", "c"]), ("c1", ["d"])], [[0.0, 0.2], [0.2, 0.0]])
    hands = hands_doc({"a": "right", "b": "right", "c": "right", "d": "left"})
    out = refine_clusters(part, analysis_doc("c1", "c0", 5), hands, {})
    assert [c["members"] for c in out["clusters"]] == [["a", "b", "c", "d"]]
    assert out["singleton_review"][0]["decision"] == "MERGE"
    # one feature short and the mirror rule no longer applies
    out = refine_clusters(part, analysis_doc("c1", "c0", 4), hands, {})
    assert out["adjustments"][0]["gates"]["handedness"] is False


def test_handedness_table():
    assert handedness_compatibility("both", "both", 0, False) == (True, 1.0)
    assert handedness_compatibility("left", "right", 5, True) == (True, 1.0)
    assert handedness_compatibility("left", "right", 5, False)[0] is False
    assert handedness_compatibility("mixed", "left", 0, False)[0] is True
    assert handedness_compatibility("both", "left", 5, True)[0] is False


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 0.9), st.floats(0.0, 0.5), st.integers(0, 5), st.integers(0, 5), st.booleans())
def test_gates_are_monotone(d, shrink, agreeing, more, singleton):
    members = [("c0", ["a", "b"]), ("c1", ["c"] if singleton else ["c", "d"])]
    hands = hands_doc(dict.fromkeys("abcd", "right"))

    def merged(dist, n):
        part = partition_doc(members, [[0.0, dist], [dist, 0.0]])
        return refine_clusters(part, analysis_doc("c1", "c0", n), hands, {})["adjustments"][0]["operation"] == "MERGE"

    if merged(d, agreeing):
        assert merged(max(0.0, d - shrink), min(5, agreeing + more))


# --- task 2: correction --------------------------------------------------------------


def test_duplicate_kept_in_nearer_cluster():
    vec = {"p": np.array([1.0, 0.0]), "q": np.array([0.0, 1.0]), "x": np.array([np.cos(0.6), np.sin(0.6)])}
    # x lies 1 - cos(0.6) = 0.175 from p's cluster and 1 - sin(0.6) = 0.435 from q's
    res = correct_partition([("c0", ["p", "x"]), ("c1", ["q", "x"])], ["p", "q", "x"], vec)
    assert res.verdict.valid and res.clusters == [("c0", ["p", "x"]), ("c1", ["q"])]


def test_missing_key_equidistant_goes_to_smaller_id():
    vec = {"p": np.array([1.0, 0.0]), "q": np.array([0.0, 1.0]), "m": np.array([1.0, 1.0])}
    res = correct_partition([("c1", ["q"]), ("c0", ["p"])], ["p", "q", "m"], vec)
    assert res.verdict.valid and dict(res.clusters)["c0"] == ["m", "p"]


def test_no_clusters_is_uncorrectable():
    res = correct_partition([], ["m"], {"m": np.ones(2)})
    assert not res.verdict.valid and res.clusters == []


def test_invalid_answer_goes_through_one_correction(small_fixture):
    g = small_fixture.task2[0]
    samples = [GlossSample(r.sample_id, f, r.segments[0]) for r, f in g.samples]
    keys = sorted(s.key for s in samples)
    answer = {"clusters": [{"cluster_id": "c0", "members": keys[:-1]}, {"cluster_id": "c1", "members": keys[:1]}],
              "confidence": 0.5}
    backend = SequenceBackend([final_step(answer)])
    rec = run_idgloss_task(g.gloss_id, samples, small_fixture.lexicon, backend)
    assert rec.corrected and rec.pre_correction == {"c0": keys[:-1], "c1": keys[:1]}
    assert len(rec.post_correction) == 2
    assert rec.status in ("valid", "uncorrectable")
    if rec.status == "valid":
        assert validate_partition(keys, rec.assignment()).valid


# --- task 2: controller edge cases ---------------------------------------------------


def test_single_sample_gloss_is_trivially_valid(small_fixture):
    r, f = small_fixture.task2[0].samples[0]
    rec = run_idgloss_task("G", [GlossSample(r.sample_id, f)], small_fixture.lexicon, scripted_backend("idgloss-gates"))
    assert rec.status == "valid" and rec.confidence == 1.0 and rec.assignment() == {"c0": [r.sample_id]}


def test_unknown_gloss_warns_but_runs(small_fixture):
    g = small_fixture.task2[0]
    samples = [GlossSample(r.sample_id, f, r.segments[0]) for r, f in g.samples]
    rec = run_idgloss_task("NOT-IN-DICTIONARY", samples, small_fixture.lexicon, scripted_backend("idgloss-gates"))
    assert rec.status == "valid"
    assert any("not in the dictionary" in w for w in rec.warnings)
    with pytest.raises(DataError):
        run_idgloss_task("G", samples + samples[:1], small_fixture.lexicon, scripted_backend("idgloss-gates"))


def test_idgloss_records_are_deterministic(small_fixture):
    g = small_fixture.task2[0]
    samples = [GlossSample(r.sample_id, f, r.segments[0]) for r, f in g.samples]
    lex = small_fixture.lexicon
    r1 = run_idgloss_task(g.gloss_id, samples, lex, scripted_backend("idgloss-gates")).to_dict()
    r2 = run_idgloss_task(g.gloss_id, samples, lex, scripted_backend("idgloss-gates")).to_dict()
    assert r1 == r2
