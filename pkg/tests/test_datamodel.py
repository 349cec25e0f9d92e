import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from signagent.datamodel import (
    EMB_MAGIC,
    DatasetManifest,
    DictionaryEntry,
    FrameFeatures,
    SampleRecord,
    load_dictionary,
    load_embedding_file,
    load_features,
    load_keypoint_file,
    load_manifest,
    normalize_signer_centric,
    read_annotation_record,
    validate_record,
    write_annotation_record,
    write_dictionary,
    write_embedding_file,
    write_keypoint_file,
    write_manifest,
)
from signagent.errors import (
    BadMagic,
    DataError,
    DuplicateSampleId,
    FrameCountMismatch,
    MissingFeatureFile,
    NonFiniteValue,
    ParseError,
    SchemaViolation,
    TruncatedFile,
    UnknownComponentLabel,
)

finite32 = st.floats(-1e6, 1e6, allow_nan=False, width=32)


def test_embedding_file_decodes_unit_vector(tmp_path):
    p = tmp_path / "one.emb"
    p.write_bytes(EMB_MAGIC + struct.pack("<II", 1, 3) + np.array([1, 0, 0], "<f4").tobytes())
    out = load_embedding_file(p)
    assert out.shape == (1, 3)
    assert out[0].tolist() == [1.0, 0.0, 0.0]


def test_embedding_round_trip_100_vectors(tmp_path, rng):
    v = rng.normal(size=(100, 16)).astype(np.float32)
    write_embedding_file(tmp_path / "v.emb", v)
    assert np.array_equal(load_embedding_file(tmp_path / "v.emb"), v)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float32, st.tuples(st.integers(1, 6), st.integers(1, 9)), elements=finite32))
def test_embedding_codec_is_bit_exact(tmp_path_factory, v):
    p = tmp_path_factory.mktemp("emb") / "x.emb"
    write_embedding_file(p, v)
    assert load_embedding_file(p).tobytes() == v.tobytes()


@settings(max_examples=40, deadline=None)
@given(
    arrays(np.float32, st.tuples(st.integers(1, 5), st.integers(1, 4), st.just(3)), elements=finite32),
    st.integers(0, 2),
    st.data(),
)
def test_keypoint_codec_is_bit_exact(tmp_path_factory, pts, tracks, data):
    pres = data.draw(arrays(np.bool_, (tracks, pts.shape[0])))
    p = tmp_path_factory.mktemp("kpt") / "x.kpt"
    write_keypoint_file(p, pts, pres)
    got, got_pres = load_keypoint_file(p)
    assert got.tobytes() == pts.tobytes()
    assert np.array_equal(got_pres, pres)


def test_embedding_file_errors(tmp_path):
    p = tmp_path / "v.emb"
    write_embedding_file(p, np.ones((4, 3)))
    raw = p.read_bytes()
    p.write_bytes(raw[:-5])
    with pytest.raises(TruncatedFile):
        load_embedding_file(p)
    p.write_bytes(b"NOPE00" + raw[6:])
    with pytest.raises(BadMagic):
        load_embedding_file(p)
    bad = np.ones((1, 3), "<f4")
    bad[0, 1] = np.nan
    p.write_bytes(EMB_MAGIC + struct.pack("<II", 1, 3) + bad.tobytes())
    with pytest.raises(NonFiniteValue):
        load_embedding_file(p)


def _sample_files(tmp_path, sid, frames, emb_frames=None):
    write_embedding_file(tmp_path / f"{sid}.emb", np.ones((emb_frames or frames, 4)))
    body = np.zeros((frames, 7, 3))
    body[:, 1, 0], body[:, 2, 0] = -1.0, 1.0
    write_keypoint_file(tmp_path / f"{sid}.body.kpt", body)
    return {"embeddings": f"{sid}.emb", "body": f"{sid}.body.kpt"}


def test_manifest_load_and_round_trip(tmp_path):
    recs = [SampleRecord("s1", sentence="a b", segments=[(0, 3)], feature_refs=_sample_files(tmp_path, "s1", 5)),
            SampleRecord("s2", gloss_label="DOG", feature_refs=_sample_files(tmp_path, "s2", 4), subset="fair")]
    write_manifest(DatasetManifest(recs, None, {"k": "v"}), tmp_path / "m.jsonl")
    m = load_manifest(tmp_path / "m.jsonl")
    assert len(m) == 2
    assert [s.to_dict() for s in m.samples] == [s.to_dict() for s in recs]
    assert m.metadata == {"k": "v"}


def test_manifest_empty_file(tmp_path):
    (tmp_path / "m.jsonl").write_text("")
    assert len(load_manifest(tmp_path / "m.jsonl")) == 0


def test_manifest_duplicate_id(tmp_path):
    line = json.dumps({"sample_id": "s1"})
    (tmp_path / "m.jsonl").write_text(line + "\n" + line + "\n")
    with pytest.raises(DuplicateSampleId) as err:
        load_manifest(tmp_path / "m.jsonl")
    assert "s1" in str(err.value)


def test_manifest_parse_error_has_line_number(tmp_path):
    (tmp_path / "m.jsonl").write_text(json.dumps({"sample_id": "a"}) + "\n{oops\n")
    with pytest.raises(ParseError) as err:
        load_manifest(tmp_path / "m.jsonl")
    assert err.value.line == 2


def test_manifest_missing_file_and_frame_mismatch(tmp_path):
    refs = _sample_files(tmp_path, "s1", 5, emb_frames=6)
    (tmp_path / "m.jsonl").write_text(json.dumps({"sample_id": "s1", "feature_refs": refs}) + "\n")
    with pytest.raises(FrameCountMismatch):
        load_manifest(tmp_path / "m.jsonl")
    (tmp_path / "m.jsonl").write_text(json.dumps({"sample_id": "s1", "feature_refs": {"body": "gone.kpt"}}) + "\n")
    with pytest.raises(MissingFeatureFile):
        load_manifest(tmp_path / "m.jsonl")


def test_segment_outside_frames_is_rejected(tmp_path):
    refs = _sample_files(tmp_path, "s1", 5)
    (tmp_path / "m.jsonl").write_text(json.dumps({"sample_id": "s1", "segments": [[2, 9]], "feature_refs": refs}) + "\n")
    with pytest.raises(DataError):
        load_manifest(tmp_path / "m.jsonl")


def test_load_features_normalizes_to_shoulders(tmp_path):
    body = np.zeros((3, 7, 3))
    body[:, 1] = [1.0, 2.0, 0.0]
    body[:, 2] = [5.0, 2.0, 0.0]
    body[:, 6] = [3.0, 6.0, 0.0]
    write_keypoint_file(tmp_path / "b.kpt", body)
    rec = SampleRecord("s", feature_refs={"body": "b.kpt"})
    m = DatasetManifest([rec], base_dir=tmp_path)
    f = load_features(m, rec)
    assert np.allclose(f.body_keypoints[:, 1], [-0.5, 0, 0])
    assert np.allclose(f.body_keypoints[:, 6], [0, 1.0, 0])
    assert not f.hand_present_left.any()


def test_normalize_rejects_zero_width():
    with pytest.raises(DataError):
        normalize_signer_centric(np.zeros((2, 7, 3)))


def test_frame_features_lengths_must_agree():
    with pytest.raises(FrameCountMismatch):
        FrameFeatures(np.zeros((3, 7, 3)), np.zeros((2, 21, 3)), np.zeros((3, 21, 3)), np.zeros(3), np.zeros(3))
    with pytest.raises(NonFiniteValue):
        FrameFeatures(np.full((1, 7, 3), np.inf), np.zeros((1, 21, 3)), np.zeros((1, 21, 3)), [0], [0])


def test_dictionary_round_trip_inline_and_file(tmp_path):
    phon = {"handshape-base": "B", "movement": "arc"}
    entries = [DictionaryEntry("DOG2", phon, [1.0, 0.0]), DictionaryEntry("CAT", {}, [0.0, 1.0], "two-handed")]
    assert entries[0].keywords == ["dog"]
    for emb_file in (None, "d.emb"):
        write_dictionary(entries, tmp_path / "d.json", emb_file)
        back = load_dictionary(tmp_path / "d.json")
        assert [e.to_dict() for e in back] == [e.to_dict() for e in entries]


def test_dictionary_rejects_unknown_label(tmp_path):
    (tmp_path / "d.json").write_text(json.dumps([{"gloss_id": "X", "canonical_phonology": {"movement": "wiggle"},
                                                   "reference_embedding": [1.0]}]))
    with pytest.raises(UnknownComponentLabel):
        load_dictionary(tmp_path / "d.json")


def _record():
    return {
        "task": "pseudogloss", "version": 1, "sample_id": "s1", "subset": None, "sentence": "a b",
        "tokens": ["a"], "sequence": ["a"],
        "alignment": [{"token": "a", "segment_index": 0, "segment": {"start_frame": 0, "end_frame": 3},
                       "gloss_id": "A", "justification": "anchor"}],
        "validation": {"status": "invalid", "missing": [], "extra": [], "reasons": ["x"], "warnings": []},
        "episode": {"status": "completed", "invocation_count": 2, "cap": 12}, "trace": {"steps": []},
    }


def test_annotation_record_round_trip_keeps_invalid_flag(tmp_path):
    write_annotation_record(_record(), tmp_path / "r.json")
    back = read_annotation_record(tmp_path / "r.json")
    assert back == _record()
    assert back["validation"]["status"] == "invalid"


def test_annotation_record_missing_justification():
    doc = _record()
    del doc["alignment"][0]["justification"]
    with pytest.raises(SchemaViolation) as err:
        validate_record(doc)
    assert any("justification" in f for f in err.value.fields)
