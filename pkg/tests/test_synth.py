import numpy as np
import pytest

from signagent.basetools import detect_handedness
from signagent.basetools.segmentation import make_segment
from signagent.datamodel import DatasetManifest, load_features, load_manifest
from signagent.synth import SynthConfig, build_fixture, noisy, random_unit, write_fixture


def test_config_checks():
    with pytest.raises(ValueError):
        SynthConfig(sigma=-1)
    with pytest.raises(ValueError):
        SynthConfig(n_glosses=5, n_idgloss=6)
    with pytest.raises(ValueError):
        SynthConfig(min_tokens=4, max_tokens=3)


def test_same_seed_same_fixture():
    cfg = SynthConfig(seed=9, n_glosses=12, n_sentences=3, n_idgloss=1)
    a, b = build_fixture(cfg), build_fixture(cfg)
    assert a.references() == b.references()
    assert a.expected_clusters() == b.expected_clusters()
    for x, y in zip(a.task1, b.task1):
        assert np.array_equal(x.features.frame_embeddings, y.features.frame_embeddings)


def test_noise_scale_matches_sigma(rng):
    ref = random_unit(rng, 256)
    d = np.stack([noisy(ref, 0.2, rng) - ref for _ in range(400)])
    # per-coordinate std sigma / sqrt(D), so the expected squared norm is sigma^2
    assert np.mean(np.sum(d ** 2, axis=1)) == pytest.approx(0.04, rel=0.05)


def test_fixture_structure(small_fixture):
    fx = small_fixture
    assert len(fx.task1) == 4 and len(fx.task2) == 2
    for s in fx.task1:
        assert len(s.reference) == len(s.record.segments) == len(s.glosses)
        assert all(0 <= a < b <= s.features.frame_count for a, b in s.record.segments)
    for g in fx.task2:
        keys = sorted(r.sample_id for r, _ in g.samples)
        assert sorted(k for v in g.variants.values() for k in v) == keys == sorted(g.eval_embeddings)
        assert any(g.planted in v for v in g.variants.values())


def test_rendered_hands_read_back_as_rendered(small_fixture):
    for g in small_fixture.task2:
        for rec, feats in g.samples:
            a, b = rec.segments[0]
            left, right = feats.hand_present_left[a:b].all(), feats.hand_present_right[a:b].all()
            want = "both" if left and right else "left" if left else "right"
            assert detect_handedness(make_segment(feats, a, b), feats).label == want


def test_written_fixture_loads_bit_exact(small_fixture, tmp_path):
    paths = write_fixture(small_fixture, tmp_path)
    m = load_manifest(tmp_path / paths["task1_manifest"])
    assert isinstance(m, DatasetManifest) and len(m) == len(small_fixture.task1)
    for s in small_fixture.task1:
        f = load_features(m, m.by_id()[s.record.sample_id])
        assert np.array_equal(f.frame_embeddings, s.features.frame_embeddings)
        assert np.allclose(f.hand_keypoints_right, s.features.hand_keypoints_right, atol=1e-6)
