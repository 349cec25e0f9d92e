"""Seeded synthetic corpora with constructed ground truth.

Keypoints are rendered in signer-centric units (mid-shoulder origin, shoulder
width 1, y up) from a parametric hand model, a set of wrist trajectory
generators and minor-location anchors. The same renderers produce the
classifier prototype banks, so predictions on clean renders recover the
labels used to draw them. Segment embeddings are dictionary reference
embeddings plus Gaussian noise whose expected norm is ``sigma``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .basetools.classifiers import handshape_feature, movement_feature, zone_for_height
from .basetools.prototypes import PrototypeBank, save_prototype_bank
from .datamodel import (
    HAND_JOINTS,
    LABEL_SETS,
    DatasetManifest,
    DictionaryEntry,
    FrameFeatures,
    SampleRecord,
    write_dictionary,
    write_embedding_file,
    write_keypoint_file,
    write_manifest,
)
from .knowledge import CONCEPT, FEATURE, Edge, KnowledgeGraph, Node, save_graph
from .resources import FUNCTION_WORDS, Lexicon

WORDS = (
    "house water friend school mother father table chair apple bread happy angry teach learn write drive walk "
    "sleep dance music paper light night morning money doctor nurse police train plane horse rabbit tiger "
    "flower garden river ocean mountain forest winter summer spring autumn coffee cheese sugar salt butter "
    "kitchen window door family brother sister uncle aunt cousin baby child people work play laugh smile "
    "think know want need help give take finish start stop open close carry build paint swim climb fight "
    "visit travel study remember forget"
).split()

NOSE_Y = 0.6
NOSE = np.array([0.0, NOSE_Y, 0.1])
L_SHOULDER_POS = np.array([-0.5, 0.0, 0.0])
R_SHOULDER_POS = np.array([0.5, 0.0, 0.0])
REST_RIGHT = np.array([0.35, -0.95, 0.05])

# dominant (right) wrist anchors, signer-centric; the major zone follows from y
LOCATION_ANCHORS = {
    "forehead": (0.0, 0.85, 0.4),
    "eyes": (0.25, 0.75, 0.25),
    "nose": (0.0, 0.68, 0.6),
    "mouth": (-0.1, 0.63, 0.28),
    "chin": (0.15, 0.61, 0.5),
    "cheek": (0.45, 0.7, 0.2),
    "neck-front": (0.0, 0.45, 0.05),
    "shoulder": (0.5, 0.15, 0.1),
    "chest-centre": (0.0, 0.1, 0.3),
    "neutral-high": (0.25, 0.25, 0.6),
    "neutral-mid": (0.25, 0.0, 0.6),
    "stomach": (0.0, -0.3, 0.3),
    "waist": (0.35, -0.35, 0.25),
    "neutral-low": (0.25, -0.65, 0.6),
}
MOVEMENT_AMPLITUDE = 0.05


def major_location(minor: str) -> str:
    return zone_for_height(LOCATION_ANCHORS[minor][1] / NOSE_Y)


# --- hand model ------------------------------------------------------------------

FINGERS = ("index", "middle", "ring", "pinky")
_MCP = {"index": (0.025, 0.085), "middle": (0.005, 0.09), "ring": (-0.015, 0.085), "pinky": (-0.033, 0.075)}
_BONES = {
    "thumb": (0.035, 0.03, 0.025),
    "index": (0.04, 0.025, 0.02),
    "middle": (0.045, 0.028, 0.022),
    "ring": (0.042, 0.026, 0.02),
    "pinky": (0.032, 0.02, 0.018),
}
_SPLAY = {"index": 8.0, "middle": 0.0, "ring": -8.0, "pinky": -16.0}

# thumb abduction, thumb flex, finger flex (index..pinky), spread factor, claw
HANDSHAPES = {
    "A": (0.2, 0.0, (1, 1, 1, 1), 0.0, False),
    "B": (0.1, 1.0, (0, 0, 0, 0), 0.0, False),
    "C": (0.7, 0.4, (0.45, 0.45, 0.45, 0.45), 0.5, False),
    "F": (0.6, 0.6, (0.75, 0, 0, 0), 1.5, False),
    "G": (0.3, 0.0, (0, 1, 1, 1), 0.0, False),
    "H": (0.1, 1.0, (0, 0, 1, 1), 0.0, False),
    "I": (0.1, 1.0, (1, 1, 1, 0), 0.0, False),
    "L": (1.0, 0.0, (0, 1, 1, 1), 0.0, False),
    "O": (0.6, 0.7, (0.65, 0.65, 0.65, 0.65), 0.0, False),
    "S": (0.2, 1.0, (1, 1, 1, 1), 0.0, False),
    "V": (0.1, 1.0, (0, 0, 1, 1), 2.5, False),
    "W": (0.1, 1.0, (0, 0, 0, 1), 2.0, False),
    "Y": (1.0, 0.0, (1, 1, 1, 0), 0.0, False),
    "5": (1.0, 0.0, (0, 0, 0, 0), 2.0, False),
    "flat-B": (0.3, 0.0, (0, 0, 0, 0), 0.0, False),
    "claw-5": (1.0, 0.3, (0.55, 0.55, 0.55, 0.55), 2.0, True),
}


def _rotate(v: np.ndarray, axis: np.ndarray, angle: float) -> np.ndarray:
    axis = axis / np.linalg.norm(axis)
    c, s = np.cos(angle), np.sin(angle)
    return v * c + np.cross(axis, v) * s + axis * np.dot(axis, v) * (1 - c)


def _chain(base: np.ndarray, d0: np.ndarray, axis: np.ndarray, bones, angles_deg) -> list[np.ndarray]:
    pts, pos, phi = [], base.copy(), 0.0
    for length, ang in zip(bones, angles_deg):
        phi += np.radians(ang)
        pos = pos + length * _rotate(d0, axis, phi)
        pts.append(pos)
    return pts


def hand_pose(base: str, minor: str = "plain") -> np.ndarray:
    """21 right-hand joints (wrist first, then thumb, index, middle, ring, pinky)."""
    abd, tflex, flex, spread, claw = HANDSHAPES[base]
    mcp_add = pip_add = dip_add = 0.0
    if minor == "bent":
        mcp_add = 40.0
    elif minor == "spread":
        spread += 1.5
    elif minor == "thumb-out":
        abd += 0.35
    elif minor == "thumb-in":
        abd, tflex = max(abd - 0.35, 0.0), tflex + 0.3
    elif minor == "curved":
        pip_add, dip_add = 25.0, 20.0
    joints = [np.zeros(3)]
    beta = np.radians(30.0 + 60.0 * abd)
    d0 = np.array([np.sin(beta), np.cos(beta), -0.4 * (1.0 - abd)])
    d0 /= np.linalg.norm(d0)
    t_axis = np.cross(np.array([0.0, 0.0, -1.0]), d0)
    cmc = np.array([0.025, 0.025, 0.0])
    joints.append(cmc)
    joints += _chain(cmc, d0, t_axis, _BONES["thumb"],
                     (tflex * 30.0, tflex * 50.0, tflex * 50.0))
    for f, c in zip(FINGERS, flex):
        s = np.radians(_SPLAY[f] * (1.0 + spread) if f != "middle" else 2.0 * spread)
        d = np.array([np.sin(s), np.cos(s), 0.0])
        axis = -np.array([np.cos(s), -np.sin(s), 0.0])
        ang = (c * 20.0, c * 160.0, c * 120.0) if claw else (c * 80.0, c * 100.0, c * 70.0)
        ang = (ang[0] + mcp_add, ang[1] + pip_add, ang[2] + dip_add)
        mx, my = _MCP[f]
        mcp = np.array([mx, my, 0.0])
        joints.append(mcp)
        joints += _chain(mcp, d, axis, _BONES[f][:3], ang)[:3]
    out = np.array(joints)
    assert out.shape == (HAND_JOINTS, 3)
    return out


# --- trajectories ----------------------------------------------------------------


def movement_offsets(label: str, n: int, amplitude: float = MOVEMENT_AMPLITUDE) -> np.ndarray:
    """(n, 3) wrist offsets from the location anchor for one movement label."""
    u = np.linspace(0.0, 1.0, n)
    z = np.zeros(n)
    A = amplitude
    if label == "hold":
        return np.zeros((n, 3))
    if label == "straight":
        return np.stack([A * (2 * u - 1), z, z], axis=1)
    if label == "arc":
        return np.stack([A * np.cos(np.pi * u), A * np.sin(np.pi * u), z], axis=1)
    if label == "circle":
        return np.stack([A * np.cos(2 * np.pi * u), A * np.sin(2 * np.pi * u), z], axis=1)
    if label == "zigzag":
        tri = 2 * np.abs(2 * ((3 * u) % 1.0) - 1) - 1
        return np.stack([A * (2 * u - 1), 0.6 * A * tri, z], axis=1)
    if label == "oscillate":
        return np.stack([A * np.sin(2 * np.pi * 3 * u), z, z], axis=1)
    if label == "tap":
        return np.stack([z, z, A * (0.5 - 0.5 * np.cos(2 * np.pi * 4 * u))], axis=1)
    if label == "twist":
        r = 0.3 * A
        return np.stack([r * np.cos(2 * np.pi * 2 * u), z, r * np.sin(2 * np.pi * 2 * u)], axis=1)
    raise KeyError(f"unknown movement {label!r}")


MIRROR = np.array([-1.0, 1.0, 1.0])


@dataclass
class SignRender:
    """Keypoints of one sign production."""

    body: np.ndarray  # (F, 7, 3)
    left: np.ndarray  # (F, 21, 3)
    right: np.ndarray
    present_left: np.ndarray
    present_right: np.ndarray


def _body(left_wrist: np.ndarray, right_wrist: np.ndarray) -> np.ndarray:
    n = len(left_wrist)
    body = np.zeros((n, 7, 3))
    body[:, 0] = NOSE
    body[:, 1] = L_SHOULDER_POS
    body[:, 2] = R_SHOULDER_POS
    body[:, 3] = 0.5 * (L_SHOULDER_POS + left_wrist) + np.array([-0.1, -0.15, 0.0])
    body[:, 4] = 0.5 * (R_SHOULDER_POS + right_wrist) + np.array([0.1, -0.15, 0.0])
    body[:, 5] = left_wrist
    body[:, 6] = right_wrist
    return body


def render_sign(
    phonology: dict[str, str],
    n_frames: int,
    hands: str = "right",
    amplitude: float = MOVEMENT_AMPLITUDE,
    anchor_shift: np.ndarray | None = None,
) -> SignRender:
    """Render one sign. ``hands`` is right, left (mirror production) or both."""
    anchor = np.array(LOCATION_ANCHORS[phonology["location-minor"]], dtype=float)
    if anchor_shift is not None:
        anchor = anchor + anchor_shift
    path = anchor + movement_offsets(phonology["movement"], n_frames, amplitude)
    pose = hand_pose(phonology["handshape-base"], phonology["handshape-minor"])
    rest = np.repeat(REST_RIGHT[None], n_frames, axis=0)
    mirrored_path = path * MIRROR
    if hands == "right":
        rw, lw = path, rest * MIRROR
    elif hands == "left":
        lw, rw = mirrored_path, rest
    elif hands == "both":
        rw, lw = path, mirrored_path
    else:
        raise ValueError(f"hands must be right, left or both, got {hands!r}")
    right = rw[:, None, :] + pose[None]
    left = lw[:, None, :] + (pose * MIRROR)[None]
    pl = np.full(n_frames, hands in ("left", "both"))
    pr = np.full(n_frames, hands in ("right", "both"))
    return SignRender(_body(lw, rw), left, right, pl, pr)


def _f32(a: np.ndarray) -> np.ndarray:
    # match what a float32 feature file round trip would give
    return np.asarray(a, dtype=np.float32).astype(np.float64)


def concat_renders(renders: list[SignRender], gap: int, pad: int) -> tuple[SignRender, list[tuple[int, int]]]:
    """Join signs with linear transitions of ``gap`` frames and ``pad`` still frames at both ends."""
    parts: list[SignRender] = []
    spans = []
    t = 0

    def still(r: SignRender, idx: int, n: int) -> SignRender:
        sel = [idx] * n
        return SignRender(r.body[sel], r.left[sel], r.right[sel], r.present_left[sel], r.present_right[sel])

    if pad:
        parts.append(still(renders[0], 0, pad))
        t += pad
    for i, r in enumerate(renders):
        if i:
            prev = renders[i - 1]
            w = np.linspace(0, 1, gap + 2)[1:-1][:, None, None]
            parts.append(SignRender(
                (1 - w) * prev.body[-1] + w * r.body[0],
                (1 - w) * prev.left[-1] + w * r.left[0],
                (1 - w) * prev.right[-1] + w * r.right[0],
                np.full(gap, bool(prev.present_left[-1] or r.present_left[0])),
                np.full(gap, bool(prev.present_right[-1] or r.present_right[0])),
            ))
            t += gap
        parts.append(r)
        spans.append((t, t + len(r.body)))
        t += len(r.body)
    if pad:
        parts.append(still(renders[-1], -1, pad))
    joined = SignRender(*(np.concatenate([getattr(p, f) for p in parts]) for f in
                          ("body", "left", "right", "present_left", "present_right")))
    return joined, spans


def features_from_render(r: SignRender, frame_embeddings: np.ndarray | None, frame_rate: float = 25.0) -> FrameFeatures:
    return FrameFeatures(
        _f32(r.body), _f32(r.left), _f32(r.right), r.present_left.copy(), r.present_right.copy(),
        frame_rate, None if frame_embeddings is None else _f32(frame_embeddings),
    )


# --- prototype banks ---------------------------------------------------------------


def build_prototype_bank(seed: int = 0, renders_per_label: int = 3) -> PrototypeBank:
    rng = np.random.default_rng(seed)
    hs_vec, hs_base, hs_minor = [], [], []
    for base in sorted(LABEL_SETS["handshape-base"]):
        for minor in sorted(LABEL_SETS["handshape-minor"]):
            pose = hand_pose(base, minor)
            for _ in range(renders_per_label):
                hs_vec.append(handshape_feature(pose + rng.normal(0, 0.0015, pose.shape)))
                hs_base.append(base)
                hs_minor.append(minor)
    mv_vec, mv_lab = [], []
    for label in sorted(LABEL_SETS["movement"]):
        for hands in ("right", "both"):
            for _ in range(renders_per_label):
                n = int(rng.integers(16, 29))
                path = movement_offsets(label, n, MOVEMENT_AMPLITUDE * rng.uniform(0.8, 1.2))
                rest = np.repeat((REST_RIGHT * MIRROR)[None], n, axis=0)
                left = path * MIRROR if hands == "both" else rest
                mv_vec.append(movement_feature(left, path))
                mv_lab.append(label)
    loc_vec, loc_lab = [], []
    for label in sorted(LABEL_SETS["location-minor"]):
        anchor = np.array(LOCATION_ANCHORS[label])
        for _ in range(renders_per_label + 2):
            loc_vec.append(anchor + rng.normal(0, 0.015, 3))
            loc_lab.append(label)
    return PrototypeBank({
        "handshape-base": (np.array(hs_vec), hs_base),
        "handshape-minor": (np.array(hs_vec), hs_minor),
        "movement": (np.array(mv_vec), mv_lab),
        "location-minor": (np.array(loc_vec), loc_lab),
    })


# --- resources ---------------------------------------------------------------------


def random_phonology(rng: np.random.Generator) -> dict[str, str]:
    minor_loc = str(rng.choice(sorted(LABEL_SETS["location-minor"])))
    return {
        "handshape-base": str(rng.choice(sorted(LABEL_SETS["handshape-base"]))),
        "handshape-minor": str(rng.choice(sorted(LABEL_SETS["handshape-minor"]))),
        "movement": str(rng.choice(sorted(LABEL_SETS["movement"]))),
        "location-major": major_location(minor_loc),
        "location-minor": minor_loc,
    }


def contrasting_phonology(rng: np.random.Generator, ref: dict[str, str]) -> dict[str, str]:
    """A phonology differing from ``ref`` in handshape base, movement and minor location."""
    out = dict(ref)
    for kind in ("handshape-base", "movement", "location-minor"):
        out[kind] = str(rng.choice(sorted(LABEL_SETS[kind] - {ref[kind]})))
    out["location-major"] = major_location(out["location-minor"])
    return out


def random_unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.normal(size=dim)
    return v / np.linalg.norm(v)


def noisy(ref: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """ref + noise with E|noise| ~= sigma; the draw is independent of sigma."""
    return ref + sigma * rng.normal(size=ref.shape) / np.sqrt(ref.size)


def lemma_table_for(words: list[str]) -> dict[str, str]:
    table = {}
    for w in words:
        table[w + "s"] = w
        table[w + "ing"] = w
    return table


def linguistic_graph() -> KnowledgeGraph:
    concepts = ["phonology", "handshape", "movement", "location", "handedness", "lexical-variant", "iconicity"]
    nodes = [Node(f"concept:{c}", CONCEPT, (c,)) for c in concepts]
    edges = [Edge(f"concept:{c}", "concept:phonology", "part-of") for c in ("handshape", "movement", "location")]
    edges += [Edge("concept:lexical-variant", "concept:phonology", "related-to"),
              Edge("concept:lexical-variant", "concept:handedness", "related-to"),
              Edge("concept:iconicity", "concept:location", "related-to")]
    for kind, labels in sorted(LABEL_SETS.items()):
        nodes.append(Node(f"feature:{kind}", FEATURE, (kind,), {"values": sorted(labels)}))
        parent = kind.split("-")[0]
        edges.append(Edge(f"feature:{kind}", f"concept:{parent}", "feature-of"))
    nodes.append(Node("feature:mirror-production", FEATURE, ("mirror", "left-handed")))
    edges.append(Edge("feature:mirror-production", "concept:handedness", "feature-of"))
    return KnowledgeGraph(nodes, edges)


# --- fixture -----------------------------------------------------------------------


@dataclass
class SynthConfig:
    seed: int = 0
    n_glosses: int = 50
    dim: int = 64
    sigma: float = 0.0
    poor_sigma_factor: float = 1.5
    n_sentences: int = 30
    min_tokens: int = 3
    max_tokens: int = 6
    n_idgloss: int = 6
    per_variant: int = 3
    variant_noise: float = 0.1
    singleton_distance: float = 0.5
    eval_noise: float = 0.1
    gap: int = 6
    pad: int = 4

    def __post_init__(self):
        if not 1 <= self.n_glosses <= len(WORDS):
            raise ValueError(f"n_glosses must lie in 1..{len(WORDS)}")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if not 1 <= self.min_tokens <= self.max_tokens <= self.n_glosses:
            raise ValueError("need 1 <= min_tokens <= max_tokens <= n_glosses")
        if self.n_idgloss > self.n_glosses:
            raise ValueError("n_idgloss cannot exceed n_glosses")


@dataclass
class Task1Sample:
    record: SampleRecord
    features: FrameFeatures
    reference: list[str]
    glosses: list[str]


@dataclass
class Task2Gloss:
    gloss_id: str
    samples: list[tuple[SampleRecord, FrameFeatures]]
    eval_embeddings: dict[str, np.ndarray]
    variants: dict[str, list[str]]  # variant name -> keys, the planted singleton included
    planted: str
    mirrored: bool


@dataclass
class Fixture:
    config: SynthConfig
    lexicon: Lexicon
    task1: list[Task1Sample] = field(default_factory=list)
    task2: list[Task2Gloss] = field(default_factory=list)

    def references(self) -> dict[str, dict[str, Any]]:
        return {s.record.sample_id: {"tokens": list(s.reference), "glosses": list(s.glosses), "subset": s.record.subset,
                                     "segments": [list(x) for x in s.record.segments]} for s in self.task1}

    def expected_clusters(self) -> dict[str, dict[str, Any]]:
        return {g.gloss_id: {"variants": {k: sorted(v) for k, v in g.variants.items()}, "planted": g.planted,
                             "mirrored": g.mirrored} for g in self.task2}


def build_fixture(config: SynthConfig | None = None) -> Fixture:
    cfg = config or SynthConfig()
    rng = np.random.default_rng(cfg.seed)
    words = sorted(rng.choice(WORDS, size=cfg.n_glosses, replace=False).tolist())
    entries = []
    for w in words:
        entries.append(DictionaryEntry(
            gloss_id=w.upper(),
            canonical_phonology=random_phonology(rng),
            reference_embedding=_f32(random_unit(rng, cfg.dim)),
            handedness="one-handed" if rng.random() < 0.7 else "two-handed",
            keywords=[w],
            frequency=float(rng.integers(1, 101)),
        ))
    lexicon = Lexicon(
        entries,
        bank=build_prototype_bank(cfg.seed),
        lemma_table=lemma_table_for(words),
        stopwords=set(FUNCTION_WORDS),
        linguistic_graph=linguistic_graph(),
    )
    fx = Fixture(cfg, lexicon)

    # task 1: sentences whose sign order differs from the spoken word order
    fillers = ["the", "a", "to", "and", "with", "my", "we"]
    for i in range(cfg.n_sentences):
        n = int(rng.integers(cfg.min_tokens, cfg.max_tokens + 1))
        idx = rng.choice(len(entries), size=n, replace=False)
        glosses = [entries[j] for j in idx]
        subset = "fair" if i % 2 == 0 else "poor"
        sigma = cfg.sigma * (cfg.poor_sigma_factor if subset == "poor" else 1.0)
        renders, embs = [], []
        for e in glosses:
            hands = "both" if e.handedness == "two-handed" else "right"
            renders.append(render_sign(e.canonical_phonology, int(rng.integers(16, 29)), hands,
                                       MOVEMENT_AMPLITUDE * rng.uniform(0.85, 1.15), rng.uniform(-0.02, 0.02, 3)))
            embs.append(noisy(e.reference_embedding, sigma, rng))
        joined, spans = concat_renders(renders, cfg.gap, cfg.pad)
        frames = np.zeros((len(joined.body), cfg.dim))
        for k, (a, b) in enumerate(spans):
            frames[a:b] = embs[k]
            if k:
                pa = spans[k - 1][1]
                w = np.linspace(0, 1, a - pa + 2)[1:-1][:, None]
                frames[pa:a] = (1 - w) * embs[k - 1] + w * embs[k]
        frames[: spans[0][0]] = embs[0]
        frames[spans[-1][1]:] = embs[-1]
        spoken = [str(rng.choice([e.keywords[0], e.keywords[0] + "s"])) for e in glosses]
        order = rng.permutation(n)
        words_out = []
        for j in order:
            if rng.random() < 0.5:
                words_out.append(str(rng.choice(fillers)))
            words_out.append(spoken[j])
        sentence = " ".join(words_out).capitalize() + "."
        sid = f"s{i:03d}"
        rec = SampleRecord(sid, sentence=sentence, segments=spans, subset=subset)
        fx.task1.append(Task1Sample(rec, features_from_render(joined, frames), [e.keywords[0] for e in glosses],
                                    [e.gloss_id for e in glosses]))

    # task 2: per gloss two variants plus one planted off-centre production of variant A
    one_handed = [e for e in entries if e.handedness == "one-handed"] or entries
    chosen = [one_handed[j] for j in sorted(rng.choice(len(one_handed), size=min(cfg.n_idgloss, len(one_handed)), replace=False))]
    for gi, e in enumerate(chosen):
        pa = dict(e.canonical_phonology)
        pb = contrasting_phonology(rng, pa)
        ca, cb = random_unit(rng, cfg.dim), random_unit(rng, cfg.dim)
        mirrored = gi % 2 == 1
        plan = [("A", pa, "right", ca) for _ in range(cfg.per_variant)]
        plan += [("B", pb, "both", cb) for _ in range(cfg.per_variant)]
        plan.append(("A*", pa, "left" if mirrored else "right", ca))
        ids = rng.permutation(len(plan))
        g = Task2Gloss(e.gloss_id, [], {}, {"A": [], "B": []}, "", mirrored)
        for (variant, phon, hands, centre), num in zip(plan, ids):
            key = f"{e.gloss_id.lower()}-{num:02d}"
            if variant == "A*":
                w = random_unit(rng, cfg.dim)
                w -= np.dot(w, centre) * centre
                w /= np.linalg.norm(w)
                cos = 1.0 - cfg.singleton_distance
                vis = cos * centre + np.sqrt(1 - cos**2) * w
                g.planted = key
            else:
                vis = centre + cfg.variant_noise * random_unit(rng, cfg.dim)
            g.variants[variant.rstrip("*")].append(key)
            g.eval_embeddings[key] = _f32(centre + cfg.eval_noise * random_unit(rng, cfg.dim))
            r = render_sign(phon, int(rng.integers(18, 27)), hands, MOVEMENT_AMPLITUDE * rng.uniform(0.9, 1.1),
                            rng.uniform(-0.015, 0.015, 3))
            frames = np.repeat(vis[None], len(r.body), axis=0)
            rec = SampleRecord(key, gloss_label=e.gloss_id, segments=[(0, len(r.body))])
            g.samples.append((rec, features_from_render(r, frames)))
        g.samples.sort(key=lambda s: s[0].sample_id)
        fx.task2.append(g)
    return fx


# --- persistence --------------------------------------------------------------------


def _write_features(base: Path, rec: SampleRecord, feats: FrameFeatures) -> None:
    fdir = base / "features"
    fdir.mkdir(parents=True, exist_ok=True)
    sid = rec.sample_id
    write_embedding_file(fdir / f"{sid}.emb", feats.frame_embeddings)
    write_keypoint_file(fdir / f"{sid}.body.kpt", feats.body_keypoints)
    hands = np.concatenate([feats.hand_keypoints_left, feats.hand_keypoints_right], axis=1)
    write_keypoint_file(fdir / f"{sid}.hands.kpt", hands, np.stack([feats.hand_present_left, feats.hand_present_right]))
    rec.feature_refs = {
        "embeddings": f"features/{sid}.emb",
        "body": f"features/{sid}.body.kpt",
        "hands": f"features/{sid}.hands.kpt",
    }


def write_fixture(fx: Fixture, out_dir) -> dict[str, str]:
    """Write every fixture artefact under ``out_dir``; returns name -> relative path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lex = fx.lexicon
    write_dictionary(lex.entries, out / "dictionary.json", embedding_file="dictionary.emb")
    save_prototype_bank(lex.bank, out / "prototypes.json")
    (out / "lemmas.tsv").write_text("".join(f"{k}\t{v}\n" for k, v in sorted(lex.lemma_table.items())), encoding="utf-8")
    (out / "stopwords.txt").write_text("".join(f"{w}\n" for w in sorted(lex.stopwords)), encoding="utf-8")
    save_graph(lex.linguistic_graph, out / "linguistic_graph.json")
    meta = {"seed": str(fx.config.seed), "sigma": repr(fx.config.sigma)}

    t1 = out / "task1"
    t1.mkdir(exist_ok=True)
    for s in fx.task1:
        _write_features(t1, s.record, s.features)
    write_manifest(DatasetManifest([s.record for s in fx.task1], "../dictionary.json", {**meta, "task": "pseudogloss"}),
                   t1 / "manifest.jsonl")
    (t1 / "references.json").write_text(json.dumps(fx.references(), indent=1, sort_keys=True) + "\n", encoding="utf-8")

    t2 = out / "task2"
    t2.mkdir(exist_ok=True)
    recs = []
    for g in fx.task2:
        keys = sorted(g.eval_embeddings)
        write_embedding_file(t2 / f"{g.gloss_id}.eval.emb", np.stack([g.eval_embeddings[k] for k in keys]))
        for rec, feats in g.samples:
            _write_features(t2, rec, feats)
            recs.append(rec)
    write_manifest(DatasetManifest(recs, "../dictionary.json", {**meta, "task": "idgloss"}), t2 / "manifest.jsonl")
    eval_index = {g.gloss_id: {"file": f"{g.gloss_id}.eval.emb", "keys": sorted(g.eval_embeddings)} for g in fx.task2}
    (t2 / "eval_embeddings.json").write_text(json.dumps(eval_index, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    (t2 / "expected.json").write_text(json.dumps(fx.expected_clusters(), indent=1, sort_keys=True) + "\n", encoding="utf-8")

    cfg = {k: getattr(fx.config, k) for k in fx.config.__dataclass_fields__}
    (out / "fixture.json").write_text(json.dumps(cfg, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return {
        "dictionary": "dictionary.json",
        "prototypes": "prototypes.json",
        "lemmas": "lemmas.tsv",
        "stopwords": "stopwords.txt",
        "linguistic_graph": "linguistic_graph.json",
        "task1_manifest": "task1/manifest.jsonl",
        "task1_references": "task1/references.json",
        "task2_manifest": "task2/manifest.jsonl",
        "task2_expected": "task2/expected.json",
        "task2_eval": "task2/eval_embeddings.json",
    }


# --- in-memory end-to-end runs ------------------------------------------------------


def annotate_task1(fx: Fixture, config=None, policy: str = "pseudogloss-greedy", **params: Any) -> dict[str, dict]:
    """Run the scripted pseudo-gloss policy on every sentence; sample id -> record dict."""
    from .orchestrator import scripted_backend
    from .workflows import PseudoGlossConfig, run_pseudogloss_task

    cfg = config or PseudoGlossConfig()
    return {
        s.record.sample_id: run_pseudogloss_task(s.record, s.features, fx.lexicon, scripted_backend(policy, **params), cfg).to_dict()
        for s in fx.task1
    }


def annotate_task2(fx: Fixture, config=None, policy: str = "idgloss-gates") -> dict[str, dict]:
    """Run the scripted ID-gloss policy on every gloss; gloss id -> record dict."""
    from .orchestrator import scripted_backend
    from .workflows import GlossSample, IDGlossConfig, run_idgloss_task

    cfg = config or IDGlossConfig()
    out = {}
    for g in fx.task2:
        samples = [GlossSample(rec.sample_id, feats, rec.segments[0]) for rec, feats in g.samples]
        out[g.gloss_id] = run_idgloss_task(g.gloss_id, samples, fx.lexicon, scripted_backend(policy, **cfg.policy_params()), cfg).to_dict()
    return out
