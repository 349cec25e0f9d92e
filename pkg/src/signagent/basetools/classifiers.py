"""Handshape, movement and location classifiers over ingested keypoints."""

from __future__ import annotations

import numpy as np

from ..datamodel import HAND_JOINTS, L_SHOULDER, L_WRIST, NOSE, R_SHOULDER, R_WRIST, FrameFeatures
from ..errors import MissingFeatures, TooShort
from .prototypes import PhonoPrediction, PrototypeBank, consensus, knn_vote

HANDSHAPE_KINDS = ("handshape-base", "handshape-minor")
LOCATION_KINDS = ("location-major", "location-minor")

N_DFT_COEFFS = 8

# (lower bound, label) on the wrist height fraction, checked top-down.
# Height fraction = (wrist_y - shoulder_y) / (nose_y - shoulder_y).
ZONE_TABLE = (
    (0.9, "head"),
    (0.6, "neck"),
    (-0.2, "chest"),
    (-0.8, "torso"),
)
NEUTRAL_ZONE = "neutral-space"

_IU = np.triu_indices(HAND_JOINTS, k=1)


# --- handshape -----------------------------------------------------------------


def handshape_feature(joints: np.ndarray) -> np.ndarray:
    """Pairwise joint distances of one hand, divided by their mean (210 values)."""
    joints = np.asarray(joints, dtype=np.float64)
    diff = joints[:, None, :] - joints[None, :, :]
    d = np.sqrt((diff**2).sum(-1))[_IU]
    m = d.mean()
    return d / m if m > 0 else d


def classify_handshape(
    hand_keypoints: np.ndarray,
    bank: PrototypeBank,
    k: int = 5,
    present: np.ndarray | None = None,
) -> dict[str, PhonoPrediction]:
    """k-NN handshape prediction for every handshape kind the bank covers.

    ``hand_keypoints`` is (F, 21, 3); ``present`` masks frames where the hand was
    detected (all frames when omitted). The per-frame features are averaged.
    """
    hand_keypoints = np.asarray(hand_keypoints, dtype=np.float64)
    if present is None:
        present = np.ones(len(hand_keypoints), dtype=bool)
    frames = hand_keypoints[np.asarray(present, dtype=bool)]
    if len(frames) == 0:
        raise MissingFeatures("no frames with the hand present")
    feat = np.mean([handshape_feature(f) for f in frames], axis=0)
    out = {}
    for kind in HANDSHAPE_KINDS:
        if kind in bank:
            vectors, labels = bank.get(kind)
            out[kind] = knn_vote(feat, vectors, labels, k, kind)
    return out


def dominant_hand(features: FrameFeatures) -> str:
    """Hand detected in more frames; ties (including no detections) go right."""
    left = int(features.hand_present_left.sum())
    right = int(features.hand_present_right.sum())
    return "left" if left > right else "right"


def classify_handshape_features(features: FrameFeatures, bank: PrototypeBank, k: int = 5) -> dict[str, PhonoPrediction]:
    if dominant_hand(features) == "left":
        return classify_handshape(features.hand_keypoints_left, bank, k, features.hand_present_left)
    return classify_handshape(features.hand_keypoints_right, bank, k, features.hand_present_right)


# --- movement --------------------------------------------------------------------


def velocity_stats(traj: np.ndarray) -> np.ndarray:
    """(mean speed, peak speed, path length, straightness), speeds per frame."""
    steps = np.linalg.norm(np.diff(traj, axis=0), axis=1)
    path = float(steps.sum())
    disp = float(np.linalg.norm(traj[-1] - traj[0]))
    straight = disp / path if path > 0 else 0.0
    return np.array([steps.mean(), steps.max(), path, min(straight, 1.0)])


def dft_magnitudes(traj: np.ndarray, n_coeffs: int = N_DFT_COEFFS) -> np.ndarray:
    """Amplitudes of DFT bins 1..n_coeffs per axis of the mean-removed trajectory.

    Bins beyond the Nyquist limit are zero-filled; output is (3 * n_coeffs,),
    axis-major.
    """
    x = traj - traj.mean(axis=0)
    spec = np.abs(np.fft.rfft(x, axis=0)) * (2.0 / len(x))
    out = np.zeros((n_coeffs, 3))
    avail = spec[1 : n_coeffs + 1]
    out[: len(avail)] = avail
    return out.T.ravel()


def movement_feature(left: np.ndarray, right: np.ndarray, n_coeffs: int = N_DFT_COEFFS) -> np.ndarray:
    """Spectro-temporal feature of a bilateral wrist trajectory.

    Wrists are ordered dominant-first (longer path), so mirrored productions of
    one sign map to the same feature.
    """
    left = np.asarray(left, dtype=np.float64)
    right = np.asarray(right, dtype=np.float64)
    if len(left) < 4 or len(right) != len(left):
        raise TooShort(f"movement needs >= 4 frames per wrist, got {len(left)}")
    stats_l, stats_r = velocity_stats(left), velocity_stats(right)
    first, second = (left, right) if stats_l[2] > stats_r[2] else (right, left)
    s_first, s_second = (stats_l, stats_r) if stats_l[2] > stats_r[2] else (stats_r, stats_l)
    return np.concatenate(
        [dft_magnitudes(first, n_coeffs), dft_magnitudes(second, n_coeffs), s_first, s_second]
    )


def classify_movement(
    left_wrist: np.ndarray,
    right_wrist: np.ndarray,
    bank: PrototypeBank,
    k: int = 5,
    n_coeffs: int = N_DFT_COEFFS,
) -> PhonoPrediction:
    feat = movement_feature(left_wrist, right_wrist, n_coeffs)
    vectors, labels = bank.get("movement")
    return knn_vote(feat, vectors, labels, k, "movement")


# --- location --------------------------------------------------------------------


def zone_for_height(h: float) -> str:
    for lower, label in ZONE_TABLE:
        if h >= lower:
            return label
    return NEUTRAL_ZONE


def height_fraction(body: np.ndarray, wrist: np.ndarray) -> np.ndarray:
    """Per-frame wrist height in units of the shoulder-to-nose distance."""
    shoulder_y = 0.5 * (body[:, L_SHOULDER, 1] + body[:, R_SHOULDER, 1])
    span = body[:, NOSE, 1] - shoulder_y
    span = np.where(np.abs(span) > 1e-9, span, 1e-9)
    return (wrist[:, 1] - shoulder_y) / span


def _mean_speed(traj: np.ndarray) -> float:
    if len(traj) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(traj, axis=0), axis=1).mean())


def classify_location(
    body_keypoints: np.ndarray,
    bank: PrototypeBank | None = None,
    k: int = 5,
    dominant: str | None = None,
) -> dict[str, PhonoPrediction]:
    """Major location from the zone table, minor location from per-frame k-NN.

    Both are aggregated by frame-level consensus. The dominant wrist is the one
    with the higher mean speed unless given; left-dominant offsets are mirrored
    in x before the minor-location lookup.
    """
    body = np.asarray(body_keypoints, dtype=np.float64)
    if body.ndim != 3 or len(body) == 0:
        raise MissingFeatures("no frames for location classification")
    left, right = body[:, L_WRIST], body[:, R_WRIST]
    if dominant is None:
        sl, sr = _mean_speed(left), _mean_speed(right)
        if abs(sl - sr) > 1e-9:
            dominant = "left" if sl > sr else "right"
        else:
            # equal activity: the resting hand hangs lower
            dominant = "left" if left[:, 1].mean() > right[:, 1].mean() else "right"
    wrist = left if dominant == "left" else right

    h = height_fraction(body, wrist)
    out = {"location-major": consensus((zone_for_height(x) for x in h), "location-major")}
    if bank is not None and "location-minor" in bank:
        mid = 0.5 * (body[:, L_SHOULDER] + body[:, R_SHOULDER])
        offsets = wrist - mid
        if dominant == "left":
            offsets = offsets * np.array([-1.0, 1.0, 1.0])
        vectors, labels = bank.get("location-minor")
        frame_labels = [knn_vote(o, vectors, labels, k).top for o in offsets]
        out["location-minor"] = consensus(frame_labels, "location-minor")
    return out


def classify_all(features: FrameFeatures, bank: PrototypeBank, k: int = 5) -> dict[str, PhonoPrediction]:
    """Run every classifier the data and bank allow; skipped kinds are omitted."""
    preds: dict[str, PhonoPrediction] = {}
    try:
        preds.update(classify_handshape_features(features, bank, k))
    except MissingFeatures:
        pass
    left, right = features.wrists
    if "movement" in bank and len(left) >= 4:
        preds["movement"] = classify_movement(left, right, bank, k)
    if features.frame_count:
        preds.update(classify_location(features.body_keypoints, bank, k))
    return preds
