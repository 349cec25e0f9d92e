"""Temporal sign segmentation: provided boundaries or a wrist-speed heuristic."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.ndimage import uniform_filter1d

from ..datamodel import FrameFeatures
from ..errors import DataError, NoActiveSpans


@dataclass(frozen=True)
class SegmenterConfig:
    window: int = 5
    enter_factor: float = 1.5  # enter threshold = factor * median smoothed speed
    exit_factor: float = 0.75
    min_len: int = 6

    def __post_init__(self):
        if self.window < 1 or self.min_len < 1:
            raise ValueError("window and min_len must be >= 1")
        if not 0 <= self.exit_factor <= self.enter_factor:
            raise ValueError("need 0 <= exit_factor <= enter_factor")


@dataclass
class Segment:
    start_frame: int
    end_frame: int  # exclusive
    pooled_embedding: np.ndarray | None = None
    activity: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.start_frame < self.end_frame:
            raise DataError(f"segment needs start < end, got ({self.start_frame}, {self.end_frame})")

    @property
    def duration(self) -> int:
        return self.end_frame - self.start_frame

    def to_dict(self) -> dict[str, Any]:
        return {
            "start_frame": self.start_frame,
            "end_frame": self.end_frame,
            "activity": dict(self.activity),
        }


def wrist_speed(features: FrameFeatures) -> np.ndarray:
    """Per-frame speed of the faster wrist (body units per frame)."""
    left, right = features.wrists
    n = features.frame_count
    if n < 2:
        return np.zeros(n)
    sl = np.linalg.norm(np.diff(left, axis=0), axis=1)
    sr = np.linalg.norm(np.diff(right, axis=0), axis=1)
    s = np.maximum(sl, sr)
    return np.concatenate([[s[0]], s])


def hysteresis_spans(signal: np.ndarray, enter: float, exit: float) -> list[tuple[int, int]]:
    """Half-open spans that start above ``enter`` and last while above ``exit``."""
    spans = []
    start = None
    for i, v in enumerate(signal):
        if start is None:
            if v > enter:
                start = i
        elif v <= exit:
            spans.append((start, i))
            start = None
    if start is not None:
        spans.append((start, len(signal)))
    return spans


def segment_activity(features: FrameFeatures, start: int, end: int, speed: np.ndarray | None = None) -> dict[str, float]:
    if speed is None:
        speed = wrist_speed(features)
    s = speed[start:end]
    det = features.hand_present_left[start:end].sum() + features.hand_present_right[start:end].sum()
    return {
        "hand_detection_count": int(det),
        "mean_wrist_speed": float(s.mean()) if len(s) else 0.0,
        "peak_wrist_speed": float(s.max()) if len(s) else 0.0,
    }


def make_segment(features: FrameFeatures, start: int, end: int, speed: np.ndarray | None = None) -> Segment:
    pooled = None
    if features.frame_embeddings is not None:
        pooled = features.frame_embeddings[start:end].mean(axis=0)
    return Segment(start, end, pooled, segment_activity(features, start, end, speed))


def segment_signs(
    features: FrameFeatures,
    provided: Sequence[tuple[int, int]] | None = None,
    config: SegmenterConfig | None = None,
) -> list[Segment]:
    """Segments in temporal order.

    With ``provided`` boundaries those are used verbatim. Otherwise the smoothed
    wrist speed is thresholded with hysteresis relative to its median, and spans
    shorter than ``min_len`` frames are dropped.
    """
    n = features.frame_count
    if n == 0:
        raise DataError("cannot segment an empty sample")
    speed = wrist_speed(features)
    if provided:
        spans = sorted((int(a), int(b)) for a, b in provided)
        for a, b in spans:
            if not 0 <= a < b <= n:
                raise DataError(f"segment ({a}, {b}) outside 0..{n}")
        return [make_segment(features, a, b, speed) for a, b in spans]

    cfg = config or SegmenterConfig()
    smooth = uniform_filter1d(speed, size=cfg.window, mode="nearest")
    med = float(np.median(smooth))
    spans = hysteresis_spans(smooth, cfg.enter_factor * med, cfg.exit_factor * med)
    spans = [(a, b) for a, b in spans if b - a >= cfg.min_len]
    if not spans:
        raise NoActiveSpans("no active signing spans found")
    return [make_segment(features, a, b, speed) for a, b in spans]


def smoothed_speed(features: FrameFeatures, window: int = 5) -> np.ndarray:
    return uniform_filter1d(wrist_speed(features), size=window, mode="nearest")
