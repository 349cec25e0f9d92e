"""Segment-level handedness from per-frame hand detections."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

from ..datamodel import FrameFeatures
from ..errors import EmptySegment
from .segmentation import Segment


@dataclass(frozen=True)
class HandednessConfig:
    present_fraction: float = 0.5
    mixed_fraction: float = 0.2


@dataclass(frozen=True)
class HandednessReport:
    label: str  # left | right | both | mixed
    one_handed: bool
    two_handed: bool
    left_count: int
    right_count: int
    frames: int
    left_right_ratio: float  # math.inf when right_count == 0 and left_count > 0

    def to_dict(self) -> dict[str, Any]:
        ratio = self.left_right_ratio
        return {
            "label": self.label,
            "one_handed": self.one_handed,
            "two_handed": self.two_handed,
            "counts": {"left": self.left_count, "right": self.right_count, "frames": self.frames},
            "left_right_ratio": "inf" if math.isinf(ratio) else ratio,
        }

    @classmethod
    def from_dict(cls, d) -> "HandednessReport":
        ratio = d["left_right_ratio"]
        return cls(
            d["label"],
            d["one_handed"],
            d["two_handed"],
            d["counts"]["left"],
            d["counts"]["right"],
            d["counts"]["frames"],
            math.inf if ratio == "inf" else float(ratio),
        )


def detect_handedness(segment: Segment, features: FrameFeatures, config: HandednessConfig | None = None) -> HandednessReport:
    """Label a segment left / right / both / mixed.

    Hands present in disjoint frame spans, each for at least ``mixed_fraction`` of
    the segment, are ``mixed`` (alternating use). Otherwise a hand counts as
    present at ``present_fraction`` of frames; with neither present the majority
    hand wins (right on ties).
    """
    cfg = config or HandednessConfig()
    a, b = segment.start_frame, segment.end_frame
    if b <= a:
        raise EmptySegment(f"segment ({a}, {b}) has no frames")
    if b > features.frame_count or a < 0:
        raise EmptySegment(f"segment ({a}, {b}) outside 0..{features.frame_count}")
    left = features.hand_present_left[a:b]
    right = features.hand_present_right[a:b]
    n = b - a
    lc, rc = int(left.sum()), int(right.sum())
    lf, rf = lc / n, rc / n
    disjoint = not (left & right).any()

    if disjoint and lf >= cfg.mixed_fraction and rf >= cfg.mixed_fraction:
        label = "mixed"
    elif lf >= cfg.present_fraction and rf >= cfg.present_fraction:
        label = "both"
    elif lf >= cfg.present_fraction:
        label = "left"
    elif rf >= cfg.present_fraction:
        label = "right"
    else:
        label = "left" if lc > rc else "right"

    if rc:
        ratio = lc / rc
    else:
        ratio = math.inf if lc else 0.0
    return HandednessReport(
        label=label,
        one_handed=label in ("left", "right"),
        two_handed=label == "both",
        left_count=lc,
        right_count=rc,
        frames=n,
        left_right_ratio=ratio,
    )
