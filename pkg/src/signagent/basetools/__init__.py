"""Low-level analysis tools: phonological classifiers, segmentation, retrieval."""

from .classifiers import (
    classify_all,
    classify_handshape,
    classify_handshape_features,
    classify_location,
    classify_movement,
    handshape_feature,
    movement_feature,
    zone_for_height,
)
from .glosser import DictionaryIndex, gloss_retrieve
from .handedness import HandednessConfig, HandednessReport, detect_handedness
from .lemma import load_lemma_table, load_stopwords, sign_lemma
from .prototypes import PhonoPrediction, PrototypeBank, knn_vote, load_prototype_bank, save_prototype_bank
from .segmentation import Segment, SegmenterConfig, segment_signs

__all__ = [
    "DictionaryIndex",
    "HandednessConfig",
    "HandednessReport",
    "PhonoPrediction",
    "PrototypeBank",
    "Segment",
    "SegmenterConfig",
    "classify_all",
    "classify_handshape",
    "classify_handshape_features",
    "classify_location",
    "classify_movement",
    "detect_handedness",
    "gloss_retrieve",
    "handshape_feature",
    "knn_vote",
    "load_lemma_table",
    "load_prototype_bank",
    "load_stopwords",
    "movement_feature",
    "save_prototype_bank",
    "segment_signs",
    "sign_lemma",
    "zone_for_height",
]
