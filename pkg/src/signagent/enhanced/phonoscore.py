"""Visual-phonological agreement between a gloss and component predictions."""

from __future__ import annotations

import math
from typing import Mapping, Sequence, Union

from ..basetools.prototypes import PhonoPrediction
from ..errors import EmptyPhonology

Ranked = Union[PhonoPrediction, Sequence[tuple[str, float]]]


def _ranked(pred: Ranked) -> Sequence[tuple[str, float]]:
    return pred.ranked if isinstance(pred, PhonoPrediction) else pred


def score_phonological_agreement(
    canonical: Mapping[str, str],
    predictions: Mapping[str, Ranked],
    k: int | None = None,
) -> float:
    """Mean over the gloss's canonical components of rank-discounted confidence.

    For each component the matching prediction at rank r (1-based) contributes
    ``p / r``; components without predictions contribute 0. Only the first
    ``k`` ranks are read when ``k`` is given.
    """
    if not canonical:
        raise EmptyPhonology("candidate has no canonical components")
    weight = 1.0 / len(canonical)
    terms = []
    for kind, label in canonical.items():
        pred = predictions.get(kind)
        if pred is None:
            continue
        ranked = _ranked(pred)
        if k is not None:
            ranked = ranked[:k]
        for r, (predicted, p) in enumerate(ranked, start=1):
            if predicted == label:
                terms.append(weight * p / r)
    # fsum keeps the score independent of the mapping's key order
    return math.fsum(terms)
