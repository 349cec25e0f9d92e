"""Task controllers and their scripted policies.

Importing this package registers the ``pseudogloss-greedy`` and
``idgloss-gates`` policies with the orchestrator.
"""

from .idgloss import (
    CorrectionResult,
    GlossSample,
    IDGlossConfig,
    IDGlossRecord,
    SampleEvidence,
    build_idgloss_tools,
    cluster_handedness,
    correct_partition,
    correction_pass,
    handedness_compatibility,
    refine_clusters,
    run_idgloss_task,
    sample_evidence,
)
from .pseudogloss import (
    PseudoGlossConfig,
    PseudoGlossRecord,
    assign_tokens,
    build_pseudogloss_tools,
    check_answer,
    run_pseudogloss_task,
)
from .scoring import CUE_NAMES, DEFAULT_WEIGHTS, ScoreBreakdown, ScoringContext, score_assignment
from .validation import PartitionVerdict, TokenVerdict, validate_partition, validate_tokens

__all__ = [
    "CUE_NAMES",
    "DEFAULT_WEIGHTS",
    "CorrectionResult",
    "GlossSample",
    "IDGlossConfig",
    "IDGlossRecord",
    "PartitionVerdict",
    "PseudoGlossConfig",
    "PseudoGlossRecord",
    "SampleEvidence",
    "ScoreBreakdown",
    "ScoringContext",
    "TokenVerdict",
    "assign_tokens",
    "build_idgloss_tools",
    "build_pseudogloss_tools",
    "check_answer",
    "cluster_handedness",
    "correct_partition",
    "correction_pass",
    "handedness_compatibility",
    "refine_clusters",
    "run_idgloss_task",
    "run_pseudogloss_task",
    "sample_evidence",
    "score_assignment",
    "validate_partition",
    "validate_tokens",
]
