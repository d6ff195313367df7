"""Label-private data-free distillation.

Train a teacher on private data, train a generator against the frozen
teacher, label the generator's output with a selective randomized response
mechanism, and distill a student that never sees the private data. Ships
with an exact brute-force auditor for the mechanism's privacy guarantee and
scikit-learn style estimators wrapping the pipeline.
"""

from .audit import AuditReport, audit_grid, exact_audit, statistical_audit
from .config import ExperimentConfig
from .datasets import IdxDataset, load_idx, make_blob_task
from .estimators import (
    DataFreeSampler,
    NeuralNetClassifier,
    PrivateDistillationClassifier,
)
from .generator import (
    GeneratorLossTerms,
    GeneratorLossWeights,
    NoiseSpec,
    generator_loss,
    statistics_norm,
    train_generator,
)
from .mechanisms import (
    CandidateSet,
    PrivacyBudget,
    ThresholdRule,
    classic_rr,
    classic_rr_distribution,
    select_candidates,
    selective_rr,
    selective_rr_distribution,
)
from .pipeline import (
    LabeledSyntheticSet,
    PipelineResult,
    PrivateStore,
    StageRecord,
    run_pipeline,
    run_stage,
    student_distill_loss,
    train_teacher,
)

__version__ = "0.1.0"

__all__ = [
    "AuditReport",
    "CandidateSet",
    "DataFreeSampler",
    "ExperimentConfig",
    "GeneratorLossTerms",
    "GeneratorLossWeights",
    "IdxDataset",
    "LabeledSyntheticSet",
    "NeuralNetClassifier",
    "NoiseSpec",
    "PipelineResult",
    "PrivacyBudget",
    "PrivateDistillationClassifier",
    "PrivateStore",
    "StageRecord",
    "ThresholdRule",
    "audit_grid",
    "classic_rr",
    "classic_rr_distribution",
    "exact_audit",
    "generator_loss",
    "load_idx",
    "make_blob_task",
    "run_pipeline",
    "run_stage",
    "select_candidates",
    "selective_rr",
    "selective_rr_distribution",
    "statistical_audit",
    "statistics_norm",
    "student_distill_loss",
    "train_teacher",
    "train_generator",
]
