"""Entropy-weighted greedy selection and integration of features drawn from
several learned representations, with diversity analysis and evaluation
helpers."""

__version__ = "0.1.0"

from .dataset import (
    LabeledDataset,
    ProvenanceManifest,
    concatenate,
    load_dataset,
    load_manifest,
    save_dataset,
)
from .diversity import CorrectnessMatrix, DiversityReport, avg_entropy, diversity_report
from .ranking import FeatureStats, TopKSet, class_entropy, rank_all_features, top_k_samples
from .selector import (
    SelectionResult,
    normalize,
    penalize,
    resolve_k,
    run_pipeline,
    select_features,
    weighted_score,
)
from .synth import SynthConfig, generate

__all__ = [
    "CorrectnessMatrix",
    "DiversityReport",
    "FeatureStats",
    "LabeledDataset",
    "ProvenanceManifest",
    "SelectionResult",
    "SynthConfig",
    "TopKSet",
    "avg_entropy",
    "class_entropy",
    "concatenate",
    "diversity_report",
    "generate",
    "load_dataset",
    "load_manifest",
    "normalize",
    "penalize",
    "rank_all_features",
    "resolve_k",
    "run_pipeline",
    "save_dataset",
    "select_features",
    "top_k_samples",
    "weighted_score",
]
