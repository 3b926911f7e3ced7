"""
cfair: consumer-fairness audits of LLM-based recommenders.

This library prompts a recommender with and without users' sensitive
attributes and measures how far the attribute-bearing lists drift from the
neutral ones.
"""

__version__ = "0.1.0"

from .config import BiasConfig, ExperimentConfig, ModelParams, load_config
from .errors import (
    CFairError,
    ConfigurationError,
    DataError,
    ReportError,
    StageError,
    TransportError,
)
from .evaluator import (
    FairnessAuditor,
    ReportFormat,
    RunArtifacts,
    emit_report,
    run_experiment,
    sweep_scope,
)
from .metrics import jaccard, prag_star, snsr, snsv
from .models import Condition, FairnessCell, PairResult, RankedList, Strategy

__all__ = [
    "BiasConfig",
    "CFairError",
    "Condition",
    "ConfigurationError",
    "DataError",
    "ExperimentConfig",
    "FairnessAuditor",
    "FairnessCell",
    "ModelParams",
    "PairResult",
    "RankedList",
    "ReportError",
    "ReportFormat",
    "RunArtifacts",
    "StageError",
    "Strategy",
    "TransportError",
    "emit_report",
    "jaccard",
    "load_config",
    "prag_star",
    "run_experiment",
    "snsr",
    "snsv",
    "sweep_scope",
]
