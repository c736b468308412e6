"""Likelihoods, slice-sampled posteriors and cross-validated model comparison."""

from .evidence import (CVEvidence, EvidenceReport, InitializationError, PosteriorSample,
                       SamplerConfig, SplitSpec, compare_models, cv_evidence,
                       estimate_thresholds, make_splits, mcse, sample_posterior)
from .models import (DEFAULT_MODELS, MODEL_CLASSES, DecisionData, EmptyDatasetError,
                     PriorSpec, StoppingModel, log_likelihood, make_model)
from .slice import SliceError, slice_chain, slice_step

__all__ = [
    "CVEvidence", "DEFAULT_MODELS", "DecisionData", "EmptyDatasetError", "EvidenceReport",
    "InitializationError", "MODEL_CLASSES", "PosteriorSample", "PriorSpec", "SamplerConfig",
    "SliceError", "SplitSpec", "StoppingModel", "compare_models", "cv_evidence",
    "estimate_thresholds", "log_likelihood", "make_model", "make_splits", "mcse",
    "sample_posterior", "slice_chain", "slice_step",
]
