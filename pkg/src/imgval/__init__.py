"""Validation-metrics engine and problem-aware metric recommender."""

from .core import (ConfusionMatrix, Excluded, IncompleteFingerprint, Instance,
                   InstanceSet, LabelMap, MetricResult, ProblemCategory,
                   ProblemFingerprint, SampleSet, ScoredSample,
                   confusion_from_labels, confusion_from_maps, is_excluded)

__version__ = "0.1.0"

__all__ = ["ConfusionMatrix", "Excluded", "IncompleteFingerprint", "Instance",
           "InstanceSet", "LabelMap", "MetricResult", "ProblemCategory",
           "ProblemFingerprint", "SampleSet", "ScoredSample",
           "confusion_from_labels", "confusion_from_maps", "is_excluded",
           "__version__"]
