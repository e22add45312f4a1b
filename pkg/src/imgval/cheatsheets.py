"""Structured records of the metric pool: definitions, ranges, applicability."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class MetricInfo:
    metric_id: str
    name: str
    family: str                      # counting | multi-threshold | distance | calibration
    range: tuple[float, float]
    higher_is_better: bool
    categories: tuple[str, ...]      # problem categories the metric is recommended for
    acronym: str = ""
    synonyms: tuple[str, ...] = ()
    definition: str = ""
    notes: tuple[str, ...] = ()

    def to_json(self) -> dict:
        def enc(x: float):
            if math.isinf(x):
                return "inf" if x > 0 else "-inf"
            return x

        return {
            "id": self.metric_id,
            "name": self.name,
            "acronym": self.acronym,
            "synonyms": list(self.synonyms),
            "family": self.family,
            "range": [enc(self.range[0]), enc(self.range[1])],
            "higher_is_better": self.higher_is_better,
            "categories": sorted(self.categories),
            "definition": self.definition,
            "notes": list(self.notes),
        }


INF = math.inf

_M = MetricInfo

METRIC_REGISTRY: dict[str, MetricInfo] = {m.metric_id: m for m in [
    # counting metrics
    _M("accuracy", "Accuracy", "counting", (0, 1), True, ("ImLC",),
       definition="Share of correctly classified cases: trace of the "
                  "confusion matrix over the total count.",
       notes=("Prevalence-dependent; misleading under class imbalance.",)),
    _M("balanced_accuracy", "Balanced Accuracy", "counting", (0, 1), True,
       ("ImLC",), "BA",
       definition="Unweighted mean of the per-class sensitivities.",
       notes=("Prevalence-independent; a naive classifier scores 1/C.",
              "Insensitive to predictive values.")),
    _M("weighted_cohens_kappa", "Weighted Cohen's Kappa", "counting",
       (-1, 1), True, ("ImLC",), "WCK",
       ("Cohen's Kappa Coefficient", "Kappa Statistic", "Kappa Score"),
       definition="One minus the ratio of weighted observed to weighted "
                  "chance disagreement.",
       notes=("Quadratic weights can produce paradoxical results.",
              "Designed for symmetric rater agreement, not reference-based "
              "validation.")),
    _M("cl_dice", "Centerline Dice", "counting", (0, 1), True,
       ("SemS", "InS"), "clDice",
       definition="Harmonic mean of skeleton-in-mask precision and "
                  "sensitivity; rewards preserved connectivity of tubular "
                  "structures.",
       notes=("Skeletonization algorithm is a recorded parameter.",)),
    _M("dsc", "Dice Similarity Coefficient", "counting", (0, 1), True,
       ("SemS", "InS"), "DSC",
       ("Sørensen-Dice Coefficient", "F1 Score", "Balanced F Score"),
       definition="2TP / (2TP + FP + FN) over pixels; identical to the F1 "
                  "score at pixel level.",
       notes=("Unstable for very small structures.",
              "Mutually computable with IoU: DSC = 2*IoU/(1+IoU).")),
    _M("expected_cost", "Expected Cost", "counting", (-INF, INF), False,
       ("ImLC",), "EC",
       definition="Prior-weighted sum of per-confusion costs times error "
                  "rates; the normalized variant divides by the best naive "
                  "system.",
       notes=("Accuracy and balanced accuracy are cost instantiations.",
              "Normalized variant scores 1 for the best naive classifier.")),
    _M("f_beta", "F-beta Score", "counting", (0, 1), True,
       ("ImLC", "SemS", "ObD", "InS"),
       definition="(1+b^2)TP / ((1+b^2)TP + b^2 FN + FP); beta weights "
                  "misses against false alarms.",
       notes=("beta > 1 favours sensitivity, beta < 1 favours PPV.",)),
    _M("fppi", "False Positives per Image", "counting", (0, INF), False,
       ("ObD", "InS"), "FPPI",
       definition="Total false-positive detections divided by the number of "
                  "images.",
       notes=("Best used with a target value, e.g. FPPI@(Sensitivity=0.95).",)),
    _M("iou", "Intersection over Union", "counting", (0, 1), True,
       ("SemS", "InS"), "IoU", ("Jaccard Index", "Tanimoto Coefficient"),
       definition="TP / (TP + FP + FN) over pixels.",
       notes=("Mutually computable with DSC: IoU = DSC/(2-DSC).",)),
    _M("mcc", "Matthews Correlation Coefficient", "counting", (-1, 1), True,
       ("ImLC",), "MCC", ("Phi Coefficient",),
       definition="Correlation between reference and prediction labels; high "
                  "values require all of TPR, TNR, PPV and NPV to be high.",
       notes=("Fixed zero reference for naive classifiers.",)),
    _M("pq", "Panoptic Quality", "counting", (0, 1), True, ("InS",), "PQ",
       definition="Mean IoU over matched instances times the F1 detection "
                  "score.",
       notes=("Hybrid metric; report the two factors for traceability.",)),
    _M("net_benefit", "Net Benefit", "counting", (-INF, INF), True,
       ("ImLC",), "NB",
       definition="TP/N minus FP/N weighted by the risk-threshold odds; puts "
                  "benefits and harms on one scale.",
       notes=("Plot over a reasonable range of risk thresholds (decision "
              "curve) when the threshold is uncertain.",)),
    _M("npv", "Negative Predictive Value", "counting", (0, 1), True,
       ("ImLC",), "NPV",
       definition="TN / (TN + FN).",
       notes=("Best used with a target value on a companion metric.",)),
    _M("lr_plus", "Positive Likelihood Ratio", "counting", (0, INF), True,
       ("ImLC",), "LR+",
       ("Likelihood Ratio Positive", "Likelihood Ratio for Positive Results"),
       definition="TPR / (1 - TNR): how much more likely a positive result "
                  "is for a positive case.",
       notes=("Random performance sits at 1.",)),
    _M("ppv", "Positive Predictive Value", "counting", (0, 1), True,
       ("ImLC", "ObD", "InS"), "PPV", ("Precision",),
       definition="TP / (TP + FP).",
       notes=("Best used with a target value on a companion metric.",)),
    _M("sensitivity", "Sensitivity", "counting", (0, 1), True,
       ("ImLC", "ObD", "InS"), "", ("Recall", "Hit Rate", "TPR"),
       definition="TP / (TP + FN).",
       notes=("Best used with a target value on a companion metric.",)),
    _M("specificity", "Specificity", "counting", (0, 1), True, ("ImLC",),
       "", ("Selectivity", "TNR"),
       definition="TN / (TN + FP).",
       notes=("Undefined at object level: there are no true negatives.",)),
    # multi-threshold metrics
    _M("auroc", "Area under the ROC Curve", "multi-threshold", (0, 1), True,
       ("ImLC",), "AUROC",
       ("AUC", "AUC ROC", "C-Index", "C-Statistics"),
       definition="Probability that a positive sample receives a higher "
                  "score than a negative one; trapezoidal area under the "
                  "ROC curve.",
       notes=("Prevalence-independent; can look near-perfect despite a "
              "useless PPV under heavy imbalance.",)),
    _M("average_precision", "Average Precision", "multi-threshold", (0, 1),
       True, ("ImLC", "ObD", "InS"), "AP",
       definition="Area under the precision envelope over recall "
                  "(all-point interpolation).",
       notes=("Prevalence-dependent: a random classifier scores the "
              "prevalence of the positive class.",
              "Interpolation variant is a recorded parameter.")),
    _M("froc_score", "FROC Score", "multi-threshold", (0, 1), True,
       ("ObD", "InS"), "FROC Score",
       definition="Mean data-set sensitivity at fixed false-positives-per-"
                  "image operating points.",
       notes=("FPPI grid is a recorded parameter; 1/8..8 is a common "
              "default.",
              "Rewards empty images, unlike per-dataset AP.")),
    # distance-based metrics
    _M("assd", "Average Symmetric Surface Distance", "distance", (0, INF),
       False, ("SemS", "InS"), "ASSD",
       definition="Mean of all nearest boundary distances pooled from both "
                  "directions.",
       notes=("The larger contour dominates the mean.",)),
    _M("boundary_iou", "Boundary IoU", "distance", (0, 1), True,
       ("SemS", "InS"),
       definition="IoU restricted to a band of configurable width around "
                  "each mask's own boundary.",
       notes=("Band width controls sensitivity to contour errors.",
              "With a wide band it converges to the mask IoU.")),
    _M("hausdorff", "Hausdorff Distance", "distance", (0, INF), False,
       ("SemS", "InS"), "HD",
       ("Hausdorff Metric", "Pompeiu-Hausdorff Distance",
        "Maximum Symmetric Surface Distance"),
       definition="Maximum over all shortest distances between the two "
                  "boundaries.",
       notes=("A single outlier pixel can dominate the value.",)),
    _M("masd", "Mean Average Surface Distance", "distance", (0, INF), False,
       ("SemS", "InS"), "MASD",
       definition="Average of the two directed mean boundary distances; both "
                  "contours contribute equally.",
       notes=("A tiny prediction near the reference can yield a misleadingly "
              "low value.",)),
    _M("nsd", "Normalized Surface Distance", "distance", (0, 1), True,
       ("SemS", "InS"), "NSD",
       ("Normalized Surface Dice", "Surface Dice", "Surface Distance"),
       definition="Share of boundary points whose nearest counterpart lies "
                  "within the tolerance.",
       notes=("Tolerance can absorb annotation imprecision; set it from "
              "inter-rater variability where available.",)),
    _M("hausdorff_95", "95th Percentile Hausdorff Distance", "distance",
       (0, INF), False, ("SemS", "InS"), "HD95",
       ("Xth Percentile HD",),
       definition="Percentile instead of maximum over the pooled nearest "
                  "boundary distances.",
       notes=("Robust against spatial outliers in the reference.",)),
    # calibration metrics
    _M("brier_score", "Brier Score", "calibration", (0, 2), False,
       ("ImLC", "ObD", "InS"), "BS",
       definition="Mean squared error between score vectors and one-hot "
                  "references; a proper score jointly sensitive to "
                  "discrimination and calibration.",
       notes=("Skill variant divides by the naive prevalence predictor.",)),
    _M("cwce", "Class-wise Calibration Error", "calibration", (0, 1), False,
       ("ImLC", "ObD", "InS"), "CWCE",
       definition="Binned l1 gap between the per-class score and the "
                  "empirical class frequency, averaged over classes.",
       notes=("Report per class as well as aggregated.",)),
    _M("ece", "Expected Calibration Error", "calibration", (0, 1), False,
       ("ImLC", "ObD", "InS"), "ECE",
       definition="Count-weighted binned gap between top-label confidence "
                  "and accuracy.",
       notes=("Bin count is a configuration parameter; never tune it on the "
              "validation data.",
              "Assesses only the weakest (top-label) condition.")),
    _M("ece_kde", "Kernel-density Calibration Error", "calibration", (0, 1),
       False, ("ImLC", "ObD", "InS"), "ECE-KDE",
       definition="Canonical lp calibration error estimated with a "
                  "Dirichlet-kernel regression on the score simplex.",
       notes=("Lower bias than binning; p and bandwidth are recorded "
              "parameters.",)),
    _M("kce", "Kernel Calibration Error", "calibration", (-INF, INF), False,
       ("ImLC", "ObD", "InS"), "KCE",
       definition="Unbiased U-statistic of the squared kernel calibration "
                  "error.",
       notes=("May output negative values; hard to interpret in absolute "
              "terms.",)),
    _M("nll", "Negative Log-Likelihood", "calibration", (0, INF), False,
       ("ImLC",), "NLL", ("Cross Entropy Loss",),
       definition="Mean negative log score of the true class.",
       notes=("Heavily penalizes confident mistakes.",
              "Not applicable at object level: the background class is "
              "discarded there.")),
    _M("root_brier_score", "Root Brier Score", "calibration", (0, 2), False,
       ("ImLC", "ObD", "InS"), "RBS",
       definition="Square root of the Brier score.",
       notes=("Guaranteed upper bound of the canonical l2 calibration "
              "error.",)),
]}


def metric_info(metric_id: str) -> MetricInfo:
    info = METRIC_REGISTRY.get(metric_id)
    if info is None:
        raise KeyError(f"unknown metric {metric_id!r}")
    return info


def allowed_for(metric_id: str, category: str) -> bool:
    return category in metric_info(metric_id).categories


def resolve_metric_id(name: str) -> str:
    """Accept ids, acronyms or synonyms (case-insensitive)."""
    key = name.strip().lower()
    for metric_id, info in METRIC_REGISTRY.items():
        if key == metric_id:
            return metric_id
        if key == info.acronym.lower() and info.acronym:
            return metric_id
        if key in (s.lower() for s in info.synonyms):
            return metric_id
    raise KeyError(f"unknown metric {name!r}")
