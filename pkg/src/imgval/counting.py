"""Fixed-confusion-matrix metrics, including cost-sensitive and overlap variants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from skimage.morphology import skeletonize

from .core import BinaryCounts, ConfusionMatrix, Excluded, LabelMap


def _counts(cm: "ConfusionMatrix | BinaryCounts", positive: int = 1) -> BinaryCounts:
    if isinstance(cm, BinaryCounts):
        return cm
    return cm.binary(positive)


# ---------------------------------------------------------------------------
# Cost and weight inputs
# ---------------------------------------------------------------------------


@dataclass
class CostMatrix:
    """Per-confusion costs c_ij (c_ii conventionally 0) and optional priors."""

    costs: np.ndarray
    priors: np.ndarray | None = None

    def __post_init__(self):
        self.costs = np.asarray(self.costs, dtype=float)
        if self.costs.ndim != 2 or self.costs.shape[0] != self.costs.shape[1]:
            raise ValueError("cost matrix must be square")
        if np.any(self.costs < 0):
            raise ValueError("costs must be non-negative")
        if self.priors is not None:
            self.priors = np.asarray(self.priors, dtype=float)
            if self.priors.shape != (self.costs.shape[0],):
                raise ValueError("priors must give one probability per class")
            if abs(self.priors.sum() - 1.0) > 1e-9:
                raise ValueError("priors must sum to 1")

    @property
    def n_classes(self) -> int:
        return self.costs.shape[0]

    @classmethod
    def zero_one(cls, n_classes: int, priors=None) -> "CostMatrix":
        costs = 1.0 - np.eye(n_classes)
        return cls(costs, priors)

    @classmethod
    def inverse_prevalence(cls, priors: Sequence[float]) -> "CostMatrix":
        """c_ij = 1/(C * P_i), c_ii = 0: the configuration under which the
        expected cost reduces to one minus the mean per-class recall."""
        priors = np.asarray(priors, dtype=float)
        n = priors.size
        costs = np.tile(1.0 / (n * priors), (n, 1)).T * (1.0 - np.eye(n))
        return cls(costs, priors)


@dataclass
class KappaWeights:
    """Disagreement weights for the weighted kappa statistic."""

    weights: np.ndarray = None
    scheme: str = "custom"

    def __post_init__(self):
        if self.scheme not in ("linear", "quadratic", "custom"):
            raise ValueError("scheme must be linear, quadratic or custom")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float)
            if np.any(np.diag(self.weights) != 0):
                raise ValueError("diagonal weights must be zero")
            if self.scheme in ("linear", "quadratic") and not np.allclose(
                    self.weights, self.weights.T):
                raise ValueError(f"{self.scheme} weights must be symmetric")

    @classmethod
    def linear(cls, n_classes: int) -> "KappaWeights":
        idx = np.arange(n_classes)
        return cls(np.abs(idx[:, None] - idx[None, :]).astype(float), "linear")

    @classmethod
    def quadratic(cls, n_classes: int) -> "KappaWeights":
        idx = np.arange(n_classes)
        return cls(((idx[:, None] - idx[None, :]) ** 2).astype(float), "quadratic")


# ---------------------------------------------------------------------------
# Multi-class counting metrics
# ---------------------------------------------------------------------------


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise ValueError("accuracy undefined for an empty confusion matrix")
    return float(np.trace(cm.counts)) / cm.total


def error_rate(cm: ConfusionMatrix) -> float:
    return 1.0 - accuracy(cm)


def balanced_accuracy(cm: ConfusionMatrix) -> "float | Excluded":
    """Unweighted mean of per-class recalls; empty true classes are excluded."""
    rows = cm.row_totals()
    present = rows > 0
    if not present.any():
        return Excluded("no class has reference samples")
    recalls = np.diag(cm.counts)[present] / rows[present]
    return float(recalls.mean())


def mcc(cm: ConfusionMatrix) -> "float | Excluded":
    """Matthews correlation; generalized covariance form for C > 2."""
    c = cm.counts.astype(float)
    s = c.sum()
    if s == 0:
        return Excluded("empty confusion matrix")
    correct = np.trace(c)
    t = c.sum(axis=1)  # true-class totals
    p = c.sum(axis=0)  # predicted-class totals
    cov_yp = correct * s - float(t @ p)
    cov_yy = s * s - float(t @ t)
    cov_pp = s * s - float(p @ p)
    denom = math.sqrt(cov_yy) * math.sqrt(cov_pp)
    if denom == 0:
        return Excluded("degenerate row or column marginals")
    return float(cov_yp / denom)


def expected_cost(cm: ConfusionMatrix, costs: CostMatrix,
                  normalized: bool = False) -> "float | Excluded":
    """EC = sum_ij P_i c_ij R_ij; optionally normalized by the best naive system.

    Priors default to empirical prevalences. The normalizer is the expected
    cost of the best system that always emits one fixed class.
    """
    if costs.n_classes != cm.n_classes:
        raise ValueError("cost matrix dimension must match the confusion matrix")
    rows = cm.row_totals().astype(float)
    total = rows.sum()
    if total == 0:
        return Excluded("empty confusion matrix")
    priors = costs.priors if costs.priors is not None else rows / total
    if np.any((rows == 0) & (priors > 0)):
        raise ValueError("empty class row with nonzero prior")
    rates = np.divide(cm.counts, rows[:, None], out=np.zeros_like(costs.costs),
                      where=rows[:, None] > 0)
    ec = float(np.sum(priors[:, None] * costs.costs * rates))
    if not normalized:
        return ec
    naive = float(np.min(priors @ costs.costs))
    if naive == 0:
        return Excluded("best naive system has zero cost; normalization undefined")
    return ec / naive


def weighted_cohens_kappa(cm: ConfusionMatrix,
                          weights: KappaWeights) -> "float | Excluded":
    """1 - (observed weighted disagreement) / (chance weighted disagreement)."""
    w = weights.weights
    if w is None:
        raise ValueError("kappa weights missing; use a linear/quadratic scheme")
    if w.shape != cm.counts.shape:
        raise ValueError("weight matrix dimension must match the confusion matrix")
    n = cm.total
    if n == 0:
        return Excluded("empty confusion matrix")
    observed = cm.counts / n
    expected = np.outer(cm.row_totals(), cm.col_totals()) / (n * n)
    denom = float(np.sum(w * expected))
    if denom == 0:
        return Excluded("zero expected disagreement")
    return 1.0 - float(np.sum(w * observed)) / denom


# ---------------------------------------------------------------------------
# Per-class counting metrics
# ---------------------------------------------------------------------------


def f_beta(cm: "ConfusionMatrix | BinaryCounts", beta: float = 1.0,
           positive: int = 1) -> "float | Excluded":
    if beta <= 0:
        raise ValueError("beta must be positive")
    b = _counts(cm, positive)
    b2 = beta * beta
    denom = (1 + b2) * b.tp + b2 * b.fn + b.fp
    if denom == 0:
        return Excluded("no positive reference or prediction")
    return (1 + b2) * b.tp / denom


def sensitivity(cm, positive: int = 1) -> "float | Excluded":
    b = _counts(cm, positive)
    if b.tp + b.fn == 0:
        return Excluded("no positive reference samples")
    return b.tp / (b.tp + b.fn)


def specificity(cm, positive: int = 1) -> "float | Excluded":
    b = _counts(cm, positive)
    if b.tn + b.fp == 0:
        return Excluded("no negative reference samples")
    return b.tn / (b.tn + b.fp)


def ppv(cm, positive: int = 1) -> "float | Excluded":
    b = _counts(cm, positive)
    if b.tp + b.fp == 0:
        return Excluded("no positive predictions")
    return b.tp / (b.tp + b.fp)


def npv(cm, positive: int = 1) -> "float | Excluded":
    b = _counts(cm, positive)
    if b.tn + b.fn == 0:
        return Excluded("no negative predictions")
    return b.tn / (b.tn + b.fn)


def lr_plus(cm, positive: int = 1) -> "float | Excluded":
    """TPR / (1 - TNR)."""
    sens = sensitivity(cm, positive)
    spec = specificity(cm, positive)
    if isinstance(sens, Excluded) or isinstance(spec, Excluded):
        return Excluded("sensitivity or specificity undefined")
    if spec == 1.0:
        return math.inf if sens > 0 else Excluded("no false or true positives")
    return sens / (1.0 - spec)


def net_benefit(cm, risk_threshold: float, positive: int = 1) -> float:
    """TP/N - (FP/N) * p_t/(1 - p_t) at risk threshold p_t."""
    if not 0.0 < risk_threshold < 1.0:
        raise ValueError("risk threshold must lie in (0, 1)")
    b = _counts(cm, positive)
    n = b.total
    if n == 0:
        raise ValueError("empty confusion matrix")
    odds = risk_threshold / (1.0 - risk_threshold)
    return b.tp / n - (b.fp / n) * odds


def decision_curve(scores: np.ndarray, references: np.ndarray,
                   thresholds: Sequence[float]) -> list[tuple[float, float]]:
    """Net benefit over a range of risk thresholds (treat if score >= p_t)."""
    scores = np.asarray(scores, dtype=float)
    references = np.asarray(references, dtype=bool)
    out = []
    for p_t in thresholds:
        decide = scores >= p_t
        tp = int(np.count_nonzero(decide & references))
        fp = int(np.count_nonzero(decide & ~references))
        fn = int(np.count_nonzero(~decide & references))
        tn = int(np.count_nonzero(~decide & ~references))
        out.append((float(p_t),
                    net_benefit(BinaryCounts(tp, fp, fn, tn), p_t)))
    return out


def dsc(cm, positive: int = 1) -> "float | Excluded":
    b = _counts(cm, positive)
    denom = 2 * b.tp + b.fp + b.fn
    if denom == 0:
        return Excluded("empty reference and prediction")
    return 2 * b.tp / denom


def iou(cm, positive: int = 1) -> "float | Excluded":
    b = _counts(cm, positive)
    denom = b.tp + b.fp + b.fn
    if denom == 0:
        return Excluded("empty reference and prediction")
    return b.tp / denom


def fppi(total_fp: int, n_images: int) -> float:
    """False positives per image."""
    if n_images <= 0:
        raise ValueError("n_images must be positive")
    if total_fp < 0:
        raise ValueError("total_fp must be non-negative")
    return total_fp / n_images


#: FPPI grid used by default when reading sensitivities off an FROC curve.
DEFAULT_FPPI_GRID = (1 / 8, 1 / 4, 1 / 2, 1.0, 2.0, 4.0, 8.0)


# ---------------------------------------------------------------------------
# Centerline overlap
# ---------------------------------------------------------------------------


@dataclass
class ClDiceResult:
    value: "float | Excluded"
    topology_precision: "float | Excluded"
    topology_sensitivity: "float | Excluded"
    params: dict = field(default_factory=dict)


def cl_dice(reference: "LabelMap | np.ndarray", prediction: "LabelMap | np.ndarray",
            class_index: int = 1) -> ClDiceResult:
    """Harmonic mean of skeleton-based topology precision and sensitivity.

    Skeletons come from iterative boundary thinning (2-D) or medial-axis
    thinning (3-D); the algorithm identity is recorded in the params.
    """
    ref = reference.mask(class_index) if isinstance(reference, LabelMap) else np.asarray(reference, bool)
    pred = prediction.mask(class_index) if isinstance(prediction, LabelMap) else np.asarray(prediction, bool)
    if ref.shape != pred.shape:
        raise ValueError("reference and prediction shapes differ")
    params = {"skeleton": "zhang-thinning" if ref.ndim == 2 else "lee-medial-axis"}
    if not ref.any() or not pred.any():
        empty = Excluded("empty mask has no skeleton")
        return ClDiceResult(empty, empty, empty, params)
    skel_ref = skeletonize(ref)
    skel_pred = skeletonize(pred)
    if not skel_ref.any() or not skel_pred.any():
        empty = Excluded("empty skeleton")
        return ClDiceResult(empty, empty, empty, params)
    tprec = np.count_nonzero(skel_pred & ref) / np.count_nonzero(skel_pred)
    tsens = np.count_nonzero(skel_ref & pred) / np.count_nonzero(skel_ref)
    if tprec + tsens == 0:
        return ClDiceResult(0.0, tprec, tsens, params)
    value = 2 * tprec * tsens / (tprec + tsens)
    return ClDiceResult(float(value), float(tprec), float(tsens), params)
