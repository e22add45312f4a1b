"""Proper scores and calibration-error estimators.

All estimators operate on per-case class-score vectors. Object-level use
drops the background column before calling into this module; the estimators
themselves never rely on scores summing to one unless noted (the simplex
kernel density estimator renormalizes internally and records that fact).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .core import Excluded, SampleSet

NLL_FLOOR = 1e-12


@dataclass
class BinningScheme:
    """Partition of [0, 1] used by the binned estimators."""

    bin_count: int = 10
    strategy: str = "equal-width"
    edges: np.ndarray | None = None

    def __post_init__(self):
        if self.strategy not in ("equal-width", "equal-frequency"):
            raise ValueError("strategy must be equal-width or equal-frequency")
        if self.bin_count < 1:
            raise ValueError("bin count must be positive")
        if self.edges is not None:
            self.edges = np.asarray(self.edges, dtype=float)
            if (self.edges.size != self.bin_count + 1
                    or self.edges[0] != 0.0 or self.edges[-1] != 1.0
                    or np.any(np.diff(self.edges) <= 0)):
                raise ValueError("edges must strictly increase from 0 to 1")

    def bin_of(self, values: np.ndarray,
               edges: np.ndarray | None = None) -> np.ndarray:
        if edges is None:
            edges = self.edges_for(values)
        idx = np.searchsorted(edges, values, side="right") - 1
        return np.clip(idx, 0, len(edges) - 2)

    def edges_for(self, values: np.ndarray) -> np.ndarray:
        """Effective edges; equal-frequency edges collapse on ties, so the
        realized bin count may be smaller than requested."""
        if self.edges is not None:
            return self.edges
        if self.strategy == "equal-width":
            return np.linspace(0.0, 1.0, self.bin_count + 1)
        qs = np.quantile(values, np.linspace(0, 1, self.bin_count + 1))
        qs[0], qs[-1] = 0.0, 1.0
        # collapse duplicate quantiles to keep edges strictly increasing
        edges = np.unique(qs)
        return edges if edges.size > 1 else np.array([0.0, 1.0])

    def describe(self) -> dict:
        return {"bins": self.bin_count, "strategy": self.strategy}


def _one_hot(samples: SampleSet) -> np.ndarray:
    onehot = np.zeros_like(samples.scores)
    onehot[np.arange(samples.n_samples), samples.references] = 1.0
    return onehot


# ---------------------------------------------------------------------------
# Proper scoring rules
# ---------------------------------------------------------------------------


def brier_score(samples: SampleSet, normalize: bool = False) -> float:
    """Mean squared Euclidean error between score vectors and one-hot labels.

    `normalize` divides by 2 so the binary sum-to-one case stays in [0, 1].
    """
    if samples.n_samples == 0:
        raise ValueError("empty sample set")
    sq = np.sum((samples.scores - _one_hot(samples)) ** 2, axis=1)
    value = float(sq.mean())
    return value / 2.0 if normalize else value


def root_brier_score(samples: SampleSet) -> float:
    """Square root of the (unnormalized) Brier score; upper-bounds the
    canonical l2 calibration error."""
    return float(np.sqrt(brier_score(samples, normalize=False)))


def brier_skill_score(samples: SampleSet) -> "float | Excluded":
    """1 - BS / BS of the naive system that always predicts the class prevalences."""
    bs = brier_score(samples)
    prevalence = np.bincount(samples.references, minlength=samples.n_classes)
    prevalence = prevalence / samples.n_samples
    naive = SampleSet(np.tile(prevalence, (samples.n_samples, 1)), samples.references)
    bs_naive = brier_score(naive)
    if bs_naive == 0:
        return Excluded("naive system is perfect; skill undefined")
    return 1.0 - bs / bs_naive


def nll(samples: SampleSet, epsilon: float = NLL_FLOOR) -> float:
    """Mean negative log score of the true class, floored at epsilon.

    Only meaningful at image level; object-level evaluation refuses it
    because the background class needed for unmatched predictions is
    discarded there.
    """
    if samples.n_samples == 0:
        raise ValueError("empty sample set")
    true_scores = samples.scores[np.arange(samples.n_samples), samples.references]
    return float(-np.log(np.maximum(true_scores, epsilon)).mean())


# ---------------------------------------------------------------------------
# Binned estimators
# ---------------------------------------------------------------------------


@dataclass
class ReliabilityBin:
    lower: float
    upper: float
    count: int
    confidence: float
    accuracy: float


@dataclass
class ReliabilityDiagram:
    bins: list[ReliabilityBin]

    def to_csv(self) -> str:
        lines = ["bin_lower,bin_upper,count,confidence,accuracy"]
        for b in self.bins:
            lines.append(f"{b.lower:.10g},{b.upper:.10g},{b.count},"
                         f"{b.confidence:.10g},{b.accuracy:.10g}")
        return "\n".join(lines) + "\n"


def _binned_l1(values: np.ndarray, events: np.ndarray,
               binning: BinningScheme) -> tuple[float, ReliabilityDiagram]:
    """Count-weighted l1 gap between mean value and event frequency per bin."""
    n = values.size
    edges = binning.edges_for(values)
    idx = binning.bin_of(values, edges)
    total = 0.0
    bins = []
    for m in range(len(edges) - 1):
        sel = idx == m
        count = int(np.count_nonzero(sel))
        if count == 0:
            continue
        conf = float(values[sel].mean())
        acc = float(events[sel].mean())
        total += (count / n) * abs(acc - conf)
        bins.append(ReliabilityBin(float(edges[m]), float(edges[m + 1]),
                                   count, conf, acc))
    return total, ReliabilityDiagram(bins)


def ece_binned(samples: SampleSet, binning: BinningScheme | None = None,
               positive_class: int | None = None,
               return_diagram: bool = False):
    """Binned top-label calibration error.

    Default: confidence is the maximum score, the event is argmax
    correctness. For binary problems `positive_class` switches to the
    one-score reliability convention (confidence = positive-class score,
    event = positive reference), under which the result coincides with the
    class-wise error.
    """
    if samples.n_samples == 0:
        raise ValueError("empty sample set")
    binning = binning or BinningScheme()
    if positive_class is None:
        conf = samples.scores.max(axis=1)
        events = (samples.scores.argmax(axis=1) == samples.references).astype(float)
    else:
        conf = samples.scores[:, positive_class]
        events = (samples.references == positive_class).astype(float)
    value, diagram = _binned_l1(conf, events, binning)
    return (value, diagram) if return_diagram else value


def cwce(samples: SampleSet, binning: BinningScheme | None = None,
         weighting: str = "uniform",
         class_weights: Sequence[float] | None = None):
    """Class-wise binned calibration error.

    weighting: 'uniform' averages the per-class errors, 'importance-weights'
    uses `class_weights`, 'per-class-report' returns the per-class map.
    """
    if samples.n_samples == 0:
        raise ValueError("empty sample set")
    if weighting not in ("uniform", "importance-weights", "per-class-report"):
        raise ValueError("unknown weighting")
    binning = binning or BinningScheme()
    per_class: dict[int, float] = {}
    for k in range(samples.n_classes):
        value, _ = _binned_l1(samples.scores[:, k],
                              (samples.references == k).astype(float), binning)
        per_class[k] = value
    if weighting == "per-class-report":
        return per_class
    if weighting == "uniform":
        return float(np.mean(list(per_class.values())))
    if class_weights is None:
        raise ValueError("importance weighting needs class weights")
    w = np.asarray(class_weights, dtype=float)
    if w.shape != (samples.n_classes,) or np.any(w < 0) or w.sum() == 0:
        raise ValueError("class weights must be non-negative per class")
    w = w / w.sum()
    return float(sum(w[k] * per_class[k] for k in per_class))


# ---------------------------------------------------------------------------
# Kernel-density estimator of the canonical lp calibration error
# ---------------------------------------------------------------------------

_BANDWIDTH_GRID = (0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.25)
_SIMPLEX_FLOOR = 1e-10


def _simplex_scores(scores: np.ndarray) -> np.ndarray:
    s = np.clip(scores, _SIMPLEX_FLOOR, None)
    return s / s.sum(axis=1, keepdims=True)


def _dirichlet_log_kernel(f: np.ndarray, bandwidth: float,
                          cross: np.ndarray | None = None) -> np.ndarray:
    """log K[j, i] of the Dirichlet kernel centred at sample j evaluated at i.

    `cross` optionally carries the precomputed F @ log(F)^T so a bandwidth
    grid search pays for the matrix product only once. Single precision is
    enough here: the weights get normalized row-wise right after.
    """
    f32 = f.astype(np.float32)
    alpha = f / bandwidth + 1.0
    log_norm = (gammaln(alpha.sum(axis=1))
                - gammaln(alpha).sum(axis=1)).astype(np.float32)
    if cross is None:
        cross = f32 @ np.log(f32).T
    # sum_k (alpha_jk - 1) * log f_ik  ==  (F @ log(F)^T) / h
    return log_norm[:, None] + cross * np.float32(1.0 / bandwidth)


def _loo_conditional(log_k: np.ndarray, onehot: np.ndarray) -> np.ndarray:
    """Leave-one-out Nadaraya-Watson estimate of E[Y | f(X) = f_j]."""
    np.fill_diagonal(log_k, -np.inf)
    log_k -= log_k.max(axis=1, keepdims=True)
    weights = np.exp(log_k, out=log_k)
    den = weights.sum(axis=1, dtype=np.float64)
    cond = (weights @ onehot.astype(weights.dtype)).astype(np.float64)
    return cond / den[:, None]


def _loo_regression_error(log_k: np.ndarray, onehot: np.ndarray) -> float:
    """Mean squared leave-one-out error of the conditional estimate against
    the labels; the bandwidth selector for the regression purpose."""
    cond = _loo_conditional(log_k, onehot)
    return float(np.mean(np.sum((onehot - cond) ** 2, axis=1)))


_SELECTION_CAP = 1500


def select_bandwidth(samples: SampleSet,
                     bandwidth_grid: Sequence[float] = _BANDWIDTH_GRID,
                     cap: int = _SELECTION_CAP) -> float:
    """Grid bandwidth minimizing the leave-one-out regression error.

    Selection runs on an evenly-spaced deterministic subsample so the n^2
    kernel matrices stay affordable.
    """
    f = _simplex_scores(samples.scores)
    onehot = _one_hot(samples)
    if samples.n_samples > cap:
        idx = np.unique(np.linspace(0, samples.n_samples - 1, cap).astype(int))
        f, onehot = f[idx], onehot[idx]
    f32 = f.astype(np.float32)
    cross = f32 @ np.log(f32).T
    best, best_err = None, np.inf
    for h in bandwidth_grid:
        err = _loo_regression_error(_dirichlet_log_kernel(f, h, cross), onehot)
        if err < best_err:
            best, best_err = h, err
    return float(best)


def ece_kde(samples: SampleSet, p: int = 1,
            bandwidth: "float | str" = "auto",
            bandwidth_grid: Sequence[float] = _BANDWIDTH_GRID,
            return_params: bool = False):
    """Canonical lp calibration-error estimate via a Dirichlet-kernel
    leave-one-out regression of the label vector on the score vector.

    Refuses fewer than 10 samples. Scores are projected onto the open
    simplex before kernel evaluation.
    """
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    if samples.n_samples < 10:
        raise ValueError("kernel density estimate needs at least 10 samples")
    if bandwidth == "auto":
        bandwidth = select_bandwidth(samples, bandwidth_grid)
    elif not (isinstance(bandwidth, (int, float)) and bandwidth > 0):
        raise ValueError("bandwidth must be positive or 'auto'")
    f = _simplex_scores(samples.scores)
    onehot = _one_hot(samples)
    cond = _loo_conditional(_dirichlet_log_kernel(f, float(bandwidth)), onehot)
    diff = np.abs(samples.scores - cond)
    value = (float(np.mean(diff.sum(axis=1))) if p == 1
             else float(np.sqrt(np.mean((diff ** 2).sum(axis=1)))))
    if return_params:
        return value, {"bandwidth": float(bandwidth), "p": p}
    return value


# ---------------------------------------------------------------------------
# Kernel calibration error (unbiased U-statistic)
# ---------------------------------------------------------------------------


def kce(samples: SampleSet, kernel_scale: "float | str" = "auto") -> float:
    """Unbiased squared kernel calibration error.

    Uses a Laplacian kernel on the l1 score distance times the identity over
    the class dimension; the scale defaults to the median pairwise l1
    distance. The estimate may be negative.
    """
    n = samples.n_samples
    if n < 2:
        raise ValueError("the U-statistic needs at least 2 samples")
    f = samples.scores.astype(np.float32)
    dist = np.zeros((n, n), dtype=np.float32)
    for k in range(f.shape[1]):
        dist += np.abs(f[:, k, None] - f[None, :, k])
    if kernel_scale == "auto":
        off = dist[~np.eye(n, dtype=bool)]
        scale = float(np.median(off))
        if scale <= 0:
            scale = 1.0
    else:
        scale = float(kernel_scale)
        if scale <= 0:
            raise ValueError("kernel scale must be positive")
    dist *= np.float32(-1.0 / scale)
    kernel = np.exp(dist, out=dist)
    residual = (_one_hot(samples) - samples.scores).astype(np.float32)
    kernel *= residual @ residual.T
    off_sum = float(kernel.sum(dtype=np.float64)
                    - np.trace(kernel).astype(np.float64))
    return off_sum / (n * (n - 1))


# ---------------------------------------------------------------------------
# Synthetic generators used by the property suite
# ---------------------------------------------------------------------------


def calibrated_generator(n: int, n_classes: int, rng: np.random.Generator,
                         concentration: float = 1.0) -> SampleSet:
    """Scores drawn from a Dirichlet, labels drawn from the score vector:
    canonically calibrated by construction."""
    scores = rng.dirichlet(np.full(n_classes, concentration), size=n)
    cum = scores.cumsum(axis=1)
    u = rng.random(n)[:, None]
    refs = (u > cum).sum(axis=1)
    return SampleSet(scores, refs)


def overconfident_generator(n: int, n_classes: int, rng: np.random.Generator,
                            concentration: float = 1.0) -> SampleSet:
    """Labels from the honest scores, reported scores sharpened by squaring
    and renormalizing: systematically overconfident."""
    honest = calibrated_generator(n, n_classes, rng, concentration)
    return SampleSet(_sharpen(honest.scores), honest.references)


def _sharpen(scores: np.ndarray) -> np.ndarray:
    sharpened = scores ** 2
    return sharpened / sharpened.sum(axis=1, keepdims=True)


def mixture_generator(n: int, n_classes: int, rng: np.random.Generator,
                      n_components: int = 8,
                      overconfident: bool = False) -> SampleSet:
    """Calibrated generator with discrete score support: a fixed dictionary
    of score vectors, labels drawn from the honest vector. The classifier
    output repeats, so conditional frequencies are densely sampled.
    `overconfident` sharpens the reported vectors while labels stay honest.
    """
    dictionary = rng.dirichlet(np.full(n_classes, 1.5), size=n_components)
    which = rng.integers(0, n_components, size=n)
    honest = dictionary[which]
    cum = honest.cumsum(axis=1)
    refs = (rng.random(n)[:, None] > cum).sum(axis=1)
    reported = _sharpen(honest) if overconfident else honest
    return SampleSet(reported, refs)
