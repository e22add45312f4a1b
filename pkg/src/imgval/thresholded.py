"""Dynamic-confusion-matrix metrics: ROC/AUROC, PR/AP, FROC and target readouts."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import BinaryCounts, Excluded, SampleSet
from .counting import DEFAULT_FPPI_GRID, f_beta, npv, ppv, sensitivity, specificity


@dataclass
class Curve:
    """Ordered operating points of a multi-threshold metric."""

    points: list[tuple[float, float]]
    kind: str  # ROC | PR | FROC
    thresholds: list[float]

    def __post_init__(self):
        if self.kind not in ("ROC", "PR", "FROC"):
            raise ValueError("curve kind must be ROC, PR or FROC")
        if len(self.points) < 2:
            raise ValueError("a curve needs at least two points")

    def to_csv(self) -> str:
        header = {"ROC": "fpr,tpr,threshold", "PR": "recall,precision,threshold",
                  "FROC": "fppi,sensitivity,threshold"}[self.kind]
        lines = [header]
        for (x, y), t in zip(self.points, self.thresholds):
            lines.append(f"{x:.10g},{y:.10g},{t:.10g}")
        return "\n".join(lines) + "\n"


def _binary_scores(samples: SampleSet, positive: int):
    scores = samples.scores[:, positive]
    labels = samples.references == positive
    return scores, labels


def _sweep(scores: np.ndarray, labels: np.ndarray):
    """Cumulative TP/FP at every distinct score threshold, descending."""
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    tps = np.cumsum(y)
    fps = np.cumsum(~y)
    distinct = np.flatnonzero(np.diff(s, append=-np.inf))
    return s[distinct], tps[distinct], fps[distinct]


def roc_curve(samples: SampleSet, positive: int = 1) -> "Curve | Excluded":
    """Operating points (1 - specificity, sensitivity) at all distinct thresholds."""
    scores, labels = _binary_scores(samples, positive)
    n_pos = int(labels.sum())
    n_neg = int(labels.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        return Excluded("ROC needs at least one positive and one negative sample")
    thr, tps, fps = _sweep(scores, labels)
    xs = np.concatenate([[0.0], fps / n_neg, [1.0]])
    ys = np.concatenate([[0.0], tps / n_pos, [1.0]])
    ts = np.concatenate([[np.inf], thr, [-np.inf]])
    points = list(zip(xs.tolist(), ys.tolist()))
    return Curve(points, "ROC", ts.tolist())


def auroc(samples: SampleSet, positive: int = 1) -> "float | Excluded":
    """Trapezoidal area under the ROC curve.

    Ties are credited 0.5 by the trapezoid over grouped thresholds, so the
    value equals the probability of a positive sample outranking a negative
    one.
    """
    curve = roc_curve(samples, positive)
    if isinstance(curve, Excluded):
        return curve
    pts = np.asarray(curve.points)
    x, y = pts[:, 0], pts[:, 1]
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2.0))


def pr_curve(samples: SampleSet, positive: int = 1) -> "Curve | Excluded":
    scores, labels = _binary_scores(samples, positive)
    n_pos = int(labels.sum())
    if n_pos == 0:
        return Excluded("PR curve needs at least one positive sample")
    thr, tps, fps = _sweep(scores, labels)
    recall = tps / n_pos
    precision = tps / (tps + fps)
    # anchor at recall 0 (contributes no area; keeps the curve two-pointed)
    points = [(0.0, 1.0)] + list(zip(recall.tolist(), precision.tolist()))
    return Curve(points, "PR", [np.inf] + thr.tolist())


def _envelope_area(recall: np.ndarray, precision: np.ndarray) -> float:
    """Area under the running-max precision envelope over recall."""
    order = np.argsort(recall, kind="stable")
    r = recall[order]
    p = precision[order]
    # envelope from the right: p_interp(r) = max over recall' >= r
    env = np.maximum.accumulate(p[::-1])[::-1]
    area = 0.0
    prev_r = 0.0
    for i in range(len(r)):
        if r[i] > prev_r:
            area += (r[i] - prev_r) * env[i]
            prev_r = r[i]
    return float(area)


def average_precision(samples: SampleSet, positive: int = 1) -> "float | Excluded":
    """All-point interpolated area under the precision envelope."""
    curve = pr_curve(samples, positive)
    if isinstance(curve, Excluded):
        return curve
    pts = np.asarray(curve.points)
    return _envelope_area(pts[:, 0], pts[:, 1])


# ---------------------------------------------------------------------------
# Detection variants (matched detections per image)
# ---------------------------------------------------------------------------


@dataclass
class DetectionScores:
    """Score-sorted matching outcome of one image: flags are fixed once by the
    matching step, threshold sweeps only restrict which predictions count."""

    scores: np.ndarray
    is_tp: np.ndarray
    n_reference: int

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=float)
        self.is_tp = np.asarray(self.is_tp, dtype=bool)
        if self.scores.shape != self.is_tp.shape:
            raise ValueError("scores and flags must align")
        if self.n_reference < 0:
            raise ValueError("n_reference must be >= 0")
        if int(self.is_tp.sum()) > self.n_reference:
            raise ValueError("more matched predictions than reference objects")


def _detection_thresholds(images: Sequence[DetectionScores]) -> np.ndarray:
    all_scores = np.concatenate([im.scores for im in images]) if images else np.array([])
    if all_scores.size == 0:
        return np.array([])
    return np.unique(all_scores)[::-1]


def detection_average_precision(images: Sequence[DetectionScores],
                                aggregation: str = "per-dataset") -> "float | Excluded":
    """AP over matched detections.

    per-dataset pools cardinalities globally; per-image averages the
    per-image precision/recall at each global threshold (NaN-policy rules
    decide which images enter each average).
    """
    if aggregation not in ("per-dataset", "per-image"):
        raise ValueError("aggregation must be per-dataset or per-image")
    n_ref_total = sum(im.n_reference for im in images)
    if n_ref_total == 0:
        return Excluded("no reference objects in the data set")
    thresholds = _detection_thresholds(images)
    if thresholds.size == 0:
        return 0.0
    recalls, precisions = [], []
    for t in thresholds:
        if aggregation == "per-dataset":
            tp = sum(int(np.count_nonzero(im.is_tp & (im.scores >= t))) for im in images)
            found = sum(int(np.count_nonzero(im.scores >= t)) for im in images)
            recalls.append(tp / n_ref_total)
            precisions.append(tp / found if found else 1.0)
        else:
            rs, ps = [], []
            for im in images:
                tp = int(np.count_nonzero(im.is_tp & (im.scores >= t)))
                found = int(np.count_nonzero(im.scores >= t))
                fn = im.n_reference - tp
                fp = found - tp
                # per-image NaN policy: empty-reference images never enter
                # recall; images with neither hits nor mistakes score 1
                if im.n_reference > 0:
                    rs.append(tp / im.n_reference)
                if found > 0:
                    ps.append(tp / found)
                elif fn == 0:
                    ps.append(1.0)
                elif fp == 0:
                    pass  # only misses: precision excluded
            recalls.append(float(np.mean(rs)) if rs else 0.0)
            precisions.append(float(np.mean(ps)) if ps else 1.0)
    return _envelope_area(np.asarray(recalls), np.asarray(precisions))


def detection_pr_curve(images: Sequence[DetectionScores]) -> "Curve | Excluded":
    """Pooled precision/recall operating points of the matched detections."""
    n_ref_total = sum(im.n_reference for im in images)
    if n_ref_total == 0:
        return Excluded("no reference objects in the data set")
    thresholds = _detection_thresholds(images)
    points, ts = [(0.0, 1.0)], [np.inf]
    for t in thresholds:
        tp = sum(int(np.count_nonzero(im.is_tp & (im.scores >= t))) for im in images)
        found = sum(int(np.count_nonzero(im.scores >= t)) for im in images)
        points.append((tp / n_ref_total, tp / found if found else 1.0))
        ts.append(float(t))
    return Curve(points, "PR", ts)


def froc_curve(images: Sequence[DetectionScores]) -> "Curve | Excluded":
    """Data-set sensitivity against false positives averaged per image."""
    n_ref_total = sum(im.n_reference for im in images)
    if not images:
        raise ValueError("FROC needs at least one image")
    if n_ref_total == 0:
        return Excluded("no reference objects in the data set")
    thresholds = _detection_thresholds(images)
    points, ts = [(0.0, 0.0)], [np.inf]
    for t in thresholds:
        tp = sum(int(np.count_nonzero(im.is_tp & (im.scores >= t))) for im in images)
        fp = sum(int(np.count_nonzero(~im.is_tp & (im.scores >= t))) for im in images)
        points.append((fp / len(images), tp / n_ref_total))
        ts.append(float(t))
    return Curve(points, "FROC", ts)


def froc_score(images: Sequence[DetectionScores],
               fppi_grid: Sequence[float] = DEFAULT_FPPI_GRID) -> "float | Excluded":
    """Mean sensitivity read off the FROC curve at the grid FPPI values
    (rightmost step at or below each grid value; clamps beyond the curve)."""
    if not len(fppi_grid):
        raise ValueError("fppi grid must be non-empty")
    curve = froc_curve(images)
    if isinstance(curve, Excluded):
        return curve
    pts = np.asarray(curve.points)
    sens = []
    for f in fppi_grid:
        reachable = pts[pts[:, 0] <= f]
        sens.append(reachable[:, 1].max() if len(reachable) else 0.0)
    return float(np.mean(sens))


# ---------------------------------------------------------------------------
# Metric@(TargetMetric = TargetValue)
# ---------------------------------------------------------------------------

_TARGETABLE: dict[str, Callable] = {
    "sensitivity": sensitivity,
    "specificity": specificity,
    "ppv": ppv,
    "npv": npv,
    "f1": f_beta,
}

#: metric maximized among thresholds that meet the target
_COMPLEMENT = {"sensitivity": "specificity", "specificity": "sensitivity",
               "ppv": "sensitivity", "npv": "specificity", "f1": "f1"}


@dataclass
class TargetReadout:
    threshold: float
    achieved: dict[str, "float | Excluded"]
    target_met: bool
    warnings: list[str] = field(default_factory=list)


def metric_at_target(samples: SampleSet, target_metric: str, target_value: float,
                     report_metrics: Sequence[str], positive: int = 1,
                     strict: bool = False) -> TargetReadout:
    """Pick the score threshold reaching `target_metric >= target_value` with
    maximal complementary performance and report the requested metrics there."""
    target_metric = target_metric.lower()
    if target_metric not in _TARGETABLE:
        raise ValueError(f"target metric must be one of {sorted(_TARGETABLE)}")
    scores, labels = _binary_scores(samples, positive)
    ts = np.concatenate([np.unique(scores)[::-1], [-np.inf]])
    candidates = []
    for t in ts:
        decide = scores >= t
        b = BinaryCounts(tp=int(np.count_nonzero(decide & labels)),
                         fp=int(np.count_nonzero(decide & ~labels)),
                         fn=int(np.count_nonzero(~decide & labels)),
                         tn=int(np.count_nonzero(~decide & ~labels)))
        value = _TARGETABLE[target_metric](b)
        candidates.append((float(t), b, value))
    feasible = [c for c in candidates
                if not isinstance(c[2], Excluded) and c[2] >= target_value]
    notes = []
    if feasible:
        pool, met = feasible, True
    else:
        if strict:
            raise ValueError(
                f"target {target_metric} >= {target_value} unreachable on this set")
        best = max((c for c in candidates if not isinstance(c[2], Excluded)),
                   key=lambda c: c[2], default=None)
        if best is None:
            raise ValueError(f"{target_metric} undefined on this sample set")
        pool = [c for c in candidates
                if not isinstance(c[2], Excluded) and c[2] == best[2]]
        met = False
        notes.append(f"target {target_metric} >= {target_value} unreachable; "
                     f"using nearest achievable {best[2]:.6g}")
        warnings.warn(notes[-1])
    comp = _COMPLEMENT[target_metric]

    def comp_value(c):
        v = _TARGETABLE[comp](c[1])
        return float("-inf") if isinstance(v, Excluded) else v

    chosen = max(pool, key=lambda c: (comp_value(c), c[0]))
    achieved: dict[str, "float | Excluded"] = {}
    for name in report_metrics:
        fn = _TARGETABLE.get(name.lower())
        if fn is None:
            raise ValueError(f"unknown report metric {name!r}")
        achieved[name.lower()] = fn(chosen[1])
    achieved.setdefault(target_metric, chosen[2])
    return TargetReadout(threshold=chosen[0], achieved=achieved,
                         target_met=met, warnings=notes)
