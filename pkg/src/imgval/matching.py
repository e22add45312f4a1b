"""Localization criteria, assignment strategies and object-level cardinalities."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .boundary import boundary_iou as _boundary_iou_masks
from .core import BinaryCounts, Excluded, Instance, InstanceSet
from .counting import f_beta, ppv, sensitivity

LOCALIZATION_KINDS = ("box-iou", "approx-iou", "mask-iou", "boundary-iou", "ior",
                      "center-distance", "point-inside", "mask-iou-gt-zero",
                      "custom-metric")
ASSIGNMENT_KINDS = ("greedy-by-score", "greedy-by-localization", "hungarian",
                    "overlap-gt-half")
OVERLAP_KINDS = ("box-iou", "approx-iou", "mask-iou", "boundary-iou", "ior")

#: default threshold grid averaged over when no single threshold is forced
DEFAULT_IOU_THRESHOLDS = (0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9)

#: overlap passing at most this IoU triggers the ambiguous-localization warning
LOOSE_OVERLAP_WARN_IOU = 0.1


@dataclass
class LocalizationCriterion:
    """Rule deciding whether a prediction spatially corresponds to a reference."""

    kind: str
    threshold: "float | Sequence[float] | None" = None
    boundary_width: float = 1.0
    custom: Callable | None = None
    custom_higher_better: bool = True

    def __post_init__(self):
        if self.kind not in LOCALIZATION_KINDS:
            raise ValueError(f"unknown localization criterion {self.kind!r}")
        if self.kind in ("point-inside", "mask-iou-gt-zero"):
            if self.threshold is not None:
                raise ValueError(f"{self.kind} takes no threshold")
        elif self.kind == "center-distance":
            if not (np.isscalar(self.threshold) and self.threshold > 0):
                raise ValueError("center-distance needs a distance threshold > 0")
        elif self.kind == "custom-metric":
            if self.custom is None:
                raise ValueError("custom-metric needs a callable")
        else:
            thresholds = self.threshold_list()
            if not thresholds or any(not 0.0 < t <= 1.0 for t in thresholds):
                raise ValueError("overlap thresholds must lie in (0, 1]")

    def threshold_list(self) -> list[float]:
        if self.threshold is None:
            return []
        if np.isscalar(self.threshold):
            return [float(self.threshold)]
        return [float(t) for t in self.threshold]

    @property
    def higher_is_better(self) -> bool:
        if self.kind == "center-distance":
            return False
        if self.kind == "custom-metric":
            return self.custom_higher_better
        return True

    def describe(self) -> dict:
        data = {"kind": self.kind}
        if self.threshold is not None:
            data["threshold"] = (float(self.threshold) if np.isscalar(self.threshold)
                                 else [float(t) for t in self.threshold])
        if self.kind == "boundary-iou":
            data["boundary_width"] = self.boundary_width
        return data


@dataclass
class AssignmentStrategy:
    kind: str
    punish_double_assignments: bool = True
    allow_multi_reference: bool = False  # IoR non-split allowance

    def __post_init__(self):
        if self.kind not in ASSIGNMENT_KINDS:
            raise ValueError(f"unknown assignment strategy {self.kind!r}")

    def describe(self) -> dict:
        return {"kind": self.kind,
                "punish_double_assignments": self.punish_double_assignments,
                "allow_multi_reference": self.allow_multi_reference}


@dataclass
class MatchResult:
    """Outcome of matching one image and class: pairs plus leftovers."""

    pairs: list[tuple[int, int, float]]        # (prediction, reference, score)
    unmatched_predictions: list[int]
    unmatched_references: list[int]
    dropped_predictions: list[int] = field(default_factory=list)
    merged_references: list[tuple[int, int]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def tp(self) -> int:
        return len(self.pairs)

    @property
    def fp(self) -> int:
        return len(self.unmatched_predictions)

    @property
    def fn(self) -> int:
        return len(self.unmatched_references)

    def counts(self) -> tuple[int, int, int]:
        return self.tp, self.fp, self.fn

    def to_json(self) -> dict:
        return {
            "pairs": [[p, r, s] for p, r, s in self.pairs],
            "unmatched_predictions": list(self.unmatched_predictions),
            "unmatched_references": list(self.unmatched_references),
            "dropped_predictions": list(self.dropped_predictions),
            "merged_references": [[p, r] for p, r in self.merged_references],
            "warnings": list(self.warnings),
        }


# ---------------------------------------------------------------------------
# Localization scores
# ---------------------------------------------------------------------------


def _box_volume(box: np.ndarray) -> float:
    return float(np.prod(np.maximum(box[:, 1] - box[:, 0], 0.0)))


def _box_intersection(a: np.ndarray, b: np.ndarray) -> float:
    lo = np.maximum(a[:, 0], b[:, 0])
    hi = np.minimum(a[:, 1], b[:, 1])
    return float(np.prod(np.maximum(hi - lo, 0.0)))


def _mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    union = int(np.count_nonzero(a | b))
    if union == 0:
        return 0.0
    return int(np.count_nonzero(a & b)) / union


def _center(inst: Instance, spacing) -> np.ndarray:
    if inst.point is not None:
        return inst.point
    if inst.box is not None:
        return inst.box.mean(axis=1)
    centroid = np.argwhere(inst.mask).mean(axis=0)
    if spacing is not None:
        centroid = centroid * np.asarray(spacing)
    return centroid


def _require(inst: Instance, rep: str, role: str):
    if getattr(inst, rep) is None:
        raise ValueError(f"{role} instance lacks the {rep} representation "
                         "required by the criterion")


@dataclass
class LocalizationScore:
    value: float
    passed: bool
    warnings: list[str] = field(default_factory=list)


def localization_score(prediction: Instance, reference: Instance,
                       criterion: LocalizationCriterion,
                       spacing: Sequence[float] | None = None,
                       threshold: float | None = None) -> LocalizationScore:
    """Criterion value plus pass/fail verdict for one candidate pair."""
    kind = criterion.kind
    notes: list[str] = []
    if threshold is None:
        thresholds = criterion.threshold_list()
        threshold = thresholds[0] if thresholds else None

    if kind in ("box-iou", "approx-iou"):
        _require(prediction, "box", "prediction")
        _require(reference, "box", "reference")
        inter = _box_intersection(prediction.box, reference.box)
        union = _box_volume(prediction.box) + _box_volume(reference.box) - inter
        value = inter / union if union > 0 else 0.0
        passed = value >= threshold
    elif kind == "mask-iou":
        _require(prediction, "mask", "prediction")
        _require(reference, "mask", "reference")
        value = _mask_iou(prediction.mask, reference.mask)
        passed = value >= threshold
    elif kind == "mask-iou-gt-zero":
        _require(prediction, "mask", "prediction")
        _require(reference, "mask", "reference")
        value = _mask_iou(prediction.mask, reference.mask)
        passed = value > 0.0
        if passed and value < LOOSE_OVERLAP_WARN_IOU:
            notes.append(
                "loose overlap criterion passed with IoU "
                f"{value:.3f}; very large predictions can satisfy it while "
                "localizing poorly")
    elif kind == "boundary-iou":
        _require(prediction, "mask", "prediction")
        _require(reference, "mask", "reference")
        v = _boundary_iou_masks(reference.mask, prediction.mask,
                                width=criterion.boundary_width)
        value = 0.0 if isinstance(v, Excluded) else float(v)
        passed = value >= threshold
    elif kind == "ior":
        _require(prediction, "mask", "prediction")
        _require(reference, "mask", "reference")
        ref_area = int(np.count_nonzero(reference.mask))
        if ref_area == 0:
            value, passed = 0.0, False
        else:
            value = int(np.count_nonzero(prediction.mask & reference.mask)) / ref_area
            passed = value >= threshold
    elif kind == "center-distance":
        value = float(np.linalg.norm(_center(prediction, spacing)
                                     - _center(reference, spacing)))
        passed = value <= criterion.threshold
    elif kind == "point-inside":
        _require(prediction, "point", "prediction")
        if reference.mask is not None:
            idx = np.round(np.asarray(prediction.point)
                           / (np.asarray(spacing) if spacing is not None else 1.0))
            idx = idx.astype(int)
            inside = (np.all(idx >= 0) and np.all(idx < reference.mask.shape)
                      and bool(reference.mask[tuple(idx)]))
        elif reference.box is not None:
            inside = bool(np.all(prediction.point >= reference.box[:, 0])
                          and np.all(prediction.point <= reference.box[:, 1]))
        else:
            raise ValueError("point-inside needs a mask or box reference")
        value, passed = (1.0, True) if inside else (0.0, False)
    elif kind == "custom-metric":
        value = float(criterion.custom(prediction, reference))
        if threshold is None:
            passed = value > 0 if criterion.custom_higher_better else value <= 0
        else:
            passed = (value >= threshold if criterion.custom_higher_better
                      else value <= threshold)
    else:  # pragma: no cover - guarded by the constructor
        raise ValueError(kind)
    return LocalizationScore(float(value), bool(passed), notes)


# ---------------------------------------------------------------------------
# Assignment
# ---------------------------------------------------------------------------


def _quality(value: float, criterion: LocalizationCriterion) -> float:
    """Orientation-normalized match quality: higher is always better."""
    return value if criterion.higher_is_better else -value


def assign(predictions: InstanceSet, references: InstanceSet,
           criterion: LocalizationCriterion, strategy: AssignmentStrategy,
           threshold: float | None = None) -> MatchResult:
    """Match predictions to references of one image (single class).

    Matching is per class; callers split multi-class sets beforehand.
    """
    preds = list(predictions)
    refs = list(references)
    spacing = predictions.spacing or references.spacing
    if strategy.kind == "greedy-by-score" and any(p.score is None for p in preds):
        raise ValueError("greedy-by-score requires prediction scores")
    strict_floor = None
    if strategy.kind == "overlap-gt-half":
        if criterion.kind not in OVERLAP_KINDS:
            raise ValueError("overlap-gt-half needs an overlap-type criterion")
        thr = threshold if threshold is not None else (criterion.threshold_list() or [None])[0]
        if thr is None or thr < 0.5:
            raise ValueError(
                "overlap-gt-half requires a criterion threshold of at least "
                "0.5 (overlap strictly above one half)")
        strict_floor = max(float(thr), 0.5)

    warnings: list[str] = []
    scores = np.zeros((len(preds), len(refs)))
    passes = np.zeros((len(preds), len(refs)), dtype=bool)
    for i, p in enumerate(preds):
        for j, r in enumerate(refs):
            loc = localization_score(p, r, criterion, spacing, threshold)
            scores[i, j] = loc.value
            # uniqueness by pigeonhole needs overlap strictly above one half
            passes[i, j] = (loc.value > strict_floor if strict_floor is not None
                            else loc.passed)
            warnings.extend(loc.warnings)

    pairs: list[tuple[int, int, float]] = []
    matched_p: set[int] = set()
    matched_r: set[int] = set()

    if strategy.kind == "greedy-by-score":
        order = sorted(range(len(preds)), key=lambda i: (-preds[i].score, i))
        for i in order:
            candidates = [j for j in range(len(refs))
                          if passes[i, j] and j not in matched_r]
            if not candidates:
                continue
            j = max(candidates,
                    key=lambda j: (_quality(scores[i, j], criterion), -j))
            pairs.append((i, j, float(scores[i, j])))
            matched_p.add(i)
            matched_r.add(j)
    elif strategy.kind == "greedy-by-localization":
        candidates = [(i, j) for i in range(len(preds)) for j in range(len(refs))
                      if passes[i, j]]
        candidates.sort(key=lambda ij: (-_quality(scores[ij], criterion),
                                        ij[0], ij[1]))
        for i, j in candidates:
            if i in matched_p or j in matched_r:
                continue
            pairs.append((i, j, float(scores[i, j])))
            matched_p.add(i)
            matched_r.add(j)
    elif strategy.kind == "hungarian":
        if preds and refs and passes.any():
            gain = np.vectorize(lambda v: _quality(v, criterion))(scores)
            if not criterion.higher_is_better:
                # closeness below the acceptance threshold
                thr = threshold if threshold is not None else criterion.threshold
                gain = gain + float(thr if thr is not None else 0.0)
            # a passing pair must always beat opting out (zero-gain dummy)
            floor = float(gain[passes].min())
            if floor <= 0.0:
                gain = gain + (-floor + 1e-9)
            big = 1e9
            cost = np.full((len(preds), len(refs) + len(preds)), 0.0)
            cost[:, :len(refs)] = np.where(passes, -gain, big)
            rows, cols = linear_sum_assignment(cost)
            for i, j in zip(rows, cols):
                if j < len(refs) and passes[i, j]:
                    pairs.append((int(i), int(j), float(scores[i, j])))
                    matched_p.add(int(i))
                    matched_r.add(int(j))
    elif strategy.kind == "overlap-gt-half":
        for i in range(len(preds)):
            for j in range(len(refs)):
                if not passes[i, j]:
                    continue
                if i in matched_p or j in matched_r:
                    raise ValueError(
                        "ambiguous matching under overlap-gt-half; the "
                        "predictions violate the non-overlap precondition")
                pairs.append((i, j, float(scores[i, j])))
                matched_p.add(i)
                matched_r.add(j)

    pairs.sort(key=lambda t: t[0])
    merged: list[tuple[int, int]] = []
    merged_refs: set[int] = set()
    if strategy.allow_multi_reference:
        for i in sorted(matched_p):
            for j in range(len(refs)):
                if j in matched_r or j in merged_refs:
                    continue
                if passes[i, j]:
                    merged.append((i, j))
                    merged_refs.add(j)

    unmatched_p = [i for i in range(len(preds)) if i not in matched_p]
    dropped: list[int] = []
    if not strategy.punish_double_assignments:
        dropped = [i for i in unmatched_p if passes[i, :].any()]
        unmatched_p = [i for i in unmatched_p if i not in dropped]
    unmatched_r = [j for j in range(len(refs))
                   if j not in matched_r and j not in merged_refs]
    return MatchResult(pairs, unmatched_p, unmatched_r, dropped, merged,
                       sorted(set(warnings)))


def assign_over_thresholds(predictions: InstanceSet, references: InstanceSet,
                           criterion: LocalizationCriterion,
                           strategy: AssignmentStrategy) -> dict[float, MatchResult]:
    """One match per configured threshold (metrics are averaged over them)."""
    thresholds = criterion.threshold_list() or [None]
    return {t: assign(predictions, references, criterion, strategy, threshold=t)
            for t in thresholds}


# ---------------------------------------------------------------------------
# Cardinalities, panoptic quality, NaN policy
# ---------------------------------------------------------------------------


@dataclass
class PanopticQuality:
    value: "float | Excluded"
    segmentation_quality: "float | Excluded"
    detection_quality: "float | Excluded"


def panoptic_quality(match: "MatchResult | Sequence[MatchResult]") -> PanopticQuality:
    """Mean IoU over matched pairs times the F1 detection score.

    Accepts one match or a collection pooled over images; localization
    scores must be IoU values.
    """
    matches = [match] if isinstance(match, MatchResult) else list(match)
    ious = [s for m in matches for (_, _, s) in m.pairs]
    tp = sum(m.tp for m in matches)
    fp = sum(m.fp for m in matches)
    fn = sum(m.fn for m in matches)
    denom = tp + 0.5 * fp + 0.5 * fn
    if denom == 0:
        e = Excluded("no instances in reference or prediction")
        return PanopticQuality(e, e, e)
    dq = tp / denom
    if tp == 0:
        return PanopticQuality(0.0, Excluded("no matched instances"), dq)
    sq = float(np.mean(ious))
    return PanopticQuality(sq * dq, sq, dq)


def per_image_counts(matches: Sequence[MatchResult]) -> list[tuple[int, int, int]]:
    return [m.counts() for m in matches]


def per_dataset_counts(matches: Sequence[MatchResult]) -> tuple[int, int, int]:
    tp = sum(m.tp for m in matches)
    fp = sum(m.fp for m in matches)
    fn = sum(m.fn for m in matches)
    return tp, fp, fn


def nan_policy(tp: int, fn: int, fp: int,
               beta: float = 1.0) -> dict[str, "float | Excluded"]:
    """Per-image convention for undefined detection metrics.

    Empty reference and prediction: sensitivity is excluded, PPV and F-score
    count as 1. Empty reference with false positives: sensitivity excluded
    (PPV and F-score are plainly 0). Misses only: sensitivity is 0, PPV and
    F-score are excluded.
    """
    counts = BinaryCounts(tp=tp, fp=fp, fn=fn, tn=0)
    if tp == 0 and fn == 0 and fp == 0:
        return {"sensitivity": Excluded("image has no reference objects"),
                "ppv": 1.0, "f_beta": 1.0}
    if tp == 0 and fn == 0:  # fp > 0
        return {"sensitivity": Excluded("image has no reference objects"),
                "ppv": 0.0, "f_beta": 0.0}
    if tp == 0 and fp == 0 and fn > 0:
        return {"sensitivity": 0.0,
                "ppv": Excluded("image has only missed references"),
                "f_beta": Excluded("image has only missed references")}
    return {"sensitivity": sensitivity(counts), "ppv": ppv(counts),
            "f_beta": f_beta(counts, beta)}


def size_stratify(matches: Sequence[MatchResult],
                  predictions: Sequence[InstanceSet],
                  references: Sequence[InstanceSet],
                  edges: Sequence[float]) -> dict[str, list[MatchResult]]:
    """Partition match results into size bins.

    References are binned by their own size, matched pairs inherit the bin of
    their reference, unmatched predictions are binned by their own size.
    """
    edges = sorted(float(e) for e in edges)
    labels = _bin_labels(edges)

    def bin_of(size: float) -> str:
        for i, e in enumerate(edges):
            if size < e:
                return labels[i]
        return labels[-1]

    out: dict[str, list[MatchResult]] = {lab: [] for lab in labels}
    for match, preds, refs in zip(matches, predictions, references):
        split: dict[str, MatchResult] = {
            lab: MatchResult([], [], []) for lab in labels}
        for (i, j, s) in match.pairs:
            split[bin_of(refs.instances[j].size())].pairs.append((i, j, s))
        for j in match.unmatched_references:
            split[bin_of(refs.instances[j].size())].unmatched_references.append(j)
        for i in match.unmatched_predictions:
            split[bin_of(preds.instances[i].size())].unmatched_predictions.append(i)
        for lab in labels:
            out[lab].append(split[lab])
    return out


def _bin_labels(edges: Sequence[float]) -> list[str]:
    bounds = ["-inf"] + [f"{e:g}" for e in edges] + ["inf"]
    return [f"[{lo},{hi})" for lo, hi in zip(bounds[:-1], bounds[1:])]
