"""Applies a recommended metric pool to a dataset and builds the report."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import boundary as bnd
from . import calibration as cal
from . import counting as cnt
from . import thresholded as thr
from .aggregate import AggregationSpec, BootstrapSpec, aggregate_classes, hierarchical_mean
from .core import (ConfusionMatrix, Excluded, InstanceSet, LabelMap,
                   ProblemCategory, SampleSet, confusion_from_maps,
                   is_excluded)
from .io import Dataset, imlc_samples
from .matching import (AssignmentStrategy, LocalizationCriterion, MatchResult,
                       assign, nan_policy, panoptic_quality,
                       per_dataset_counts)
from .recommend.engine import MetricPool, PoolEntry
from .thresholded import DetectionScores


class EvaluationError(ValueError):
    pass


@dataclass
class ReportRow:
    metric: str
    scope: str
    value: "float | Excluded"
    ci: list | None = None
    n_cases: int = 0
    n_excluded: int = 0
    params: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        if is_excluded(self.value):
            value = {"excluded": True, "reason": self.value.reason}
        elif isinstance(self.value, float) and np.isinf(self.value):
            value = "inf" if self.value > 0 else "-inf"  # strict-JSON safe
        else:
            value = self.value
        return {"metric": self.metric, "scope": self.scope, "value": value,
                "ci": self.ci, "n_cases": self.n_cases,
                "n_excluded": self.n_excluded, "params": self.params,
                "warnings": self.warnings}


@dataclass
class Report:
    task: str
    classes: list[str]
    pool_version: str
    seed: int
    rows: list[ReportRow] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    curves: dict[str, str] = field(default_factory=dict)
    match_traces: dict[str, list] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"task": self.task, "classes": self.classes,
                "pool_version": self.pool_version, "seed": self.seed,
                "results": [r.to_json() for r in self.rows],
                "warnings": self.warnings}

    def to_csv(self) -> str:
        lines = ["metric,scope,value,ci_low,ci_high,n_cases,n_excluded"]
        for row in self.rows:
            value = "" if is_excluded(row.value) else f"{row.value:.10g}"
            lo = f"{row.ci[0]:.10g}" if row.ci else ""
            hi = f"{row.ci[1]:.10g}" if row.ci else ""
            lines.append(f"{row.metric},{row.scope},{value},{lo},{hi},"
                         f"{row.n_cases},{row.n_excluded}")
        return "\n".join(lines) + "\n"

    def find(self, metric: str, scope: str | None = None) -> ReportRow:
        for row in self.rows:
            if row.metric == metric and (scope is None or row.scope == scope):
                return row
        raise KeyError(f"no row for {metric} (scope={scope})")

    def add_warning(self, message: str):
        if message not in self.warnings:
            self.warnings.append(message)


def evaluate_pool(dataset: Dataset, pool: MetricPool,
                  agg: AggregationSpec | None = None,
                  seed: int | None = None,
                  resolve_default_guides: bool = False) -> Report:
    """Compute every pool metric over the dataset, NaN policy included."""
    if dataset.category is not pool.category:
        raise EvaluationError(
            f"dataset task {dataset.category.value} does not match pool "
            f"category {pool.category.value}")
    if pool.pending_guides:
        if resolve_default_guides:
            chosen = pool.resolve_defaults()
        else:
            keys = [g.key for g in pool.pending_guides]
            raise EvaluationError(
                "pool has unresolved decision-guide choices: "
                + ", ".join(keys))
    else:
        chosen = []
    if agg is None:
        agg = _default_agg(dataset, pool, seed)
    report = Report(dataset.category.value, dataset.classes, pool.version,
                    agg.bootstrap.seed if agg.bootstrap else (seed or 0))
    for w in pool.warnings:
        report.add_warning(w["message"])
    for c in chosen:
        report.add_warning(f"guide resolved to its recommended default: {c}")

    if dataset.category is ProblemCategory.ImLC:
        _evaluate_imlc(dataset, pool, agg, report)
    elif dataset.category is ProblemCategory.SemS:
        _evaluate_segmentation(dataset, pool, agg, report)
    else:
        _evaluate_detection(dataset, pool, agg, report)
    return report


def _default_agg(dataset: Dataset, pool: MetricPool,
                 seed: int | None) -> AggregationSpec:
    nan = pool.aggregation.get("nan_handling", "exclude")
    hierarchy = ("group",) if dataset.has_hierarchy() else ()
    return AggregationSpec(nan_handling=nan, hierarchy=hierarchy,
                           bootstrap=None if seed is None
                           else BootstrapSpec(seed=seed))


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------


def _concrete(params: Mapping, key: str, fallback=None, warn=None,
              report: Report | None = None):
    """Pools may carry named placeholders; evaluation needs numbers."""
    value = params.get(key)
    if isinstance(value, str):
        if fallback is None:
            raise EvaluationError(
                f"parameter {key!r} is the placeholder {value!r}; set a "
                "concrete value in the pool file before evaluating")
        if warn and report is not None:
            report.add_warning(warn)
        return fallback
    if value is None:
        return fallback
    return value


def _bootstrap(fn: Callable[[Sequence[int]], "float | Excluded"],
               n_cases: int, groups: Sequence[tuple] | None,
               spec: AggregationSpec) -> list | None:
    if spec.bootstrap is None or n_cases == 0:
        return None
    rng = np.random.default_rng(spec.bootstrap.seed)
    if groups is None:
        units = [[i] for i in range(n_cases)]
    else:
        by_key: dict[object, list[int]] = {}
        for i, g in enumerate(groups):
            by_key.setdefault(g[0] if g else i, []).append(i)
        units = list(by_key.values())
    values = []
    for _ in range(spec.bootstrap.resamples):
        draw = rng.integers(0, len(units), size=len(units))
        idx = [i for u in draw for i in units[u]]
        try:
            v = fn(idx)
        except (ValueError, ZeroDivisionError):
            continue
        if not is_excluded(v):
            values.append(v)
    if not values:
        return None
    return [float(np.percentile(values, 100 * spec.bootstrap.alpha / 2)),
            float(np.percentile(values, 100 * (1 - spec.bootstrap.alpha / 2)))]


def _aggregate_cases(values: Sequence, metric: str, spec: AggregationSpec,
                     groups: Sequence[tuple] | None,
                     worst: float | None) -> tuple["float | Excluded", int]:
    """Mean with NaN policy; returns (value, n_excluded)."""
    numeric: list[float] = []
    kept_groups: list[tuple] = []
    n_excluded = 0
    for i, v in enumerate(values):
        if is_excluded(v):
            n_excluded += 1
            if spec.nan_handling == "worst-value":
                if worst is None:
                    raise EvaluationError(
                        f"{metric}: no worst value available for the "
                        "worst-value NaN policy")
                numeric.append(worst)
                if groups is not None:
                    kept_groups.append(groups[i])
        else:
            numeric.append(float(v))
            if groups is not None:
                kept_groups.append(groups[i])
    if not numeric:
        return Excluded("all cases excluded"), n_excluded
    return (hierarchical_mean(numeric, kept_groups if groups is not None else None),
            n_excluded)


def _class_label(dataset: Dataset, class_index: int) -> str:
    if 0 <= class_index < len(dataset.classes):
        return str(dataset.classes[class_index])
    return str(class_index)


def _add_class_aggregate(report: Report, metric: str, per_class: dict,
                         pool: MetricPool, params: dict):
    if len(per_class) < 2:
        return
    weights = None
    if pool.aggregation.get("class_aggregation") == "weighted":
        raw = pool.aggregation.get("class_weights")
        if isinstance(raw, Mapping):
            weights = {int(k): float(v) for k, v in raw.items()}
        else:
            report.add_warning(
                f"{metric}: weighted class aggregation requested but no "
                "weights provided; macro average reported")
    value = aggregate_classes(per_class, weights)
    mode = "weighted" if weights else "macro"
    report.rows.append(ReportRow(metric, f"classes:{mode}", value,
                                 params=params))


# ---------------------------------------------------------------------------
# ImLC
# ---------------------------------------------------------------------------


def _imlc_labels(dataset: Dataset) -> np.ndarray:
    labels = []
    for case in dataset.cases:
        pred = case.prediction
        labels.append(int(np.argmax(pred)) if isinstance(pred, np.ndarray)
                      else int(pred))
    return np.asarray(labels)


def _evaluate_imlc(dataset: Dataset, pool: MetricPool, agg: AggregationSpec,
                   report: Report) -> None:
    refs = np.asarray([c.reference for c in dataset.cases])
    preds = _imlc_labels(dataset)
    n_classes = dataset.n_classes
    samples = imlc_samples(dataset)
    groups = dataset.groups() if agg.hierarchy else None

    def cm_of(idx: Sequence[int]) -> ConfusionMatrix:
        return ConfusionMatrix(
            _count_matrix(refs[list(idx)], preds[list(idx)], n_classes),
            dataset.classes)

    all_idx = list(range(len(dataset.cases)))
    cm = cm_of(all_idx)

    for entry in pool.multi_class:
        fn = _multiclass_fn(entry, n_classes, report)
        value = fn(cm)
        ci = _bootstrap(lambda idx: fn(cm_of(idx)), len(all_idx), groups, agg)
        report.rows.append(ReportRow(entry.metric, "multi-class", value,
                                     ci=ci, n_cases=len(all_idx),
                                     params=_echo_params(entry)))

    for class_index, entries in sorted(pool.per_class.items()):
        label = _class_label(dataset, class_index)
        scope = f"class:{label}"
        for entry in entries:
            _imlc_class_entry(entry, class_index, scope, dataset, samples,
                              cm, cm_of, groups, agg, report)

    if pool.calibration:
        if samples is None:
            report.add_warning("calibration metrics skipped: predictions "
                               "carry no class scores")
        else:
            _calibration_rows(samples, pool, agg, groups, report,
                              object_level=False)


def _count_matrix(refs, preds, n_classes):
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (refs, preds), 1)
    return counts


def _multiclass_fn(entry: PoolEntry, n_classes: int, report: Report):
    metric = entry.metric
    if metric == "accuracy":
        return cnt.accuracy
    if metric == "balanced_accuracy":
        return cnt.balanced_accuracy
    if metric == "mcc":
        return cnt.mcc
    if metric == "expected_cost":
        costs = _cost_matrix(entry.params, n_classes, report)
        normalized = bool(entry.params.get("normalized", False))
        return lambda cm: cnt.expected_cost(cm, costs, normalized)
    if metric == "weighted_cohens_kappa":
        weights = _kappa_weights(entry.params, n_classes)
        return lambda cm: cnt.weighted_cohens_kappa(cm, weights)
    raise EvaluationError(f"unsupported multi-class metric {metric!r}")


def _cost_matrix(params: Mapping, n_classes: int,
                 report: Report) -> cnt.CostMatrix:
    priors = params.get("priors_vector")
    priors = np.asarray(priors, dtype=float) if priors is not None else None
    if isinstance(params.get("priors"), str) and priors is None:
        report.add_warning(
            "expected-cost priors placeholder not instantiated; using "
            "empirical prevalences")
    spec = params.get("costs", "0-1")
    if isinstance(spec, str):
        if spec != "0-1":
            matrix = params.get("cost_matrix")
            if matrix is None:
                report.add_warning(
                    f"cost matrix placeholder {spec!r} not instantiated; "
                    "using 0-1 costs")
                return cnt.CostMatrix.zero_one(n_classes, priors)
            return cnt.CostMatrix(np.asarray(matrix, dtype=float), priors)
        return cnt.CostMatrix.zero_one(n_classes, priors)
    return cnt.CostMatrix(np.asarray(spec, dtype=float), priors)


def _kappa_weights(params: Mapping, n_classes: int) -> cnt.KappaWeights:
    matrix = params.get("weight_matrix")
    if matrix is not None:
        return cnt.KappaWeights(np.asarray(matrix, dtype=float))
    scheme = params.get("scheme", "linear")
    if scheme == "quadratic":
        return cnt.KappaWeights.quadratic(n_classes)
    return cnt.KappaWeights.linear(n_classes)


_BINARY_COUNTING = {"sensitivity": cnt.sensitivity, "specificity": cnt.specificity,
                    "ppv": cnt.ppv, "npv": cnt.npv, "lr_plus": cnt.lr_plus,
                    "dsc": cnt.dsc, "iou": cnt.iou}


def _imlc_class_entry(entry: PoolEntry, class_index: int, scope: str,
                      dataset: Dataset, samples: "SampleSet | None",
                      cm: ConfusionMatrix, cm_of, groups, agg: AggregationSpec,
                      report: Report) -> None:
    metric = entry.metric
    params = _echo_params(entry)
    if metric in _BINARY_COUNTING or metric == "f_beta":
        if metric == "f_beta":
            beta = float(entry.params.get("beta", 1.0))
            fn = lambda m: cnt.f_beta(m.one_vs_rest(class_index), beta)
        else:
            base = _BINARY_COUNTING[metric]
            fn = lambda m: base(m.one_vs_rest(class_index))
        value = fn(cm)
        ci = _bootstrap(lambda idx: fn(cm_of(idx)), cm.total, groups, agg)
        report.rows.append(ReportRow(metric, scope, value, ci=ci,
                                     n_cases=cm.total, params=params))
        return
    if metric == "expected_cost":
        costs = _cost_matrix(entry.params, 2, report)
        normalized = bool(entry.params.get("normalized", False))
        fn = lambda m: cnt.expected_cost(m.one_vs_rest(class_index), costs,
                                         normalized)
        report.rows.append(ReportRow(metric, scope, fn(cm),
                                     ci=_bootstrap(lambda idx: fn(cm_of(idx)),
                                                   cm.total, groups, agg),
                                     n_cases=cm.total, params=params))
        return
    if metric == "net_benefit":
        if samples is None:
            report.add_warning("net benefit skipped: no class scores")
            return
        p_t = _concrete(entry.params, "risk_threshold", 0.1,
                        "net-benefit risk threshold placeholder; using 0.1",
                        report)
        scores = samples.scores[:, class_index]
        labels = samples.references == class_index
        curve = cnt.decision_curve(scores, labels, [p_t])
        params["risk_threshold"] = p_t
        report.rows.append(ReportRow(metric, scope, curve[0][1],
                                     n_cases=samples.n_samples, params=params))
        if entry.params.get("decision_curve"):
            grid = np.round(np.linspace(0.05, 0.95, 19), 4).tolist()
            rows = cnt.decision_curve(scores, labels, grid)
            csv = "risk_threshold,net_benefit\n" + "\n".join(
                f"{t:.10g},{v:.10g}" for t, v in rows) + "\n"
            report.curves[f"net_benefit_{scope}"] = csv
        return
    if metric == "metric_at_target":
        if samples is None:
            report.add_warning("target readout skipped: no class scores")
            return
        target_metric = entry.params.get("target_metric", "sensitivity")
        target_value = float(entry.params.get("target_value", 0.95))
        reports = entry.params.get("report_metrics", [])
        reports = [m for m in reports if m != "fppi"]
        readout = thr.metric_at_target(samples, target_metric, target_value,
                                       reports, positive=class_index)
        suffix = f"@({target_metric}={target_value:g})"
        for name, value in readout.achieved.items():
            row_params = dict(params)
            row_params["threshold"] = readout.threshold
            row_params["target_met"] = readout.target_met
            report.rows.append(ReportRow(f"{name}{suffix}", scope, value,
                                         n_cases=samples.n_samples,
                                         params=row_params,
                                         warnings=readout.warnings))
        return
    if metric in ("auroc", "average_precision"):
        if samples is None:
            report.add_warning(f"{metric} skipped: no class scores")
            return
        if metric == "auroc":
            fn = lambda s: thr.auroc(s, positive=class_index)
            curve = thr.roc_curve(samples, positive=class_index)
        else:
            fn = lambda s: thr.average_precision(s, positive=class_index)
            curve = thr.pr_curve(samples, positive=class_index)
        value = fn(samples)
        ci = _bootstrap(lambda idx: fn(samples.subset(idx)),
                        samples.n_samples, groups, agg)
        report.rows.append(ReportRow(metric, scope, value, ci=ci,
                                     n_cases=samples.n_samples, params=params))
        if not is_excluded(curve):
            report.curves[f"{metric}_{scope}"] = curve.to_csv()
        return
    raise EvaluationError(f"unsupported per-class metric {metric!r} for ImLC")


def _calibration_rows(samples: SampleSet, pool: MetricPool,
                      agg: AggregationSpec, groups, report: Report,
                      object_level: bool) -> None:
    for entry in pool.calibration:
        metric = entry.metric
        params = _echo_params(entry)
        try:
            if metric == "brier_score":
                if entry.params.get("skill"):
                    fn = lambda s: cal.brier_skill_score(s)
                    metric_id = "brier_skill_score"
                else:
                    normalize = bool(entry.params.get("normalize", False))
                    fn = lambda s: cal.brier_score(s, normalize)
                    metric_id = "brier_score"
            elif metric == "root_brier_score":
                fn, metric_id = cal.root_brier_score, metric
            elif metric == "nll":
                if object_level:
                    report.add_warning(
                        "negative log-likelihood skipped: not applicable at "
                        "object level")
                    continue
                eps = float(entry.params.get("epsilon", cal.NLL_FLOOR))
                fn = lambda s: cal.nll(s, eps)
                metric_id = metric
            elif metric == "ece":
                binning = _binning(entry.params)
                fn = lambda s: cal.ece_binned(s, binning)
                metric_id = metric
                value, diagram = cal.ece_binned(samples, binning,
                                                return_diagram=True)
                report.curves["reliability_top_label"] = diagram.to_csv()
            elif metric == "cwce":
                binning = _binning(entry.params)
                weighting = entry.params.get("weighting", "uniform")
                if weighting == "importance-weights":
                    weights = entry.params.get("class_weights_vector")
                    if weights is None:
                        report.add_warning(
                            "class-wise calibration importance weights not "
                            "provided; uniform weighting reported")
                        weighting = "uniform"
                if weighting == "per-class-report":
                    per = cal.cwce(samples, binning, "per-class-report")
                    for k, v in per.items():
                        report.rows.append(ReportRow(
                            "cwce", f"class:{k}", v,
                            n_cases=samples.n_samples, params=params))
                    continue
                if weighting == "importance-weights":
                    fn = lambda s: cal.cwce(s, binning, "importance-weights",
                                            entry.params["class_weights_vector"])
                else:
                    fn = lambda s: cal.cwce(s, binning, "uniform")
                metric_id = metric
            elif metric == "ece_kde":
                p = int(entry.params.get("p", 1))
                bw = entry.params.get("bandwidth", "auto")
                fn = lambda s: cal.ece_kde(s, p=p, bandwidth=bw)
                metric_id = metric
            elif metric == "kce":
                scale = entry.params.get("kernel_scale", "auto")
                fn = lambda s: cal.kce(s, scale)
                metric_id = metric
            else:
                raise EvaluationError(f"unsupported calibration metric {metric!r}")
            value = fn(samples)
        except ValueError as exc:
            report.rows.append(ReportRow(metric, "calibration",
                                         Excluded(str(exc)), params=params))
            continue
        ci = None
        if metric in ("brier_score", "root_brier_score", "nll"):
            ci = _bootstrap(lambda idx: fn(samples.subset(idx)),
                            samples.n_samples, groups, agg)
        report.rows.append(ReportRow(metric_id, "calibration", value, ci=ci,
                                     n_cases=samples.n_samples, params=params))


def _binning(params: Mapping) -> cal.BinningScheme:
    return cal.BinningScheme(int(params.get("bins", 10)),
                             params.get("strategy", "equal-width"))


def _echo_params(entry: PoolEntry) -> dict:
    params = dict(entry.params)
    params["_anchor"] = entry.anchor
    if entry.note:
        params["_note"] = entry.note
    return params


# ---------------------------------------------------------------------------
# SemS (and the segmentation part of InS)
# ---------------------------------------------------------------------------


def _segmentation_case_value(entry: PoolEntry, ref: LabelMap, pred: LabelMap,
                             class_index: int, report: Report):
    metric = entry.metric
    if metric in ("dsc", "iou", "f_beta"):
        cm = confusion_from_maps(ref, pred, class_index)
        if metric == "f_beta":
            return cnt.f_beta(cm, float(entry.params.get("beta", 1.0)))
        return _BINARY_COUNTING[metric](cm)
    if metric == "cl_dice":
        return cnt.cl_dice(ref, pred, class_index).value
    if metric == "boundary_iou":
        # band width in spacing units (pixels under the default spacing)
        width = _concrete(entry.params, "width", 2.0,
                          "boundary band width placeholder; using 2.0",
                          report)
        return bnd.boundary_iou(ref, pred, width=float(width),
                                class_index=class_index)
    a = bnd.extract_boundary(ref, class_index)
    b = bnd.extract_boundary(pred, class_index)
    if metric == "nsd":
        tol = _concrete(entry.params, "tolerance", 1.0,
                        "surface-distance tolerance placeholder; using 1.0 "
                        "spacing unit", report)
        return bnd.nsd(a, b, float(tol))
    if metric == "hausdorff":
        return bnd.hausdorff(a, b)
    if metric == "hausdorff_95":
        return bnd.hausdorff(a, b, percentile=float(
            entry.params.get("percentile", 95.0)))
    if metric == "masd":
        return bnd.masd(a, b)
    if metric == "assd":
        return bnd.assd(a, b)
    raise EvaluationError(f"unsupported segmentation metric {metric!r}")


_DISTANCE_METRICS = ("hausdorff", "hausdorff_95", "masd", "assd")


def _evaluate_segmentation(dataset: Dataset, pool: MetricPool,
                           agg: AggregationSpec, report: Report) -> None:
    groups = dataset.groups() if agg.hierarchy else None
    diagonal = max(case.reference.diagonal() for case in dataset.cases)
    per_class_values: dict[str, dict[int, "float | Excluded"]] = {}
    for class_index, entries in sorted(pool.per_class.items()):
        label = _class_label(dataset, class_index)
        scope = f"class:{label}"
        multi_instance = [
            bnd.count_components(case.reference.mask(class_index)) > 1
            or bnd.count_components(case.prediction.mask(class_index)) > 1
            for case in dataset.cases]
        for entry in entries:
            params = _echo_params(entry)
            is_distance_family = entry.slot == "boundary"
            values = []
            for case, multi in zip(dataset.cases, multi_instance):
                if is_distance_family and multi:
                    values.append(Excluded(
                        "multiple same-class instances; boundary metrics "
                        "compare unrelated contours"))
                    continue
                values.append(_segmentation_case_value(
                    entry, case.reference, case.prediction, class_index,
                    report))
            if is_distance_family and any(multi_instance):
                report.add_warning(
                    "distance-based metrics skipped on images with multiple "
                    f"same-class instances (class {label}); consider an "
                    "instance segmentation phrasing")
            if entry.metric in _DISTANCE_METRICS:
                worst = diagonal
                params["worst_value"] = diagonal
            else:
                worst = 0.0
            value, n_excluded = _aggregate_cases(values, entry.metric, agg,
                                                 groups, worst)
            ci = _bootstrap(
                lambda idx, vals=values: _aggregate_cases(
                    [vals[i] for i in idx], entry.metric, agg,
                    [groups[i] for i in idx] if groups else None, worst)[0],
                len(values), groups, agg)
            report.rows.append(ReportRow(entry.metric, scope, value, ci=ci,
                                         n_cases=len(values),
                                         n_excluded=n_excluded, params=params))
            per_class_values.setdefault(entry.metric, {})[class_index] = value
    for metric, per_class in per_class_values.items():
        _add_class_aggregate(report, metric, per_class, pool, {})


# ---------------------------------------------------------------------------
# ObD / InS
# ---------------------------------------------------------------------------


def _build_criterion(pool: MetricPool, report: Report) -> LocalizationCriterion:
    spec = pool.detection.get("criterion")
    if not spec:
        raise EvaluationError("pool carries no localization criterion")
    spec = dict(spec)
    kind = spec.pop("kind")
    thresholds = pool.detection.get("thresholds")
    if kind == "center-distance":
        threshold = spec.get("threshold")
        if isinstance(threshold, str):
            raise EvaluationError(
                "center-distance needs a concrete distance threshold in the "
                "pool file")
        return LocalizationCriterion(kind, threshold=threshold)
    if kind in ("point-inside", "mask-iou-gt-zero"):
        return LocalizationCriterion(kind)
    width = float(spec.get("boundary_width", 2.0))
    return LocalizationCriterion(kind, threshold=thresholds or [0.5],
                                 boundary_width=width)


def _build_strategy(pool: MetricPool) -> AssignmentStrategy:
    spec = pool.detection.get("assignment")
    if not spec:
        raise EvaluationError("pool carries no assignment strategy")
    return AssignmentStrategy(spec["kind"],
                              bool(spec.get("punish_double_assignments", True)),
                              bool(spec.get("allow_multi_reference", False)))


def _detection_scores(matches: Mapping[float, list[MatchResult]],
                      predictions: list[InstanceSet],
                      references: list[InstanceSet],
                      class_index: int,
                      threshold: float) -> list[DetectionScores]:
    images = []
    for i, match in enumerate(matches[threshold]):
        preds = [p for p in predictions[i].of_class(class_index)]
        matched = {pair[0] for pair in match.pairs}
        counted = set(range(len(preds))) - set(match.dropped_predictions)
        scores = [preds[k].score for k in sorted(counted)]
        flags = [k in matched for k in sorted(counted)]
        images.append(DetectionScores(np.asarray(scores, dtype=float),
                                      np.asarray(flags, dtype=bool),
                                      len(references[i].of_class(class_index))))
    return images


def _evaluate_detection(dataset: Dataset, pool: MetricPool,
                        agg: AggregationSpec, report: Report) -> None:
    criterion = _build_criterion(pool, report)
    strategy = _build_strategy(pool)
    thresholds = criterion.threshold_list() or [None]
    groups = dataset.groups() if agg.hierarchy else None
    scored = all(case.prediction.scores_present() for case in dataset.cases)
    if strategy.kind == "greedy-by-score" and not scored:
        raise EvaluationError("greedy-by-score assignment needs prediction "
                              "scores on every instance")

    predictions = [case.prediction for case in dataset.cases]
    references = [case.reference for case in dataset.cases]
    class_indices = sorted(pool.per_class) or [1]
    detection_params = {"criterion": criterion.describe(),
                        "assignment": strategy.describe(),
                        "thresholds": [t for t in thresholds if t is not None]}

    pooled_aggregates: dict[str, dict[int, "float | Excluded"]] = {}
    for class_index in class_indices:
        label = _class_label(dataset, class_index)
        scope = f"class:{label}"
        matches: dict[float, list[MatchResult]] = {}
        for t in thresholds:
            matches[t] = [assign(_subset(predictions[i], class_index),
                                 _subset(references[i], class_index),
                                 criterion, strategy, threshold=t)
                          for i in range(len(dataset.cases))]
        for t, ms in matches.items():
            for m in ms:
                for w in m.warnings:
                    report.add_warning(w)
            key = label if t is None else f"{label}@{t:g}"
            report.match_traces[key] = [
                {"case": dataset.cases[i].case_id, **ms[i].to_json()}
                for i in range(len(ms))]

        entries = pool.per_class.get(class_index, [])
        for entry in entries:
            _detection_entry(entry, scope, class_index, matches, thresholds,
                             predictions, references, dataset, pool, agg,
                             groups, report, detection_params, scored,
                             pooled_aggregates)
    for metric, per_class in pooled_aggregates.items():
        _add_class_aggregate(report, metric, per_class, pool,
                             dict(detection_params))


def _subset(instances: InstanceSet, class_index: int) -> InstanceSet:
    return InstanceSet(instances.of_class(class_index),
                       image_shape=instances.image_shape,
                       spacing=instances.spacing)


def _mean_over_thresholds(values: list) -> "float | Excluded":
    numeric = [v for v in values if not is_excluded(v)]
    if not numeric:
        return values[0] if values else Excluded("no thresholds")
    return float(np.mean(numeric))


def _detection_entry(entry: PoolEntry, scope: str, class_index: int,
                     matches, thresholds, predictions, references,
                     dataset: Dataset, pool: MetricPool, agg: AggregationSpec,
                     groups, report: Report, detection_params: dict,
                     scored: bool, pooled_aggregates: dict) -> None:
    metric = entry.metric
    params = _echo_params(entry)
    params.update(detection_params)
    scales = pool.aggregation.get("detection_scales", ["per-dataset"])

    if metric in ("f_beta", "sensitivity", "ppv"):
        beta = float(entry.params.get("beta", 1.0))
        key = "f_beta" if metric == "f_beta" else metric
        for scale in scales:
            per_threshold = []
            per_threshold_excluded = []
            for t in thresholds:
                ms = matches[t]
                if scale == "per-dataset":
                    tp, fp, fn = per_dataset_counts(ms)
                    value = nan_policy(tp, fn=fn, fp=fp, beta=beta)[key]
                    per_threshold.append(value)
                    per_threshold_excluded.append(0)
                else:
                    case_values = [nan_policy(m.tp, fn=m.fn, fp=m.fp,
                                              beta=beta)[key] for m in ms]
                    value, n_ex = _aggregate_cases(
                        case_values, metric,
                        AggregationSpec(nan_handling="exclude",
                                        hierarchy=agg.hierarchy),
                        groups, None)
                    per_threshold.append(value)
                    per_threshold_excluded.append(n_ex)
            value = _mean_over_thresholds(per_threshold)
            row_params = dict(params)
            row_params["aggregation_scale"] = scale
            report.rows.append(ReportRow(
                metric, f"{scope}|{scale}", value,
                n_cases=len(dataset.cases),
                n_excluded=max(per_threshold_excluded), params=row_params))
            if scale == scales[0]:
                pooled_aggregates.setdefault(metric, {})[class_index] = value
        return

    if metric == "pq":
        per_threshold = []
        sq_values, dq_values = [], []
        for t in thresholds:
            pq = panoptic_quality(matches[t])
            per_threshold.append(pq.value)
            sq_values.append(pq.segmentation_quality)
            dq_values.append(pq.detection_quality)
        value = _mean_over_thresholds(per_threshold)
        params["segmentation_quality"] = _json_safe(_mean_over_thresholds(sq_values))
        params["detection_quality"] = _json_safe(_mean_over_thresholds(dq_values))
        report.rows.append(ReportRow(metric, scope, value,
                                     n_cases=len(dataset.cases), params=params))
        pooled_aggregates.setdefault(metric, {})[class_index] = value
        return

    if metric in ("average_precision", "froc_score"):
        if not scored:
            report.add_warning(f"{metric} skipped: prediction scores missing")
            return
        per_threshold = []
        for t in thresholds:
            images = _detection_scores(matches, predictions, references,
                                       class_index, t)
            if metric == "average_precision":
                mode = entry.params.get("aggregation", "per-dataset")
                per_threshold.append(thr.detection_average_precision(images, mode))
                curve = thr.detection_pr_curve(images)
                if not is_excluded(curve):
                    report.curves[f"pr_{scope}"] = curve.to_csv()
            else:
                grid = entry.params.get("fppi_grid", cnt.DEFAULT_FPPI_GRID)
                per_threshold.append(thr.froc_score(images, grid))
                curve = thr.froc_curve(images)
                if not is_excluded(curve):
                    report.curves[f"froc_{scope}"] = curve.to_csv()
        value = _mean_over_thresholds(per_threshold)
        report.rows.append(ReportRow(metric, scope, value,
                                     n_cases=len(dataset.cases), params=params))
        pooled_aggregates.setdefault(metric, {})[class_index] = value
        return

    if metric == "metric_at_target":
        if not scored:
            report.add_warning("target readout skipped: prediction scores "
                               "missing")
            return
        target_value = float(entry.params.get("target_value", 0.95))
        per_threshold = {}
        for t in thresholds:
            images = _detection_scores(matches, predictions, references,
                                       class_index, t)
            readout = _detection_target_readout(images, target_value)
            for name, v in readout.items():
                per_threshold.setdefault(name, []).append(v)
        suffix = f"@(sensitivity={target_value:g})"
        for name, values in per_threshold.items():
            report.rows.append(ReportRow(f"{name}{suffix}", scope,
                                         _mean_over_thresholds(values),
                                         n_cases=len(dataset.cases),
                                         params=params))
        return

    if entry.slot in ("overlap", "boundary"):
        _instance_segmentation_entry(entry, scope, class_index, matches,
                                     thresholds, predictions, references,
                                     report, params)
        return
    raise EvaluationError(f"unsupported detection metric {metric!r}")


def _detection_target_readout(images: list[DetectionScores],
                              target: float) -> dict:
    """Sensitivity target on the pooled detection sweep; PPV and FPPI at the
    chosen score cutoff."""
    n_ref = sum(im.n_reference for im in images)
    if n_ref == 0:
        e = Excluded("no reference objects")
        return {"sensitivity": e, "ppv": e, "fppi": e}
    all_scores = np.concatenate([im.scores for im in images])
    cuts = np.concatenate([np.unique(all_scores)[::-1], [-np.inf]])
    best = None
    for c in cuts:
        tp = sum(int(np.count_nonzero(im.is_tp & (im.scores >= c)))
                 for im in images)
        fp = sum(int(np.count_nonzero(~im.is_tp & (im.scores >= c)))
                 for im in images)
        sens = tp / n_ref
        ppv_v = tp / (tp + fp) if tp + fp else Excluded("no detections kept")
        fppi_v = fp / len(images)
        if sens >= target:
            candidate = (sens, ppv_v, fppi_v)
            if best is None or (not is_excluded(ppv_v)
                                and (is_excluded(best[1]) or ppv_v > best[1])):
                best = candidate
    if best is None:  # target unreachable: most permissive cutoff
        c = -np.inf
        tp = sum(int(im.is_tp.sum()) for im in images)
        fp = sum(int((~im.is_tp).sum()) for im in images)
        best = (tp / n_ref,
                tp / (tp + fp) if tp + fp else Excluded("no detections"),
                fp / len(images))
    return {"sensitivity": best[0], "ppv": best[1], "fppi": best[2]}


def _instance_segmentation_entry(entry: PoolEntry, scope: str,
                                 class_index: int, matches, thresholds,
                                 predictions, references, report: Report,
                                 params: dict) -> None:
    """Segmentation quality of matched instances, averaged per instance."""
    per_threshold = []
    for t in thresholds:
        values = []
        for i, match in enumerate(matches[t]):
            preds = _subset(predictions[i], class_index).instances
            refs = _subset(references[i], class_index).instances
            for (pi, ri, _) in match.pairs:
                pred, ref = preds[pi], refs[ri]
                if pred.mask is None or ref.mask is None:
                    continue
                ref_map = LabelMap(ref.mask.astype(np.int32),
                                   references[i].spacing)
                pred_map = LabelMap(pred.mask.astype(np.int32),
                                    predictions[i].spacing)
                values.append(_segmentation_case_value(
                    entry, ref_map, pred_map, 1, report))
        numeric = [v for v in values if not is_excluded(v)]
        per_threshold.append(float(np.mean(numeric)) if numeric
                             else Excluded("no matched instances"))
    params["per_instance"] = True
    report.rows.append(ReportRow(entry.metric, f"{scope}|per-instance",
                                 _mean_over_thresholds(per_threshold),
                                 n_cases=len(matches[thresholds[0]]),
                                 params=params))


def _json_safe(value):
    if is_excluded(value):
        return {"excluded": True, "reason": value.reason}
    return value
