"""Aggregation conventions: NaN substitution, class/case aggregation, bootstrap."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import Excluded, MetricResult

SEED_ENV_VAR = "METRICS_RELOADED_SEED"

NAN_POLICIES = ("worst-value", "exclude", "rank-then-aggregate-worst-rank")


@dataclass
class BootstrapSpec:
    resamples: int = 1000
    alpha: float = 0.05
    seed: int | None = None

    def __post_init__(self):
        if self.resamples < 100:
            raise ValueError("bootstrap needs at least 100 resamples")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.seed is None:
            env = os.environ.get(SEED_ENV_VAR)
            self.seed = int(env) if env else 0


@dataclass
class AggregationSpec:
    """How per-case values become one number."""

    nan_handling: str = "worst-value"
    class_weights: Mapping | None = None
    hierarchy: Sequence[str] = ()
    bootstrap: BootstrapSpec | None = None
    worst_values: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.nan_handling not in NAN_POLICIES:
            raise ValueError(f"nan handling must be one of {NAN_POLICIES}")
        if self.class_weights is not None:
            w = np.asarray(list(self.class_weights.values()), dtype=float)
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
                raise ValueError("class weights must be >= 0 and sum to 1")

    def to_json(self) -> dict:
        data = {"nan_handling": self.nan_handling,
                "hierarchy": list(self.hierarchy)}
        if self.class_weights is not None:
            data["class_weights"] = {str(k): v for k, v in self.class_weights.items()}
        if self.worst_values:
            data["worst_values"] = dict(self.worst_values)
        if self.bootstrap is not None:
            data["bootstrap"] = {"resamples": self.bootstrap.resamples,
                                 "alpha": self.bootstrap.alpha,
                                 "seed": self.bootstrap.seed}
        return data

    @classmethod
    def from_json(cls, data: Mapping) -> "AggregationSpec":
        boot = data.get("bootstrap")
        weights = data.get("class_weights")
        return cls(
            nan_handling=data.get("nan_handling", "worst-value"),
            class_weights={k: float(v) for k, v in weights.items()} if weights else None,
            hierarchy=tuple(data.get("hierarchy", ())),
            bootstrap=BootstrapSpec(**boot) if boot else None,
            worst_values=dict(data.get("worst_values", {})),
        )


#: documented worst values for metrics bounded on [0, 1] (higher is better)
_UNIT_INCREASING = {"dsc", "iou", "f_beta", "nsd", "boundary_iou", "cl_dice",
                    "sensitivity", "specificity", "ppv", "npv", "accuracy",
                    "balanced_accuracy", "auroc", "average_precision",
                    "froc_score", "pq"}


def worst_value_for(metric_id: str, spec: AggregationSpec) -> float | None:
    if metric_id in spec.worst_values:
        return float(spec.worst_values[metric_id])
    if metric_id in _UNIT_INCREASING:
        return 0.0
    return None


def _substitute(values: Sequence, metric_id: str,
                spec: AggregationSpec) -> tuple[list[float], int]:
    """Resolve excluded markers per policy; returns (values, n_excluded)."""
    out: list[float] = []
    excluded = 0
    for v in values:
        if isinstance(v, Excluded):
            excluded += 1
            if spec.nan_handling == "worst-value":
                worst = worst_value_for(metric_id, spec)
                if worst is None:
                    raise ValueError(
                        f"no worst value documented for {metric_id!r}; set one "
                        "in the aggregation spec (e.g. the image diagonal for "
                        "distance metrics)")
                out.append(worst)
            # exclude: drop the value entirely
        else:
            out.append(float(v))
    return out, excluded


def hierarchical_mean(values: Sequence[float],
                      groups: Sequence[tuple] | None) -> float:
    """Innermost-first mean over the grouping hierarchy.

    `groups` gives one key tuple per value, outermost key first; equal-depth
    prefixes are averaged before the next level up.
    """
    if groups is None:
        return float(np.mean(values))
    if len(groups) != len(values):
        raise ValueError("one group key per value required")

    def reduce_level(vals: list[float], keys: list[tuple]) -> float:
        if not keys or not keys[0]:
            return float(np.mean(vals))
        buckets: dict[object, tuple[list[float], list[tuple]]] = {}
        for v, k in zip(vals, keys):
            head, rest = k[0], k[1:]
            buckets.setdefault(head, ([], []))
            buckets[head][0].append(v)
            buckets[head][1].append(rest)
        return float(np.mean([reduce_level(v, k) for v, k in buckets.values()]))

    return reduce_level(list(map(float, values)), list(groups))


def _rank_aggregate(values: Sequence) -> float:
    """Mean rank with excluded cases pinned to the worst rank (ties averaged)."""
    n = len(values)
    numeric = [(i, float(v)) for i, v in enumerate(values)
               if not isinstance(v, Excluded)]
    ranks = np.zeros(n)
    numeric.sort(key=lambda t: t[1])
    i = 0
    while i < len(numeric):
        j = i
        while j < len(numeric) and numeric[j][1] == numeric[i][1]:
            j += 1
        mean_rank = (i + 1 + j) / 2.0
        for k in range(i, j):
            ranks[numeric[k][0]] = mean_rank
        i = j
    worst = float(n)
    for i, v in enumerate(values):
        if isinstance(v, Excluded):
            ranks[i] = worst
    return float(ranks.mean())


def aggregate(results: Sequence[MetricResult], spec: AggregationSpec,
              groups: Sequence[tuple] | None = None) -> MetricResult:
    """Fold per-case metric results into one value with provenance.

    Steps: NaN policy, innermost-first hierarchical means, optional bootstrap
    CI resampling at the outermost hierarchy level.
    """
    if not results:
        raise ValueError("nothing to aggregate")
    metric_ids = {r.metric_id for r in results}
    if len(metric_ids) != 1:
        raise ValueError(f"mixed metric ids: {sorted(metric_ids)}")
    metric_id = results[0].metric_id
    raw = [r.value for r in results]

    provenance: dict = {"n_cases": len(results), "nan_handling": spec.nan_handling}
    if spec.nan_handling == "rank-then-aggregate-worst-rank":
        value: "float | Excluded" = _rank_aggregate(raw)
        provenance["aggregate"] = "mean-rank"
        n_excluded = sum(isinstance(v, Excluded) for v in raw)
    else:
        values, n_excluded = _substitute(raw, metric_id, spec)
        if spec.nan_handling == "exclude" and groups is not None:
            groups = [g for g, v in zip(groups, raw) if not isinstance(v, Excluded)]
        if not values:
            value = Excluded("all cases excluded")
        else:
            value = hierarchical_mean(values, groups)
        provenance["aggregate"] = ("hierarchical-mean"
                                   if groups is not None else "mean")
    provenance["n_excluded"] = n_excluded

    ci = None
    if spec.bootstrap is not None and not isinstance(value, Excluded):
        ci = _bootstrap_ci(raw, groups, metric_id, spec)
        provenance["bootstrap"] = {"resamples": spec.bootstrap.resamples,
                                   "alpha": spec.bootstrap.alpha,
                                   "seed": spec.bootstrap.seed}
        provenance["ci"] = ci
    params = dict(results[0].params)
    return MetricResult(metric_id, value, params=params, provenance=provenance)


def _bootstrap_ci(raw: Sequence, groups: Sequence[tuple] | None,
                  metric_id: str, spec: AggregationSpec) -> list[float]:
    """Percentile bootstrap resampling the outermost hierarchy level."""
    boot = spec.bootstrap
    rng = np.random.default_rng(boot.seed)
    if groups is None:
        units: list[list[int]] = [[i] for i in range(len(raw))]
    else:
        by_top: dict[object, list[int]] = {}
        for i, g in enumerate(groups):
            key = g[0] if g else i
            by_top.setdefault(key, []).append(i)
        units = list(by_top.values())
    stats = []
    for _ in range(boot.resamples):
        chosen = rng.integers(0, len(units), size=len(units))
        idx = [i for u in chosen for i in units[u]]
        sub_raw = [raw[i] for i in idx]
        sub_groups = ([groups[i] for i in idx] if groups is not None else None)
        try:
            values, _ = _substitute(sub_raw, metric_id, spec)
        except ValueError:
            continue
        if spec.nan_handling == "exclude" and sub_groups is not None:
            sub_groups = [g for g, v in zip(sub_groups, sub_raw)
                          if not isinstance(v, Excluded)]
        if not values:
            continue
        stats.append(hierarchical_mean(values, sub_groups))
    if not stats:
        return []
    lo = float(np.percentile(stats, 100 * boot.alpha / 2))
    hi = float(np.percentile(stats, 100 * (1 - boot.alpha / 2)))
    return [lo, hi]


def aggregate_classes(per_class: Mapping[int, "float | Excluded"],
                      weights: Mapping[int, float] | None = None) -> "float | Excluded":
    """Macro mean by default; weighted mean when weights are given."""
    numeric = {k: v for k, v in per_class.items() if not isinstance(v, Excluded)}
    if not numeric:
        return Excluded("all classes excluded")
    if weights is None:
        return float(np.mean(list(numeric.values())))
    total = sum(weights.get(k, 0.0) for k in numeric)
    if total == 0:
        return Excluded("zero total class weight")
    return float(sum(weights.get(k, 0.0) * v for k, v in numeric.items()) / total)


def decimal_report(value: "float | Excluded",
                   high_reference_variability: bool = False) -> str:
    """Rounded textual report: two decimals, one under high rater variability."""
    if isinstance(value, Excluded):
        return f"n/a (excluded: {value.reason})"
    digits = 1 if high_reference_variability else 2
    return f"{value:.{digits}f}"
