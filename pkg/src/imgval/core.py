"""Shared domain types: fingerprints, categories, data inputs, metric results.

Conventions used throughout the package:

* class index 0 is background for SemS/ObD/InS tasks; ImLC has no background
* physical spacing defaults to 1.0 per axis, distance metrics report in
  spacing units
* a metric value that cannot be computed is an :class:`Excluded` marker,
  never a bare NaN
"""

from __future__ import annotations

import base64
import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np


class ProblemCategory(str, enum.Enum):
    """The four supported problem categories."""

    ImLC = "ImLC"
    SemS = "SemS"
    ObD = "ObD"
    InS = "InS"

    @classmethod
    def parse(cls, value: "str | ProblemCategory") -> "ProblemCategory":
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            raise ValueError(f"unknown problem category: {value!r}") from None


PIXEL_CATEGORIES = (ProblemCategory.SemS, ProblemCategory.InS)
OBJECT_CATEGORIES = (ProblemCategory.ObD, ProblemCategory.InS)


@dataclass(frozen=True)
class Excluded:
    """Marker for a metric value excluded under a declared NaN policy."""

    reason: str

    def __repr__(self) -> str:
        return f"Excluded({self.reason!r})"


MetricValue = "float | Excluded"


def is_excluded(value) -> bool:
    return isinstance(value, Excluded)


# ---------------------------------------------------------------------------
# Fingerprint items
# ---------------------------------------------------------------------------

#: kind is "bool", "enum" or "int"; domain lists the admissible values for
#: enum items. Prompts/why texts feed the interactive wizard.
@dataclass(frozen=True)
class ItemSpec:
    item_id: str
    kind: str
    prompt: str
    why: str
    domain: tuple = ()
    per_class: bool = False


_I = ItemSpec

FINGERPRINT_ITEMS: dict[str, ItemSpec] = {
    s.item_id: s
    for s in [
        _I("FP1.1", "enum", "Problem category",
           "The category groups problems by similarity of validation and "
           "selects which selection steps apply.",
           ("ImLC", "SemS", "ObD", "InS")),
        _I("FP2.1", "bool", "Are structure boundaries of particular importance?",
           "Boundary interest calls for boundary-based metrics and, for "
           "object-level tasks, for fine-granular localization."),
        _I("FP2.2", "bool", "Is the structure volume of particular importance?",
           "Volume interest warrants complementing the pool with "
           "application-specific volume metrics."),
        _I("FP2.3", "bool", "Is the structure center(line) of particular importance?",
           "Center interest favours centerline-aware overlap metrics and "
           "center-based localization criteria."),
        _I("FP2.4", "enum", "Desired granularity of localization",
           "Rough outlines require overlap criteria; pure positions allow "
           "center- or point-based criteria.",
           ("overall-position", "rough-outline")),
        _I("FP2.5.1", "bool", "Is there unequal interest across classes?",
           "Unequal interest switches class aggregation to weighted "
           "averaging and affects the multi-class metric choice."),
        _I("FP2.5.2", "bool", "Is there unequal severity of class confusions?",
           "Unequal severity requires metrics that accept per-confusion "
           "costs."),
        _I("FP2.5.3", "bool",
           "Is there a mismatch between class prevalences and class importance?",
           "A mismatch makes prevalence-weighted scores misleading and "
           "favours explicitly re-weighted metrics."),
        _I("FP2.5.4", "bool", "Are costs for class confusions available?",
           "Cost-sensitive metrics need a cost matrix; without one only "
           "cost-free metrics can be recommended."),
        _I("FP2.5.5", "bool", "Should class imbalances be compensated for?",
           "Compensation replaces prevalence-dependent metrics with "
           "prevalence-independent ones."),
        _I("FP2.5.6", "enum", "How should outliers be penalized?",
           "Existence-based penalization leads to tolerance/band metrics; "
           "distance-based penalization leads to average or maximum "
           "distances.",
           ("existence", "distance-contour-focus", "distance-outlier-focus")),
        _I("FP2.5.7", "bool", "Should annotation imprecisions be compensated for?",
           "Compensation selects boundary metrics with a tolerance "
           "parameter."),
        _I("FP2.5.8", "bool", "Should double assignments be punished?",
           "Punishing counts surplus predictions of the same reference as "
           "false positives instead of dropping them."),
        _I("FP2.6", "enum", "Decision rule applied to predicted class scores",
           "The decision rule determines whether fixed-matrix counting "
           "metrics apply and how their threshold is obtained.",
           ("target-value", "optimization", "argmax", "cost-benefit", "none")),
        _I("FP2.7.1", "bool", "Is calibration assessment requested?",
           "Calibration metrics are only added when the reliability of the "
           "predicted class scores matters for the application."),
        _I("FP2.7.2", "enum", "Comparative calibration use case",
           "U1 compares re-calibration methods on one classifier, U2 "
           "compares calibration across classifiers, U3 compares overall "
           "performance.",
           ("U1", "U2", "U3", "none")),
        _I("FP2.7.3", "enum", "Interest in output interpretability",
           "Determines whether the calibration error is assessed in "
           "isolation or jointly with discrimination.",
           ("calibration-only", "joint-with-discrimination", "none")),
        _I("FP3.1", "bool", "Are target structures small relative to the grid?",
           "Small structures make overlap metrics unstable; with noisy "
           "references they are dropped in favour of boundary metrics.",
           per_class=True),
        _I("FP3.2", "bool", "Is the variability of structure sizes high?",
           "High variability warrants size stratification and lower "
           "localization thresholds.",
           per_class=True),
        _I("FP3.3", "bool", "Do target structures have a tubular shape?",
           "Tubular structures favour centerline-aware overlap metrics and "
           "point-based localization.",
           per_class=True),
        _I("FP3.4", "bool", "Do the labels have a hierarchical structure?",
           "Hierarchical labels call for application-specific compliance "
           "metrics.",
           per_class=True),
        _I("FP3.5", "bool", "Can target structures touch or overlap?",
           "Touching structures favour instance-aware phrasing, IoR "
           "criteria and higher localization thresholds.",
           per_class=True),
        _I("FP3.6", "bool", "Can a target structure be disconnected?",
           "Disconnected structures are poorly represented by boxes and "
           "centers.",
           per_class=True),
        _I("FP4.1", "bool", "Is there high class imbalance?",
           "Imbalance makes prevalence-dependent metrics misleading."),
        _I("FP4.2", "bool", "Do class prevalences reflect the population of interest?",
           "Only then are prevalence-dependent metrics transferable to the "
           "target application."),
        _I("FP4.3.1", "bool", "May the reference annotation be noisy?",
           "Noisy references favour tolerance-based metrics and lower "
           "localization thresholds."),
        _I("FP4.3.2", "bool", "Are spatial outliers possible in the reference?",
           "Outliers in the reference rule out maximum-distance metrics."),
        _I("FP4.4", "enum", "Granularity of the provided reference annotations",
           "The reference representation constrains which localization "
           "criteria are computable.",
           ("exact-outline", "rough-outline", "center-point")),
        _I("FP4.5", "bool", "Are test cases non-independent (hierarchical data)?",
           "Non-independence requires hierarchical aggregation of metric "
           "values."),
        _I("FP4.6", "bool", "Can the reference be empty (no target structure)?",
           "Empty references trigger the per-image NaN policy during "
           "aggregation."),
        _I("FP5.1", "bool", "Are continuous class scores available?",
           "Scores enable multi-threshold metrics, score-based matching and "
           "calibration assessment."),
        _I("FP5.2", "bool", "Can the prediction be empty?",
           "Empty predictions trigger the per-image NaN policy during "
           "aggregation."),
        _I("FP5.3", "bool", "Are invalid predictions possible?",
           "Invalid predictions require a documented aggregation strategy."),
        _I("FP5.4", "bool", "Are overlapping predictions possible?",
           "Overlap rules out the 'overlap > 0.5' assignment shortcut."),
        # category-mapping pseudo items (subprocess S1)
        _I("S1.image-level", "bool",
           "Are categorical labels assigned to the image (or a predefined "
           "region) as a whole?",
           "Whole-image labels make the problem an image-level "
           "classification task regardless of what the image shows."),
        _I("S1.multiple-instances", "bool",
           "Can multiple distinct structures of the same class occur, and is "
           "identifying them individually of interest?",
           "Distinguishing instances requires object-level validation; a "
           "single region per class is validated at pixel level."),
    ]
}

PER_CLASS_ITEMS = tuple(s.item_id for s in FINGERPRINT_ITEMS.values() if s.per_class)


class IncompleteFingerprint(ValueError):
    """Raised when recommendation needs items the fingerprint does not set."""

    def __init__(self, missing: Sequence[str]):
        self.missing = sorted(set(missing))
        super().__init__("missing fingerprint items: " + ", ".join(self.missing))


@dataclass
class ProblemFingerprint:
    """Typed record of all fingerprint items driving metric recommendation.

    Items irrelevant to the category may be unset. Relevant-item
    completeness is category dependent and checked by the recommendation
    engine. ``per_class`` may override FP3.* items for individual foreground
    classes (keyed by class index).
    """

    category: ProblemCategory
    class_count: int
    items: dict[str, object] = field(default_factory=dict)
    per_class: dict[int, dict[str, object]] = field(default_factory=dict)

    def __post_init__(self):
        self.category = ProblemCategory.parse(self.category)
        if self.category is ProblemCategory.ImLC:
            if self.class_count < 2:
                raise ValueError("ImLC requires class_count >= 2")
        elif self.class_count < 1:
            raise ValueError("class_count must be >= 1 (foreground classes)")
        for key, value in self.items.items():
            _validate_item(key, value)
        for cls, overrides in self.per_class.items():
            for key, value in overrides.items():
                if key not in PER_CLASS_ITEMS:
                    raise ValueError(f"{key} cannot be overridden per class")
                _validate_item(key, value)

    def get(self, item_id: str, class_index: int | None = None):
        """Value of an item, honouring per-class overrides; None if unset."""
        if class_index is not None:
            override = self.per_class.get(class_index, {})
            if item_id in override:
                return override[item_id]
        if item_id == "FP1.1":
            return self.category.value
        return self.items.get(item_id)

    def with_items(self, **kv) -> "ProblemFingerprint":
        items = dict(self.items)
        items.update({k.replace("_", "."): v for k, v in kv.items()})
        return ProblemFingerprint(self.category, self.class_count, items,
                                  {k: dict(v) for k, v in self.per_class.items()})

    def foreground_classes(self) -> list[int]:
        if self.category is ProblemCategory.ImLC:
            return list(range(self.class_count))
        return list(range(1, self.class_count + 1))

    # -- serialization: flat JSON keyed by "FP2.5.2"-style strings ----------
    def to_json(self) -> dict:
        data: dict[str, object] = {"FP1.1": self.category.value,
                                   "class-count": self.class_count}
        data.update({k: v for k, v in sorted(self.items.items())})
        if self.per_class:
            data["per-class"] = {
                str(c): dict(sorted(o.items())) for c, o in sorted(self.per_class.items())
            }
        return data

    @classmethod
    def from_json(cls, data: Mapping) -> "ProblemFingerprint":
        data = dict(data)
        category = data.pop("FP1.1", None)
        if category is None:
            raise ValueError("fingerprint file must set FP1.1 (problem category)")
        count = data.pop("class-count", None)
        if count is None:
            raise ValueError("fingerprint file must set class-count")
        per_class = {
            int(c): dict(o) for c, o in dict(data.pop("per-class", {})).items()
        }
        unknown = [k for k in data if k not in FINGERPRINT_ITEMS]
        if unknown:
            raise ValueError(f"unknown fingerprint items: {sorted(unknown)}")
        return cls(ProblemCategory.parse(category), int(count), dict(data), per_class)


def _validate_item(item_id: str, value: object) -> None:
    spec = FINGERPRINT_ITEMS.get(item_id)
    if spec is None:
        raise ValueError(f"unknown fingerprint item {item_id!r}")
    if spec.kind == "bool" and not isinstance(value, bool):
        raise ValueError(f"{item_id} expects a boolean, got {value!r}")
    if spec.kind == "enum" and value not in spec.domain:
        raise ValueError(f"{item_id} expects one of {spec.domain}, got {value!r}")


# ---------------------------------------------------------------------------
# Confusion matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BinaryCounts:
    """TP/FP/FN/TN cardinalities of a binary confusion matrix."""

    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


class ConfusionMatrix:
    """C x C integer counts, entry (i, j) = cases of true class i decided as j."""

    def __init__(self, counts, class_labels: Sequence | None = None):
        counts = np.asarray(counts)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ValueError("confusion matrix must be square")
        if np.any(counts < 0):
            raise ValueError("confusion matrix entries must be non-negative")
        if not np.issubdtype(counts.dtype, np.integer):
            rounded = np.rint(counts)
            if not np.allclose(counts, rounded):
                raise ValueError("confusion matrix entries must be integers")
            counts = rounded.astype(np.int64)
        self.counts = counts.astype(np.int64)
        self.counts.setflags(write=False)
        self.class_labels = (list(class_labels) if class_labels is not None
                             else list(range(counts.shape[0])))
        if len(self.class_labels) != counts.shape[0]:
            raise ValueError("class_labels length must match matrix size")

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def row_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def col_totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    def binary(self, positive: int = 1) -> BinaryCounts:
        """TP/FP/FN/TN; defined only for C = 2 with a designated positive class."""
        if self.n_classes != 2:
            raise ValueError("binary cardinalities require a 2x2 matrix")
        if positive not in (0, 1):
            raise ValueError("positive class index must be 0 or 1")
        neg = 1 - positive
        c = self.counts
        return BinaryCounts(tp=int(c[positive, positive]), fp=int(c[neg, positive]),
                            fn=int(c[positive, neg]), tn=int(c[neg, neg]))

    def one_vs_rest(self, class_index: int) -> "ConfusionMatrix":
        """Collapse to a binary matrix with `class_index` as positive (index 1)."""
        if not 0 <= class_index < self.n_classes:
            raise ValueError("class index out of range")
        c = self.counts
        tp = c[class_index, class_index]
        fn = c[class_index, :].sum() - tp
        fp = c[:, class_index].sum() - tp
        tn = c.sum() - tp - fn - fp
        return ConfusionMatrix([[tn, fp], [fn, tp]],
                               ["rest", self.class_labels[class_index]])

    @classmethod
    def from_binary_counts(cls, tp: int, fp: int, fn: int, tn: int,
                           labels=("negative", "positive")) -> "ConfusionMatrix":
        return cls([[tn, fp], [fn, tp]], labels)

    def __eq__(self, other) -> bool:
        return (isinstance(other, ConfusionMatrix)
                and np.array_equal(self.counts, other.counts))

    def __repr__(self) -> str:
        return f"ConfusionMatrix({self.counts.tolist()})"


def confusion_from_labels(reference: Sequence[int], predicted: Sequence[int],
                          n_classes: int,
                          class_labels: Sequence | None = None) -> ConfusionMatrix:
    """Count (reference, predicted) pairs into a C x C confusion matrix."""
    ref = np.asarray(reference, dtype=np.int64)
    pred = np.asarray(predicted, dtype=np.int64)
    if ref.shape != pred.shape or ref.ndim != 1:
        raise ValueError("reference and predicted must be 1-D and equally long")
    if ref.size and (ref.min() < 0 or pred.min() < 0
                     or ref.max() >= n_classes or pred.max() >= n_classes):
        raise ValueError("class index out of range")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (ref, pred), 1)
    return ConfusionMatrix(counts, class_labels)


def confusion_from_maps(reference: "LabelMap", prediction: "LabelMap",
                        class_index: int) -> ConfusionMatrix:
    """Binary one-vs-rest pixel confusion matrix of a single image."""
    if reference.shape != prediction.shape:
        raise ValueError("reference and prediction shapes differ")
    ref = reference.values == class_index
    pred = prediction.values == class_index
    tp = int(np.count_nonzero(ref & pred))
    fp = int(np.count_nonzero(~ref & pred))
    fn = int(np.count_nonzero(ref & ~pred))
    tn = int(np.count_nonzero(~ref & ~pred))
    return ConfusionMatrix.from_binary_counts(tp=tp, fp=fp, fn=fn, tn=tn)


# ---------------------------------------------------------------------------
# Dense grids and instances
# ---------------------------------------------------------------------------


class LabelMap:
    """Dense 2-D or 3-D grid of class indices with physical spacing."""

    def __init__(self, values, spacing: Sequence[float] | None = None):
        values = np.asarray(values)
        if values.ndim not in (2, 3):
            raise ValueError("label maps must be 2-D or 3-D")
        if values.size == 0:
            raise ValueError("label maps must be non-empty")
        if np.any(values < 0):
            raise ValueError("class indices must be >= 0")
        self.values = values.astype(np.int32)
        self.values.setflags(write=False)
        if spacing is None:
            spacing = (1.0,) * values.ndim
        spacing = tuple(float(s) for s in spacing)
        if len(spacing) != values.ndim or any(s <= 0 for s in spacing):
            raise ValueError("spacing must give a positive extent per axis")
        self.spacing = spacing

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    def mask(self, class_index: int) -> np.ndarray:
        return self.values == class_index

    def diagonal(self) -> float:
        """Physical length of the image diagonal (worst case for distances)."""
        return math.sqrt(sum((n * s) ** 2 for n, s in zip(self.shape, self.spacing)))

    def __eq__(self, other) -> bool:
        return (isinstance(other, LabelMap) and self.spacing == other.spacing
                and np.array_equal(self.values, other.values))

    # -- JSON codec: nested lists or base64 little-endian uint16 ------------
    def to_json(self, raw: bool = False) -> dict:
        data: dict[str, object] = {"shape": list(self.shape),
                                   "spacing": list(self.spacing)}
        if raw:
            buf = self.values.astype("<u2").tobytes()
            data["b64"] = base64.b64encode(buf).decode("ascii")
        else:
            data["values"] = self.values.tolist()
        return data

    @classmethod
    def from_json(cls, data: Mapping) -> "LabelMap":
        shape = tuple(int(n) for n in data["shape"])
        spacing = data.get("spacing")
        if "b64" in data:
            buf = base64.b64decode(data["b64"])
            values = np.frombuffer(buf, dtype="<u2").reshape(shape)
        elif "values" in data:
            values = np.asarray(data["values"])
            if values.shape != shape:
                raise ValueError("label map values do not match declared shape")
        else:
            raise ValueError("label map needs either 'values' or 'b64'")
        return cls(values, spacing)


@dataclass
class Instance:
    """One detected or annotated object: class plus a location representation."""

    class_index: int
    mask: np.ndarray | None = None
    box: np.ndarray | None = None       # (ndim, 2) per-axis [min, max]
    point: np.ndarray | None = None     # (ndim,) coordinate
    score: float | None = None

    def __post_init__(self):
        reps = [r is not None for r in (self.mask, self.box, self.point)]
        if sum(reps) != 1:
            raise ValueError("instance needs exactly one of mask/box/point")
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool)
        if self.box is not None:
            self.box = np.asarray(self.box, dtype=float)
            if self.box.ndim != 2 or self.box.shape[1] != 2:
                raise ValueError("box must be (ndim, 2) [min, max] per axis")
            if np.any(self.box[:, 0] > self.box[:, 1]):
                raise ValueError("box min must be <= max per axis")
        if self.point is not None:
            self.point = np.asarray(self.point, dtype=float)
        if self.score is not None and not 0.0 <= self.score <= 1.0:
            raise ValueError("scores must lie in [0, 1]")

    @property
    def kind(self) -> str:
        if self.mask is not None:
            return "mask"
        return "box" if self.box is not None else "point"

    def size(self, spacing: Sequence[float] | None = None) -> float:
        """Pixel count (masks), volume (boxes) or 0 (points)."""
        if self.mask is not None:
            return float(np.count_nonzero(self.mask))
        if self.box is not None:
            return float(np.prod(self.box[:, 1] - self.box[:, 0]))
        return 0.0


class InstanceSet:
    """Per-image collection of instances, with an optional common grid shape."""

    def __init__(self, instances: Iterable[Instance],
                 image_shape: tuple[int, ...] | None = None,
                 spacing: Sequence[float] | None = None):
        self.instances = list(instances)
        self.image_shape = tuple(image_shape) if image_shape else None
        if self.image_shape is not None:
            for inst in self.instances:
                if inst.mask is not None and inst.mask.shape != self.image_shape:
                    raise ValueError("instance mask does not match image shape")
        ndim = len(self.image_shape) if self.image_shape else None
        if spacing is None and ndim is not None:
            spacing = (1.0,) * ndim
        self.spacing = tuple(float(s) for s in spacing) if spacing else None

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self):
        return iter(self.instances)

    def of_class(self, class_index: int) -> list[Instance]:
        return [i for i in self.instances if i.class_index == class_index]

    def scores_present(self) -> bool:
        return all(i.score is not None for i in self.instances)


@dataclass(frozen=True)
class ScoredSample:
    """Per-case predicted class-score vector plus the reference label."""

    scores: tuple[float, ...]
    reference: int
    case_id: str = ""
    group_id: str | None = None

    def __post_init__(self):
        if any(not 0.0 <= s <= 1.0 for s in self.scores):
            raise ValueError("class scores must lie in [0, 1]")
        if not 0 <= self.reference < len(self.scores):
            raise ValueError("reference class out of range")


class SampleSet:
    """Array view over a list of scored samples."""

    def __init__(self, scores, references, case_ids=None, group_ids=None):
        self.scores = np.asarray(scores, dtype=float)
        if self.scores.ndim != 2:
            raise ValueError("scores must be (n_samples, n_classes)")
        if np.any(self.scores < 0) or np.any(self.scores > 1):
            raise ValueError("class scores must lie in [0, 1]")
        self.references = np.asarray(references, dtype=np.int64)
        if self.references.shape != (self.scores.shape[0],):
            raise ValueError("references must be one label per sample")
        if self.references.size and (self.references.min() < 0
                                     or self.references.max() >= self.n_classes):
            raise ValueError("reference class out of range")
        n = self.scores.shape[0]
        self.case_ids = list(case_ids) if case_ids is not None else [str(i) for i in range(n)]
        self.group_ids = list(group_ids) if group_ids is not None else [None] * n

    @classmethod
    def from_samples(cls, samples: Sequence[ScoredSample]) -> "SampleSet":
        return cls([s.scores for s in samples], [s.reference for s in samples],
                   [s.case_id for s in samples], [s.group_id for s in samples])

    @property
    def n_samples(self) -> int:
        return self.scores.shape[0]

    @property
    def n_classes(self) -> int:
        return self.scores.shape[1]

    def subset(self, indices) -> "SampleSet":
        idx = np.asarray(indices)
        return SampleSet(self.scores[idx], self.references[idx],
                         [self.case_ids[i] for i in idx],
                         [self.group_ids[i] for i in idx])


@dataclass
class MetricResult:
    """A computed metric value with its parameters and aggregation trace."""

    metric_id: str
    value: "float | Excluded"
    per_class: dict | None = None
    params: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        def enc(v):
            if isinstance(v, Excluded):
                return {"excluded": True, "reason": v.reason}
            return v

        data = {"metric": self.metric_id, "value": enc(self.value)}
        if self.per_class is not None:
            data["per_class"] = {str(k): enc(v) for k, v in self.per_class.items()}
        if self.params:
            data["params"] = self.params
        if self.provenance:
            data["provenance"] = self.provenance
        return data
