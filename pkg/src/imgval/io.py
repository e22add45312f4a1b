"""Neutral JSON dataset format: cases of reference/prediction pairs.

No domain image formats are decoded here; grids arrive as nested arrays or
base64 little-endian uint16 blobs with a shape sidecar.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .core import (Instance, InstanceSet, LabelMap, ProblemCategory,
                   SampleSet)


class SchemaError(ValueError):
    """Raised with a location-accurate message when the input is malformed."""


@dataclass
class Case:
    case_id: str
    group: str | None
    reference: object
    prediction: object


@dataclass
class Dataset:
    category: ProblemCategory
    classes: list[str]
    cases: list[Case] = field(default_factory=list)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def groups(self) -> list[tuple]:
        return [(c.group,) if c.group is not None else (c.case_id,)
                for c in self.cases]

    def has_hierarchy(self) -> bool:
        return any(c.group is not None for c in self.cases)


def load_dataset(path: "str | Path") -> Dataset:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON at line {exc.lineno}, "
                              f"column {exc.colno}: {exc.msg}") from None
    return parse_dataset(data, source=str(path))


def parse_dataset(data: Mapping, source: str = "<memory>") -> Dataset:
    def fail(where: str, message: str):
        raise SchemaError(f"{source}: {where}: {message}")

    if not isinstance(data, Mapping):
        fail("top level", "expected a JSON object")
    try:
        category = ProblemCategory.parse(data["task"])
    except KeyError:
        fail("top level", "missing 'task'")
    except ValueError as exc:
        fail("'task'", str(exc))
    classes = data.get("classes")
    if not isinstance(classes, list) or not classes:
        fail("'classes'", "expected a non-empty list of class names")
    cases_raw = data.get("cases")
    if not isinstance(cases_raw, list):
        fail("'cases'", "expected a list")
    cases = []
    for idx, raw in enumerate(cases_raw):
        where = f"cases[{idx}]"
        if not isinstance(raw, Mapping):
            fail(where, "expected an object")
        case_id = str(raw.get("id", idx))
        where = f"cases[{idx}] (id={case_id})"
        group = raw.get("group")
        if "reference" not in raw or "prediction" not in raw:
            fail(where, "needs 'reference' and 'prediction'")
        try:
            ref = _parse_payload(category, raw["reference"], len(classes),
                                 is_prediction=False)
            pred = _parse_payload(category, raw["prediction"], len(classes),
                                  is_prediction=True)
        except SchemaError:
            raise
        except (ValueError, KeyError, TypeError) as exc:
            fail(where, str(exc))
        if category in (ProblemCategory.SemS,) and ref.shape != pred.shape:
            fail(where, "reference and prediction shapes differ")
        cases.append(Case(case_id, group, ref, pred))
    return Dataset(category, list(classes), cases)


def _parse_payload(category: ProblemCategory, payload, n_classes: int,
                   is_prediction: bool):
    if category is ProblemCategory.ImLC:
        return _parse_imlc(payload, n_classes, is_prediction)
    if category is ProblemCategory.SemS:
        return _parse_labelmap(payload, n_classes)
    return _parse_instances(payload, n_classes, is_prediction)


def _parse_imlc(payload, n_classes: int, is_prediction: bool):
    if isinstance(payload, int):
        if not 0 <= payload < n_classes:
            raise ValueError(f"class index {payload} out of range")
        return payload
    if is_prediction and isinstance(payload, Mapping) and "scores" in payload:
        scores = np.asarray(payload["scores"], dtype=float)
        if scores.shape != (n_classes,):
            raise ValueError(f"expected {n_classes} class scores, "
                             f"got shape {scores.shape}")
        if np.any(scores < 0) or np.any(scores > 1):
            raise ValueError("class scores must lie in [0, 1]")
        return scores
    raise ValueError("expected a class index"
                     + (" or {'scores': [...]}" if is_prediction else ""))


def _parse_labelmap(payload, n_classes: int) -> LabelMap:
    if not isinstance(payload, Mapping):
        raise ValueError("expected a label-map object with 'shape'")
    lm = LabelMap.from_json(payload)
    if lm.values.max(initial=0) >= n_classes:
        raise ValueError(f"label map uses class index {int(lm.values.max())} "
                         f"but only {n_classes} classes are declared "
                         "(index 0 names the background)")
    return lm


def _parse_instances(payload, n_classes: int, is_prediction: bool) -> InstanceSet:
    if isinstance(payload, Mapping):
        image = payload.get("image", {})
        items = payload.get("instances", [])
    else:
        image, items = {}, payload
    if not isinstance(items, list):
        raise ValueError("expected a list of instances")
    shape = tuple(image["shape"]) if "shape" in image else None
    spacing = image.get("spacing")
    instances = []
    for k, raw in enumerate(items):
        if not isinstance(raw, Mapping):
            raise ValueError(f"instance {k}: expected an object")
        class_index = raw.get("class", 1)
        if not 1 <= class_index < n_classes:
            raise ValueError(f"instance {k}: class index {class_index} out of "
                             "range (0 names the background)")
        location = {}
        if "mask" in raw:
            mask_map = LabelMap.from_json(raw["mask"])
            location["mask"] = mask_map.values.astype(bool)
            if shape is None:
                shape = mask_map.shape
                spacing = spacing or mask_map.spacing
        elif "box" in raw:
            location["box"] = np.asarray(raw["box"], dtype=float)
        elif "point" in raw:
            location["point"] = np.asarray(raw["point"], dtype=float)
        else:
            raise ValueError(f"instance {k}: needs one of mask/box/point")
        score = raw.get("score")
        if score is not None and not is_prediction:
            raise ValueError(f"instance {k}: reference objects carry no score")
        instances.append(Instance(class_index, score=score, **location))
    return InstanceSet(instances, image_shape=shape, spacing=spacing)


def imlc_samples(dataset: Dataset) -> "SampleSet | None":
    """SampleSet when every prediction carries scores, else None."""
    scores, refs, ids, groups = [], [], [], []
    for case in dataset.cases:
        if not isinstance(case.prediction, np.ndarray):
            return None
        scores.append(case.prediction)
        refs.append(case.reference)
        ids.append(case.case_id)
        groups.append(case.group)
    return SampleSet(np.asarray(scores), refs, ids, groups)


def save_json(path: "str | Path", data) -> None:
    Path(path).write_text(canonical_json(data) + "\n")


def canonical_json(data) -> str:
    """Stable serialization: CLI and HTTP emit byte-identical documents."""
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False)
