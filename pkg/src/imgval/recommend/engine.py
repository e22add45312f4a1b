"""Traversal engine: fingerprints in, metric pools out, stepwise sessions."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from ..core import (FINGERPRINT_ITEMS, IncompleteFingerprint, ProblemCategory,
                    ProblemFingerprint)
from ..matching import OVERLAP_KINDS
from .graph import DecisionGraph
from .rules import CATEGORY_PATHS, build_graph

_GRAPH: DecisionGraph | None = None


def decision_graph() -> DecisionGraph:
    global _GRAPH
    if _GRAPH is None:
        _GRAPH = build_graph()
    return _GRAPH


def export_graph() -> dict:
    return decision_graph().to_json()


# ---------------------------------------------------------------------------
# Pool model
# ---------------------------------------------------------------------------


@dataclass
class PoolEntry:
    metric: str
    slot: str
    params: dict = field(default_factory=dict)
    optional: bool = False
    anchor: str = ""
    note: str | None = None

    def key(self) -> str:
        return json.dumps({"metric": self.metric, "slot": self.slot,
                           "params": self.params}, sort_keys=True)

    def to_json(self) -> dict:
        data = {"metric": self.metric, "slot": self.slot, "params": self.params,
                "optional": self.optional, "anchor": self.anchor}
        if self.note:
            data["note"] = self.note
        return data


@dataclass
class PendingGuide:
    key: str
    guide: str
    title: str
    slot: str
    scope: list[int] | None      # class indices or None for global
    options: list[dict]
    anchor: str

    def to_json(self) -> dict:
        return {"key": self.key, "guide": self.guide, "title": self.title,
                "slot": self.slot,
                "scope": self.scope if self.scope is not None else "global",
                "options": self.options, "anchor": self.anchor}


class MetricPool:
    """Recommended metrics with parameters, warnings and open guide choices."""

    def __init__(self, category: ProblemCategory, class_count: int,
                 version: str):
        self.category = category
        self.class_count = class_count
        self.version = version
        self.all_classes_cache: list[int] = []
        self.multi_class: list[PoolEntry] = []
        self.per_class: dict[int, list[PoolEntry]] = {}
        self.calibration: list[PoolEntry] = []
        self.detection: dict = {"criterion": None, "assignment": None,
                                "thresholds": None, "threshold_policy": None}
        self.aggregation: dict = {}
        self.warnings: list[dict] = []
        self.notes: list[str] = []
        self.pending_guides: list[PendingGuide] = []
        self.resolved_guides: list[dict] = []
        self.consulted_items: list[str] = []

    # -- mutation -----------------------------------------------------------
    def add_entry(self, entry: PoolEntry, classes: Sequence[int] | None):
        if entry.slot == "multi_class":
            bucket_list = [self.multi_class]
        elif entry.slot == "calibration":
            bucket_list = [self.calibration]
        else:
            bucket_list = [self.per_class.setdefault(c, [])
                           for c in (classes or [])]
        for bucket in bucket_list:
            if not any(e.key() == entry.key() for e in bucket):
                bucket.append(entry)

    def add_warning(self, code: str, message: str, anchor: str = ""):
        if not any(w["code"] == code and w["message"] == message
                   for w in self.warnings):
            self.warnings.append({"code": code, "message": message,
                                  "anchor": anchor})

    def add_note(self, message: str):
        if message not in self.notes:
            self.notes.append(message)

    # -- guide handling -------------------------------------------------------
    def guide_by_key(self, key: str) -> PendingGuide:
        for guide in self.pending_guides:
            if guide.key == key:
                return guide
        raise KeyError(f"no pending guide {key!r}")

    def resolve_guide(self, key: str, option_id: str) -> None:
        guide = self.guide_by_key(key)
        option = next((o for o in guide.options if o["id"] == option_id), None)
        if option is None:
            raise ValueError(
                f"guide {guide.guide} has no option {option_id!r}; choose one "
                f"of {[o['id'] for o in guide.options]}")
        _apply_effects(self, option["effects"], guide.scope, guide.anchor)
        for text in option.get("notes", []):
            self.add_note(text)
        self.pending_guides.remove(guide)
        self.resolved_guides.append({"key": key, "guide": guide.guide,
                                     "choice": option_id})

    def resolve_defaults(self) -> list[str]:
        """Resolve every pending guide to its recommended option."""
        chosen = []
        for guide in list(self.pending_guides):
            default = next((o for o in guide.options if o.get("recommended")),
                           guide.options[0])
            self.resolve_guide(guide.key, default["id"])
            chosen.append(f"{guide.key}={default['id']}")
        return chosen

    # -- introspection ---------------------------------------------------------
    def all_entries(self) -> list[PoolEntry]:
        out = list(self.multi_class) + list(self.calibration)
        for entries in self.per_class.values():
            out.extend(entries)
        return out

    def metric_ids(self, include_guide_options: bool = False) -> set[str]:
        ids = {e.metric for e in self.all_entries()}
        for e in self.all_entries():
            if e.metric == "metric_at_target":
                ids.add(e.params.get("target_metric", "sensitivity"))
                ids.update(e.params.get("report_metrics", []))
        if include_guide_options:
            for guide in self.pending_guides:
                for option in guide.options:
                    for effect in option["effects"]:
                        if effect.get("kind") == "add":
                            ids.add(effect["metric"])
        ids.discard("metric_at_target")
        return ids

    def is_empty(self) -> bool:
        return (not self.all_entries() and not self.pending_guides
                and self.detection["criterion"] is None)

    # -- serialization ----------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "version": self.version,
            "category": self.category.value,
            "class_count": self.class_count,
            "multi_class": [e.to_json() for e in self.multi_class],
            "per_class": {str(c): [e.to_json() for e in entries]
                          for c, entries in sorted(self.per_class.items())},
            "calibration": [e.to_json() for e in self.calibration],
            "detection": self.detection,
            "aggregation": self.aggregation,
            "warnings": self.warnings,
            "notes": self.notes,
            "pending_guides": [gd.to_json() for gd in self.pending_guides],
            "resolved_guides": self.resolved_guides,
            "consulted_items": self.consulted_items,
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "MetricPool":
        pool = cls(ProblemCategory.parse(data["category"]),
                   int(data["class_count"]), data.get("version", "unknown"))
        pool.multi_class = [_entry_from_json(e) for e in data.get("multi_class", [])]
        pool.per_class = {int(c): [_entry_from_json(e) for e in entries]
                          for c, entries in data.get("per_class", {}).items()}
        pool.calibration = [_entry_from_json(e) for e in data.get("calibration", [])]
        pool.detection = dict(data.get("detection", pool.detection))
        pool.aggregation = dict(data.get("aggregation", {}))
        pool.warnings = list(data.get("warnings", []))
        pool.notes = list(data.get("notes", []))
        pool.pending_guides = [
            PendingGuide(gd["key"], gd["guide"], gd["title"], gd["slot"],
                         None if gd["scope"] == "global" else list(gd["scope"]),
                         gd["options"], gd.get("anchor", ""))
            for gd in data.get("pending_guides", [])]
        pool.resolved_guides = list(data.get("resolved_guides", []))
        pool.consulted_items = list(data.get("consulted_items", []))
        return pool


def _entry_from_json(data: Mapping) -> PoolEntry:
    return PoolEntry(data["metric"], data["slot"], dict(data.get("params", {})),
                     bool(data.get("optional", False)), data.get("anchor", ""),
                     data.get("note"))


# ---------------------------------------------------------------------------
# Effects
# ---------------------------------------------------------------------------


def _apply_effects(pool: MetricPool, effects: Sequence[dict],
                   classes: Sequence[int] | None, anchor: str) -> None:
    for effect in effects:
        kind = effect["kind"]
        if kind == "add":
            pool.add_entry(PoolEntry(effect["metric"], effect["slot"],
                                     copy.deepcopy(effect.get("params", {})),
                                     effect.get("optional", False),
                                     effect.get("anchor") or anchor,
                                     effect.get("note")), classes)
        elif kind == "warn":
            pool.add_warning(effect["code"], effect["message"], anchor)
        elif kind == "note":
            pool.add_note(effect["message"])
        elif kind == "set-criterion":
            pool.detection["criterion"] = copy.deepcopy(effect["criterion"])
        elif kind == "set-assignment":
            current = pool.detection.get("assignment") or {}
            assignment = copy.deepcopy(effect["assignment"])
            for key, value in current.items():
                assignment.setdefault(key, value)
            pool.detection["assignment"] = assignment
        elif kind == "set-assignment-flag":
            assignment = pool.detection.get("assignment") or {}
            assignment["punish_double_assignments"] = effect["punish_double_assignments"]
            pool.detection["assignment"] = assignment
        elif kind == "set-thresholds":
            pool.detection["thresholds"] = list(effect["thresholds"])
            pool.detection["threshold_policy"] = effect["policy"]
        elif kind == "set-aggregation":
            pool.aggregation.update(copy.deepcopy(effect["settings"]))
        elif kind == "set-category":
            pass  # only meaningful during category mapping
        else:
            raise ValueError(f"unknown effect kind {kind!r}")


# ---------------------------------------------------------------------------
# Traversal
# ---------------------------------------------------------------------------


class _Context:
    def __init__(self, fingerprint: ProblemFingerprint, pool: MetricPool,
                 classes: Sequence[int] | None):
        self.fp = fingerprint
        self.pool = pool
        self.classes = list(classes) if classes is not None else None
        self.missing: set[str] = set()
        self.consulted: list[str] = []

    def value(self, item: str):
        if item == "class-count":
            return self.fp.class_count
        if item.startswith("pool."):
            return self._pool_item(item)
        # class groups share one override signature; any member represents it
        scope = self.classes[0] if self.classes else None
        value = self.fp.get(item, scope)
        if value is not None and item not in self.consulted:
            self.consulted.append(item)
        return value

    def _pool_item(self, item: str):
        criterion = self.pool.detection.get("criterion")
        pending_overlap = any(
            g.guide == "DG8.1" for g in self.pool.pending_guides)
        if item == "pool.criterion-overlap":
            if criterion is not None:
                return criterion["kind"] in OVERLAP_KINDS
            return pending_overlap
        if item == "pool.criterion-thresholded":
            if criterion is not None:
                return criterion["kind"] not in ("point-inside", "mask-iou-gt-zero")
            return pending_overlap
        raise KeyError(item)


def _walk(graph: DecisionGraph, node_id: str, ctx: _Context,
          probing: bool = False) -> None:
    node = graph.nodes[node_id]
    if node.kind == "end":
        return
    if node.kind == "action":
        if not probing:
            _apply_effects(ctx.pool, node.payload["effects"], ctx.classes,
                           node.anchor)
        _walk(graph, node.edges[0].target, ctx, probing)
        return
    if node.kind == "guide":
        if not probing:
            key = node.payload["guide"]
            if ctx.classes is not None and ctx.classes != ctx.pool.all_classes_cache:
                key = f"{key}@classes={','.join(map(str, ctx.classes))}"
            if any(g.key == key for g in ctx.pool.pending_guides):
                key = f"{key}#{sum(g.guide == node.payload['guide'] for g in ctx.pool.pending_guides)}"
            ctx.pool.pending_guides.append(PendingGuide(
                key, node.payload["guide"], node.payload["title"],
                node.payload["slot"], ctx.classes, node.payload["options"],
                node.anchor))
        _walk(graph, node.edges[0].target, ctx, probing)
        return
    # question or branch
    items = graph.guard_items(node)
    values = {}
    unset = []
    for item in items:
        v = ctx.value(item)
        if v is None:
            unset.append(item)
        else:
            values[item] = v
    if unset:
        ctx.missing.update(unset)
        for edge in node.edges:
            _walk(graph, edge.target, ctx, probing=True)
        return
    _walk(graph, graph.next_node(node, values), ctx, probing)


def map_category(answers: Mapping[str, object]) -> ProblemCategory:
    """Resolve the category-mapping questions to a problem category."""
    graph = decision_graph()
    node = graph.nodes[graph.entries["S1"]]
    while node.kind != "end":
        if node.kind == "action":
            effects = node.payload["effects"]
            for effect in effects:
                if effect.get("kind") == "set-category":
                    return ProblemCategory.parse(effect["category"])
            node = graph.nodes[node.edges[0].target]
            continue
        items = graph.guard_items(node)
        missing = [i for i in items if i not in answers]
        if missing:
            raise IncompleteFingerprint(missing)
        node = graph.nodes[graph.next_node(node, answers)]
    raise ValueError("category mapping ended without a category")


def _class_groups(fingerprint: ProblemFingerprint) -> list[list[int]]:
    """Classes sharing identical per-class overrides traverse together."""
    groups: dict[str, list[int]] = {}
    for cls in fingerprint.foreground_classes():
        signature = json.dumps(fingerprint.per_class.get(cls, {}), sort_keys=True)
        groups.setdefault(signature, []).append(cls)
    return list(groups.values())


def recommend(fingerprint: ProblemFingerprint) -> MetricPool:
    """Traverse the category path and assemble the metric pool.

    Raises IncompleteFingerprint listing every missing item when the
    fingerprint does not cover the consulted questions.
    """
    graph = decision_graph()
    pool = MetricPool(fingerprint.category, fingerprint.class_count,
                      graph.version)
    pool.all_classes_cache = fingerprint.foreground_classes()
    missing: set[str] = set()
    consulted: list[str] = []
    for subprocess, scope in CATEGORY_PATHS[fingerprint.category.value]:
        if scope == "global":
            ctx = _Context(fingerprint, pool, pool.all_classes_cache)
            ctx.classes = pool.all_classes_cache
            _walk(graph, graph.entries[subprocess], ctx)
            missing |= ctx.missing
            consulted.extend(i for i in ctx.consulted if i not in consulted)
        else:
            for group in _class_groups(fingerprint):
                ctx = _Context(fingerprint, pool, group)
                _walk(graph, graph.entries[subprocess], ctx)
                missing |= ctx.missing
                consulted.extend(i for i in ctx.consulted if i not in consulted)
    if missing:
        raise IncompleteFingerprint(sorted(missing))
    pool.consulted_items = consulted
    _category_level_advice(fingerprint, pool)
    return pool


def _category_level_advice(fp: ProblemFingerprint, pool: MetricPool) -> None:
    """Cross-cutting warnings and aggregation defaults outside S2-S9."""
    category = fp.category

    def item(name):
        # advisory reads: absence simply skips the advice, set values count
        # as consulted so the relevance transcript stays faithful
        value = fp.get(name)
        if value is not None and name not in pool.consulted_items:
            pool.consulted_items.append(name)
        return value

    agg = pool.aggregation
    if category in (ProblemCategory.SemS, ProblemCategory.InS):
        agg.setdefault("nan_handling", "worst-value")
        agg.setdefault("distance_worst_value", "image-diagonal")
    if category in (ProblemCategory.ObD, ProblemCategory.InS):
        agg.setdefault("detection_scales", ["per-dataset", "per-image"])
        agg.setdefault("nan_policy", "per-image")
    unequal = item("FP2.5.1")
    compensate = item("FP2.5.5")
    if unequal is False and compensate is True:
        agg.setdefault("class_aggregation", "macro")
    elif unequal is True:
        agg["class_aggregation"] = "weighted"
        agg.setdefault("class_weights", "user-provided")
    else:
        agg.setdefault("class_aggregation", "macro")
    if item("FP4.5"):
        agg["hierarchy"] = ["group"]
        pool.add_note("test cases are not independent: aggregate "
                      "hierarchically over the grouping structure")
    agg.setdefault("confidence_intervals", "bootstrap-percentile")

    if category is ProblemCategory.SemS:
        if item("FP3.5"):
            pool.add_warning(
                "category.instances",
                "structures of the same class can touch or overlap: consider "
                "phrasing the problem as instance segmentation so boundary "
                "metrics compare matched instances", "S1")
        if item("FP3.1"):
            pool.add_warning(
                "category.small-objects",
                "consistently small structures: consider phrasing the "
                "problem as object detection", "S1")
    if category in (ProblemCategory.ObD, ProblemCategory.InS):
        if item("FP3.2"):
            agg["size_stratification"] = True
            pool.add_note("validate separately per structure-size range "
                          "(size stratification)")
        if item("FP4.6") or item("FP5.2"):
            pool.add_note("empty images are resolved by the per-image "
                          "NaN policy during aggregation")
    if category is ProblemCategory.InS:
        pool.add_note("segmentation metrics are computed per matched "
                      "instance and then averaged")
    if item("FP2.2"):
        pool.add_note("structure volume matters: complement the pool with "
                      "application-specific volume metrics")
    if item("FP3.4"):
        pool.add_note("hierarchical labels: complement the pool with an "
                      "application-specific compliance metric")


# ---------------------------------------------------------------------------
# Interactive sessions
# ---------------------------------------------------------------------------


@dataclass
class QuestionDescriptor:
    item: str
    prompt: str
    why: str
    kind: str
    domain: list
    anchor: str

    def to_json(self) -> dict:
        return {"item": self.item, "prompt": self.prompt, "why": self.why,
                "kind": self.kind, "domain": self.domain, "anchor": self.anchor}


_CLASS_COUNT_QUESTION = QuestionDescriptor(
    "class-count", "How many classes does the problem distinguish?",
    "Foreground class count for pixel/object tasks, total class count for "
    "image-level classification;  per-class pools are generated from it.",
    "int", [], "S1")


class Session:
    """Stepwise fingerprint acquisition; replayable from its transcript."""

    def __init__(self, session_id: str = ""):
        self.session_id = session_id
        self.answers: dict[str, object] = {}
        self.guide_choices: list[tuple[str, str]] = []
        self.transcript: list[dict] = []
        self._pool: MetricPool | None = None

    # -- fingerprint state -------------------------------------------------
    def _category(self) -> ProblemCategory | None:
        try:
            return map_category(self.answers)
        except IncompleteFingerprint:
            return None

    def category_value(self) -> str | None:
        """Mapped problem category once the S1 answers determine it."""
        category = self._category()
        return category.value if category else None

    def _fingerprint(self) -> ProblemFingerprint | None:
        category = self._category()
        count = self.answers.get("class-count")
        if category is None or count is None:
            return None
        items = {k: v for k, v in self.answers.items()
                 if k in FINGERPRINT_ITEMS and not k.startswith("S1.")}
        items.pop("FP1.1", None)
        return ProblemFingerprint(category, int(count), items)

    def next_question(self) -> QuestionDescriptor | None:
        """First unanswered item on the current path; None when complete."""
        category = self._category()
        if category is None:
            item = self._next_s1_item()
            return _descriptor(item) if item else None
        if "class-count" not in self.answers:
            return _CLASS_COUNT_QUESTION
        fp = self._fingerprint()
        try:
            self._pool = recommend(fp)
            return None
        except IncompleteFingerprint as exc:
            return _descriptor(self._first_on_path(fp, exc.missing))

    def _next_s1_item(self) -> str | None:
        graph = decision_graph()
        node = graph.nodes[graph.entries["S1"]]
        while node.kind != "end":
            if node.kind == "action":
                node = graph.nodes[node.edges[0].target]
                continue
            for item in graph.guard_items(node):
                if item not in self.answers:
                    return item
            node = graph.nodes[graph.next_node(node, self.answers)]
        return None

    def _first_on_path(self, fp: ProblemFingerprint,
                       missing: Sequence[str]) -> str:
        """Walk the category path and surface the earliest missing item."""
        graph = decision_graph()
        missing_set = set(missing)
        # one pool across subprocesses: later guards may read state set by
        # earlier ones (e.g. the chosen localization criterion)
        pool = MetricPool(fp.category, fp.class_count, graph.version)
        pool.all_classes_cache = fp.foreground_classes()
        for subprocess, scope in CATEGORY_PATHS[fp.category.value]:
            node = graph.nodes[graph.entries[subprocess]]
            ctx = _Context(fp, pool, pool.all_classes_cache)
            found = self._scan(graph, node, ctx, missing_set)
            if found:
                return found
        return sorted(missing_set)[0]

    def _scan(self, graph, node, ctx, missing_set) -> str | None:
        while node.kind != "end":
            if node.kind in ("action", "guide"):
                if node.kind == "action":
                    _apply_effects(ctx.pool, node.payload["effects"],
                                   ctx.classes, node.anchor)
                else:
                    ctx.pool.pending_guides.append(PendingGuide(
                        node.payload["guide"], node.payload["guide"],
                        node.payload["title"], node.payload["slot"],
                        ctx.classes, node.payload["options"], node.anchor))
                node = graph.nodes[node.edges[0].target]
                continue
            for item in graph.guard_items(node):
                if item in missing_set and ctx.value(item) is None:
                    return item
            values = {i: ctx.value(i) for i in graph.guard_items(node)}
            node = graph.nodes[graph.next_node(node, values)]
        return None

    def answer(self, item: str, value) -> None:
        frontier = self.next_question()
        if frontier is None or frontier.item != item:
            expected = frontier.item if frontier else "none"
            raise OutOfFrontier(
                f"item {item!r} is not the current question (expected "
                f"{expected!r})")
        if item == "class-count":
            value = int(value)
            if value < 1:
                raise ValueError("class-count must be >= 1")
        else:
            spec = FINGERPRINT_ITEMS[item]
            if spec.kind == "bool" and not isinstance(value, bool):
                raise ValueError(f"{item} expects a boolean answer")
            if spec.kind == "enum" and value not in spec.domain:
                raise ValueError(f"{item} expects one of {spec.domain}")
        self.answers[item] = value
        self.transcript.append({"type": "answer", "item": item, "value": value})
        self._pool = None

    def pool(self) -> MetricPool:
        frontier = self.next_question()
        if frontier is not None:
            raise IncompleteFingerprint([frontier.item])
        pool = recommend(self._fingerprint())
        for key, option in self.guide_choices:
            pool.resolve_guide(key, option)
        return pool

    def resolve_guide(self, key: str, option_id: str) -> None:
        pool = self.pool()
        pool.resolve_guide(key, option_id)  # validates key and option
        self.guide_choices.append((key, option_id))
        self.transcript.append({"type": "guide", "key": key,
                                "choice": option_id})

    @classmethod
    def replay(cls, transcript: Sequence[Mapping], session_id: str = "") -> "Session":
        session = cls(session_id)
        for step in transcript:
            if step["type"] == "answer":
                session.answer(step["item"], step["value"])
            elif step["type"] == "guide":
                session.resolve_guide(step["key"], step["choice"])
            else:
                raise ValueError(f"unknown transcript step {step!r}")
        return session


class OutOfFrontier(ValueError):
    """Raised when an answer targets an item the frontier does not request."""


def _descriptor(item: str) -> QuestionDescriptor:
    spec = FINGERPRINT_ITEMS[item]
    domain = list(spec.domain) if spec.kind == "enum" else [True, False]
    anchor = "S1" if item.startswith("S1.") or item == "FP2.1" else item
    return QuestionDescriptor(item, spec.prompt, spec.why, spec.kind, domain,
                              anchor)
