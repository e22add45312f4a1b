import itertools
import json
import time

import pytest

from imgval.cheatsheets import METRIC_REGISTRY, allowed_for
from imgval.core import (IncompleteFingerprint, ProblemCategory,
                         ProblemFingerprint)
from imgval.io import canonical_json
from imgval.recommend import (DecisionGraph, OutOfFrontier, Session,
                              decision_graph, export_graph, map_category,
                              recommend)

# complete, prose-plausible fingerprints for the golden use cases ------------


def imlc_fingerprint(**overrides):
    """Multi-class disease classification from dermoscopy-style prose."""
    items = {
        "FP2.6": "argmax", "FP2.5.2": False, "FP2.5.1": False,
        "FP2.5.3": False, "FP2.5.4": False, "FP4.2": True, "FP4.1": True,
        "FP2.5.5": True, "FP5.1": True, "FP2.7.1": True, "FP2.7.2": "none",
        "FP2.7.3": "calibration-only", "FP4.5": False,
    }
    count = overrides.pop("class_count", 8)
    items.update({k.replace("_", "."): v for k, v in overrides.items()})
    return ProblemFingerprint(ProblemCategory.ImLC, count, items)


def sems_fingerprint(**overrides):
    """Large single-organ segmentation (liver-style prose)."""
    items = {
        "FP3.1": False, "FP4.3.1": False, "FP3.3": False, "FP2.3": False,
        "FP2.5.2": False, "FP2.5.7": False, "FP4.3.2": False,
        "FP2.5.6": "distance-contour-focus", "FP2.5.1": False,
        "FP2.5.5": True, "FP3.5": False, "FP4.5": False,
    }
    count = overrides.pop("class_count", 1)
    items.update({k.replace("_", "."): v for k, v in overrides.items()})
    return ProblemFingerprint(ProblemCategory.SemS, count, items)


def obd_fingerprint(**overrides):
    """Lesion detection without continuous scores (detection-style prose)."""
    items = {
        "FP2.4": "overall-position", "FP4.4": "center-point", "FP5.1": False,
        "FP5.4": False, "FP2.5.8": True, "FP2.6": "argmax", "FP3.1": True,
        "FP3.2": True, "FP4.3.1": False, "FP3.5": False, "FP2.7.1": False,
        "FP4.5": False, "FP4.6": True, "FP5.2": True, "FP2.5.1": False,
        "FP2.5.5": False,
    }
    count = overrides.pop("class_count", 1)
    items.update({k.replace("_", "."): v for k, v in overrides.items()})
    return ProblemFingerprint(ProblemCategory.ObD, count, items)


def ins_fingerprint(**overrides):
    """Instrument instance segmentation with scores (instance-style prose)."""
    items = {
        "FP5.1": True, "FP5.4": False, "FP2.5.8": True, "FP2.6": "argmax",
        "FP3.1": False, "FP3.2": True, "FP4.3.1": False, "FP3.5": True,
        "FP3.3": False, "FP2.3": False, "FP2.5.2": False, "FP2.5.7": False,
        "FP4.3.2": False, "FP2.5.6": "existence", "FP2.7.1": False,
        "FP4.5": False, "FP4.6": False, "FP5.2": True, "FP2.5.1": False,
        "FP2.5.5": False, "FP4.2": True, "FP4.1": False,
    }
    count = overrides.pop("class_count", 1)
    items.update({k.replace("_", "."): v for k, v in overrides.items()})
    return ProblemFingerprint(ProblemCategory.InS, count, items)


def pool_metrics(pool):
    return pool.metric_ids(include_guide_options=True)


def guide_ids(pool):
    return {g.guide for g in pool.pending_guides}


class TestGraphStructure:
    def test_validates(self):
        decision_graph().validate()

    def test_every_subprocess_has_nodes(self):
        graph = decision_graph()
        prefixes = {"S1", "S2", "S3", "S4", "S5", "S6", "S7", "S8", "S9"}
        for prefix in prefixes:
            assert any(e == prefix or e.startswith(prefix + "-")
                       for e in graph.entries), prefix
            assert any(n.startswith(prefix + ".")
                       or n.startswith(prefix + "-") for n in graph.nodes)

    def test_export_import_roundtrip(self):
        exported = export_graph()
        again = DecisionGraph.from_json(exported)
        assert again.to_json() == exported

    def test_nodes_carry_anchors(self):
        graph = decision_graph()
        for node in graph.nodes.values():
            if node.kind != "end":
                assert node.anchor, node.node_id


class TestCategoryMapping:
    def test_whole_image_label(self):
        assert map_category({"S1.image-level": True}) is ProblemCategory.ImLC

    def test_instances_with_boundary_interest(self):
        answers = {"S1.image-level": False, "S1.multiple-instances": True,
                   "FP2.1": True}
        assert map_category(answers) is ProblemCategory.InS

    def test_instances_without_boundary_interest(self):
        answers = {"S1.image-level": False, "S1.multiple-instances": True,
                   "FP2.1": False}
        assert map_category(answers) is ProblemCategory.ObD

    def test_single_organ_boundary_interest(self):
        answers = {"S1.image-level": False, "S1.multiple-instances": False}
        assert map_category(answers) is ProblemCategory.SemS

    def test_missing_answers(self):
        with pytest.raises(IncompleteFingerprint):
            map_category({"S1.image-level": False})


class TestGoldenPools:
    def test_sems_liver_offers_dsc_or_iou_plus_boundary(self):
        pool = recommend(sems_fingerprint())
        assert "DG6.1" in guide_ids(pool)
        assert {"dsc", "iou"} <= pool_metrics(pool)
        assert "DG7.2" in guide_ids(pool)
        assert {"masd", "assd"} & pool_metrics(pool)

    def test_tubular_sems_offers_cldice(self):
        pool = recommend(sems_fingerprint(FP3_3=True))
        entries = pool.per_class[1]
        assert any(e.metric == "cl_dice" for e in entries)
        optional_dsc = [e for e in entries if e.metric == "dsc"]
        assert optional_dsc and optional_dsc[0].optional

    def test_annotation_imprecision_forces_nsd(self):
        pool = recommend(sems_fingerprint(FP2_5_7=True))
        entries = pool.per_class[1]
        boundary = [e for e in entries if e.slot == "boundary"]
        assert [e.metric for e in boundary] == ["nsd"]
        assert "DG7.2" not in guide_ids(pool)

    def test_scoreless_obd_yields_fbeta_without_multithreshold(self):
        pool = recommend(obd_fingerprint())
        metrics = pool_metrics(pool)
        assert "f_beta" in metrics
        assert not {"average_precision", "froc_score", "auroc"} & metrics
        assert any("multi-threshold" in w["message"] for w in pool.warnings)

    def test_ins_offers_pq(self):
        pool = recommend(ins_fingerprint())
        assert "DG3.6" in guide_ids(pool)
        assert "pq" in pool_metrics(pool)

    def test_imlc_cost_sensitive_surfaces_wck_via_guide(self):
        pool = recommend(imlc_fingerprint(FP2_5_2=True, FP2_5_4=True))
        dg21 = [g for g in pool.pending_guides if g.guide == "DG2.1"]
        assert dg21
        options = {o["id"] for o in dg21[0].options}
        assert options == {"expected_cost", "weighted_cohens_kappa"}
        recommended = [o for o in dg21[0].options if o["recommended"]]
        assert recommended[0]["id"] == "expected_cost"

    def test_imlc_balanced_imbalance_guide(self):
        pool = recommend(imlc_fingerprint())
        assert "DG2.3" in guide_ids(pool)
        assert {"balanced_accuracy", "mcc", "expected_cost"} <= \
            pool_metrics(pool)

    def test_obd_small_structures_pick_low_threshold(self):
        pool = recommend(obd_fingerprint(FP2_4="rough-outline",
                                         FP4_4="rough-outline"))
        assert pool.detection["thresholds"] == [0.1]
        assert pool.detection["threshold_policy"] == "low"

    def test_detection_grid_default(self):
        pool = recommend(obd_fingerprint(
            FP2_4="rough-outline", FP4_4="rough-outline", FP3_1=False,
            FP3_2=False))
        assert pool.detection["thresholds"] == \
            [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9]

    def test_scored_detection_uses_greedy_by_score(self):
        pool = recommend(ins_fingerprint())
        assert pool.detection["assignment"]["kind"] == "greedy-by-score"
        assert pool.detection["assignment"]["punish_double_assignments"]

    def test_scoreless_nonoverlapping_offers_overlap_gt_half(self):
        pool = recommend(obd_fingerprint(FP2_4="rough-outline",
                                         FP4_4="rough-outline"))
        dg91 = [g for g in pool.pending_guides if g.guide == "DG9.1"]
        assert dg91
        assert "overlap-gt-half" in {o["id"] for o in dg91[0].options}

    def test_overlapping_predictions_lose_overlap_gt_half(self):
        pool = recommend(obd_fingerprint(FP2_4="rough-outline",
                                         FP4_4="rough-outline", FP5_4=True))
        dg91 = [g for g in pool.pending_guides if g.guide == "DG9.1"]
        assert "overlap-gt-half" not in {o["id"] for o in dg91[0].options}


class TestInvariants:
    def test_determinism(self):
        a = recommend(ins_fingerprint())
        b = recommend(ins_fingerprint())
        assert canonical_json(a.to_json()) == canonical_json(b.to_json())

    def test_monotone_relevance(self):
        fp = sems_fingerprint()
        pool = recommend(fp)
        consulted = set(pool.consulted_items)
        for item, value in fp.items.items():
            if item in consulted or not isinstance(value, bool):
                continue
            flipped = recommend(fp.with_items(**{item.replace(".", "_"):
                                                 not value}))
            assert canonical_json(flipped.to_json()) == \
                canonical_json(pool.to_json()), item

    def test_calibration_gating(self):
        no_cal = recommend(imlc_fingerprint(FP2_7_1=False))
        assert not no_cal.calibration
        cal = recommend(imlc_fingerprint(FP2_7_2="U3"))
        assert cal.calibration or any(g.guide.startswith("DG5")
                                      for g in cal.pending_guides)

    def test_nll_never_recommended_for_object_tasks(self):
        for make in (obd_fingerprint, ins_fingerprint):
            fp = make(FP2_7_1=True, FP2_7_2="U3",
                      FP2_7_3="joint-with-discrimination")
            pool = recommend(fp)
            assert "nll" not in pool_metrics(pool)

    def test_category_consistency_registry(self):
        pools = [recommend(imlc_fingerprint()), recommend(sems_fingerprint()),
                 recommend(obd_fingerprint()), recommend(ins_fingerprint()),
                 recommend(imlc_fingerprint(FP2_6="target-value")),
                 recommend(obd_fingerprint(FP5_1=True, FP2_6="target-value"))]
        for pool in pools:
            for metric in pool_metrics(pool):
                assert allowed_for(metric, pool.category.value), \
                    (metric, pool.category)

    def test_incomplete_fingerprint_lists_missing_items(self):
        fp = ProblemFingerprint(ProblemCategory.SemS, 1, {"FP3.1": False})
        with pytest.raises(IncompleteFingerprint) as exc:
            recommend(fp)
        assert "FP3.3" in exc.value.missing
        assert "FP2.5.7" in exc.value.missing


CATEGORY_BINARY_ITEMS = {
    "ImLC": ["FP2.5.1", "FP2.5.2", "FP2.5.3", "FP2.5.4", "FP2.5.5",
             "FP2.7.1", "FP4.1", "FP4.2", "FP5.1"],
    "SemS": ["FP3.1", "FP4.3.1", "FP3.3", "FP2.3", "FP2.5.2", "FP2.5.7",
             "FP4.3.2"],
    "ObD": ["FP5.1", "FP5.4", "FP2.5.8", "FP3.1", "FP3.2", "FP4.3.1",
            "FP3.5", "FP2.7.1", "FP2.5.1", "FP2.5.3"],
    "InS": ["FP5.1", "FP5.4", "FP2.5.8", "FP3.2", "FP3.5", "FP3.1",
            "FP4.3.1", "FP3.3", "FP2.3", "FP2.5.2", "FP2.5.7", "FP4.3.2",
            "FP2.7.1"],
}

CATEGORY_ENUM_DEFAULTS = {
    "ImLC": {"FP2.6": "argmax", "FP2.7.2": "U2",
             "FP2.7.3": "calibration-only"},
    "SemS": {"FP2.5.6": "existence"},
    "ObD": {"FP2.4": "rough-outline", "FP4.4": "rough-outline",
            "FP2.6": "argmax", "FP2.7.2": "U1", "FP2.7.3": "none"},
    "InS": {"FP2.5.6": "existence", "FP2.6": "argmax", "FP2.7.2": "U1",
            "FP2.7.3": "none"},
}


def enumerate_category(category: str):
    binaries = CATEGORY_BINARY_ITEMS[category]
    enums = CATEGORY_ENUM_DEFAULTS[category]
    count = 2 if category == "ImLC" else 1
    n_ok = 0
    for values in itertools.product([True, False], repeat=len(binaries)):
        items = dict(zip(binaries, values))
        items.update(enums)
        fp = ProblemFingerprint(ProblemCategory(category), count, items)
        try:
            pool = recommend(fp)
        except IncompleteFingerprint as exc:
            assert exc.missing, "missing-item error must name items"
            continue
        assert not pool.is_empty(), items
        n_ok += 1
    return n_ok


class TestEnumeration:
    def test_exhaustive_binary_enumeration_terminates(self):
        start = time.time()
        for category in ("ImLC", "SemS", "ObD", "InS"):
            assert enumerate_category(category) > 0
        assert time.time() - start < 30.0

    def test_every_registry_metric_reachable(self):
        reachable = set()
        for make, kwargs in [
            (imlc_fingerprint, {}),
            (imlc_fingerprint, {"FP2_5_2": True, "FP2_5_4": True}),
            (imlc_fingerprint, {"FP4_2": False}),
            (imlc_fingerprint, {"FP2_6": "target-value"}),
            (imlc_fingerprint, {"FP2_6": "cost-benefit", "class_count": 2}),
            (imlc_fingerprint, {"FP2_7_2": "U1"}),
            (imlc_fingerprint, {"FP2_7_2": "U2"}),
            (imlc_fingerprint, {"FP2_7_2": "U3"}),
            (imlc_fingerprint, {"FP4_1": False}),
            (imlc_fingerprint, {"FP2_5_1": True}),
            (sems_fingerprint, {}),
            (sems_fingerprint, {"FP3_3": True}),
            (sems_fingerprint, {"FP2_5_7": True}),
            (sems_fingerprint, {"FP2_5_6": "existence"}),
            (sems_fingerprint, {"FP2_5_6": "distance-outlier-focus"}),
            (sems_fingerprint, {"FP2_5_2": True}),
            (obd_fingerprint, {}),
            (obd_fingerprint, {"FP5_1": True}),
            (obd_fingerprint, {"FP5_1": True, "FP2_6": "target-value"}),
            (ins_fingerprint, {}),
            (ins_fingerprint, {"FP5_1": False}),
        ]:
            pool = recommend(make(**kwargs))
            reachable |= pool_metrics(pool)
        assert set(METRIC_REGISTRY) <= reachable, \
            set(METRIC_REGISTRY) - reachable


class TestPerClassOverrides:
    def test_override_splits_class_pools(self):
        fp = ProblemFingerprint(ProblemCategory.SemS, 2, {
            "FP3.1": False, "FP4.3.1": False, "FP3.3": False, "FP2.3": False,
            "FP2.5.2": False, "FP2.5.7": True},
            per_class={2: {"FP3.3": True}})
        pool = recommend(fp)
        # class 2 is tubular: clDice directly; class 1 keeps the DSC/IoU fork
        assert any(e.metric == "cl_dice" for e in pool.per_class[2])
        assert not any(e.metric == "cl_dice"
                       for e in pool.per_class.get(1, []))
        dg61 = [g for g in pool.pending_guides if g.guide == "DG6.1"]
        assert dg61 and dg61[0].scope == [1]


class TestGuides:
    def test_resolution_applies_choice(self):
        pool = recommend(sems_fingerprint())
        pool.resolve_guide("DG6.1", "iou")
        entries = pool.per_class[1]
        assert any(e.metric == "iou" for e in entries)
        assert all(g.guide != "DG6.1" for g in pool.pending_guides)
        assert pool.resolved_guides[0]["choice"] == "iou"

    def test_unknown_option_is_rejected(self):
        pool = recommend(sems_fingerprint())
        with pytest.raises(ValueError):
            pool.resolve_guide("DG6.1", "hausdorff")

    def test_resolve_defaults(self):
        pool = recommend(sems_fingerprint())
        chosen = pool.resolve_defaults()
        assert not pool.pending_guides
        assert any(c.startswith("DG6.1=dsc") for c in chosen)

    def test_pool_json_roundtrip_with_guides(self):
        from imgval.recommend import MetricPool
        pool = recommend(ins_fingerprint())
        data = json.loads(canonical_json(pool.to_json()))
        again = MetricPool.from_json(data)
        assert canonical_json(again.to_json()) == canonical_json(pool.to_json())
        again.resolve_guide("DG3.6", "pq")
        assert any(e.metric == "pq" for e in again.per_class[1])


def answer_all(session, answers):
    for item, value in answers:
        session.answer(item, value)


SEMS_DIALOGUE = [
    ("S1.image-level", False), ("S1.multiple-instances", False),
    ("class-count", 1), ("FP3.1", False), ("FP3.3", False), ("FP2.3", False),
    ("FP2.5.2", False), ("FP2.5.7", False), ("FP4.3.2", False),
    ("FP2.5.6", "distance-contour-focus"),
]


class TestSession:
    def test_first_question_is_category_entry(self):
        session = Session()
        assert session.next_question().item == "S1.image-level"

    def test_sems_dialogue_completes(self):
        session = Session()
        for item, value in SEMS_DIALOGUE:
            question = session.next_question()
            assert question.item == item
            assert question.why  # explanation text always present
            session.answer(item, value)
        assert session.next_question() is None
        pool = session.pool()
        assert pool.category is ProblemCategory.SemS
        assert "DG6.1" in guide_ids(pool)

    def test_out_of_frontier_rejected(self):
        session = Session()
        with pytest.raises(OutOfFrontier):
            session.answer("FP2.5.2", True)

    def test_replay_reproduces_pool(self):
        session = Session()
        answer_all(session, SEMS_DIALOGUE)
        session.resolve_guide("DG6.1", "dsc")
        session.resolve_guide("DG7.2", "masd")
        replayed = Session.replay(session.transcript)
        assert canonical_json(replayed.pool().to_json()) == \
            canonical_json(session.pool().to_json())

    def test_binary_imlc_skips_multiclass_only_branches(self):
        # cost-benefit per-class guide exists only for two-class problems
        base = [("S1.image-level", True), ("class-count", 2),
                ("FP2.6", "cost-benefit"), ("FP2.5.2", False),
                ("FP2.5.1", False), ("FP4.2", True), ("FP4.1", False),
                ("FP5.1", True), ("FP2.7.1", False)]
        session = Session()
        for item, value in base:
            assert session.next_question().item == item
            session.answer(item, value)
        pool = session.pool()
        assert "DG3.2" in guide_ids(pool)
        multi = Session()
        for item, value in [("S1.image-level", True), ("class-count", 3)] + base[2:]:
            multi.answer(item, value)
        assert "DG3.2" not in guide_ids(multi.pool())

    def test_obd_dialogue_walks_detection_path(self):
        # exercises the criterion-dependent guard during interactive flow
        dialogue = [
            ("S1.image-level", False), ("S1.multiple-instances", True),
            ("FP2.1", False), ("class-count", 1),
            ("FP2.4", "rough-outline"), ("FP4.4", "rough-outline"),
            ("FP3.1", False), ("FP3.2", False), ("FP4.3.1", False),
            ("FP3.5", False), ("FP5.1", False), ("FP5.4", False),
            # scoreless detection: no decision-rule question, counting
            # metric applies directly
            ("FP2.5.8", True), ("FP2.7.1", False),
        ]
        session = Session()
        for item, value in dialogue:
            question = session.next_question()
            assert question is not None, f"dialogue ended before {item}"
            assert question.item == item
            session.answer(item, value)
        pool = session.pool()
        assert pool.category is ProblemCategory.ObD
        assert pool.detection["criterion"]["kind"] == "box-iou"
        dg91 = [g for g in pool.pending_guides if g.guide == "DG9.1"]
        assert "overlap-gt-half" in {o["id"] for o in dg91[0].options}

    def test_guide_resolution_recorded_in_transcript(self):
        session = Session()
        answer_all(session, SEMS_DIALOGUE)
        session.resolve_guide("DG6.1", "iou")
        assert {"type": "guide", "key": "DG6.1", "choice": "iou"} in \
            session.transcript
