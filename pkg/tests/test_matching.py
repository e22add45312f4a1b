import itertools

import numpy as np
import pytest

from imgval.core import Instance, InstanceSet, is_excluded
from imgval.matching import (AssignmentStrategy, LocalizationCriterion,
                             MatchResult, assign, assign_over_thresholds,
                             localization_score, nan_policy, panoptic_quality,
                             per_dataset_counts, per_image_counts,
                             size_stratify)


def box(lo_r, lo_c, hi_r, hi_c, score=None, cls=1):
    return Instance(cls, box=[[lo_r, hi_r], [lo_c, hi_c]], score=score)


def square_mask(shape, r0, c0, size):
    grid = np.zeros(shape, dtype=bool)
    grid[r0:r0 + size, c0:c0 + size] = True
    return grid


class TestLocalizationScore:
    def test_identical_boxes(self):
        criterion = LocalizationCriterion("box-iou", threshold=0.9)
        loc = localization_score(box(0, 0, 4, 4), box(0, 0, 4, 4), criterion)
        assert loc.value == 1.0 and loc.passed

    def test_half_shifted_unit_boxes(self):
        criterion = LocalizationCriterion("box-iou", threshold=0.3)
        a = Instance(1, box=[[0, 1], [0, 1]])
        b = Instance(1, box=[[0, 1], [0.5, 1.5]])
        loc = localization_score(a, b, criterion)
        assert loc.value == pytest.approx(1 / 3)
        assert loc.passed

    def test_mask_iou(self):
        criterion = LocalizationCriterion("mask-iou", threshold=0.5)
        a = Instance(1, mask=square_mask((10, 10), 0, 0, 4))
        b = Instance(1, mask=square_mask((10, 10), 0, 2, 4))
        loc = localization_score(a, b, criterion)
        assert loc.value == pytest.approx(8 / 24)
        assert not loc.passed

    def test_giant_prediction_passes_loose_overlap_with_warning(self):
        criterion = LocalizationCriterion("mask-iou-gt-zero")
        giant = Instance(1, mask=square_mask((20, 20), 0, 0, 20))
        tiny = Instance(1, mask=square_mask((20, 20), 5, 5, 2))
        loc = localization_score(giant, tiny, criterion)
        assert loc.passed
        assert loc.warnings  # the documented pitfall is surfaced

    def test_ior_covers_reference(self):
        criterion = LocalizationCriterion("ior", threshold=0.5)
        pred = Instance(1, mask=square_mask((12, 12), 0, 0, 10))
        ref = Instance(1, mask=square_mask((12, 12), 2, 2, 3))
        loc = localization_score(pred, ref, criterion)
        assert loc.value == 1.0 and loc.passed

    def test_center_distance_physical_units(self):
        criterion = LocalizationCriterion("center-distance", threshold=5.0)
        a = Instance(1, point=[0.0, 0.0])
        b = Instance(1, point=[3.0, 4.0])
        loc = localization_score(a, b, criterion)
        assert loc.value == pytest.approx(5.0)
        assert loc.passed

    def test_point_inside_mask(self):
        criterion = LocalizationCriterion("point-inside")
        ref = Instance(1, mask=square_mask((8, 8), 2, 2, 3))
        inside = Instance(1, point=[3.0, 3.0])
        outside = Instance(1, point=[7.0, 7.0])
        assert localization_score(inside, ref, criterion).passed
        assert not localization_score(outside, ref, criterion).passed

    def test_incompatible_representation(self):
        criterion = LocalizationCriterion("mask-iou", threshold=0.5)
        with pytest.raises(ValueError):
            localization_score(Instance(1, point=[0, 0]),
                               Instance(1, mask=square_mask((4, 4), 0, 0, 2)),
                               criterion)


def brute_force_best_matching(quality, passes):
    """Exhaustive search over one-to-one matchings of passing pairs."""
    n_pred, n_ref = quality.shape
    best = 0.0
    indices = list(range(n_ref))
    for k in range(0, min(n_pred, n_ref) + 1):
        for preds in itertools.combinations(range(n_pred), k):
            for refs in itertools.permutations(indices, k):
                if all(passes[p, r] for p, r in zip(preds, refs)):
                    best = max(best, sum(quality[p, r]
                                         for p, r in zip(preds, refs)))
    return best


class TestAssign:
    def make_sets(self, pred_boxes, ref_boxes):
        return (InstanceSet([box(*b[:4], score=b[4] if len(b) > 4 else None)
                             for b in pred_boxes]),
                InstanceSet([box(*b) for b in ref_boxes]))

    def test_single_passing_pair(self):
        preds, refs = self.make_sets([(0, 0, 4, 4, 0.9)], [(0, 0, 4, 4)])
        match = assign(preds, refs, LocalizationCriterion("box-iou", 0.5),
                       AssignmentStrategy("greedy-by-score"))
        assert match.counts() == (1, 0, 0)

    def test_greedy_vs_hungarian_disagree(self):
        # high-score prediction grabs the reference it overlaps best, leaving
        # the second prediction unmatched; the optimal pairing matches both
        criterion = LocalizationCriterion("box-iou", threshold=0.1)
        pred_a = box(0, 0, 4, 6, score=0.9)    # overlaps both refs
        pred_b = box(0, 0, 4, 3, score=0.5)    # overlaps only ref 1
        ref_1 = box(0, 0, 4, 4)
        ref_2 = box(0, 4, 4, 8)
        preds = InstanceSet([pred_a, pred_b])
        refs = InstanceSet([ref_1, ref_2])
        greedy = assign(preds, refs, criterion,
                        AssignmentStrategy("greedy-by-score"))
        hungarian = assign(preds, refs, criterion,
                           AssignmentStrategy("hungarian"))
        assert greedy.tp == 1 and hungarian.tp == 2
        assert sum(s for *_, s in hungarian.pairs) >= \
            sum(s for *_, s in greedy.pairs)

    def test_hungarian_matches_brute_force(self, rng):
        criterion = LocalizationCriterion("custom-metric", threshold=0.0,
                                          custom=lambda p, r: 0.0)
        for _ in range(60):
            n_pred = int(rng.integers(1, 6))
            n_ref = int(rng.integers(1, 6))
            quality = rng.random((n_pred, n_ref)).round(3)
            passes = rng.random((n_pred, n_ref)) < 0.7

            # drive assign() through a custom criterion built from the tables
            def metric(p, r, q=quality, m=passes):
                i, j = int(p.point[0]), int(r.point[0])
                return q[i, j] if m[i, j] else -1.0

            criterion = LocalizationCriterion("custom-metric", threshold=0.0,
                                              custom=metric)
            preds = InstanceSet([Instance(1, point=[i]) for i in range(n_pred)])
            refs = InstanceSet([Instance(1, point=[j]) for j in range(n_ref)])
            match = assign(preds, refs, criterion,
                           AssignmentStrategy("hungarian"))
            got = sum(s for *_, s in match.pairs)
            assert got == pytest.approx(
                brute_force_best_matching(quality, passes), abs=1e-12)

    def test_greedy_by_localization_order(self):
        criterion = LocalizationCriterion("box-iou", threshold=0.1)
        # prediction 1 overlaps ref0 strongly; prediction 0 overlaps both less
        preds = InstanceSet([box(0, 0, 4, 4, score=None),
                             box(0, 0, 4, 3, score=None)])
        refs = InstanceSet([box(0, 0, 4, 3)])
        match = assign(preds, refs, criterion,
                       AssignmentStrategy("greedy-by-localization"))
        # pair list sorted by criterion value: prediction 1 wins ref 0
        assert match.pairs[0][:2] == (1, 0)

    def test_double_assignment_punished_or_dropped(self):
        criterion = LocalizationCriterion("box-iou", threshold=0.2)
        preds = InstanceSet([box(0, 0, 4, 4, score=0.9),
                             box(0, 1, 4, 5, score=0.8)])
        refs = InstanceSet([box(0, 0, 4, 4)])
        punishing = assign(preds, refs, criterion,
                           AssignmentStrategy("greedy-by-score", True))
        lenient = assign(preds, refs, criterion,
                         AssignmentStrategy("greedy-by-score", False))
        assert punishing.counts() == (1, 1, 0)
        assert lenient.counts() == (1, 0, 0)
        assert lenient.dropped_predictions == [1]

    def test_overlap_gt_half_unique(self):
        criterion = LocalizationCriterion("mask-iou", threshold=0.5)
        a = Instance(1, mask=square_mask((10, 10), 0, 0, 4))
        b = Instance(1, mask=square_mask((10, 10), 6, 6, 3))
        preds = InstanceSet([a, b])
        refs = InstanceSet([Instance(1, mask=square_mask((10, 10), 0, 0, 4)),
                            Instance(1, mask=square_mask((10, 10), 6, 6, 3))])
        match = assign(preds, refs, criterion,
                       AssignmentStrategy("overlap-gt-half"))
        assert match.counts() == (2, 0, 0)

    def test_overlap_gt_half_requires_half_threshold(self):
        criterion = LocalizationCriterion("mask-iou", threshold=0.3)
        preds = InstanceSet([Instance(1, mask=square_mask((6, 6), 0, 0, 3))])
        refs = InstanceSet([Instance(1, mask=square_mask((6, 6), 0, 0, 3))])
        with pytest.raises(ValueError):
            assign(preds, refs, criterion,
                   AssignmentStrategy("overlap-gt-half"))

    def test_overlap_gt_half_no_ambiguity_with_disjoint_predictions(self, rng):
        criterion = LocalizationCriterion("ior", threshold=0.5)
        # two disjoint predictions can never both cover > half of one ref
        for _ in range(20):
            r0 = int(rng.integers(0, 4))
            refs = InstanceSet([Instance(1, mask=square_mask((12, 12), r0, 2, 6))])
            preds = InstanceSet([
                Instance(1, mask=square_mask((12, 12), r0, 2, 4)),
                Instance(1, mask=square_mask((12, 12), r0 + 4, 6, 4))])
            assign(preds, refs, criterion, AssignmentStrategy("overlap-gt-half"))

    def test_greedy_score_requires_scores(self):
        preds = InstanceSet([box(0, 0, 2, 2)])
        refs = InstanceSet([box(0, 0, 2, 2)])
        with pytest.raises(ValueError):
            assign(preds, refs, LocalizationCriterion("box-iou", 0.5),
                   AssignmentStrategy("greedy-by-score"))

    def test_threshold_monotonicity(self, rng):
        criterion = LocalizationCriterion(
            "box-iou", threshold=[0.3, 0.5, 0.7, 0.9])
        preds = InstanceSet([box(0, 0, 4, 4, 0.9), box(2, 2, 6, 6, 0.8),
                             box(5, 5, 9, 9, 0.7)])
        refs = InstanceSet([box(0, 1, 4, 5), box(5, 5, 9, 9)])
        by_threshold = assign_over_thresholds(
            preds, refs, criterion, AssignmentStrategy("greedy-by-score"))
        tps = [by_threshold[t].tp for t in sorted(by_threshold)]
        assert all(a >= b for a, b in zip(tps, tps[1:]))

    def test_ior_merge_allowance(self):
        criterion = LocalizationCriterion("ior", threshold=0.6)
        pred = Instance(1, mask=square_mask((10, 14), 2, 2, 6)
                        | square_mask((10, 14), 2, 8, 6), score=0.9)
        refs = InstanceSet([Instance(1, mask=square_mask((10, 14), 2, 2, 6)),
                            Instance(1, mask=square_mask((10, 14), 2, 8, 6))])
        preds = InstanceSet([pred])
        merged = assign(preds, refs, criterion,
                        AssignmentStrategy("greedy-by-score",
                                           allow_multi_reference=True))
        assert merged.tp == 1
        assert merged.merged_references and merged.fn == 0
        plain = assign(preds, refs, criterion,
                       AssignmentStrategy("greedy-by-score"))
        assert plain.fn == 1


class TestCardinalities:
    def test_counts_identities(self, rng):
        criterion = LocalizationCriterion("box-iou", threshold=0.5)
        strategy = AssignmentStrategy("greedy-by-score", True)
        for _ in range(20):
            preds = InstanceSet([
                box(r, c, r + 3, c + 3, score=float(s))
                for r, c, s in zip(rng.integers(0, 9, 5), rng.integers(0, 9, 5),
                                   rng.random(5).round(2))])
            refs = InstanceSet([
                box(r, c, r + 3, c + 3)
                for r, c in zip(rng.integers(0, 9, 4), rng.integers(0, 9, 4))])
            match = assign(preds, refs, criterion, strategy)
            assert match.tp + match.fn == len(refs)
            assert match.tp + match.fp == len(preds)

    def test_pooled_equals_sum(self):
        matches = [MatchResult([(0, 0, 0.8)], [1], []),
                   MatchResult([], [], [0]),
                   MatchResult([(0, 0, 0.6), (1, 1, 0.7)], [], [2])]
        per_image = per_image_counts(matches)
        pooled = per_dataset_counts(matches)
        assert pooled == tuple(np.sum(per_image, axis=0))


class TestPanopticQuality:
    def test_perfect(self):
        match = MatchResult([(0, 0, 1.0), (1, 1, 1.0)], [], [])
        pq = panoptic_quality(match)
        assert pq.value == 1.0

    def test_mean_iou_one_gives_f1(self):
        match = MatchResult([(0, 0, 1.0), (1, 1, 1.0)], [2], [2])
        pq = panoptic_quality(match)
        f1 = 2 * 2 / (2 * 2 + 1 + 1)
        assert pq.value == pytest.approx(f1)
        assert pq.segmentation_quality == 1.0

    def test_spec_arithmetic(self):
        match = MatchResult([(0, 0, 0.6), (1, 1, 0.8)], [2], [2])
        pq = panoptic_quality(match)
        assert pq.segmentation_quality == pytest.approx(0.7)
        assert pq.detection_quality == pytest.approx(2 * 2 / (2 * 2 + 1 + 1))
        assert pq.value == pytest.approx(0.7 * 0.6667, abs=1e-4)

    def test_empty(self):
        assert is_excluded(panoptic_quality(MatchResult([], [], [])).value)


class TestNanPolicy:
    def test_empty_reference_empty_prediction(self):
        out = nan_policy(tp=0, fn=0, fp=0)
        assert is_excluded(out["sensitivity"])
        assert out["ppv"] == 1.0
        assert out["f_beta"] == 1.0

    def test_empty_reference_with_false_positives(self):
        out = nan_policy(tp=0, fn=0, fp=3)
        assert is_excluded(out["sensitivity"])
        assert out["ppv"] == 0.0
        assert out["f_beta"] == 0.0

    def test_only_misses(self):
        out = nan_policy(tp=0, fn=2, fp=0)
        assert out["sensitivity"] == 0.0
        assert is_excluded(out["ppv"])
        assert is_excluded(out["f_beta"])

    def test_all_defined(self):
        out = nan_policy(tp=3, fn=1, fp=2)
        assert out["sensitivity"] == pytest.approx(0.75)
        assert out["ppv"] == pytest.approx(0.6)
        assert not any(is_excluded(v) for v in out.values())


class TestSizeStratify:
    def make(self, sizes_ref, sizes_pred, pairs, unmatched_p, unmatched_r):
        def inst(size):
            side = int(np.sqrt(size))
            return Instance(1, mask=square_mask((20, 20), 0, 0, side))

        refs = InstanceSet([inst(s) for s in sizes_ref])
        preds = InstanceSet([inst(s) for s in sizes_pred])
        match = MatchResult([(p, r, 0.8) for p, r in pairs], unmatched_p,
                            unmatched_r)
        return match, preds, refs

    def test_single_bin_identity(self):
        match, preds, refs = self.make([9, 100], [9], [(0, 0)], [], [1])
        out = size_stratify([match], [preds], [refs], edges=[])
        (label, results), = out.items()
        assert results[0].counts() == match.counts()

    def test_two_bins_partition_references(self):
        match, preds, refs = self.make([9, 100], [9, 100], [(0, 0), (1, 1)],
                                       [], [])
        out = size_stratify([match], [preds], [refs], edges=[50])
        counts = {label: rs[0].tp for label, rs in out.items()}
        assert sum(counts.values()) == 2
        assert all(v == 1 for v in counts.values())

    def test_three_bins_differ_from_pooled(self):
        match, preds, refs = self.make(
            [4, 64, 256], [4, 64], [(0, 0)], [1], [1, 2])
        out = size_stratify([match], [preds], [refs], edges=[16, 128])
        per_bin = {label: rs[0].counts() for label, rs in out.items()}
        # small bin holds the hit, middle bin an unmatched pair, large a miss
        assert per_bin["[-inf,16)"] == (1, 0, 0)
        assert per_bin["[16,128)"] == (0, 1, 1)
        assert per_bin["[128,inf)"] == (0, 0, 1)
