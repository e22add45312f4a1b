import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from imgval.core import (ConfusionMatrix, Instance, LabelMap,
                         ProblemCategory, ProblemFingerprint, SampleSet,
                         ScoredSample, confusion_from_labels,
                         confusion_from_maps)


def brute_force_recount(ref, pred, n_classes):
    counts = np.zeros((n_classes, n_classes), dtype=int)
    for r, p in zip(ref, pred):
        counts[r][p] += 1
    return counts


class TestConfusionFromLabels:
    def test_identity_case(self):
        cm = confusion_from_labels([1, 0], [1, 0], 2)
        assert np.array_equal(cm.counts, np.eye(2, dtype=int))

    def test_dg_fixture_counts(self):
        # 101 positives (100 hit, 1 missed), 10100 negatives (100 false alarms)
        ref = [1] * 101 + [0] * 10100
        pred = [1] * 100 + [0] * 1 + [1] * 100 + [0] * 10000
        cm = confusion_from_labels(ref, pred, 2)
        b = cm.binary(positive=1)
        assert (b.tp, b.fn, b.fp, b.tn) == (100, 1, 100, 10000)

    def test_matches_brute_force_recount(self, rng):
        ref = rng.integers(0, 3, size=50)
        pred = rng.integers(0, 3, size=50)
        cm = confusion_from_labels(ref, pred, 3)
        assert cm.total == 50
        assert np.array_equal(cm.counts, brute_force_recount(ref, pred, 3))

    @given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2)),
                    min_size=1, max_size=60),
           st.randoms())
    def test_permutation_invariant(self, pairs, rnd):
        ref, pred = zip(*pairs)
        cm = confusion_from_labels(list(ref), list(pred), 3)
        shuffled = list(pairs)
        rnd.shuffle(shuffled)
        ref2, pred2 = zip(*shuffled)
        assert cm == confusion_from_labels(list(ref2), list(pred2), 3)

    @given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1,
                    max_size=60))
    def test_binary_cardinalities_sum_to_count(self, pairs):
        ref = [int(r) for r, _ in pairs]
        pred = [int(p) for _, p in pairs]
        b = confusion_from_labels(ref, pred, 2).binary()
        assert b.tp + b.fp + b.fn + b.tn == len(pairs)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            confusion_from_labels([0, 1], [0], 2)

    def test_index_out_of_range(self):
        with pytest.raises(ValueError):
            confusion_from_labels([0, 2], [0, 1], 2)


class TestConfusionFromMaps:
    def test_identical_maps(self):
        lm = LabelMap(np.array([[0, 1], [1, 1]]))
        b = confusion_from_maps(lm, lm, 1).binary()
        assert b.fp == 0 and b.fn == 0
        assert b.tp == 3 and b.tn == 1

    def test_complement_maps(self):
        ref = LabelMap(np.array([[0, 1], [1, 0]]))
        pred = LabelMap(np.array([[1, 0], [0, 1]]))
        b = confusion_from_maps(ref, pred, 1).binary()
        assert b.tp == 0 and b.tn == 0
        assert b.fp == 2 and b.fn == 2

    def test_random_maps_match_pixel_loop(self, rng):
        ref = LabelMap(rng.integers(0, 2, size=(8, 8)))
        pred = LabelMap(rng.integers(0, 2, size=(8, 8)))
        b = confusion_from_maps(ref, pred, 1).binary()
        tp = fp = fn = tn = 0
        for i in range(8):
            for j in range(8):
                r = ref.values[i, j] == 1
                p = pred.values[i, j] == 1
                tp += r and p
                fp += (not r) and p
                fn += r and not p
                tn += (not r) and (not p)
        assert (b.tp, b.fp, b.fn, b.tn) == (tp, fp, fn, tn)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            confusion_from_maps(LabelMap(np.zeros((2, 2), int)),
                                LabelMap(np.zeros((3, 3), int)), 1)


class TestConfusionMatrix:
    def test_rejects_negative_entries(self):
        with pytest.raises(ValueError):
            ConfusionMatrix([[1, -1], [0, 2]])

    def test_one_vs_rest(self):
        cm = ConfusionMatrix([[5, 1, 0], [2, 7, 1], [0, 0, 4]])
        b = cm.one_vs_rest(1).binary()
        assert b.tp == 7
        assert b.fn == 3
        assert b.fp == 1
        assert b.tn == 9

    def test_binary_requires_two_classes(self):
        with pytest.raises(ValueError):
            ConfusionMatrix(np.eye(3, dtype=int)).binary()


class TestLabelMap:
    def test_roundtrip_nested(self, rng):
        lm = LabelMap(rng.integers(0, 4, size=(5, 7)), spacing=(0.5, 2.0))
        again = LabelMap.from_json(lm.to_json())
        assert again == lm

    def test_roundtrip_base64_bit_exact(self, rng):
        lm = LabelMap(rng.integers(0, 999, size=(4, 5, 6)))
        again = LabelMap.from_json(lm.to_json(raw=True))
        assert np.array_equal(again.values, lm.values)
        assert again.spacing == lm.spacing

    def test_diagonal(self):
        lm = LabelMap(np.zeros((3, 4), int), spacing=(1.0, 1.0))
        assert lm.diagonal() == 5.0

    def test_rejects_negative_values(self):
        with pytest.raises(ValueError):
            LabelMap(np.array([[0, -1]]))


class TestInstances:
    def test_exactly_one_representation(self):
        with pytest.raises(ValueError):
            Instance(1, mask=np.ones((2, 2), bool), point=np.zeros(2))

    def test_box_ordering(self):
        with pytest.raises(ValueError):
            Instance(1, box=[[3, 1], [0, 2]])

    def test_score_range(self):
        with pytest.raises(ValueError):
            Instance(1, point=[0, 0], score=1.5)


class TestSamples:
    def test_scores_must_be_probabilities(self):
        with pytest.raises(ValueError):
            ScoredSample((0.2, 1.4), 0)

    def test_sample_set_roundtrip(self):
        samples = [ScoredSample((0.2, 0.8), 1, "a", "g1"),
                   ScoredSample((0.6, 0.4), 0, "b", None)]
        ss = SampleSet.from_samples(samples)
        assert ss.n_samples == 2 and ss.n_classes == 2
        assert ss.group_ids == ["g1", None]

    def test_scores_need_not_sum_to_one(self):
        # object-level outputs discard the background column
        SampleSet([[0.9, 0.7]], [0])


class TestFingerprint:
    def test_flat_json_roundtrip(self):
        fp = ProblemFingerprint(ProblemCategory.SemS, 2,
                                {"FP2.1": True, "FP2.5.6": "existence"},
                                per_class={2: {"FP3.3": True}})
        again = ProblemFingerprint.from_json(fp.to_json())
        assert again.category is ProblemCategory.SemS
        assert again.items == fp.items
        assert again.per_class == fp.per_class
        assert set(fp.to_json()) == {"FP1.1", "class-count", "FP2.1",
                                     "FP2.5.6", "per-class"}

    def test_imlc_needs_two_classes(self):
        with pytest.raises(ValueError):
            ProblemFingerprint(ProblemCategory.ImLC, 1)

    def test_enum_values_validated(self):
        with pytest.raises(ValueError):
            ProblemFingerprint(ProblemCategory.SemS, 1,
                               {"FP2.5.6": "sometimes"})

    def test_per_class_override_only_structure_items(self):
        with pytest.raises(ValueError):
            ProblemFingerprint(ProblemCategory.SemS, 2, {},
                               per_class={1: {"FP4.1": True}})

    def test_per_class_lookup(self):
        fp = ProblemFingerprint(ProblemCategory.SemS, 2, {"FP3.3": False},
                                per_class={2: {"FP3.3": True}})
        assert fp.get("FP3.3", 1) is False
        assert fp.get("FP3.3", 2) is True
