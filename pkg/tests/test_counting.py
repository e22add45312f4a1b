import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from imgval.core import ConfusionMatrix, Excluded, LabelMap, is_excluded
from imgval.counting import (CostMatrix, KappaWeights, accuracy,
                             balanced_accuracy, cl_dice, decision_curve, dsc,
                             error_rate, expected_cost, f_beta, fppi, iou,
                             lr_plus, mcc, net_benefit, npv, ppv, sensitivity,
                             specificity, weighted_cohens_kappa)

CM1 = ConfusionMatrix.from_binary_counts(tp=100, fp=100, fn=1, tn=10000)
CM3 = ConfusionMatrix.from_binary_counts(tp=10, fp=100, fn=1, tn=10000)

binary_counts = st.tuples(st.integers(0, 400), st.integers(0, 400),
                          st.integers(0, 400), st.integers(0, 400))


def random_binary_cm(rng):
    tp, fp, fn, tn = rng.integers(1, 200, size=4)
    return ConfusionMatrix.from_binary_counts(tp=tp, fp=fp, fn=fn, tn=tn)


class TestAccuracy:
    def test_near_one_under_imbalance(self):
        cm = ConfusionMatrix.from_binary_counts(tp=0, fp=1, fn=1, tn=10000)
        assert accuracy(cm) == pytest.approx(0.9998, abs=1e-4)

    def test_perfect_diagonal(self):
        assert accuracy(ConfusionMatrix(np.diag([3, 4, 5]))) == 1.0

    def test_hand_matrix(self):
        cm = ConfusionMatrix.from_binary_counts(tp=90, fn=10, fp=20, tn=80)
        assert accuracy(cm) == pytest.approx(0.85)

    def test_empty_matrix(self):
        with pytest.raises(ValueError):
            accuracy(ConfusionMatrix(np.zeros((2, 2), int)))


class TestBalancedAccuracy:
    def test_dg23_effect1(self):
        assert balanced_accuracy(CM1) == pytest.approx(0.99, abs=0.005)

    def test_dg23_effect3(self):
        assert balanced_accuracy(CM3) == pytest.approx(0.95, abs=0.005)

    @given(st.integers(1, 100), st.integers(0, 100))
    def test_equals_accuracy_when_balanced(self, correct, wrong):
        cm = ConfusionMatrix.from_binary_counts(tp=correct, fn=wrong,
                                                fp=wrong, tn=correct)
        assert balanced_accuracy(cm) == pytest.approx(accuracy(cm))

    def test_empty_class_excluded(self):
        cm = ConfusionMatrix([[5, 0], [0, 0]])
        assert balanced_accuracy(cm) == 1.0


class TestMCC:
    def test_dg23_effect1(self):
        assert mcc(CM1) == pytest.approx(0.70, abs=0.01)

    def test_dg23_effect3(self):
        assert mcc(CM3) == pytest.approx(0.29, abs=0.01)

    def test_perfect_prediction(self):
        assert mcc(ConfusionMatrix(np.diag([7, 9]))) == pytest.approx(1.0)

    def test_sign_flip_on_inverted_predictions(self, rng):
        for _ in range(20):
            n = int(rng.integers(1, 60))
            cm = ConfusionMatrix.from_binary_counts(
                tp=n, fn=int(rng.integers(0, 60)),
                fp=int(rng.integers(0, 60)), tn=n)
            flipped = ConfusionMatrix(cm.counts[:, ::-1])
            v, w = mcc(cm), mcc(flipped)
            if not (is_excluded(v) or is_excluded(w)):
                assert v == pytest.approx(-w)

    def test_multiclass_matches_binary_formula(self, rng):
        for _ in range(25):
            cm = random_binary_cm(rng)
            b = cm.binary()
            direct = ((b.tp * b.tn - b.fp * b.fn)
                      / math.sqrt((b.tp + b.fp) * (b.tp + b.fn)
                                  * (b.tn + b.fp) * (b.tn + b.fn)))
            assert mcc(cm) == pytest.approx(direct, abs=1e-12)

    def test_degenerate_marginals_excluded(self):
        assert is_excluded(mcc(ConfusionMatrix([[3, 0], [2, 0]])))


class TestExpectedCost:
    def test_dg23_effect1_normalized(self):
        v = expected_cost(CM1, CostMatrix.zero_one(2), normalized=True)
        assert v == pytest.approx(1.00, abs=0.02)

    def test_dg23_effect3_normalized(self):
        v = expected_cost(CM3, CostMatrix.zero_one(2), normalized=True)
        assert v == pytest.approx(9.2, abs=0.1)

    def test_zero_one_equals_error_rate(self, rng):
        for _ in range(30):
            cm = random_binary_cm(rng)
            ec = expected_cost(cm, CostMatrix.zero_one(2))
            assert ec == pytest.approx(1.0 - accuracy(cm), abs=1e-12)

    def test_inverse_prevalence_costs_give_balanced_accuracy(self, rng):
        for _ in range(30):
            counts = rng.integers(1, 80, size=(3, 3))
            cm = ConfusionMatrix(counts)
            priors = cm.row_totals() / cm.total
            ec = expected_cost(cm, CostMatrix.inverse_prevalence(priors))
            assert ec == pytest.approx(1.0 - balanced_accuracy(cm), abs=1e-12)

    def test_priors_override(self):
        cm = ConfusionMatrix.from_binary_counts(tp=90, fn=10, fp=20, tn=80)
        costs = CostMatrix.zero_one(2, priors=[0.9, 0.1])
        # EC = P_neg * FPR + P_pos * FNR = 0.9*0.2 + 0.1*0.1
        assert expected_cost(cm, costs) == pytest.approx(0.19)

    def test_empty_row_with_prior(self):
        cm = ConfusionMatrix([[0, 0], [2, 8]])
        with pytest.raises(ValueError):
            expected_cost(cm, CostMatrix.zero_one(2, priors=[0.5, 0.5]))


class TestWeightedKappa:
    def test_perfect_agreement(self):
        cm = ConfusionMatrix(np.diag([4, 5, 6]))
        assert weighted_cohens_kappa(cm, KappaWeights.linear(3)) == 1.0

    def test_chance_agreement_is_zero(self):
        # outer-product matrix: prediction independent of reference
        row = np.array([2, 3, 5])
        col = np.array([4, 1, 5])
        cm = ConfusionMatrix(np.outer(row, col))
        assert weighted_cohens_kappa(cm, KappaWeights.quadratic(3)) == \
            pytest.approx(0.0, abs=1e-12)

    def test_matches_two_loop_oracle(self, rng):
        counts = rng.integers(0, 40, size=(4, 4))
        counts[0, 0] += 1
        cm = ConfusionMatrix(counts)
        w = KappaWeights.quadratic(4).weights
        n = counts.sum()
        num = den = 0.0
        for i in range(4):
            for j in range(4):
                num += w[i, j] * counts[i, j] / n
                den += w[i, j] * counts[i, :].sum() * counts[:, j].sum() / n**2
        assert weighted_cohens_kappa(cm, KappaWeights.quadratic(4)) == \
            pytest.approx(1 - num / den, abs=1e-12)

    def test_weight_invariants(self):
        with pytest.raises(ValueError):
            KappaWeights(np.array([[1.0, 0.0], [0.0, 0.0]]))


class TestFBeta:
    def test_dg34_positive_class(self):
        assert f_beta(CM3, beta=1.0) == pytest.approx(20 / 121, abs=1e-12)
        assert f_beta(CM3, beta=1.0) == pytest.approx(0.165, abs=1e-3)

    def test_dg34_negative_class(self):
        assert f_beta(CM3, beta=1.0, positive=0) == pytest.approx(0.995, abs=1e-3)

    def test_beta_one_equals_dsc(self, rng):
        for _ in range(20):
            cm = random_binary_cm(rng)
            assert f_beta(cm, 1.0) == pytest.approx(dsc(cm), abs=1e-15)

    @given(binary_counts)
    def test_monotone_in_tp_antitone_in_errors(self, counts):
        tp, fp, fn, tn = counts
        base = f_beta(ConfusionMatrix.from_binary_counts(tp + 1, fp, fn, tn))
        more_fp = f_beta(ConfusionMatrix.from_binary_counts(tp + 1, fp + 1, fn, tn))
        more_fn = f_beta(ConfusionMatrix.from_binary_counts(tp + 1, fp, fn + 1, tn))
        more_tp = f_beta(ConfusionMatrix.from_binary_counts(tp + 2, fp, fn, tn))
        assert more_fp <= base and more_fn <= base and more_tp >= base


class TestRates:
    def test_construction(self):
        cm = ConfusionMatrix.from_binary_counts(tp=90, fn=10, fp=20, tn=80)
        assert sensitivity(cm) == pytest.approx(0.9)
        assert specificity(cm) == pytest.approx(0.8)
        assert lr_plus(cm) == pytest.approx(4.5)

    def test_dg34_low_ppv(self):
        assert ppv(CM3) == pytest.approx(10 / 110, abs=1e-12)
        assert ppv(CM3) == pytest.approx(0.09, abs=0.001)

    def test_npv(self):
        cm = ConfusionMatrix.from_binary_counts(tp=5, fp=2, fn=3, tn=10)
        assert npv(cm) == pytest.approx(10 / 13)

    def test_nan_policies(self):
        empty_pos = ConfusionMatrix.from_binary_counts(tp=0, fp=0, fn=0, tn=5)
        assert is_excluded(sensitivity(empty_pos))
        assert is_excluded(ppv(empty_pos))

    def test_ratio_invariance_under_scaling(self, rng):
        cm = random_binary_cm(rng)
        scaled = ConfusionMatrix(cm.counts * 7)
        for fn in (accuracy, balanced_accuracy, mcc, dsc, iou, sensitivity,
                   specificity, ppv, npv, f_beta):
            assert fn(cm) == pytest.approx(fn(scaled), abs=1e-12)


class TestNetBenefit:
    def test_zero_fp_gives_prevalence_times_sensitivity(self):
        cm = ConfusionMatrix.from_binary_counts(tp=30, fp=0, fn=10, tn=60)
        nb = net_benefit(cm, 0.3)
        assert nb == pytest.approx((40 / 100) * (30 / 40))

    def test_treat_all(self):
        # all-positive predictions: NB = prev - (1-prev) * odds
        cm = ConfusionMatrix.from_binary_counts(tp=40, fp=60, fn=0, tn=0)
        nb = net_benefit(cm, 0.2)
        assert nb == pytest.approx(0.4 - 0.6 * 0.25)

    def test_spec_arithmetic(self):
        cm = ConfusionMatrix.from_binary_counts(tp=10, fp=100, fn=1, tn=10000)
        nb = net_benefit(cm, 0.1)
        assert nb == pytest.approx(10 / 10111 - (100 / 10111) * (1 / 9))

    def test_threshold_domain(self):
        cm = ConfusionMatrix.from_binary_counts(1, 1, 1, 1)
        for bad in (0.0, 1.0, -0.2):
            with pytest.raises(ValueError):
                net_benefit(cm, bad)

    def test_decision_curve(self, rng):
        scores = rng.random(50)
        labels = rng.random(50) < scores
        curve = decision_curve(scores, labels, [0.25, 0.5])
        assert len(curve) == 2
        assert curve[0][0] == 0.25


class TestOverlap:
    def test_dsc_to_iou(self):
        cm = ConfusionMatrix.from_binary_counts(tp=4, fp=1, fn=1, tn=0)
        assert dsc(cm) == pytest.approx(0.8)
        assert iou(cm) == pytest.approx(2 / 3)

    def test_identical_masks(self):
        cm = ConfusionMatrix.from_binary_counts(tp=9, fp=0, fn=0, tn=7)
        assert dsc(cm) == 1.0 and iou(cm) == 1.0

    def test_disjoint_masks(self):
        cm = ConfusionMatrix.from_binary_counts(tp=0, fp=5, fn=5, tn=7)
        assert dsc(cm) == 0.0 and iou(cm) == 0.0

    def test_empty_empty_excluded(self):
        cm = ConfusionMatrix.from_binary_counts(tp=0, fp=0, fn=0, tn=9)
        assert is_excluded(dsc(cm)) and is_excluded(iou(cm))


class TestIdentities:
    """Mutual-computability identities over random binary matrices."""

    def test_identity_suite(self, rng):
        for _ in range(200):
            cm = random_binary_cm(rng)
            assert accuracy(cm) == pytest.approx(1.0 - error_rate(cm), abs=1e-12)
            d, j = dsc(cm), iou(cm)
            assert d == pytest.approx(2 * j / (1 + j), abs=1e-12)
            assert j == pytest.approx(d / (2 - d), abs=1e-12)
            bm = sensitivity(cm) + specificity(cm) - 1.0
            assert balanced_accuracy(cm) == pytest.approx((bm + 1) / 2, abs=1e-12)
            ec = expected_cost(cm, CostMatrix.zero_one(2))
            assert ec == pytest.approx(1.0 - accuracy(cm), abs=1e-12)


class TestFPPI:
    def test_zero(self):
        assert fppi(0, 3) == 0.0

    def test_arithmetic(self):
        assert fppi(8, 4) == 2.0

    def test_default_grid(self):
        from imgval.counting import DEFAULT_FPPI_GRID
        assert DEFAULT_FPPI_GRID == (1 / 8, 1 / 4, 1 / 2, 1, 2, 4, 8)

    def test_needs_images(self):
        with pytest.raises(ValueError):
            fppi(1, 0)


class TestClDice:
    def test_identical_masks(self):
        mask = np.zeros((16, 16), dtype=int)
        mask[4:6, 2:14] = 1
        r = cl_dice(LabelMap(mask), LabelMap(mask))
        assert r.value == 1.0

    def test_thickness_invariance(self):
        # same centerline, different thickness: skeletons stay inside both
        from skimage.morphology import skeletonize
        thick = np.zeros((16, 16), dtype=int)
        thick[5:10, 1:15] = 1
        thin = np.zeros((16, 16), dtype=int)
        thin[6:9, 2:14] = 1
        # premise of the definition-level identity: cross containment holds
        assert (thick.astype(bool) | ~skeletonize(thin.astype(bool))).all()
        assert (thin.astype(bool) | ~skeletonize(thick.astype(bool))).all()
        r = cl_dice(LabelMap(thick), LabelMap(thin))
        assert r.value == 1.0

    def test_gap_counts_against_sensitivity(self):
        # reference vessel spans the row; prediction has a 4-pixel gap
        ref = np.zeros((16, 16), dtype=int)
        ref[8, 1:15] = 1
        pred = ref.copy()
        pred[8, 6:10] = 0
        r = cl_dice(LabelMap(ref), LabelMap(pred))
        # skeleton of a 1-px line is the line itself: hand-counted overlaps
        tsens = 10 / 14   # 14 reference skeleton px, 4 fall in the gap
        tprec = 1.0       # both prediction segments lie on the reference
        assert r.topology_sensitivity == pytest.approx(tsens)
        assert r.topology_precision == pytest.approx(tprec)
        assert r.value == pytest.approx(2 * tsens * tprec / (tsens + tprec))

    def test_empty_mask_excluded(self):
        empty = LabelMap(np.zeros((8, 8), dtype=int))
        full = LabelMap(np.ones((8, 8), dtype=int))
        assert is_excluded(cl_dice(empty, full).value)
