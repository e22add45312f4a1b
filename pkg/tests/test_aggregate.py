import pytest
from hypothesis import given
from hypothesis import strategies as st

from imgval.aggregate import (AggregationSpec, BootstrapSpec, aggregate,
                              aggregate_classes, decimal_report,
                              hierarchical_mean, worst_value_for)
from imgval.core import Excluded, MetricResult, is_excluded


def results(metric, values):
    return [MetricResult(metric, v) for v in values]


class TestNanHandling:
    def test_worst_value_vs_exclude(self):
        values = [0.8, Excluded("empty reference")]
        worst = aggregate(results("dsc", values),
                          AggregationSpec(nan_handling="worst-value"))
        kept = aggregate(results("dsc", values),
                         AggregationSpec(nan_handling="exclude"))
        assert worst.value == pytest.approx(0.4)
        assert kept.value == pytest.approx(0.8)
        assert worst.provenance["n_excluded"] == 1

    def test_distance_needs_documented_worst(self):
        values = [3.0, Excluded("empty boundary")]
        with pytest.raises(ValueError):
            aggregate(results("hausdorff", values),
                      AggregationSpec(nan_handling="worst-value"))
        spec = AggregationSpec(nan_handling="worst-value",
                               worst_values={"hausdorff": 14.2})
        out = aggregate(results("hausdorff", values), spec)
        assert out.value == pytest.approx((3.0 + 14.2) / 2)

    def test_worst_value_never_beats_exclusion(self, rng):
        for _ in range(30):
            values = [float(v) for v in rng.random(6)]
            values[int(rng.integers(0, 6))] = Excluded("x")
            worst = aggregate(results("dsc", values),
                              AggregationSpec(nan_handling="worst-value"))
            kept = aggregate(results("dsc", values),
                             AggregationSpec(nan_handling="exclude"))
            assert worst.value <= kept.value + 1e-12

    def test_all_excluded(self):
        out = aggregate(results("dsc", [Excluded("a"), Excluded("b")]),
                        AggregationSpec(nan_handling="exclude"))
        assert is_excluded(out.value)

    def test_rank_then_aggregate(self):
        values = [0.9, 0.7, Excluded("missing"), 0.7]
        out = aggregate(results("dsc", values),
                        AggregationSpec(
                            nan_handling="rank-then-aggregate-worst-rank"))
        # ranks: 0.7s share (1+2)/2+1 -> 2.5 each? ascending: 0.7,0.7,0.9
        # ranks 1.5,1.5,3; excluded pinned at worst rank 4
        assert out.value == pytest.approx((3 + 1.5 + 4 + 1.5) / 4)


class TestHierarchy:
    def test_two_patients_unbalanced(self):
        values = [1.0, 1.0, 0.0]
        groups = [("p1",), ("p1",), ("p2",)]
        assert hierarchical_mean(values, groups) == pytest.approx(0.5)
        assert hierarchical_mean(values, None) == pytest.approx(2 / 3)

    def test_equal_group_sizes_match_flat(self, rng):
        values = [float(v) for v in rng.random(8)]
        groups = [(g,) for g in [0, 0, 1, 1, 2, 2, 3, 3]]
        assert hierarchical_mean(values, groups) == \
            pytest.approx(hierarchical_mean(values, None))

    def test_two_levels(self):
        # patient -> image nesting
        values = [1.0, 0.0, 0.5, 0.5]
        groups = [("p1", "a"), ("p1", "a"), ("p1", "b"), ("p2", "c")]
        # p1: image a mean 0.5, image b 0.5 -> 0.5 ; p2: 0.5 -> overall 0.5
        assert hierarchical_mean(values, groups) == pytest.approx(0.5)

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=20), st.randoms())
    def test_order_invariance(self, values, rnd):
        groups = [(i % 3,) for i in range(len(values))]
        paired = list(zip(values, groups))
        rnd.shuffle(paired)
        shuffled_values = [v for v, _ in paired]
        shuffled_groups = [g for _, g in paired]
        assert hierarchical_mean(values, groups) == pytest.approx(
            hierarchical_mean(shuffled_values, shuffled_groups), abs=1e-12)


class TestBootstrap:
    def test_ci_contains_point_estimate(self, rng):
        values = [float(v) for v in rng.random(30)]
        spec = AggregationSpec(bootstrap=BootstrapSpec(resamples=300, seed=7))
        out = aggregate(results("dsc", values), spec)
        lo, hi = out.provenance["ci"]
        assert lo <= out.value <= hi

    def test_deterministic_under_seed(self, rng):
        values = [float(v) for v in rng.random(20)]
        spec = AggregationSpec(bootstrap=BootstrapSpec(resamples=200, seed=3))
        a = aggregate(results("dsc", values), spec)
        b = aggregate(results("dsc", values), spec)
        assert a.provenance["ci"] == b.provenance["ci"]

    def test_resamples_floor(self):
        with pytest.raises(ValueError):
            BootstrapSpec(resamples=10)

    def test_seed_env_var(self, monkeypatch):
        monkeypatch.setenv("METRICS_RELOADED_SEED", "99")
        assert BootstrapSpec().seed == 99


class TestClassAggregation:
    def test_macro_equals_weighted_under_equal_weights(self):
        per_class = {1: 0.4, 2: 0.8}
        macro = aggregate_classes(per_class)
        weighted = aggregate_classes(per_class, {1: 0.5, 2: 0.5})
        assert macro == pytest.approx(weighted)

    def test_weighted(self):
        per_class = {1: 0.0, 2: 1.0}
        assert aggregate_classes(per_class, {1: 0.25, 2: 0.75}) == \
            pytest.approx(0.75)

    def test_excluded_classes_dropped(self):
        per_class = {1: Excluded("no pixels"), 2: 0.6}
        assert aggregate_classes(per_class) == pytest.approx(0.6)


class TestDecimalReport:
    def test_default_two_decimals(self):
        assert decimal_report(0.856) == "0.86"

    def test_one_decimal_under_high_variability(self):
        assert decimal_report(0.856, high_reference_variability=True) == "0.9"

    def test_excluded(self):
        assert decimal_report(Excluded("empty reference")) == \
            "n/a (excluded: empty reference)"


class TestWorstValues:
    def test_unit_metrics_default_to_zero(self):
        assert worst_value_for("dsc", AggregationSpec()) == 0.0

    def test_unbounded_metrics_have_no_default(self):
        assert worst_value_for("hausdorff", AggregationSpec()) is None
