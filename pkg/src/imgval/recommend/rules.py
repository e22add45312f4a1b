"""Content of the decision graph: category mapping plus subprocesses S2-S9.

Each node carries a stable anchor (subprocess or decision-guide identifier)
naming the framework rule it encodes. Figure-borne branch geometry is
reconstructed conservatively from the textual recipes; the graph version is
bumped whenever a predicate changes.
"""

from __future__ import annotations

from .graph import DecisionGraph, GuideOption

# effect shorthands -----------------------------------------------------------


def add(metric: str, slot: str, params: dict | None = None, *, optional=False,
        anchor="", note=None) -> dict:
    effect = {"kind": "add", "slot": slot, "metric": metric,
              "params": params or {}, "optional": optional, "anchor": anchor}
    if note:
        effect["note"] = note
    return effect


def warn(code: str, message: str) -> dict:
    return {"kind": "warn", "code": code, "message": message}


def note(message: str) -> dict:
    return {"kind": "note", "message": message}


def set_criterion(kind: str, **params) -> dict:
    return {"kind": "set-criterion", "criterion": {"kind": kind, **params}}


def set_assignment(kind: str, **params) -> dict:
    return {"kind": "set-assignment", "assignment": {"kind": kind, **params}}


def set_thresholds(values, policy: str) -> dict:
    return {"kind": "set-thresholds", "thresholds": list(values), "policy": policy}


def set_aggregation(**kv) -> dict:
    return {"kind": "set-aggregation", "settings": kv}


DEFAULT_THRESHOLD_GRID = [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9]
LOW_THRESHOLD = 0.1
HIGH_THRESHOLD = 0.75

_plus, _minus, _circ = "+", "-", "o"


def _t(sign: str, text: str) -> dict:
    return {"sign": sign, "text": text}


# -----------------------------------------------------------------------------
# S1 - category mapping
# -----------------------------------------------------------------------------


def build_s1(g: DecisionGraph) -> None:
    g.entry("S1", "S1.q-image-level")
    g.question("S1.q-image-level", "S1.image-level", "S1", {
        True: "S1.set-imlc", False: "S1.q-instances"})
    g.action("S1.set-imlc", [{"kind": "set-category", "category": "ImLC"}],
             "S1", "S1.end")
    g.question("S1.q-instances", "S1.multiple-instances", "S1", {
        False: "S1.set-sems", True: "S1.q-boundaries"})
    g.action("S1.set-sems", [{"kind": "set-category", "category": "SemS"}],
             "S1", "S1.end")
    g.question("S1.q-boundaries", "FP2.1", "S1", {
        True: "S1.set-ins", False: "S1.set-obd"})
    g.action("S1.set-ins", [{"kind": "set-category", "category": "InS"}],
             "S1", "S1.end")
    g.action("S1.set-obd", [{"kind": "set-category", "category": "ObD"}],
             "S1", "S1.end")
    g.end("S1.end")


# -----------------------------------------------------------------------------
# S2 - multi-class counting metric (ImLC)
# -----------------------------------------------------------------------------


def build_s2(g: DecisionGraph) -> None:
    g.entry("S2", "S2.q-rule")
    g.question("S2.q-rule", "FP2.6", "S2", {
        "none": "S2.no-rule",
        "target-value": "S2.report-cm",
        "optimization": "S2.report-cm",
        "argmax": "S2.report-cm",
        "cost-benefit": "S2.report-cm"})
    g.action("S2.no-rule",
             [note("no decision rule applied: skipping fixed-matrix metrics, "
                   "validation relies on multi-threshold metrics")],
             "S2", "S2.end")
    g.action("S2.report-cm",
             [note("report the full confusion matrix alongside any "
                   "multi-class score when the class count permits")],
             "S2", "S2.q-severity")
    g.question("S2.q-severity", "FP2.5.2", "S2", {
        True: "S2.q-costs", False: "S2.q-interest"})
    g.question("S2.q-costs", "FP2.5.4", "S2", {
        True: "S2.dg21", False: "S2.no-costs"})
    g.guide("S2.dg21", "DG2.1", "Cost-sensitive multi-class metric", [
        GuideOption("expected_cost", "Expected Cost (normalized)",
                    [add("expected_cost", "multi_class",
                         {"costs": "user-provided", "normalized": True},
                         anchor="DG2.1")],
                    recommended=True,
                    tradeoffs=[_t(_plus, "designed for asymmetric prediction-"
                                         "vs-reference comparison"),
                               _t(_plus, "normalized variant interpretable "
                                         "against the best naive classifier"),
                               _t(_plus, "comes with a framework to derive and "
                                         "validate the decision rule"),
                               _t(_circ, "not widely used in biomedical image "
                                         "analysis")]),
        GuideOption("weighted_cohens_kappa", "Weighted Cohen's Kappa",
                    [add("weighted_cohens_kappa", "multi_class",
                         {"weights": "user-provided", "scheme": "linear"},
                         anchor="DG2.1",
                         note="quadratic weights can produce paradoxical "
                              "results")],
                    tradeoffs=[_t(_plus, "widely used"),
                               _t(_minus, "designed for symmetric rater "
                                          "agreement"),
                               _t(_minus, "chance-agreement reference is hard "
                                          "to interpret for classifiers"),
                               _t(_minus, "quadratic weights can produce "
                                          "paradoxical results")]),
    ], "DG2.1", "S2.end", slot="multi_class")
    g.action("S2.no-costs",
             [warn("S2.costs-missing",
                   "unequal confusion severity declared but no costs "
                   "available; continuing with equal-severity options")],
             "S2", "S2.q-interest")
    g.question("S2.q-interest", "FP2.5.1", "S2", {
        True: "S2.q-mismatch", False: "S2.q-prevalences"})
    g.question("S2.q-mismatch", "FP2.5.3", "S2", {
        True: "S2.ec-priors", False: "S2.ecn-unequal"})
    g.action("S2.ec-priors",
             [add("expected_cost", "multi_class",
                  {"costs": "0-1", "priors": "class-importance", "normalized": True},
                  anchor="S2",
                  note="priors set from class importance to correct the "
                       "prevalence/importance mismatch")],
             "S2", "S2.end")
    g.action("S2.ecn-unequal",
             [add("expected_cost", "multi_class", {"costs": "0-1", "normalized": True},
                  anchor="DG2.3",
                  note="with unequal class interest, the normalized expected "
                       "cost is the option that does not force equal class "
                       "contribution")],
             "S2", "S2.end")
    g.question("S2.q-prevalences", "FP4.2", "S2", {
        False: "S2.dg22", True: "S2.q-imbalance"})
    g.guide("S2.dg22", "DG2.2", "Prevalence-independent multi-class metric", [
        GuideOption("balanced_accuracy", "Balanced Accuracy",
                    [add("balanced_accuracy", "multi_class", anchor="DG2.2")],
                    recommended=True,
                    tradeoffs=[_t(_plus, "widely used"),
                               _t(_circ, "prevalence independent: every class "
                                         "contributes equally")]),
        GuideOption("expected_cost", "Expected Cost with explicit priors",
                    [add("expected_cost", "multi_class",
                         {"costs": "0-1", "priors": "expected-population",
                          "normalized": False}, anchor="DG2.2")],
                    tradeoffs=[_t(_plus, "expected target-population "
                                         "prevalences can be set directly in "
                                         "the formula"),
                               _t(_circ, "not commonly known in biomedical "
                                         "image analysis")]),
    ], "DG2.2", "S2.end", slot="multi_class")
    g.question("S2.q-imbalance", "FP4.1", "S2", {
        False: "S2.accuracy", True: "S2.q-compensate"})
    g.action("S2.accuracy", [add("accuracy", "multi_class", anchor="S2")],
             "S2", "S2.end")
    g.question("S2.q-compensate", "FP2.5.5", "S2", {
        False: "S2.accuracy-imbalanced", True: "S2.dg23"})
    g.action("S2.accuracy-imbalanced",
             [add("accuracy", "multi_class", anchor="S2"),
              warn("S2.imbalance-uncompensated",
                   "class imbalance present and not compensated: accuracy "
                   "will be dominated by the frequent classes")],
             "S2", "S2.end")
    g.guide("S2.dg23", "DG2.3", "Imbalance-compensating multi-class metric", [
        GuideOption("balanced_accuracy", "Balanced Accuracy",
                    [add("balanced_accuracy", "multi_class", anchor="DG2.3")],
                    tradeoffs=[_t(_plus, "fixed naive reference at 1/C, "
                                         "bounded and easy to interpret"),
                               _t(_circ, "equal class contribution"),
                               _t(_minus, "insensitive to predictive values")]),
        GuideOption("mcc", "Matthews Correlation Coefficient",
                    [add("mcc", "multi_class", anchor="DG2.3")],
                    tradeoffs=[_t(_plus, "high values require high predictive "
                                         "values too"),
                               _t(_circ, "equal class contribution"),
                               _t(_minus, "intermediate values hard to "
                                          "interpret")]),
        GuideOption("expected_cost_normalized", "Normalized Expected Cost",
                    [add("expected_cost", "multi_class",
                         {"costs": "0-1", "normalized": True}, anchor="DG2.3")],
                    tradeoffs=[_t(_plus, "naive classifier pinned exactly at "
                                         "1"),
                               _t(_circ, "does not enforce equal class "
                                         "contribution"),
                               _t(_minus, "penalization can be overly strict")]),
    ], "DG2.3", "S2.end", slot="multi_class")
    g.end("S2.end")


# -----------------------------------------------------------------------------
# S3 - per-class counting metric (ImLC, ObD, InS)
# -----------------------------------------------------------------------------


def _readout_effect(category: str) -> dict:
    report = {"ImLC": ["specificity", "ppv", "npv"],
              "ObD": ["ppv", "fppi"],
              "InS": ["ppv", "fppi"]}[category]
    return add("metric_at_target", "per_class_counting",
               {"target_metric": "sensitivity", "target_value": 0.95,
                "report_metrics": report}, anchor="DG3.1",
               note="threshold fixed where the target metric reaches its "
                    "target value; configure the target on a dedicated split")


def _fbeta_option(anchor: str, recommended=False) -> GuideOption:
    return GuideOption(
        "f_beta", "F-beta Score",
        [add("f_beta", "per_class_counting", {"beta": 1.0}, anchor=anchor,
             note="raise beta to penalize misses harder, lower it to "
                  "penalize false alarms harder")],
        recommended=recommended,
        tradeoffs=[_t(_plus, "high scores guarantee a high positive "
                             "predictive value"),
                   _t(_minus, "no fixed reference value for random "
                              "performance"),
                   _t(_circ, "beta steers the miss/false-alarm tradeoff")])


def build_s3(g: DecisionGraph, category: str) -> None:
    p = f"S3-{category}"
    g.entry(p, f"{p}.start")
    if category in ("ObD", "InS"):
        g.question(f"{p}.start", "FP5.1", "S3", {
            False: f"{p}.scoreless", True: f"{p}.q-rule"})
        if category == "InS":
            g.guide(f"{p}.scoreless", "DG3.6",
                    "Detection metric for matched instances",
                    _dg36_options(), "DG3.6", f"{p}.end")
        else:
            g.action(f"{p}.scoreless",
                     [add("f_beta", "per_class_counting", {"beta": 1.0},
                          anchor="S3",
                          note="counting metric on the matched cardinalities; "
                               "no scores available for threshold sweeps")],
                     "S3", f"{p}.end")
        g.question(f"{p}.q-rule", "FP2.6", "S3", {
            "none": f"{p}.no-rule",
            "target-value": f"{p}.target",
            "optimization": f"{p}.counting",
            "argmax": f"{p}.counting",
            "cost-benefit": f"{p}.counting"})
        g.action(f"{p}.no-rule",
                 [note("no decision rule applied: no per-class counting "
                       "metric, multi-threshold metrics carry the validation")],
                 "S3", f"{p}.end")
        g.action(f"{p}.target", [_readout_effect(category)], "DG3.1", f"{p}.end")
        if category == "InS":
            g.guide(f"{p}.counting", "DG3.6",
                    "Detection metric for matched instances",
                    _dg36_options(), "DG3.6", f"{p}.end")
        else:
            g.action(f"{p}.counting",
                     [add("f_beta", "per_class_counting", {"beta": 1.0},
                          anchor="S3")],
                     "S3", f"{p}.end")
    else:  # ImLC
        g.question(f"{p}.start", "FP2.6", "S3", {
            "none": f"{p}.no-rule",
            "target-value": f"{p}.target",
            "cost-benefit": f"{p}.q-binary",
            "optimization": f"{p}.q-prevalences",
            "argmax": f"{p}.q-prevalences"})
        g.action(f"{p}.no-rule",
                 [note("no decision rule applied: no per-class counting "
                       "metric, multi-threshold metrics carry the validation")],
                 "S3", f"{p}.end")
        g.action(f"{p}.target", [_readout_effect(category)], "DG3.1", f"{p}.end")
        g.branch(f"{p}.q-binary", {"all": [["class-count", "==", 2]]}, "DG3.2",
                 f"{p}.dg32", f"{p}.cb-multiclass")
        g.guide(f"{p}.dg32", "DG3.2", "Cost-benefit counting metric", [
            GuideOption("net_benefit", "Net Benefit",
                        [add("net_benefit", "per_class_counting",
                             {"risk_threshold": "user-provided",
                              "decision_curve": True}, anchor="DG3.2",
                             note="plot over a reasonable range of risk "
                                  "thresholds when the single threshold is "
                                  "uncertain")],
                        recommended=True,
                        tradeoffs=[_t(_plus, "risk threshold set directly "
                                             "from the domain question"),
                                   _t(_plus, "benefits and harms on one "
                                             "scale"),
                                   _t(_circ, "popular in clinical studies, "
                                             "rare in image analysis")]),
            GuideOption("expected_cost", "Expected Cost",
                        [add("expected_cost", "per_class_counting",
                             {"costs": "user-provided", "normalized": True},
                             anchor="DG3.2")],
                        tradeoffs=[_t(_plus, "explicit misclassification "
                                             "costs; optimal threshold "
                                             "derivable analytically"),
                                   _t(_plus, "normalized variant has a naive "
                                             "reference"),
                                   _t(_circ, "cost perspective instead of "
                                             "risk perspective")]),
        ], "DG3.2", f"{p}.end")
        g.action(f"{p}.cb-multiclass",
                 [note("cost-benefit counting metrics are skipped for "
                       "multi-class one-vs-rest validation; the multi-class "
                       "metric carries the cost analysis")],
                 "DG3.2", f"{p}.end")
        g.question(f"{p}.q-prevalences", "FP4.2", "S3", {
            False: f"{p}.dg33", True: f"{p}.dg34"})
        g.guide(f"{p}.dg33", "DG3.3", "Prevalence-independent per-class metric", [
            GuideOption("lr_plus", "Positive Likelihood Ratio",
                        [add("lr_plus", "per_class_counting", anchor="DG3.3")],
                        recommended=True,
                        tradeoffs=[_t(_plus, "conveys both class "
                                             "sensitivities in one score"),
                                   _t(_plus, "usable as an optimization "
                                             "target"),
                                   _t(_minus, "insensitive to predictive "
                                              "values")]),
            GuideOption("sensitivity", "Sensitivity",
                        [add("sensitivity", "per_class_counting", anchor="DG3.3")],
                        tradeoffs=[_t(_plus, "directly interpretable"),
                                   _t(_minus, "optimizing it alone drives the "
                                              "threshold to the extreme"),
                                   _t(_minus, "insensitive to predictive "
                                              "values")]),
        ], "DG3.3", f"{p}.end")
        g.guide(f"{p}.dg34", "DG3.4", "Per-class counting metric", [
            _fbeta_option("DG3.4", recommended=True),
            GuideOption("sensitivity", "Sensitivity",
                        [add("sensitivity", "per_class_counting", anchor="DG3.4")],
                        tradeoffs=[_t(_plus, "easiest to interpret"),
                                   _t(_minus, "insensitive to predictive "
                                              "values")]),
            GuideOption("lr_plus", "Positive Likelihood Ratio",
                        [add("lr_plus", "per_class_counting", anchor="DG3.4")],
                        tradeoffs=[_t(_plus, "fixed random reference at 1"),
                                   _t(_minus, "insensitive to predictive "
                                              "values")]),
        ], "DG3.4", f"{p}.end")
    g.end(f"{p}.end")


def _dg36_options() -> list[GuideOption]:
    return [
        _fbeta_option("DG3.6"),
        GuideOption("pq", "Panoptic Quality",
                    [add("pq", "per_class_counting", anchor="DG3.6",
                         note="report the segmentation and detection factors "
                              "separately for traceability")],
                    recommended=True,
                    tradeoffs=[_t(_plus, "detection and segmentation quality "
                                         "in one score"),
                               _t(_minus, "single score hides which aspect "
                                          "degraded")]),
    ]


# -----------------------------------------------------------------------------
# S4 - multi-threshold metric (ImLC, ObD, InS)
# -----------------------------------------------------------------------------


def build_s4(g: DecisionGraph, category: str) -> None:
    p = f"S4-{category}"
    g.entry(p, f"{p}.q-scores")
    g.question(f"{p}.q-scores", "FP5.1", "S4", {
        False: f"{p}.no-scores", True: (f"{p}.q-prevalences" if category == "ImLC"
                                        else f"{p}.dg42")})
    g.action(f"{p}.no-scores",
             [warn("S4.no-scores",
                   "no continuous class scores: multi-threshold metrics "
                   "cannot be computed")],
             "S4", f"{p}.end")
    if category == "ImLC":
        g.question(f"{p}.q-prevalences", "FP4.2", "S4", {
            True: f"{p}.dg41", False: f"{p}.auroc"})
        g.action(f"{p}.auroc",
                 [add("auroc", "multi_threshold", anchor="S4",
                      note="prevalence-independent choice; average precision "
                           "would not transfer to other prevalences")],
                 "S4", f"{p}.end")
        g.guide(f"{p}.dg41", "DG4.1", "Multi-threshold metric", [
            GuideOption("auroc", "Area under the ROC curve",
                        [add("auroc", "multi_threshold", anchor="DG4.1")],
                        recommended=True,
                        tradeoffs=[_t(_plus, "interpretable as a ranking "
                                             "probability; fixed 0.5 random "
                                             "reference"),
                                   _t(_minus, "insensitive to predictive "
                                              "values under imbalance")]),
            GuideOption("average_precision", "Average Precision",
                        [add("average_precision", "multi_threshold",
                             {"interpolation": "all-point"}, anchor="DG4.1")],
                        tradeoffs=[_t(_plus, "high scores ensure high "
                                             "predictive values, also under "
                                             "imbalance"),
                                   _t(_minus, "random reference equals the "
                                              "prevalence, so it varies per "
                                              "data set")]),
            GuideOption("both", "Report both",
                        [add("auroc", "multi_threshold", anchor="DG4.1"),
                         add("average_precision", "multi_threshold",
                             {"interpolation": "all-point"}, anchor="DG4.1")],
                        notes=["reporting both is recommended when no clear "
                               "choice can be made"]),
        ], "DG4.1", f"{p}.end")
    else:
        g.guide(f"{p}.dg42", "DG4.2", "Detection multi-threshold metric", [
            GuideOption("average_precision", "Average Precision",
                        [add("average_precision", "multi_threshold",
                             {"interpolation": "all-point",
                              "aggregation": "per-dataset"}, anchor="DG4.2")],
                        recommended=True,
                        tradeoffs=[_t(_plus, "standard, comparatively well "
                                             "standardized"),
                                   _t(_circ, "per-dataset pooling ignores the "
                                             "number of images"),
                                   _t(_minus, "low-confidence predictions "
                                              "need an explicit cutoff")]),
            GuideOption("froc_score", "FROC Score",
                        [add("froc_score", "multi_threshold",
                             {"fppi_grid": [0.125, 0.25, 0.5, 1.0, 2.0, 4.0,
                                            8.0]}, anchor="DG4.2")],
                        tradeoffs=[_t(_plus, "easy clinical interpretation: "
                                             "sensitivity at tolerated false "
                                             "positives per image"),
                                   _t(_plus, "accounts for the number of "
                                             "images; low-confidence "
                                             "predictions drop out "
                                             "naturally"),
                                   _t(_minus, "FPPI grid is not "
                                              "standardized")]),
        ], "DG4.2", f"{p}.end")
    g.end(f"{p}.end")


# -----------------------------------------------------------------------------
# S5 - calibration metrics (ImLC; optionally ObD/InS without NLL)
# -----------------------------------------------------------------------------


def build_s5(g: DecisionGraph, category: str) -> None:
    p = f"S5-{category}"
    at_image_level = category == "ImLC"
    g.entry(p, f"{p}.q-requested")
    g.question(f"{p}.q-requested", "FP2.7.1", "S5", {
        False: f"{p}.end", True: f"{p}.q-use-case"})
    g.question(f"{p}.q-use-case", "FP2.7.2", "S5", {
        "U1": f"{p}.dg52", "U2": f"{p}.q-u2-interest", "U3": f"{p}.u3",
        "none": f"{p}.q-interpret"})
    psr_note = note("proper scores conflate discrimination and calibration; "
                    "rankings remain valid when the classifier is fixed")
    g.guide(f"{p}.dg52", "DG5.2", "Metric for ranking re-calibration methods", [
        GuideOption("brier_score", "Brier Score",
                    [add("brier_score", "calibration", {"normalize": False},
                         anchor="DG5.2")],
                    recommended=True,
                    tradeoffs=[_t(_plus, "unbiased, interpretable, "
                                         "long-established"),
                               _t(_circ, "captures discrimination changes of "
                                         "non-accuracy-preserving "
                                         "re-calibration too")]),
        GuideOption("kce", "Kernel Calibration Error",
                    [add("kce", "calibration", {"kernel_scale": "auto"},
                         anchor="DG5.2")],
                    tradeoffs=[_t(_plus, "unbiased estimator of the isolated "
                                         "canonical error"),
                               _t(_minus, "hard to interpret, may be "
                                          "negative"),
                               _t(_minus, "kernel configuration is "
                                          "nontrivial")]),
        GuideOption("ece_kde", "Kernel-density Calibration Error",
                    [add("ece_kde", "calibration", {"p": 1, "bandwidth": "auto"},
                         anchor="DG5.2")],
                    tradeoffs=[_t(_plus, "interpretable isolated canonical "
                                         "error"),
                               _t(_minus, "estimator is biased (de-biasing "
                                          "schemes are emerging)")]),
    ], "DG5.2", f"{p}.q-interpret", slot="calibration")
    g.question(f"{p}.q-u2-interest", "FP2.5.1", "S5", {
        True: f"{p}.u2-cwce", False: f"{p}.dg51"})
    g.action(f"{p}.u2-cwce",
             [add("cwce", "calibration",
                  {"weighting": "per-class-report"}, anchor="S5"),
              add("cwce", "calibration", {"weighting": "importance-weights"},
                  anchor="S5",
                  note="weight the per-class errors by class importance")],
             "S5", f"{p}.q-interpret")
    g.guide(f"{p}.dg51", "DG5.1", "Canonical calibration-error estimator", [
        GuideOption("kce", "Kernel Calibration Error",
                    [add("kce", "calibration", {"kernel_scale": "auto"},
                         anchor="DG5.1")],
                    recommended=True,
                    tradeoffs=[_t(_plus, "unbiased: comparisons do not "
                                         "depend on the data-set size"),
                               _t(_minus, "not interpretable, may be "
                                          "negative"),
                               _t(_minus, "kernel configuration is "
                                          "nontrivial")]),
        GuideOption("ece_kde", "Kernel-density Calibration Error",
                    [add("ece_kde", "calibration", {"p": 1, "bandwidth": "auto"},
                         anchor="DG5.1")],
                    tradeoffs=[_t(_plus, "straightforward to interpret and "
                                         "configure"),
                               _t(_minus, "biased estimator")]),
    ], "DG5.1", f"{p}.q-interpret", slot="calibration")
    if at_image_level:
        g.guide(f"{p}.u3", "DG5.3", "Overall performance measure", [
            GuideOption("brier_score", "Brier Score",
                        [add("brier_score", "calibration", {"normalize": False},
                             anchor="DG5.3"),
                         add("brier_score", "calibration",
                             {"normalize": False, "skill": True},
                             optional=True, anchor="DG5.3",
                             note="skill variant rescales against the naive "
                                  "prevalence predictor")],
                        recommended=True,
                        tradeoffs=[_t(_plus, "bounded, interpretable as a "
                                             "mean squared error"),
                                   _t(_minus, "bounded penalization favours "
                                              "naive systems under "
                                              "imbalance")]),
            GuideOption("nll", "Negative Log-Likelihood",
                        [add("nll", "calibration", {"epsilon": 1e-12},
                             anchor="DG5.3")],
                        tradeoffs=[_t(_circ, "heavily penalizes confident "
                                             "mistakes; favours conservative "
                                             "models"),
                                   _t(_minus, "no upper bound, harder to "
                                              "interpret")]),
        ], "DG5.3", f"{p}.q-interpret", slot="calibration")
    else:
        g.action(f"{p}.u3",
                 [add("brier_score", "calibration", {"normalize": False},
                      anchor="DG5.3"),
                  note("the negative log-likelihood is not applicable at "
                       "object level because the background class is "
                       "discarded"),
                  psr_note],
                 "DG5.3", f"{p}.q-interpret")
    g.question(f"{p}.q-interpret", "FP2.7.3", "S5", {
        "none": f"{p}.end",
        "joint-with-discrimination": f"{p}.joint",
        "calibration-only": f"{p}.q-class-mismatch"})
    if at_image_level:
        g.guide(f"{p}.joint", "DG5.3", "Overall performance measure", [
            GuideOption("brier_score", "Brier Score",
                        [add("brier_score", "calibration", {"normalize": False},
                             anchor="DG5.3")],
                        recommended=True,
                        tradeoffs=[_t(_plus, "bounded and interpretable")]),
            GuideOption("nll", "Negative Log-Likelihood",
                        [add("nll", "calibration", {"epsilon": 1e-12},
                             anchor="DG5.3")],
                        tradeoffs=[_t(_circ, "strong penalty on confident "
                                             "mistakes")]),
        ], "DG5.3", f"{p}.end", slot="calibration")
    else:
        g.action(f"{p}.joint",
                 [add("brier_score", "calibration", {"normalize": False},
                      anchor="DG5.3"),
                  note("the negative log-likelihood is not applicable at "
                       "object level because the background class is "
                       "discarded")],
                 "DG5.3", f"{p}.end")
    g.question(f"{p}.q-class-mismatch", "FP2.5.3", "S5", {
        True: f"{p}.cwce", False: f"{p}.dg54"})
    g.action(f"{p}.cwce",
             [add("cwce", "calibration", {"weighting": "per-class-report"},
                  anchor="DG5.4"),
              add("cwce", "calibration", {"weighting": "importance-weights"},
                  anchor="DG5.4")],
             "DG5.4", f"{p}.end")
    g.guide(f"{p}.dg54", "DG5.4", "Calibration condition to assess", [
        GuideOption("canonical", "Canonical error with guaranteed bound",
                    [add("ece_kde", "calibration", {"p": 1, "bandwidth": "auto"},
                         anchor="DG5.4"),
                     add("root_brier_score", "calibration", anchor="DG5.4",
                         note="guaranteed upper bound of the canonical "
                              "error"),
                     add("cwce", "calibration", {"weighting": "per-class-report"},
                         optional=True, anchor="DG5.4")],
                    recommended=True,
                    tradeoffs=[_t(_plus, "strongest condition; weaker ones "
                                         "underestimate miscalibration")]),
        GuideOption("class-wise", "Class-wise error",
                    [add("cwce", "calibration", {"weighting": "per-class-report"},
                         anchor="DG5.4"),
                     add("cwce", "calibration", {"weighting": "uniform"},
                         anchor="DG5.4")],
                    tradeoffs=[_t(_plus, "per-class reliability made "
                                         "explicit"),
                               _t(_minus, "aggregated value unstable with "
                                          "few samples or many classes")]),
        GuideOption("top-label", "Top-label error",
                    [add("ece", "calibration", {"bins": 10,
                                                "strategy": "equal-width"},
                         anchor="DG5.4",
                         note="never tune the bin count on the validation "
                              "data"),
                     add("root_brier_score", "calibration", anchor="DG5.4")],
                    tradeoffs=[_t(_circ, "focuses exactly on the decision "
                                         "scores"),
                               _t(_minus, "weakest condition; assumes an "
                                          "argmax decision rule and biased "
                                          "binning")]),
    ], "DG5.4", f"{p}.end", slot="calibration")
    g.end(f"{p}.end")


# -----------------------------------------------------------------------------
# S6 - overlap-based segmentation metric (SemS, InS)
# -----------------------------------------------------------------------------


def build_s6(g: DecisionGraph) -> None:
    g.entry("S6", "S6.q-small")
    g.question("S6.q-small", "FP3.1", "S6", {
        True: "S6.q-noisy", False: "S6.q-tubular"})
    g.question("S6.q-noisy", "FP4.3.1", "S6", {
        True: "S6.skip", False: "S6.small-warn"})
    g.action("S6.skip",
             [warn("S6.small-noisy",
                   "consistently small structures with a possibly noisy "
                   "reference: overlap metrics are skipped, boundary metrics "
                   "carry the segmentation assessment")],
             "S6", "S6.end")
    g.action("S6.small-warn",
             [warn("S6.small-structures",
                   "overlap scores react strongly to single-pixel errors on "
                   "small structures; interpret with care")],
             "S6", "S6.q-tubular")
    g.question("S6.q-tubular", "FP3.3", "S6", {
        True: "S6.cldice", False: "S6.q-center"})
    g.question("S6.q-center", "FP2.3", "S6", {
        True: "S6.cldice", False: "S6.q-severity"})
    g.action("S6.cldice",
             [add("cl_dice", "overlap", anchor="S6"),
              add("dsc", "overlap", optional=True, anchor="S6",
                  note="optionally reported alongside the centerline overlap")],
             "S6", "S6.end")
    g.question("S6.q-severity", "FP2.5.2", "S6", {
        True: "S6.fbeta", False: "S6.dg61"})
    g.action("S6.fbeta",
             [add("f_beta", "overlap", {"beta": 1.0}, anchor="DG6.2",
                  note="raise beta to penalize undersegmentation, lower it "
                       "to penalize oversegmentation")],
             "DG6.2", "S6.end")
    g.guide("S6.dg61", "DG6.1", "Overlap metric", [
        GuideOption("dsc", "Dice Similarity Coefficient",
                    [add("dsc", "overlap", anchor="DG6.1")],
                    recommended=True,
                    tradeoffs=[_t(_circ, "identical to the F1 score at pixel "
                                         "level"),
                               _t(_circ, "preferred in the medical "
                                         "community")]),
        GuideOption("iou", "Intersection over Union",
                    [add("iou", "overlap", anchor="DG6.1")],
                    tradeoffs=[_t(_circ, "identical to the Jaccard index"),
                               _t(_circ, "preferred in the computer-vision "
                                         "community")]),
    ], "DG6.1", "S6.end", slot="overlap")
    g.end("S6.end")


# -----------------------------------------------------------------------------
# S7 - boundary-based segmentation metric (SemS, InS)
# -----------------------------------------------------------------------------


def build_s7(g: DecisionGraph) -> None:
    g.entry("S7", "S7.q-imprecision")
    g.question("S7.q-imprecision", "FP2.5.7", "S7", {
        True: "S7.nsd", False: "S7.q-outliers"})
    g.action("S7.nsd",
             [add("nsd", "boundary", {"tolerance": "from-inter-rater-variability"},
                  anchor="S7",
                  note="tolerance absorbs annotation imprecision; derive it "
                       "from inter-rater variability where available")],
             "S7", "S7.end")
    g.question("S7.q-outliers", "FP4.3.2", "S7", {
        True: "S7.dg71", False: "S7.q-penalty"})
    g.question("S7.q-penalty", "FP2.5.6", "S7", {
        "existence": "S7.dg71b",
        "distance-contour-focus": "S7.dg72",
        "distance-outlier-focus": "S7.dg73"})
    for node_id in ("S7.dg71", "S7.dg71b"):
        g.guide(node_id, "DG7.1", "Outlier-robust boundary metric", [
            GuideOption("nsd", "Normalized Surface Distance",
                        [add("nsd", "boundary",
                             {"tolerance": "from-inter-rater-variability"},
                             anchor="DG7.1")],
                        recommended=True,
                        tradeoffs=[_t(_plus, "tolerance disregards deviations "
                                             "below the threshold"),
                                   _t(_circ, "share of correctly predicted "
                                             "contour")]),
            GuideOption("boundary_iou", "Boundary IoU",
                        [add("boundary_iou", "boundary", {"width": 2.0},
                             anchor="DG7.1")],
                        tradeoffs=[_t(_plus, "direct contour overlap: slight "
                                             "errors stay visible"),
                                   _t(_circ, "band width steers sensitivity; "
                                             "wide bands approach the mask "
                                             "IoU")]),
        ], "DG7.1", "S7.end", slot="boundary")
    g.guide("S7.dg72", "DG7.2", "Average distance metric", [
        GuideOption("masd", "Mean Average Surface Distance",
                    [add("masd", "boundary", anchor="DG7.2")],
                    recommended=True,
                    tradeoffs=[_t(_plus, "reference and prediction contours "
                                         "contribute equally"),
                               _t(_minus, "a tiny prediction hugging the "
                                          "reference can look deceptively "
                                          "good")]),
        GuideOption("assd", "Average Symmetric Surface Distance",
                    [add("assd", "boundary", anchor="DG7.2")],
                    tradeoffs=[_t(_minus, "the larger contour dominates the "
                                          "mean")]),
    ], "DG7.2", "S7.end", slot="boundary")
    g.guide("S7.dg73", "DG7.3", "Maximum distance metric", [
        GuideOption("hausdorff", "Hausdorff Distance",
                    [add("hausdorff", "boundary", anchor="DG7.3")],
                    recommended=True,
                    tradeoffs=[_t(_plus, "maximal penalty for spatial "
                                         "outliers"),
                               _t(_minus, "a single noisy reference pixel "
                                          "dominates the value")]),
        GuideOption("hausdorff_95", "95th percentile Hausdorff Distance",
                    [add("hausdorff_95", "boundary", {"percentile": 95.0},
                         anchor="DG7.3")],
                    tradeoffs=[_t(_plus, "disregards rare spatial outliers")]),
    ], "DG7.3", "S7.end", slot="boundary")
    g.end("S7.end")


# -----------------------------------------------------------------------------
# S8 - localization criterion (ObD, InS)
# -----------------------------------------------------------------------------


def _threshold_chain(g: DecisionGraph, prefix: str, done: str) -> str:
    """DG8.3: pick a single low/high threshold or the averaged default grid."""
    entry = f"{prefix}.q-lower"
    g.branch(entry,
             {"any": [["FP3.1", "==", True], ["FP3.2", "==", True],
                      ["FP4.3.1", "==", True]]},
             "DG8.3", f"{prefix}.q-higher-conflict", f"{prefix}.q-higher")
    g.branch(f"{prefix}.q-higher", {"all": [["FP3.5", "==", True]]}, "DG8.3",
             f"{prefix}.high", f"{prefix}.grid")
    g.branch(f"{prefix}.q-higher-conflict", {"all": [["FP3.5", "==", True]]},
             "DG8.3", f"{prefix}.conflict", f"{prefix}.low")
    g.action(f"{prefix}.grid",
             [set_thresholds(DEFAULT_THRESHOLD_GRID, "grid"),
              note("metrics are averaged over the localization threshold "
                   "grid")],
             "DG8.3", done)
    g.action(f"{prefix}.low",
             [set_thresholds([LOW_THRESHOLD], "low"),
              note("small or variable structures or an uncertain reference "
                   "warrant a single low localization threshold")],
             "DG8.3", done)
    g.action(f"{prefix}.high",
             [set_thresholds([HIGH_THRESHOLD], "high"),
              note("densely packed structures warrant a single high "
                   "localization threshold")],
             "DG8.3", done)
    g.action(f"{prefix}.conflict",
             [set_thresholds(DEFAULT_THRESHOLD_GRID, "grid"),
              warn("S8.threshold-conflict",
                   "both low- and high-threshold conditions hold; keeping "
                   "the averaged default grid")],
             "DG8.3", done)
    return entry


def build_s8(g: DecisionGraph, category: str) -> None:
    p = f"S8-{category}"
    if category == "ObD":
        g.entry(p, f"{p}.q-granularity")
        g.question(f"{p}.q-granularity", "FP2.4", "S8", {
            "rough-outline": f"{p}.q-ref-outline",
            "overall-position": f"{p}.q-ref-position"})
        g.question(f"{p}.q-ref-outline", "FP4.4", "S8", {
            "exact-outline": f"{p}.box",
            "rough-outline": f"{p}.box",
            "center-point": f"{p}.center-coarse"})
        thr_entry = _threshold_chain(g, f"{p}.thr", f"{p}.end")
        g.action(f"{p}.box",
                 [set_criterion("box-iou"),
                  note("boxes approximate shapes poorly in 3-D and for "
                       "disconnected structures; prefer masks where "
                       "available")],
                 "S8", thr_entry)
        g.action(f"{p}.center-coarse",
                 [set_criterion("center-distance", threshold="set-from-structure-size"),
                  warn("S8.reference-too-coarse",
                       "point references cannot support outline-level "
                       "localization; falling back to the center distance")],
                 "S8", f"{p}.end")
        g.question(f"{p}.q-ref-position", "FP4.4", "S8", {
            "exact-outline": f"{p}.dg82-fine",
            "rough-outline": f"{p}.dg82-coarse",
            "center-point": f"{p}.center"})
        g.action(f"{p}.center",
                 [set_criterion("center-distance", threshold="set-from-structure-size")],
                 "S8", f"{p}.end")
        center_option = GuideOption(
            "center-distance", "Center distance",
            [set_criterion("center-distance", threshold="set-from-structure-size")],
            recommended=True,
            tradeoffs=[_t(_plus, "represents the object position well; "
                                 "strictness adjustable via the distance "
                                 "threshold"),
                       _t(_minus, "needs a threshold; ignores overlap and "
                                  "fits tubular or disconnected shapes "
                                  "poorly")])
        point_inside = GuideOption(
            "point-inside", "Point inside mask/box",
            [set_criterion("point-inside")],
            tradeoffs=[_t(_plus, "no hyperparameter; handles tubular and "
                                 "disconnected structures"),
                       _t(_minus, "strictness cannot be varied")])
        g.guide(f"{p}.dg82-fine", "DG8.2", "Position-only localization criterion", [
            center_option,
            GuideOption("mask-iou-gt-zero", "Mask overlap greater than zero",
                        [set_criterion("mask-iou-gt-zero")],
                        tradeoffs=[_t(_plus, "no hyperparameter"),
                                   _t(_minus, "arbitrarily large predictions "
                                              "can pass")]),
            point_inside,
        ], "DG8.2", f"{p}.end", slot="detection")
        g.guide(f"{p}.dg82-coarse", "DG8.2", "Position-only localization criterion", [
            center_option, point_inside,
        ], "DG8.2", f"{p}.end", slot="detection")
        g.end(f"{p}.end")
    else:  # InS
        g.entry(p, f"{p}.dg81")
        thr_entry = _threshold_chain(g, f"{p}.thr", f"{p}.end")
        g.guide(f"{p}.dg81", "DG8.1", "Instance localization criterion", [
            GuideOption("mask-iou", "Mask IoU",
                        [set_criterion("mask-iou")],
                        recommended=True,
                        tradeoffs=[_t(_plus, "widely used overlap criterion"),
                                   _t(_minus, "punishes non-split errors of "
                                              "touching references hard"),
                                   _t(_minus, "over-penalizes small "
                                              "structures under high size "
                                              "variability")]),
            GuideOption("boundary-iou", "Boundary IoU",
                        [set_criterion("boundary-iou", boundary_width=2.0)],
                        tradeoffs=[_t(_plus, "focuses on boundary quality and "
                                             "is more size-invariant"),
                                   _t(_minus, "can be perfect for imperfect "
                                              "predictions"),
                                   _t(_circ, "band width is an extra "
                                             "hyperparameter")]),
            GuideOption("ior", "Intersection over Reference",
                        [set_criterion("ior"),
                         note("one prediction covering several references "
                              "can be tolerated; penalize such merges via "
                              "dedicated merge counts")],
                        tradeoffs=[_t(_plus, "gentler on touching references "
                                             "covered by one prediction"),
                                   _t(_minus, "can be deceived by very large "
                                              "predictions")]),
        ], "DG8.1", thr_entry, slot="detection")
        g.end(f"{p}.end")


# -----------------------------------------------------------------------------
# S9 - assignment strategy (ObD, InS)
# -----------------------------------------------------------------------------


def build_s9(g: DecisionGraph, category: str) -> None:
    p = f"S9-{category}"
    g.entry(p, f"{p}.q-scores")
    g.question(f"{p}.q-scores", "FP5.1", "S9", {
        True: f"{p}.greedy-score", False: f"{p}.q-overlap-preds"})
    g.action(f"{p}.greedy-score",
             [set_assignment("greedy-by-score")],
             "S9", f"{p}.q-punish")
    g.question(f"{p}.q-overlap-preds", "FP5.4", "S9", {
        True: f"{p}.dg91-overlapping", False: f"{p}.q-criterion"})
    g.branch(f"{p}.q-criterion",
             {"all": [["pool.criterion-overlap", "==", True],
                      ["pool.criterion-thresholded", "==", True]]},
             "DG9.1", f"{p}.dg91", f"{p}.dg91-overlapping")
    greedy_loc = GuideOption(
        "greedy-by-localization", "Greedy by localization criterion",
        [set_assignment("greedy-by-localization")],
        tradeoffs=[_t(_plus, "no sophisticated machinery; candidate pairs "
                             "ranked by localization quality"),
                   _t(_circ, "globally sorted pair list, first come first "
                             "served")])
    hungarian = GuideOption(
        "hungarian", "Optimal (Hungarian) matching",
        [set_assignment("hungarian")],
        tradeoffs=[_t(_plus, "maximizes the total localization quality"),
                   _t(_minus, "optimistic reading of ambiguous outputs; may "
                              "overstate deployment performance")])
    g.guide(f"{p}.dg91", "DG9.1", "Assignment without prediction scores", [
        GuideOption("overlap-gt-half", "Matching via overlap greater than 0.5",
                    [set_assignment("overlap-gt-half"),
                     set_thresholds([0.5], "overlap-gt-half"),
                     note("a strict overlap above one half makes every "
                          "assignment unambiguous")],
                    recommended=True,
                    tradeoffs=[_t(_plus, "assignment ambiguities are "
                                         "impossible by construction"),
                               _t(_minus, "infeasible when predictions can "
                                          "overlap")]),
        greedy_loc,
        hungarian,
    ], "DG9.1", f"{p}.q-punish", slot="detection")
    g.guide(f"{p}.dg91-overlapping", "DG9.1", "Assignment without prediction scores", [
        greedy_loc, hungarian,
    ], "DG9.1", f"{p}.q-punish", slot="detection")
    g.question(f"{p}.q-punish", "FP2.5.8", "S9", {
        True: f"{p}.punish", False: f"{p}.lenient"})
    g.action(f"{p}.punish",
             [set_assignment_flag(True)], "S9", f"{p}.end")
    g.action(f"{p}.lenient",
             [set_assignment_flag(False),
              note("surplus predictions of an already matched reference are "
                   "dropped instead of counted as false positives")],
             "S9", f"{p}.end")
    g.end(f"{p}.end")


def set_assignment_flag(punish: bool) -> dict:
    return {"kind": "set-assignment-flag", "punish_double_assignments": punish}


# -----------------------------------------------------------------------------


def build_graph() -> DecisionGraph:
    g = DecisionGraph()
    build_s1(g)
    build_s2(g)
    for category in ("ImLC", "ObD", "InS"):
        build_s3(g, category)
        build_s4(g, category)
        build_s5(g, category)
    build_s6(g)
    build_s7(g)
    for category in ("ObD", "InS"):
        build_s8(g, category)
        build_s9(g, category)
    g.validate()
    return g


#: subprocess order per category; scope marks per-class traversal
CATEGORY_PATHS: dict[str, list[tuple[str, str]]] = {
    "ImLC": [("S2", "global"), ("S3-ImLC", "per-class"), ("S4-ImLC", "per-class"),
             ("S5-ImLC", "global")],
    "SemS": [("S6", "per-class"), ("S7", "per-class")],
    "ObD": [("S8-ObD", "global"), ("S9-ObD", "global"), ("S3-ObD", "per-class"),
            ("S4-ObD", "per-class"), ("S5-ObD", "global")],
    "InS": [("S8-InS", "global"), ("S9-InS", "global"), ("S3-InS", "per-class"),
            ("S4-InS", "per-class"), ("S6", "per-class"), ("S7", "per-class"),
            ("S5-InS", "global")],
}
