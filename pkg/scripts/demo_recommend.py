"""Walk the recommender over a few hand-authored problem fingerprints.

Usage: python scripts/demo_recommend.py
"""

import json

from imgval.cli import _pool_summary
from imgval.core import ProblemCategory, ProblemFingerprint
from imgval.recommend import recommend

SCENARIOS = {
    "liver-style semantic segmentation": ProblemFingerprint(
        ProblemCategory.SemS, 1, {
            "FP3.1": False, "FP3.3": False, "FP2.3": False, "FP2.5.2": False,
            "FP2.5.7": False, "FP4.3.2": False,
            "FP2.5.6": "distance-contour-focus",
        }),
    "vessel-style tubular segmentation": ProblemFingerprint(
        ProblemCategory.SemS, 1, {
            "FP3.1": False, "FP3.3": True, "FP2.5.7": True,
        }),
    "scoreless lesion detection": ProblemFingerprint(
        ProblemCategory.ObD, 1, {
            "FP2.4": "rough-outline", "FP4.4": "rough-outline",
            "FP5.1": False, "FP5.4": False, "FP2.5.8": True,
            "FP2.6": "argmax", "FP3.1": True, "FP3.2": True,
            "FP4.3.1": False, "FP3.5": False, "FP2.7.1": False,
        }),
    "dermoscopy-style classification with calibration": ProblemFingerprint(
        ProblemCategory.ImLC, 8, {
            "FP2.6": "argmax", "FP2.5.2": False, "FP2.5.1": False,
            "FP4.2": True, "FP4.1": True, "FP2.5.5": True, "FP5.1": True,
            "FP2.7.1": True, "FP2.7.2": "none",
            "FP2.7.3": "calibration-only", "FP2.5.3": False,
        }),
}


def main():
    for name, fingerprint in SCENARIOS.items():
        print("=" * 72)
        print(name)
        print("-" * 72)
        pool = recommend(fingerprint)
        print(_pool_summary(pool))
        print()
        print("fingerprint:", json.dumps(fingerprint.to_json(), sort_keys=True))
        print()


if __name__ == "__main__":
    main()
