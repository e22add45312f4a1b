"""Generate a toy segmentation dataset, recommend metrics, evaluate, report.

Usage: python scripts/demo_evaluate.py [outdir]
"""

import sys
from pathlib import Path

import numpy as np

from imgval.aggregate import AggregationSpec, BootstrapSpec
from imgval.core import ProblemCategory, ProblemFingerprint
from imgval.evaluate import evaluate_pool
from imgval.io import canonical_json, parse_dataset
from imgval.recommend import recommend


def toy_dataset(n_cases=12, seed=0):
    rng = np.random.default_rng(seed)
    cases = []
    for i in range(n_cases):
        grid = np.zeros((32, 32), dtype=int)
        r, c = rng.integers(4, 16, size=2)
        size = int(rng.integers(6, 12))
        grid[r:r + size, c:c + size] = 1
        shift = int(rng.integers(0, 3))
        pred = np.roll(grid, shift, axis=rng.integers(0, 2))
        cases.append({
            "id": f"img-{i:02d}", "group": f"patient-{i // 3}",
            "reference": {"shape": [32, 32], "values": grid.tolist()},
            "prediction": {"shape": [32, 32], "values": pred.tolist()},
        })
    return parse_dataset({"task": "SemS", "classes": ["background", "organ"],
                          "cases": cases})


def main():
    outdir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_run")
    fingerprint = ProblemFingerprint(ProblemCategory.SemS, 1, {
        "FP3.1": False, "FP3.3": False, "FP2.3": False, "FP2.5.2": False,
        "FP2.5.7": True, "FP4.5": True,
    })
    pool = recommend(fingerprint)
    pool.resolve_guide("DG6.1", "dsc")
    dataset = toy_dataset()
    agg = AggregationSpec(nan_handling="worst-value", hierarchy=("group",),
                          bootstrap=BootstrapSpec(resamples=500, seed=7))
    report = evaluate_pool(dataset, pool, agg=agg)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "report.json").write_text(canonical_json(report.to_json()) + "\n")
    (outdir / "report.csv").write_text(report.to_csv())
    print(report.to_csv())
    print(f"written to {outdir}/")


if __name__ == "__main__":
    main()
