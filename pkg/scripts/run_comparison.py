"""Sampler comparison on the default synthetic study area.

Writes the per-seed report CSV and prints mean costs per (method, stratum)
plus the paired one-sided sign tests behind the method ranking.

    python3 scripts/run_comparison.py --seeds 20 --out results/comparison.csv
"""

import argparse
import time
from pathlib import Path

from repsample.annealer import AnnealConfig
from repsample.strata import STRATA
from repsample.synth import METHODS, compare, default_prepared, sign_test_less, write_report_csv

# (smaller, larger, column): "smaller" should tend to beat "larger"
RANKINGS = [
    ("dual", "spatial", "final_cost_amul"),
    ("spatial", "stratified", "final_cost_amul"),
    ("dual", "random", "final_cost_ann"),
    ("spatial", "random", "final_cost_ann"),
    ("dual", "random", "final_cost_amul"),
]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--scenario-seed", type=int, default=0)
    ap.add_argument("--iters", type=int, default=5000)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="results/comparison.csv")
    args = ap.parse_args()

    prepared = default_prepared(args.scenario_seed)
    strat = prepared.stratification
    print(f"threshold {strat.threshold:.6f}: {len(strat.dense)} dense / {len(strat.sparse)} sparse units, "
          f"allocation {prepared.allocation.n_dense}/{prepared.allocation.n_sparse}")

    start = time.perf_counter()
    report = compare(prepared, METHODS, args.seeds, AnnealConfig(n=2, max_iters=args.iters), jobs=args.jobs)
    print(f"{len(report.rows)} rows in {time.perf_counter() - start:.1f} s")

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        write_report_csv(report, fh)

    print(f"\n{'method':>10} {'stratum':>7} {'cost_ann':>10} {'cost_amul':>10}")
    for (m, s), (ann, amul) in sorted(report.summary().items(), key=lambda kv: (kv[0][1], METHODS.index(kv[0][0]))):
        print(f"{m:>10} {s:>7} {ann:10.6f} {amul:10.6f}")

    print("\none-sided sign tests (p for 'a < b')")
    for a, b, col in RANKINGS:
        for s in STRATA:
            p = sign_test_less(report.values(a, s, col), report.values(b, s, col))
            print(f"  {col:>15} {s:>6}: {a} < {b}  p = {p:.3g}")


if __name__ == "__main__":
    main()
