"""Run the eight-benchmark ranking-shift suite and print per-benchmark order values."""

import argparse

from interval_lab.harness import run_experiment
from interval_lab.suites import ranking_shift_suite

STRATEGIES = ("spt", "weight", "mpkilru", "mpkimax", "ff50k")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/ranking_suite")
    ap.add_argument("--master-seed", type=int, default=0)
    ap.add_argument("--benchmarks", type=int, default=8)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    res = run_experiment(ranking_shift_suite(args.master_seed, args.benchmarks, args.threads), args.out)
    rep = res.report
    print("order per benchmark")
    print(f"{'benchmark':10s} " + " ".join(f"{s:>8s}" for s in STRATEGIES))
    for b in res.benchmarks:
        print(f"{b.name:10s} " + " ".join(f"{rep.value(b.name, s, 'order'):8d}" for s in STRATEGIES))
    for metric in ("order", "closeness_mpki", "closeness_cpi"):
        cells = rep.grid[metric]["Avg"]
        print(f"Avg {metric}: " + ", ".join(f"{s}={cells[s]['arithmetic']:.3f}" for s in STRATEGIES))
    print(f"{res.executed} simulations run, {res.cached} cached; reports in {args.out}")


if __name__ == "__main__":
    main()
