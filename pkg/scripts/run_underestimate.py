"""Run the two-phase burst benchmark and print full / spt / mpkilru LLC MPKI per policy."""

import argparse

from interval_lab.harness import run_experiment
from interval_lab.suites import underestimate_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/underestimate")
    ap.add_argument("--master-seed", type=int, default=1)
    ap.add_argument("--workload-seed", type=int, default=1)
    ap.add_argument("--spt-warmup", type=int, default=0, help="instructions of warmup before each spt window")
    args = ap.parse_args()
    spec = underestimate_experiment(args.master_seed, args.workload_seed, args.spt_warmup)
    res = run_experiment(spec, args.out)
    vals = res.benchmarks[0].values
    print(f"{'policy':8s} {'full':>9s} {'spt':>9s} {'mpkilru':>9s}")
    for policy in vals["full"]:
        row = [vals[s][policy]["mpki"] for s in ("full", "spt", "mpkilru")]
        print(f"{policy:8s} " + " ".join(f"{v:9.3f}" for v in row))
    print(f"reports in {args.out}")


if __name__ == "__main__":
    main()
