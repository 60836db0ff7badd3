"""Command-line entry point: ``interval-lab <command> ...``.

Exit codes: 0 ok, 2 spec/config error, 3 data error, 4 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from interval_lab import cache as cs
from interval_lab.errors import DataError, SpecError
from interval_lab.harness import load_experiment, run_experiment
from interval_lab.phases import export_simpoints, load_plan, save_plan, simpoint_plan
from interval_lab.policies import PolicyKind
from interval_lab.reweight import PolicyResult, mpkilru_weights, mpkimax_weights
from interval_lab.synth import SyntheticWorkloadSpec, generate_synthetic
from interval_lab.trace import load_trace, write_text_trace, write_trace

EXIT_OK, EXIT_SPEC, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: {exc}") from None
    except OSError as exc:
        raise SpecError(f"{path}: {exc.strerror}") from None


def _write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _parse_interval(text):
    try:
        parts = [int(p) for p in text.split(":")]
    except ValueError:
        raise SpecError(f"bad --interval {text!r}; expected start:len[:warmup]") from None
    if len(parts) not in (2, 3):
        raise SpecError(f"bad --interval {text!r}; expected start:len[:warmup]")
    start, length = parts[:2]
    return start, length, parts[2] if len(parts) == 3 else 0


def _hierarchy(arg):
    if arg is None:
        return cs.desk_hierarchy()
    if Path(arg).exists():
        return cs.load_hierarchy(arg)
    return cs.named_hierarchy(arg)


def cmd_trace_gen(args):
    spec = SyntheticWorkloadSpec.from_json(_read_json(args.spec))
    meta, trace = generate_synthetic(spec)
    if args.text:
        write_text_trace(trace, args.out, comment=f"{meta.name} {meta.input_label}")
    else:
        write_trace(trace, meta, args.out)
    print(f"wrote {meta.event_count} events to {args.out}")


def cmd_trace_convert(args):
    trace = load_trace(args.input)
    if args.text:
        write_text_trace(trace, args.out)
    else:
        write_trace(trace, trace.meta, args.out)
    print(f"wrote {len(trace)} events to {args.out}")


def cmd_simulate(args):
    trace = load_trace(args.trace)
    config = _hierarchy(args.config)
    policy = PolicyKind.parse(args.policy)
    out = {"trace": str(args.trace), "policy": policy.to_json(), "seed": args.seed, "config": config.to_json()}
    if args.interval:
        start, length, warmup = _parse_interval(args.interval)
        if args.timeline:
            raise SpecError("--timeline applies to full runs only")
        st = cs.run_interval(trace, config, policy, start, length, warmup, args.seed)
        out["interval"] = {"start": start, "length": length, "warmup": warmup}
    elif args.timeline:
        st, tl = cs.full_with_timeline(trace, config, policy, args.timeline, args.seed)
        out["timeline"] = [
            {"window_start": p.window_start_instruction, "window_length": p.window_length, "mpki_llc": p.mpki_llc}
            for p in tl
        ]
    else:
        st = cs.run_full(trace, config, policy, args.seed)
    out["stats"] = st.to_json()
    out["mpki_llc"] = st.mpki_llc
    out["cpi"] = st.cpi
    _write_json(args.out, out)
    print(f"{policy}: MPKI(LLC)={st.mpki_llc:.4f} CPI={st.cpi:.4f}")


def cmd_phases(args):
    trace = load_trace(args.trace)
    plan = simpoint_plan(
        trace,
        chunk_size=args.chunk,
        dim=args.dim,
        k=args.k,
        max_k=args.max_k,
        projection_seed=args.seed,
        kmeans_seed=args.seed,
    )
    save_plan(plan, args.out)
    if args.simpoints_out:
        export_simpoints(plan, args.simpoints_out)
    print(f"{len(plan.intervals)} intervals (k={plan.provenance['k']}) -> {args.out}")


def _load_results(plan, results_dir):
    """Collect per-interval stats by policy from ``simulate --interval`` outputs."""
    by_policy: dict[str, dict] = {}
    files = sorted(Path(results_dir).glob("*.json"))
    if not files:
        raise DataError(f"no result files in {results_dir}")
    for f in files:
        rec = _read_json(f)
        if "interval" not in rec or "stats" not in rec:
            continue
        policy = PolicyKind.parse(rec["policy"])
        iv = rec["interval"]
        by_policy.setdefault(policy.kind, {"policy": policy, "stats": {}})["stats"][(iv["start"], iv["length"])] = (
            cs.SimStats.from_json(rec["stats"])
        )
    results = []
    for kind, entry in by_policy.items():
        try:
            per = [entry["stats"][(iv.start, iv.length)] for iv in plan.intervals]
        except KeyError as exc:
            raise DataError(f"{kind}: no result for interval {exc.args[0]}") from None
        results.append(PolicyResult(entry["policy"], per))
    return results


def cmd_reweight(args):
    plan = load_plan(args.plan)
    results = _load_results(plan, args.results)
    if args.mode == "mpkilru":
        lru = [r for r in results if r.policy.kind == "LRU"]
        if not lru:
            raise SpecError("mpkilru needs LRU interval results")
        new = mpkilru_weights(plan, lru[0])
    else:
        new = mpkimax_weights(plan, results, exclude=tuple(args.exclude or ()))
    save_plan(new, args.out)
    print(f"{args.mode}: weights {['%.4f' % w for w in new.weights]} -> {args.out}")


def cmd_evaluate(args):
    spec = load_experiment(args.experiment)
    result = run_experiment(spec, args.out, threads=args.threads)
    print(f"simulations: {result.executed} run, {result.cached} cached; report in {args.out}")
    for f in result.failures:
        print(f"FAILED {f['benchmark']}/{f['input']}: {f['error']}", file=sys.stderr)
    return EXIT_DATA if result.failures and not result.benchmarks else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="interval-lab", description="Interval-sampled cache replacement studies.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("trace", help="generate or convert traces")
    trs = tr.add_subparsers(dest="trace_command", required=True)
    g = trs.add_parser("gen", help="generate a synthetic trace from a workload spec")
    g.add_argument("--spec", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--text", action="store_true", help="write the text format")
    g.set_defaults(func=cmd_trace_gen)
    c = trs.add_parser("convert", help="convert between binary and text formats")
    c.add_argument("--input", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--text", action="store_true", help="write the text format")
    c.set_defaults(func=cmd_trace_convert)

    s = sub.add_parser("simulate", help="simulate a trace (full or one interval)")
    s.add_argument("--trace", required=True)
    s.add_argument("--config", help="hierarchy JSON file or preset name (desk, table1)")
    s.add_argument("--policy", default="LRU")
    s.add_argument("--interval", help="start:len[:warmup]")
    s.add_argument("--timeline", type=int, help="window size for an LLC MPKI timeline")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    ph = sub.add_parser("phases", help="select SimPoint-style intervals")
    ph.add_argument("--trace", required=True)
    ph.add_argument("--chunk", type=int, default=10_000)
    ph.add_argument("--dim", type=int, default=15)
    ph.add_argument("--k", type=int)
    ph.add_argument("--max-k", type=int, default=10)
    ph.add_argument("--seed", type=int, default=0)
    ph.add_argument("--out", required=True)
    ph.add_argument("--simpoints-out", help="prefix for .simpoints/.weights export")
    ph.set_defaults(func=cmd_phases)

    rw = sub.add_parser("reweight", help="reweight a plan by LLC activity")
    rw.add_argument("--plan", required=True)
    rw.add_argument("--results", required=True, help="directory of simulate --interval outputs")
    rw.add_argument("--mode", choices=("mpkilru", "mpkimax"), required=True)
    rw.add_argument("--exclude", nargs="*", help="policies left out of mpkimax")
    rw.add_argument("--out", required=True)
    rw.set_defaults(func=cmd_reweight)

    ev = sub.add_parser("evaluate", help="run an experiment and write reports")
    ev.add_argument("--experiment", required=True)
    ev.add_argument("--out", required=True)
    ev.add_argument("--threads", type=int)
    ev.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_SPEC if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        rc = args.func(args)
        return EXIT_OK if rc is None else rc
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except DataError as exc:
        print(f"data error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
