"""Command line entry point: ``beepsim run|sweep|missrate|wheel|transpile-check``.

Exit status is 0 on success, 1 when any run aborted or a check failed and
2 on a configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from typing import Optional, Sequence

from .algorithms import ALGORITHMS
from .emulation import POLICY_NAMES
from .engine import InvariantViolation
from .graph import GraphError, WheelSpec
from .harness import (
    GRAPH_FAMILIES,
    ConfigError,
    ExperimentConfig,
    config_from,
    format_summary,
    load_config,
    missrate_experiment,
    run_experiment,
    summarize,
    transpile_failure_experiment,
    wheel_experiment,
    write_rows,
)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2

# flag dest -> ExperimentConfig field
_FLAG_FIELDS = {
    "graph": "graph", "n": "n", "p": "p", "degree": "degree", "graph_file": "graph_file",
    "algorithm": "algorithm", "model": "model", "K": "K", "trials": "trials", "seed": "seed",
    "k_policy": "k_policy", "epsilon": "epsilon", "c": "c", "emulate": "emulate", "k": "k",
    "sequence_seed": "sequence_seed", "distinct_sequences": "distinct_sequences", "max_slots": "max_slots",
    "trace": "trace", "out": "out", "format": "format", "workers": "workers",
}


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _experiment_flags(ap: argparse.ArgumentParser) -> None:
    # defaults are None so that config-file values survive unless overridden
    ap.add_argument("--config", help="flat key=value file; flags override its entries")
    ap.add_argument("--graph", choices=GRAPH_FAMILIES)
    ap.add_argument("--n", type=int, help="number of nodes (star: leaves + 1)")
    ap.add_argument("--p", type=float, help="edge probability of the er family")
    ap.add_argument("--degree", type=float, help="expected degree of the er family (p = degree / n)")
    ap.add_argument("--graph-file", help="edge list: 'n m' then m lines 'u v'")
    ap.add_argument("--algorithm", choices=ALGORITHMS)
    ap.add_argument("--model", help="BL, BcdL, BLcd or BcdLcd (default: the algorithm's own)")
    ap.add_argument("--K", type=int, help="palette bound of k_colouring (default: max degree)")
    ap.add_argument("--trials", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--emulate", action="store_const", const=True, help="run the algorithm transpiled to BL")
    ap.add_argument("--k", type=int, help="explicit sub-phases per emulated slot")
    ap.add_argument("--k-policy", choices=sorted(POLICY_NAMES))
    ap.add_argument("--epsilon", type=float)
    ap.add_argument("--c", type=float)
    ap.add_argument("--sequence-seed", type=int)
    ap.add_argument("--distinct-sequences", action="store_const", const=True,
                    help="node v emulates with the bits of v (needs 2**k >= n)")
    ap.add_argument("--max-slots", type=int)
    ap.add_argument("--trace", action="store_const", const=True, help="per-phase traces (jsonl only)")
    ap.add_argument("--out", help="output file (default: stdout)")
    ap.add_argument("--format", choices=("csv", "jsonl"))
    ap.add_argument("--workers", type=int)


def _config(args: argparse.Namespace) -> ExperimentConfig:
    values = load_config(args.config) if args.config else {}
    for dest, name in _FLAG_FIELDS.items():
        v = getattr(args, dest, None)
        if v is not None:
            values[name] = v
    cfg = config_from(values)
    cfg.validate()
    return cfg


def _emit(rows, cfg: ExperimentConfig) -> None:
    if cfg.out:
        write_rows(rows, cfg.format, cfg.out)
    else:
        write_rows(rows, cfg.format, sys.stdout)


def cmd_run(args) -> int:
    cfg = _config(args)
    rows = run_experiment(cfg)
    _emit(rows, cfg)
    s = summarize(rows)
    print(format_summary(s), file=sys.stderr)
    return EXIT_FAILED if s.aborted else EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    if args.vary == "k" and not cfg.emulate:
        raise ConfigError("sweeping k needs --emulate")
    rows = []
    failed = False
    for value in args.values:
        sub = dataclasses.replace(cfg, **{args.vary: value})
        sub.validate()
        part = run_experiment(sub)
        s = summarize(part)
        print(f"{args.vary}={value}: " + format_summary(s).replace("\n", "; "), file=sys.stderr)
        failed = failed or s.aborted > 0
        rows.extend(part)
    _emit(rows, cfg)
    return EXIT_FAILED if failed else EXIT_OK


def cmd_missrate(args) -> int:
    print("k,trials,misses,frequency,expected,sigma,false_positives")
    ok = True
    for k in args.k:
        r = missrate_experiment(k, args.trials, args.seed, wishers=args.wishers)
        print(f"{r.k},{r.trials},{r.misses},{r.frequency:.6g},{r.expected:.6g},{r.sigma:.3g},{r.false_positives}")
        if args.wishers == 2:
            ok = ok and abs(r.frequency - r.expected) <= 3 * r.sigma
        ok = ok and r.false_positives == 0
    return EXIT_OK if ok else EXIT_FAILED


def cmd_wheel(args) -> int:
    spec = WheelSpec(args.m, args.s, args.parity)
    print("t,spoke,trials,survivals,frequency,expected,sigma")
    ok = True
    for t in args.t:
        r = wheel_experiment(spec, t, args.trials, args.seed)
        for i, (cnt, f) in enumerate(zip(r.survivals, r.frequencies)):
            print(f"{t},{i},{r.trials},{cnt},{f:.6g},{r.expected:.6g},{r.sigma:.3g}")
            ok = ok and f >= r.expected - 3 * r.sigma
    return EXIT_OK if ok else EXIT_FAILED


def cmd_transpile_check(args) -> int:
    cfg = _config(args)
    res = transpile_failure_experiment(cfg)
    if cfg.out:
        write_rows(list(res.rows), cfg.format, cfg.out)
    print(f"trials={res.trials} k={res.k} failures={res.failures} rate={res.rate:.6g} "
          f"bound={res.bound:.6g} aborted={res.aborted}")
    return EXIT_FAILED if res.aborted else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="beepsim", description="Simulate algorithms on anonymous beeping networks.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="one experiment from a config file and/or flags")
    _experiment_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="repeat an experiment over a list of n or k values")
    _experiment_flags(p)
    p.add_argument("--vary", choices=("n", "k"), required=True)
    p.add_argument("--values", type=_int_list, required=True, help="comma-separated values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("missrate", help="undetected-collision frequency of the fresh-coin detector on K_2")
    p.add_argument("--k", type=_int_list, default=[1, 4, 10], help="comma-separated sub-phase counts")
    p.add_argument("--trials", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--wishers", type=int, choices=(1, 2), default=2)
    p.set_defaults(func=cmd_missrate)

    p = sub.add_parser("wheel", help="symmetry survival per spoke of an (m, s)-wheel")
    p.add_argument("--m", type=int, default=8)
    p.add_argument("--s", type=int, default=16)
    p.add_argument("--parity", choices=("odd", "even"), default="odd")
    p.add_argument("--t", type=_int_list, default=[1, 3, 6], help="comma-separated horizons (each < s)")
    p.add_argument("--trials", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_wheel)

    p = sub.add_parser("transpile-check", help="failure rate of a transpiled algorithm against its bound")
    _experiment_flags(p)
    p.set_defaults(func=cmd_transpile_check)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, GraphError, ValueError) as exc:
        print(f"beepsim: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"beepsim: run failed: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
