"""dynfl command line: run | sweep | verify."""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

from .experiments import config_for, estimate_policies, sweep, trial_seed, verify_suite
from .generators import generate, parse_gen_spec
from .harness import StreamError, load_instance, run, save_instance
from .metric import MetricError
from .oracle import CAP_LIMIT, UNCAP_LIMIT, OracleLimitError
from .policies import ALGORITHMS

EXIT_OK, EXIT_USAGE, EXIT_INVARIANT, EXIT_ORACLE = 0, 1, 2, 3

TRIAL_COLUMNS = [
    "policy", "trial", "seed", "opening", "connection", "total", "n_fin", "q",
    "requests", "flips", "openings", "closings", "connections", "cascades",
    "max_cascade", "reassigned", "unavailable",
]

EPILOG = f"""\
generator specs (--gen):
  claim3:k=K                         star with K leaves, adversarial stream for Meyerson
  claim2cap:upsilon=U[,rounds=R]     star with 10U^2 leaves, adversary for the naive capacitated rule
  random:n=N,q=Q[,p=P][,metric=euclidean|graph][,seed=S]

per-trial CSV columns (run):
  {", ".join(TRIAL_COLUMNS)}

sweep CSV columns:
  param, value, policy, trials, mean, se, opt, ratio (or opt_lower, opt_upper, ratio_low, ratio_high)

exhaustive oracle limits: {UNCAP_LIMIT} clients uncapacitated, {CAP_LIMIT} capacitated.
The seed falls back to $DYNFL_SEED, then 0.
exit codes: 0 ok, 1 usage or input error, 2 invariant failure, 3 oracle size limit.
"""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--instance", help="instance JSON file")
    src.add_argument("--gen", help="generator spec, e.g. claim3:k=16")
    p.add_argument("--policy", default="mstar,alg1",
                   help=f"comma-separated policies from {{{','.join(ALGORITHMS)}}}")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=None, help="master seed (default $DYNFL_SEED or 0)")
    p.add_argument("--out", help="output path; a .summary.json is written next to it")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--upsilon", type=int, help="capacity for capm, naive and alg2")
    p.add_argument("--q", type=int, help="declared horizon for alg2 (default: stream length)")
    p.add_argument("--reassign", choices=("fifo", "lifo", "random"),
                   help="order in which orphaned clients are re-processed")
    p.add_argument("--oracle", choices=("auto", "exact", "bounds"), default="auto")
    p.add_argument("--trace", choices=("full", "counters"), default="counters",
                   help="with full, the trace of trial 0 per policy is dumped as JSON lines")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for trials")
    p.add_argument("--emit", help="write the generated instance JSON to this path")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dynfl", description="Fully dynamic online facility location lab.",
                     epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, text in (("run", "estimate competitive ratios over seeded trials"),
                       ("sweep", "sweep a generator parameter and fit log-log growth"),
                       ("verify", "run invariant, probe and HST suites")):
        p = sub.add_parser(name, help=text, epilog=EPILOG,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        _common(p)
        if name == "sweep":
            p.add_argument("--grid", required=True, help="parameter grid, e.g. k=8,16,32,64")
    return parser


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("DYNFL_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"DYNFL_SEED must be an integer, got {env!r}") from None


def _policies(args) -> list[str]:
    names = [p.strip() for p in args.policy.split(",") if p.strip()]
    unknown = [p for p in names if p not in ALGORITHMS]
    if unknown or not names:
        raise UsageError(f"unknown policies {unknown}; choose from {ALGORITHMS}")
    return names


def _instance(args):
    if args.instance:
        inst = load_instance(args.instance)
    elif args.gen:
        inst = generate(*parse_gen_spec(args.gen))
    else:
        raise UsageError("one of --instance or --gen is required")
    if args.emit:
        save_instance(inst, args.emit)
    return inst


def _write(args, rows: list[dict], columns: list[str], summary: dict):
    text = json.dumps(summary, indent=2, default=_json_default)
    if not args.out:
        print(text)
        return
    out = Path(args.out)
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)
        out.write_text(buf.getvalue())
    else:
        out.write_text("".join(json.dumps(r, default=_json_default) + "\n" for r in rows))
    out.with_name(out.name + ".summary.json").write_text(text + "\n")
    print(text)


def _json_default(x):
    return str(x)


def _upsilon_default(args, inst_params: dict | None = None):
    if args.upsilon is not None:
        return args.upsilon
    if inst_params and "upsilon" in inst_params:
        return inst_params["upsilon"]
    return None


def cmd_run(args) -> int:
    policies = _policies(args)
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    seed = _seed(args)
    inst = _instance(args)
    params = parse_gen_spec(args.gen)[1] if args.gen else None
    upsilon = _upsilon_default(args, params)
    estimates, rows = estimate_policies(inst, policies, trials=args.trials, master=seed,
                                        upsilon=upsilon, q=args.q, reassign=args.reassign,
                                        oracle=args.oracle, jobs=args.jobs)
    flat = [{"policy": p, "trial": t, "seed": s, **r.as_dict()} for p, t, s, r in rows]
    if args.trace == "full" and args.out:
        _dump_traces(args, inst, estimates, upsilon, seed)
    summary = {"command": "run", "instance": inst.name or args.instance, "seed": seed,
               "trials": args.trials, "upsilon": upsilon,
               "estimates": [e.as_dict() for e in estimates]}
    _write(args, flat, TRIAL_COLUMNS, summary)
    return EXIT_OK


def _dump_traces(args, inst, estimates, upsilon, seed):
    for e in estimates:
        if e.error:
            continue
        config = config_for(e.policy, inst, upsilon, args.q, args.reassign)
        _, trace = run(config, inst, trial_seed(seed, 0), trace="full")
        Path(f"{args.out}.{e.policy}.trace.jsonl").write_text(trace.dumps())


def _parse_grid(text: str) -> tuple[str, list]:
    key, eq, vals = text.partition("=")
    if not eq:
        raise UsageError(f"--grid must look like name=v1,v2,...; got {text!r}")
    values = [v for v in vals.split(",") if v.strip()]
    if not values:
        raise UsageError("empty parameter grid")
    return key.strip(), values


def cmd_sweep(args) -> int:
    policies = _policies(args)
    if not args.gen:
        raise UsageError("sweep needs --gen")
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    seed = _seed(args)
    kind, params = parse_gen_spec(args.gen)
    key, raw = _parse_grid(args.grid)
    # reuse the generator parser for typing and aliases
    typed = [parse_gen_spec(f"{kind}:{key}={v}")[1] for v in raw]
    param = next(iter(typed[0]))
    values = [t[param] for t in typed]
    rows, slopes = sweep(kind, params, param, values, policies, trials=args.trials, master=seed,
                         upsilon=args.upsilon, q=args.q, reassign=args.reassign,
                         oracle=args.oracle, jobs=args.jobs)
    columns = ["param", "value", "policy", "trials", "mean", "se", "opt", "ratio",
               "opt_lower", "opt_upper", "ratio_low", "ratio_high", "error"]
    summary = {"command": "sweep", "generator": kind, "param": param, "values": values,
               "seed": seed, "trials": args.trials, "slopes": slopes, "rows": rows}
    _write(args, rows, columns, summary)
    return EXIT_OK


def cmd_verify(args) -> int:
    policies = _policies(args)
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    seed = _seed(args)
    inst = _instance(args)
    params = parse_gen_spec(args.gen)[1] if args.gen else None
    upsilon = _upsilon_default(args, params)
    checks = verify_suite(inst, policies, trials=args.trials, master=seed, upsilon=upsilon,
                          q=args.q, reassign=args.reassign)
    rows = [c.as_dict() for c in checks]
    ok = all(c.passed for c in checks)
    summary = {"command": "verify", "instance": inst.name or args.instance, "seed": seed,
               "pass": ok, "checks": rows}
    _write(args, rows, ["check", "pass"], summary)
    return EXIT_OK if ok else EXIT_INVARIANT


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except OracleLimitError as exc:
        print(f"dynfl: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except (UsageError, StreamError, MetricError, ValueError, OSError, KeyError) as exc:
        print(f"dynfl: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
