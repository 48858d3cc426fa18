"""Command-line entry point for running experiment sweeps.

Usage:
    obmimo run <spec.toml> [--out PATH] [--seed N] [--trials N] [--threads N]
    obmimo preset <name> [--desk | --paper] [--out PATH] [--seed N]
                  [--trials N] [--threads N]

``run`` executes a TOML experiment spec; ``preset`` executes one of the
built-in figure-family recipes (fig-sumrate, fig-nmse, fig-ser,
fig-choiceK, fig-choicebeta, fig-convergence, fig-power).  Both write a
CSV and a sidecar ``.meta.json`` recording seed, config hash and version.
"""

import argparse
import sys

from .config import ConfigurationError
from .harness import emit_csv, get_preset, load_spec, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="obmimo",
                                     description="1-bit dynamic-oversampling link simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a TOML experiment spec")
    run_p.add_argument("spec", help="path to the spec file")

    pre_p = sub.add_parser("preset", help="run a built-in figure preset")
    pre_p.add_argument("name", help="preset name, e.g. fig-ser")
    scale = pre_p.add_mutually_exclusive_group()
    scale.add_argument("--desk", action="store_true",
                       help="reduced antennas/trials (default)")
    scale.add_argument("--paper", action="store_true",
                       help="full-size experiment (64 antennas, 1000 trials)")

    for p in (run_p, pre_p):
        p.add_argument("--out", default=None, help="output CSV path")
        p.add_argument("--seed", type=int, default=None, help="root seed override")
        p.add_argument("--trials", type=int, default=None,
                       help="realization count override")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            specs = [load_spec(args.spec)]
            default_out = specs[0].output or "results.csv"
        else:
            scale = "paper" if args.paper else "desk"
            specs = get_preset(args.name, scale)
            default_out = f"{args.name}-{scale}.csv"
        out = args.out or default_out

        rows = []
        for spec in specs:
            rows.extend(run_experiment(spec, seed=args.seed, trials=args.trials,
                                       threads=max(1, args.threads)))
        path = emit_csv(rows, out, spec=specs[0], seed=args.seed)
        print(f"wrote {len(rows)} rows to {path}")
        return 0
    except (ConfigurationError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
