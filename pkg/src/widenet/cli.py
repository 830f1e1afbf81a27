"""`lab` command line: one subcommand per experiment, plus `report`.

    lab <experiment> --config <file> [--out DIR --seed N --jobs K --strict]
    lab report <dir> [--strict]

Dataset files resolve against the LAB_DATA_DIR environment variable.
"""

import argparse
import json
import sys

from . import config as C
from . import experiments as E


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lab",
        description="Numerical laboratory for overparameterized "
                    "two-layer networks")
    sub = parser.add_subparsers(dest="command", required=True)
    for exp in E.EXPERIMENTS:
        p = sub.add_parser(exp, help=E.EXPERIMENT_DESCRIPTIONS[exp])
        p.add_argument("--config", required=False,
                       help="config file (key=value sections or JSON)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the seed list with a single seed")
        p.add_argument("--jobs", type=int, default=1,
                       help="max concurrent sweep points")
        p.add_argument("--strict", action="store_true",
                       help="nonzero exit when a trend check fails")
    rep = sub.add_parser("report", help="consolidated markdown summary "
                                        "over manifests in a directory")
    rep.add_argument("output_dir")
    rep.add_argument("--strict", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "report":
        text, code = E.report(args.output_dir, strict=args.strict)
        sys.stdout.write(text)
        return code
    try:
        cfg = C.load(args.config) if args.config else {}
    except (OSError, C.ConfigError) as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 2
    cfg["experiment"] = args.command
    if args.seed is not None:
        cfg["seeds"] = [args.seed]
    outdir = args.out or f"lab_out_{args.command}"
    try:
        results = E.run(cfg, outdir)
    except (E.RunError, ValueError, FileNotFoundError) as exc:
        print(json.dumps({"error": str(exc), "experiment": args.command}),
              file=sys.stderr)
        return 1
    print(json.dumps(results, sort_keys=True, default=float))
    checks = results.get("checks", {})
    if args.strict and not all(checks.values()):
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
