#!/usr/bin/env python
import sys
import json
import argparse
from pathlib import Path

from parsreduce.config import get_version
from parsreduce.python_api import EXIT_ERROR, baseline, compare, reduce, validate


def parse_gamma(value: str) -> dict:
    """'0.12' fixes gamma, 'LO:HI:TOL' (TOL optional) sets the bisection bounds."""
    parts = value.split(":")
    try:
        nums = [float(x) for x in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid gamma specification {value!r}, expected G or LO:HI[:TOL]")
    if len(nums) == 1:
        return {"gamma": nums[0]}
    if len(nums) in (2, 3):
        res = {"gamma": None, "gamma_lo": nums[0], "gamma_hi": nums[1]}
        if len(nums) == 3:
            res["gamma_tol"] = nums[2]
        return res
    raise argparse.ArgumentTypeError(f"invalid gamma specification {value!r}, expected G or LO:HI[:TOL]")


def parse_keep(value: str):
    try:
        return [int(x) for x in value.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid keep specification {value!r}, expected e.g. 2,1,0")


def build_parser():
    parser = argparse.ArgumentParser(description="Parameter and state reduction of parameter-dependent linear "
                                                 "systems with certified H-infinity error bounds.",
                                     epilog="Reduced models are written next to the report as <out>_reduced.json, "
                                            "the per grid point errors as <out>_errors.csv.")
    parser.add_argument('--version', action='version', version=get_version())
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_config=False):
        p.add_argument("--model", metavar="filepath", help="ModelFile (JSON) of the original system",
                       type=lambda x: Path(x).absolute(), required=True)
        p.add_argument("--out", metavar="filepath", help="RunReport output file (JSON)",
                       type=lambda x: Path(x).absolute(), default=None)
        p.add_argument("--grid", metavar="N", type=int, help="Grid points per parameter for validation",
                       default=None)
        p.add_argument("-q", "--quiet", action="store_true", help="Print no intermediate outputs", default=False)
        p.add_argument("-v", "--verbose", action="store_true", help="Show more intermediate output",
                       default=False)
        if with_config:
            p.add_argument("--gamma", metavar="G|LO:HI:TOL", type=parse_gamma,
                           help="Fixed gamma or bisection bounds and tolerance", default=None)
            p.add_argument("--seed", type=int, help="Seed for the random initialisation", default=None)
            p.add_argument("--json-log", dest="json_log", action="store_true",
                           help="Print the iteration log as JSON lines", default=False)
            p.add_argument("--dump-sdp", dest="dump_sdp", metavar="directory",
                           help="Write every compiled SDP in SDPA sparse format to this directory", default=None)
            p.add_argument("--backend", choices=["reference", "cvxpy"], help="SDP backend", default=None)

    p = sub.add_parser("reduce", help="SOS reduction with gamma bisection")
    common(p, with_config=True)
    p.add_argument("--config", metavar="filepath", help="Reduction config (JSON)",
                   type=lambda x: Path(x).absolute(), required=True)

    p = sub.add_parser("baseline", help="Gramian/LFT balanced truncation (discrete time)")
    common(p)
    p.add_argument("--keep", type=parse_keep, required=True,
                   help="Retained size per LFT block: states, then one entry per parameter, e.g. 2,1,0")
    p.add_argument("--backend", choices=["reference", "cvxpy"], help="SDP backend", default=None)

    p = sub.add_parser("validate", help="Sampled H-infinity error between a model and a reduced model")
    common(p)
    p.add_argument("--reduced", metavar="filepath", help="ModelFile of the reduced system",
                   type=lambda x: Path(x).absolute(), required=True)

    p = sub.add_parser("compare", help="SOS reduction and Gramian baseline side by side")
    common(p, with_config=True)
    p.add_argument("--config", metavar="filepath", nargs="+", help="One or more reduction configs (JSON)",
                   type=lambda x: Path(x).absolute(), required=True)
    return parser


def run(args) -> int:
    if args.command in ("reduce", "compare"):
        overrides = dict(args.gamma or {})
        overrides.update({"grid_per_dim": args.grid, "seed": args.seed, "sdp_backend": args.backend,
                          "dump_sdp": str(args.dump_sdp) if args.dump_sdp else None})
        if args.command == "reduce":
            _, code = reduce(args.model, args.config, args.out, overrides, args.quiet, args.verbose, args.json_log)
        else:
            _, code = compare(args.model, args.config, args.out, overrides, args.quiet, args.verbose)
        return code
    grid = args.grid if args.grid is not None else 21
    if args.command == "baseline":
        _, code = baseline(args.model, args.keep, args.out, grid, args.backend, args.quiet, args.verbose)
        return code
    _, code = validate(args.model, args.reduced, args.out, grid, args.quiet)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except (ValueError, OSError, json.JSONDecodeError) as e:
        print(f"ERROR: {e}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
