"""Command line entry point: ``magss {run,grid,trace,tune,report}``.

Exit codes: 0 success, 1 every chain failed (or nothing could be computed),
2 configuration error.
"""
import argparse
import logging
import sys

from ..errors import ConfigurationError, IngestionError, MagssError
from . import run as R
from .config import load_config

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def _common(p):
    p.add_argument("--config", metavar="PATH", help="YAML or JSON experiment config")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--output-dir", metavar="PATH")
    p.add_argument("--workers", type=int, help="parallel chain processes")
    o = p.add_argument_group("overrides")
    o.add_argument("--target")
    o.add_argument("--sampler")
    o.add_argument("--metric")
    o.add_argument("--alpha2", type=float)
    o.add_argument("--lambda", dest="lambda_", type=float)
    o.add_argument("--p0", type=float)
    o.add_argument("--integrator")
    o.add_argument("--step-size", type=float, help="fixed integrator step h")
    o.add_argument("--rtol", type=float)
    o.add_argument("--atol", type=float)
    o.add_argument("--w", type=float)
    o.add_argument("--m", type=int)
    o.add_argument("--n-samples", type=int)
    o.add_argument("--n-chains", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="magss", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "run a multi-chain experiment"),
                        ("grid", "grid search over up to two parameters"),
                        ("trace", "trace geodesics from one origin"),
                        ("tune", "tune the MALA step size for a target acceptance"),
                        ("report", "recompute report.json and summary.csv from saved chains")):
        _common(sub.add_parser(name, help=help_))
    return parser


def _overrides(args):
    return {
        "seed": args.seed, "output_dir": args.output_dir, "workers": args.workers,
        "target": args.target, "sampler": args.sampler, "metric": args.metric,
        "alpha2": args.alpha2, "lambda": args.lambda_, "p0": args.p0,
        "integrator": args.integrator, "step_size": args.step_size, "rtol": args.rtol,
        "atol": args.atol, "w": args.w, "m": args.m, "n_samples": args.n_samples,
        "n_chains": args.n_chains,
    }


def _print_run(rep):
    d = rep.diagnostics or {}
    ok = rep.config["n_chains"] - len(rep.failed_chains)
    print(f"chains ok: {ok}/{rep.config['n_chains']}  output: {rep.output_dir}")
    for key in ("w1_mean", "ksd", "jump_rate", "min_ess", "avg_ess"):
        if d.get(key) is not None:
            print(f"  {key}: {d[key]:.6g}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "report":
            if args.output_dir is None:
                raise ConfigurationError("report needs --output-dir of an earlier run")
            rep = R.rebuild_report(args.output_dir)
            _print_run(rep)
            return EXIT_OK
        cfg = load_config(args.config, _overrides(args))
        if args.command == "run":
            rep = R.run_experiment(cfg)
            _print_run(rep)
            return rep.exit_code
        if args.command == "grid":
            res = R.grid_search(cfg)
            print(f"best cell {res['best']['cell']}: {res['best']['values']} "
                  f"({res['ranked_by']} = {res['best']['score']:.6g})")
            return EXIT_OK
        if args.command == "trace":
            res = R.trace_geodesics(cfg)
            cut = sum(d["truncated_at"] is not None for d in res["directions"])
            print(f"traced {len(res['directions'])} directions, {cut} truncated")
            return EXIT_OK
        if args.command == "tune":
            res = R.mala_tune(cfg)
            print(f"step_size {res['step_size']:.6g} acceptance {res['acceptance']:.3f}"
                  f"{'' if res['converged'] else ' (not converged)'}")
            return EXIT_OK
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IngestionError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MagssError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
