"""Command-line entry point: ``python3 -m sddvs run|sweep ...``.

Exit status is 0 on success, 2 for configuration errors and 3 for
numerical failures (the failing stage is printed).
"""
import argparse
import json
import sys

import numpy as np

from .errors import ConfigError, SddvsError
from .experiments import default_config, emit_sweep, load_config, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def parse_m(text):
    """``"1..20"`` or ``"2,4,8"``."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            vals = list(range(int(lo), int(hi) + 1))
        else:
            vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad M list {text!r}")
    if not vals or min(vals) < 0:
        raise argparse.ArgumentTypeError(f"bad M list {text!r}")
    return vals


def _parser():
    p = argparse.ArgumentParser(prog="sddvs", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("run", "sweep"):
        s = sub.add_parser(name)
        s.add_argument("example", nargs="?", choices=["ex1", "ex2", "ex3"])
        s.add_argument("--config", help="JSON experiment config")
        s.add_argument("--full-scale", action="store_true",
                       help="full-size meshes and test sets (slow)")
        s.add_argument("--workers", type=int, default=None)
        s.add_argument("--out", default=None)
        s.add_argument("--seed", type=int, default=None)
        s.add_argument("--verbose", action="store_true")
        if name == "sweep":
            s.add_argument("--m", type=parse_m, default=parse_m("1..20"))
    return p


def _config(args):
    if args.config:
        cfg = load_config(args.config)
        if args.example and args.example != cfg.example:
            raise ConfigError(f"config is for {cfg.example}, command line asks for {args.example}")
    elif args.example:
        cfg = default_config(args.example, args.full_scale)
    else:
        raise ConfigError("give an example id or --config")
    over = {}
    if args.workers is not None:
        over["workers"] = args.workers
    if args.seed is not None:
        over["seed"] = args.seed
    if args.verbose:
        over["verbose"] = True
    cfg = cfg.with_(**over) if over else cfg
    return cfg, args.out or cfg.out or f"results/{cfg.example}"


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg, out = _config(args)
        if args.command == "sweep":
            if max(args.m) > cfg.training:
                raise ConfigError(f"M up to {max(args.m)} exceeds the training set size")
            for m, eps in emit_sweep(cfg, args.m, out):
                print(f"M={m:3d}  epsilon={eps:.3e}")
            return EXIT_OK
        report = run_experiment(cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SddvsError, np.linalg.LinAlgError, FloatingPointError) as exc:
        stage = getattr(exc, "stage", "unknown")
        print(f"numerical failure in stage '{stage}': {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    c = report.counts
    print(f"{cfg.example}: n_gamma={c['n_gamma']} m_S={c['m_S']} m_F={c['m_F']} M={c['M']}")
    if report.errors:
        print(f"  epsilon(interface)={report.errors['interface']['epsilon']:.3e}  "
              f"epsilon(full)={report.errors['full']['epsilon']:.3e}  "
              f"density L1={report.errors['density_l1']:.3e}")
    t = report.timing
    print(f"  offline {t['offline']:.2f}s  online/sample {t['online_per_sample']:.2e}s  "
          f"reference/sample {t['reference_per_sample']:.2e}s")
    print(f"  wrote {out}/report.json")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
