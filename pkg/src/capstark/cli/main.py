"""Command-line entry point: ``capstark {validate,run,diagnose,oracle,plots}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .runner import EXIT_ERROR, EXIT_FAIL, EXIT_PASS, resolve, run

log = logging.getLogger("capstark")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="capstark", description="CAP and complex-distortion resonance pipeline.")
    sub = p.add_subparsers(dest="verb", required=True)
    for verb, text in (("validate", "check a config file and print the resolved config"),
                       ("run", "distortion eigensolve, CAP sweep and multiplicity check"),
                       ("diagnose", "cutoff-resolvent singular value scan"),
                       ("oracle", "complex-dilation oracle (and the free-field control if enabled)")):
        s = sub.add_parser(verb, help=text)
        s.add_argument("--config", required=True, type=Path)
        s.add_argument("--out", type=Path, default=None, help="output directory (overrides the config)")
        s.add_argument("--seed", type=int, default=None)
        s.add_argument("--threads", type=int, default=1)
    s = sub.add_parser("plots", help="write gnuplot data files for a finished run")
    s.add_argument("--out", type=Path, required=True, help="run directory")
    s.add_argument("--config", type=Path, default=None, help="ignored; accepted for uniformity")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--threads", type=int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.verb == "plots":
        from .plots import MissingArtifact, emit_plots
        try:
            files = emit_plots(args.out)
        except MissingArtifact as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_ERROR
        for f in files:
            print(f)
        return EXIT_PASS
    try:
        cfg = load_config(args.config)
        resolved = resolve(cfg, seed=args.seed, out=None if args.out is None else str(args.out))
    except (ConfigError, ValueError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.verb == "validate":
        print(json.dumps(resolved.model_dump(mode="json"), indent=2, sort_keys=True))
        return EXIT_PASS
    stages = {"run": ("run",), "diagnose": ("diagnose",), "oracle": ("oracle",)}[args.verb]
    report = run(resolved, threads=args.threads, stages=stages)
    print(f"{report.status} {report.out_dir}")
    for name, ok in sorted(report.checks.items()):
        print(f"  {name}: {'PASS' if ok else 'FAIL'}")
    if report.error:
        print(f"error: {report.error}", file=sys.stderr)
    return report.code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
