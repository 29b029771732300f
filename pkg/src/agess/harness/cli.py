"""Command-line entry point: ``agess run | preset | diagnose``.

Exit codes: 0 success, 2 configuration error, 3 sampling abort,
4 diagnostics failure.  The default output directory comes from
``$AGESS_OUTPUT_DIR`` (``agess_runs`` when unset).
"""

from __future__ import annotations

import argparse
import glob
import json
import logging
import sys

from ..errors import ConfigurationError, DiagnosticsError
from .config import OUTPUT_ENV, load_config
from .presets import PRESETS, preset
from .runner import EXIT_CONFIG, EXIT_DIAGNOSTICS, diagnose_traces, run_experiment

log = logging.getLogger("agess")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="agess", description="Adaptive generalized elliptical slice sampling runner.",
                                epilog=f"Default output directory: ${OUTPUT_ENV} or ./agess_runs.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment from a JSON config file")
    r.add_argument("--config", required=True, help="path to the JSON config")
    r.add_argument("--seed", type=int, dest="base_seed", help="override base_seed")
    r.add_argument("--chains", type=int, help="override chains")
    r.add_argument("--workers", type=int, help="override workers (parallel chains)")
    r.add_argument("--out", help="override output directory")

    s = sub.add_parser("preset", help="run one of the built-in studies")
    s.add_argument("name", choices=PRESETS)
    s.add_argument("--out", help="override output directory")
    s.add_argument("--seed", type=int, dest="base_seed", help="override base_seed")
    s.add_argument("--chains", type=int, help="override chains")
    s.add_argument("--workers", type=int, help="override workers")
    s.add_argument("--dry-run", action="store_true", help="print the resolved config and exit")

    d = sub.add_parser("diagnose", help="recompute reports from trace CSVs")
    d.add_argument("--traces", required=True, help="glob of trace CSV files (quote it)")
    d.add_argument("--burn-in", type=int, default=0, help="states to drop from each trace")
    d.add_argument("--window", type=float, default=1.0, help="final fraction used for mESS")
    d.add_argument("--out", help="write the JSON report here instead of stdout")
    return p


def _overrides(args) -> dict:
    return {k: getattr(args, k, None) for k in ("base_seed", "chains", "workers", "out")}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")

    if args.command == "diagnose":
        paths = sorted(glob.glob(args.traces))
        try:
            if not paths:
                raise DiagnosticsError(f"no files match {args.traces!r}")
            report = diagnose_traces(paths, window=args.window, burn_in=args.burn_in)
        except (DiagnosticsError, OSError, ValueError, KeyError) as exc:
            print(f"agess: diagnostics failed: {exc}", file=sys.stderr)
            return EXIT_DIAGNOSTICS
        text = json.dumps(report, indent=2, sort_keys=True)
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text + "\n")
        else:
            print(text)
        return 0

    try:
        cfg = load_config(args.config) if args.command == "run" else preset(args.name)
        cfg = cfg.with_overrides(**_overrides(args))
    except ConfigurationError as exc:
        print(f"agess: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if getattr(args, "dry_run", False):
        print(json.dumps(cfg.to_dict(), indent=2))
        return 0

    try:
        result = run_experiment(cfg)
    except ConfigurationError as exc:
        print(f"agess: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for e in result.errors:
        print(f"agess: chain {e['chain']} of {e['arm']} aborted: {e['message']}", file=sys.stderr)
    print(f"wrote {result.out}/summary.json")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
