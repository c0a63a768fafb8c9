"""Command line entry point: ``rwre <kind> --manifest FILE [--workers N] [--out DIR]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .environment import EnvironmentView, dump_csv, make_box
from .errors import ExperimentFailed, ManifestInvalid
from .manifest import GREEN_MODES, KINDS, build_manifest, parse_text
from .parallel import default_workers

log = logging.getLogger("rwre")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rwre", description="Random walks in Dirichlet environments.")
    p.add_argument("--version", action="version", version=f"rwre {__version__}")
    sub = p.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        s = sub.add_parser(kind, help=f"run a {kind} manifest")
        s.add_argument("--manifest", required=True, help="key = value manifest file")
        s.add_argument("--workers", type=int, default=None, help="worker threads (default: available cores)")
        s.add_argument("--out", default=None, help="base output directory (default: manifest 'out' or ./out)")
        s.add_argument("-q", "--quiet", action="store_true")
        if kind == "green":
            s.add_argument("--mode", choices=GREEN_MODES, help="override the manifest mode")
        if kind == "verify":
            s.add_argument("--scale", choices=("quick", "full"), help="override the manifest scale")
    e = sub.add_parser("env-dump", help="write the environment on a box as CSV")
    e.add_argument("--alphas", required=True, help="comma separated weights")
    e.add_argument("--seed", type=int, required=True)
    e.add_argument("--radius", type=int, default=2)
    e.add_argument("--output", required=True)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if getattr(args, "quiet", False) else logging.INFO,
                        format="%(message)s", stream=sys.stderr)

    if args.kind == "env-dump":
        from .dirichlet import WeightVector

        w = WeightVector(tuple(float(a) for a in args.alphas.split(",")))
        dump_csv(EnvironmentView(args.seed, w), make_box((0,) * w.dim, args.radius), args.output)
        return 0

    from .runner import run_manifest

    try:
        raw = parse_text(Path(args.manifest).read_text())
        # flag overrides go through the same validation as the file
        for key in ("mode", "scale"):
            if getattr(args, key, None):
                raw[key] = getattr(args, key)
        man = build_manifest(raw, args.kind)
        workers = args.workers or default_workers()
        if workers < 1:
            raise ManifestInvalid({"--workers": "must be >= 1"})
        record = run_manifest(man, workers=workers, out=args.out)
    except ManifestInvalid as exc:
        print(f"{args.manifest}: {exc}", file=sys.stderr)
        return 2
    except ExperimentFailed as exc:
        print(f"experiment failed: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    for v in record.verdicts:
        log.info("%s %s (%s)", "PASS" if v.passed else "FAIL", v.name, v.bound)
    log.info("%s in %.1fs -> %s", record.digest[:12], record.wall_clock, record.path)
    return 0 if record.passed else 1


if __name__ == "__main__":
    sys.exit(main())
