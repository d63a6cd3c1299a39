"""Command line: ``wickscft run|validate|version``.

Exit codes: 0 success, 2 validation failure, 3 non-convergence, 4 runtime error.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import sys

from . import __version__
from .scenario import EXIT_INVALID, EXIT_OK, EXIT_RUNTIME, ScenarioError, load_scenario, run_scenario


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wickscft", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("scenario")
    run.add_argument("--output-dir", default=None, help="override output.directory")
    run.add_argument("--quiet", action="store_true")
    run.add_argument("--threads", type=int, default=None, help="cap BLAS/FFT thread pools")
    val = sub.add_parser("validate", help="parse and validate a scenario file")
    val.add_argument("scenario")
    sub.add_parser("version", help="print the package version")
    return p


def _thread_cap(n):
    if n is None:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def _load(path):
    try:
        return load_scenario(path)
    except ScenarioError as exc:
        for d in exc.diagnostics:
            print(f"{path}: {d}", file=sys.stderr)
    except OSError as exc:
        print(f"{path}: {exc}", file=sys.stderr)
    return None


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "version":
        print(__version__)
        return EXIT_OK
    if args.command == "validate":
        return EXIT_OK if _load(args.scenario) is not None else EXIT_INVALID

    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.threads is not None and args.threads < 1:
        print("--threads must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    scenario = _load(args.scenario)
    if scenario is None:
        return EXIT_INVALID
    try:
        with _thread_cap(args.threads):
            manifest = run_scenario(scenario, args.output_dir)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if not args.quiet:
        for stage in manifest.stages:
            print(f"{stage['name']}: {stage['status']} {stage.get('message', '')}".rstrip())
        print(f"wrote {len(manifest.files)} files to {manifest.output_dir}")
    return manifest.exit_code


if __name__ == "__main__":
    sys.exit(main())
