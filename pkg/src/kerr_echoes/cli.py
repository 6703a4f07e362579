"""
Command-line entry point.

    kerr-echoes run SCENARIO.yaml
    kerr-echoes preset fig2 [--out PREFIX]
    kerr-echoes presets-list

Exit status: 0 on success, 2 for an invalid scenario, 3 when a numerical
tolerance check fails.  KERR_ECHOES_THREADS caps the worker threads of the
numerical libraries; it must be set before they load, which is why the heavy
imports happen inside ``main``.
"""

from __future__ import annotations

import argparse
import os
import sys

THREADS_ENV = "KERR_ECHOES_THREADS"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS")


def apply_thread_cap(environ=os.environ) -> int | None:
    raw = environ.get(THREADS_ENV)
    if raw is None or raw == "":
        return None
    try:
        n = int(raw)
    except ValueError:
        raise SystemExit(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise SystemExit(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    for var in _THREAD_VARS:
        environ[var] = str(n)
    return n


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kerr-echoes",
                                 description="Echo and revival simulations of a kicked Kerr oscillator.")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("config", help="YAML scenario file")
    pre = sub.add_parser("preset", help="run a built-in scenario")
    pre.add_argument("name", help="preset name, e.g. fig2")
    pre.add_argument("--out", default=None, help="output path prefix (default: the preset name)")
    sub.add_parser("presets-list", help="list the built-in scenarios")
    return ap


def main(argv=None) -> int:
    apply_thread_cap()
    args = build_parser().parse_args(argv)

    from .config import ConfigError, parse_config, preset_config
    from .errors import NumericalToleranceError
    from .presets import PRESETS

    if args.command == "presets-list":
        for name, doc in PRESETS.items():
            print(f"{name}\t{doc['mode']}")
        return EXIT_OK

    import numba

    from .runner import run_scenario

    n = os.environ.get("NUMBA_NUM_THREADS")
    if n:
        numba.set_num_threads(min(int(n), numba.config.NUMBA_NUM_THREADS))
    try:
        cfg = parse_config(args.config) if args.command == "run" else preset_config(args.name, args.out)
        result = run_scenario(cfg)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalToleranceError as err:
        print(f"numerical tolerance failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as err:
        # parameter combinations the modules reject at run time
        print(f"invalid scenario: {err}", file=sys.stderr)
        return EXIT_CONFIG
    for path in result.files:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
