"""Command-line entry point.

``ampgate run CONFIG`` executes a scenario file (or re-runs the effective
config stored in a ``manifest.json``) and writes panel CSVs plus a manifest.
``ampgate solve`` prints the noiseless gate design for one drive setting.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 partial grid failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import platform
import sys
import warnings
from typing import List, Optional

import numpy as np
import scipy

from . import __version__
from .design import solve_gate
from .errors import AmpgateError, ConfigError, InvalidRegimeError
from .model import TWO_PI
from .scenarios import apply_overrides, emit_plotdata, load_config, run_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_PARTIAL = 4


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def write_manifest(path, cfg: dict, output, files: List[str]) -> None:
    manifest = {
        "config_hash": config_hash(cfg),
        "master_seed": cfg["scenario"]["seed"],
        "sub_seeds": dict(sorted(output.sub_seeds.items())),
        "failures": output.failures,
        "files": [os.path.basename(f) for f in files],
        "versions": {"ampgate": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__, "python": platform.python_version()},
        "config": cfg,
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        cfg = apply_overrides(cfg, seed=args.seed, out=args.out, engine=args.engine,
                              rwa=None if args.rwa is None else args.rwa == "on",
                              noise_mode=args.noise_mode, n_runs=args.runs)
    except (ConfigError, OSError, UnicodeDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with warnings.catch_warnings():
            if args.quiet:
                warnings.simplefilter("ignore")
            output = run_config(cfg, jobs=args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AmpgateError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    out_dir = cfg["scenario"]["output_dir"]
    try:
        files = emit_plotdata(output, out_dir)
        write_manifest(os.path.join(out_dir, "manifest.json"), cfg, output, files)
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for f in files:
        print(f)
    if output.failures:
        for msg in output.failures:
            print(f"failed: {msg}", file=sys.stderr)
        return EXIT_PARTIAL if output.n_rows > 0 else EXIT_NUMERICAL
    return EXIT_OK


def _cmd_solve(args) -> int:
    try:
        sol = solve_gate(TWO_PI * 1e3 * args.omega0_khz, TWO_PI * 1e3 * args.g_khz,
                         TWO_PI * args.theta_over_2pi, phi_target=args.phi, loops=args.loops)
    except (InvalidRegimeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AmpgateError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"tau_us={sol.tau * 1e6:.6f}")
    print(f"delta_khz={sol.delta / TWO_PI / 1e3:.6f}")
    print(f"delta_prime_khz={sol.delta_prime / TWO_PI / 1e3:.6f}")
    print(f"r={sol.r:.6f}")
    print(f"gain={sol.gain:.6f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ampgate", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario file or a manifest's config")
    r.add_argument("config")
    r.add_argument("--seed", type=int, help="master seed")
    r.add_argument("--jobs", type=int, default=1, help="worker processes (results unaffected)")
    r.add_argument("--out", help="output directory")
    r.add_argument("--engine", choices=("coherent", "fock", "auto"))
    r.add_argument("--rwa", choices=("on", "off"))
    r.add_argument("--noise-mode", choices=("calibrated", "literal"))
    r.add_argument("--runs", type=int, help="override the number of runs per ensemble")
    r.add_argument("--quiet", action="store_true", help="suppress warnings")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("solve", help="print the noiseless gate design")
    s.add_argument("--omega0-khz", type=float, default=1.46)
    s.add_argument("--g-khz", type=float, default=0.0)
    s.add_argument("--theta-over-2pi", type=float, default=0.0)
    s.add_argument("--phi", type=float, default=math.pi / 2)
    s.add_argument("--loops", type=int, default=1)
    s.set_defaults(func=_cmd_solve)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if getattr(args, "jobs", 1) is not None and getattr(args, "jobs", 1) < 1:
        print("config error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
