"""``fluxlat`` command-line entry point.

Exit codes: 0 success, 1 validation failure, 2 capacity or convergence
failure, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import KINDS, config_from_dict, merge_overrides, read_config_file
from .errors import ConfigError, FluxlatError

log = logging.getLogger("fluxlat")

EXIT_OK, EXIT_INVALID, EXIT_CAPACITY, EXIT_IO = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--lx", type=int, help="vertices along x")
    common.add_argument("--ly", type=int, help="vertices along y")
    common.add_argument("--boundary", choices=("open", "periodic"))
    common.add_argument("--trunc", type=int, help="link-field truncation |E| <= trunc")
    common.add_argument("--g2", type=float, help="gauge coupling g^2")
    common.add_argument("--lambda", dest="lam", type=float, help="Gauss-law penalty lambda")
    common.add_argument("--mu", type=float, help="on-link energy mu")
    common.add_argument("--omega", type=float, help="hopping amplitude Omega")
    common.add_argument("--r", dest="r_list", type=int, nargs="+", help="charge separations (potential)")
    common.add_argument("--k", type=int, help="number of low eigenvalues")
    common.add_argument("--seed", type=int, help="Krylov start-vector seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--force-regime", action="store_true", default=None, help="run outside the QED regime")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="fluxlat", description="Compact lattice QED in 2+1 dimensions.")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        sub.add_parser(kind, parents=[common], help=f"run the {kind} experiment")
    sub.add_parser("validate", parents=[common], help="check a config without running it")
    return parser


def _overrides(args) -> dict:
    return {
        "lattice": {"lx": args.lx, "ly": args.ly, "boundary": args.boundary, "trunc": args.trunc},
        "coupling": {"g2": args.g2, "lambda": args.lam, "mu": args.mu, "omega": args.omega},
        "experiment": {"r_list": args.r_list, "force_regime": args.force_regime},
        "solver": {"k": args.k, "seed": args.seed},
        "output": {"dir": args.out},
    }


def _summary(record) -> list[str]:
    lines = []
    if record.kind == "sector-count":
        lines.append(str(record.basis_sizes["projected"]))
    elif record.kind == "ground-state":
        lines.append(f"ground energy {record.energies['ground']!r} (units of U0)")
    elif record.kind == "potential":
        for key, v in record.energies["V"].items():
            lines.append(f"{key}: V = {v!r}")
        if "slope" in record.results:
            lines.append(f"slope {record.results['slope']!r} vs g^2/2 = {record.results['slope_strong']!r}")
    elif record.kind == "effective-compare":
        lines.append(f"max offset-aligned difference (lowest levels) {record.results['max_diff_full_effective_low']!r}")
    elif record.kind == "stagger-check":
        lines.append(f"max spectral difference {record.results['max_abs_diff']!r}")
    return lines


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s: %(message)s")
    try:
        data = read_config_file(args.config) if args.config else {}
        data = merge_overrides(data, _overrides(args))
        kind = None if args.command == "validate" else args.command
        cfg = config_from_dict(data, kind)
        if args.command == "validate":
            print(f"config OK: {cfg.kind} on {cfg.lx}x{cfg.ly} {cfg.boundary.value} lattice")
            return EXIT_OK

        from .experiments import run_experiment

        record = run_experiment(cfg)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"fluxlat: invalid config: {problem}", file=sys.stderr)
        return EXIT_INVALID
    except FluxlatError as exc:
        for line in getattr(exc, "violations", None) or [exc]:
            print(f"fluxlat: {type(exc).__name__}: {line}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"fluxlat: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO

    for w in record.warnings:
        print(f"fluxlat: warning: {w}", file=sys.stderr)
    for line in _summary(record):
        print(line)
    log.info("artifacts: %s", ", ".join(record.artifacts))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
