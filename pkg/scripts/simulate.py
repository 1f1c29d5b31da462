#!/usr/bin/env python3
"""
Command-line entry point for the flood and debris simulator.

Subcommands: run, sod, lake-at-rest, validate.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from simulation.engine import run_simulation  # noqa: E402
from simulation.scenarios import lake_at_rest_check  # noqa: E402
from solvers.base import GasParams  # noqa: E402
from solvers.euler import SOD_LEFT, SOD_RIGHT, EulerState, run_shock_tube  # noqa: E402
from solvers.exact_riemann import exact_riemann_oracle, shock_tube_errors  # noqa: E402
from src.config import load_config  # noqa: E402
from src.errors import SimulationError  # noqa: E402
from src.file_rw import write_profile_csv  # noqa: E402

logger = logging.getLogger("simulate")

SOD_T_END = 0.23
LAKE_TOLERANCE = 1e-12
# sysexits EX_USAGE, apart from the configuration error code 2
USAGE_EXIT_CODE = 64


def cmd_run(args) -> int:
    config = load_config(args.config)
    output_dir = Path(args.output_dir or config.output.directory)
    result = run_simulation(config, output_dir=output_dir, cadence=args.frames,
                            progress=not args.quiet, keep_frames=False)
    state = result.state
    print(f"✓ {config.simulation.scenario}: {state.step} steps to t={state.t:.6g}, "
          f"max damage {state.damage.peak:.6g}")
    print(f"✓ Output: {output_dir}")
    return 0


def cmd_sod(args) -> int:
    params = GasParams()
    result = run_shock_tube(n_cells=args.cells, t_end=SOD_T_END)
    errors = shock_tube_errors(result.x, result.state, result.t, params)
    print(f"Sod shock tube, {args.cells} cells, T={SOD_T_END}, {result.steps} steps")
    for name in ("rho", "u", "p"):
        print(f"  L1({name}) = {errors[name]:.6e}")

    if args.output_dir:
        directory = Path(args.output_dir)
        rho, u, p = result.state.primitives(params)
        write_profile_csv(directory / "sod_numeric.csv", {"x": result.x, "rho": rho, "u": u, "p": p})
        exact = exact_riemann_oracle(EulerState.from_primitive(*SOD_LEFT, params),
                                     EulerState.from_primitive(*SOD_RIGHT, params),
                                     params, (result.x - 0.5) / result.t)
        write_profile_csv(directory / "sod_exact.csv",
                          {"x": result.x, "rho": exact.rho, "u": exact.u, "p": exact.p})
        print(f"✓ Profiles written to {directory}")
    return 0


def cmd_lake_at_rest(args) -> int:
    config = load_config(args.config)
    report = lake_at_rest_check(config, steps=args.steps, progress=not args.quiet)
    print(f"Lake at rest, level {report.level}, {report.steps} steps")
    print(f"  max |h+z-C| = {report.max_level_deviation:.3e}")
    print(f"  max |hu|,|hv| = {report.max_momentum:.3e}")
    if report.passed(LAKE_TOLERANCE):
        print("✓ Well balanced")
        return 0
    print(f"❌ Deviation above {LAKE_TOLERANCE:g}")
    return 3


def cmd_validate(args) -> int:
    config = load_config(args.config)
    grid = config.grid
    print(f"✓ {args.config}: scenario {config.simulation.scenario}, {grid.nx}x{grid.ny} cells, "
          f"t_end {config.simulation.t_end}, debris {'on' if config.debris.enabled else 'off'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simulate", description="Lagrange-flux flood and debris simulator")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--quiet", action="store_true", help="only warnings and results")
    verbosity.add_argument("--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run a coupled simulation")
    run.add_argument("config")
    run.add_argument("--output-dir", default=None)
    run.add_argument("--frames", type=int, default=None, help="frame cadence in steps")
    run.set_defaults(handler=cmd_run)

    sod = commands.add_parser("sod", help="Sod shock tube against the exact solution")
    sod.add_argument("--cells", type=int, default=384)
    sod.add_argument("--output-dir", default=None)
    sod.set_defaults(handler=cmd_sod)

    lake = commands.add_parser("lake-at-rest", help="check that still water stays still")
    lake.add_argument("config")
    lake.add_argument("--steps", type=int, default=1000)
    lake.set_defaults(handler=cmd_lake_at_rest)

    validate = commands.add_parser("validate", help="parse and validate a config")
    validate.add_argument("config")
    validate.set_defaults(handler=cmd_validate)
    return parser


def cli_main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return USAGE_EXIT_CODE if e.code else 0

    level = logging.WARNING if args.quiet else logging.DEBUG if args.verbose else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)

    try:
        return args.handler(args)
    except SimulationError as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception("unexpected failure")
        print(f"❌ Error: {e}", file=sys.stderr)
        return 1


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
