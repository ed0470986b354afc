"""Command-line interface.

Exit codes: 0 success, 1 solver failure, 2 non-monotone decay in a convergence
study, 3 failed verification checks, 64 bad usage or configuration.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from fracrothe import __version__
from fracrothe.config import (
    ConfigError,
    ConfigValidationError,
    RunConfig,
    build_problem,
    example51_config,
    format_validation_error,
    parse_config,
)
from fracrothe.errors import Aborted, FracRotheError
from fracrothe.io import write_json, write_table_csv, write_trajectory_csv
from fracrothe.mms import mms_error, mms_errors
from fracrothe.rothe import apriori_statistics, cauchy_diff
from fracrothe.stepper import Trajectory, run, step_residuals
from fracrothe.verify import run_suite, summarize

EXIT_OK = 0
EXIT_SOLVER = 1
EXIT_DECAY = 2
EXIT_VERIFY = 3
EXIT_USAGE = 64

logger = logging.getLogger("fracrothe")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def thread_count() -> int:
    raw = os.environ.get("FRACROTHE_THREADS", "")
    try:
        value = int(raw)
    except ValueError:
        value = 0
    return value if value >= 1 else (os.cpu_count() or 1)


def _output_path(configured: str, out_dir: str | None) -> Path:
    path = Path(configured)
    return Path(out_dir) / path.name if out_dir else path


def load_config(args) -> RunConfig:
    config = parse_config(Path(args.config).read_bytes())
    if getattr(args, "seed", None) is not None:
        config = config.model_copy(update={"seed": args.seed})
    return config


def diagnostics(traj: Trajectory, config: RunConfig) -> dict:
    spec = traj.spec
    stats = apriori_statistics(traj)
    residuals, forcing = step_residuals(spec, traj)
    grid = spec.grid
    payload = {
        "status": "ok",
        "grid": {
            "delay": grid.delay, "horizon": grid.horizon, "subdivisions": grid.n,
            "step": grid.step, "effective_horizon": grid.effective_horizon, "step_count": grid.m,
        },
        **stats.as_dict(),
        "max_step_residual": float(np.max(residuals)) if len(residuals) else 0.0,
        "max_scaled_step_residual": float(np.max(residuals / (1.0 + forcing))) if len(residuals) else 0.0,
        "history_lipschitz_estimate": spec.history.lipschitz_estimate(grid.step, spec.operator.norm),
    }
    ms = config.manufactured
    if ms is not None:
        errors = mms_errors(traj, ms)
        payload["mms_final_error"] = float(errors[-1])
        payload["mms_max_error"] = float(np.max(errors))
    return payload


def _solve(config: RunConfig, out_dir: str | None, timing: bool) -> int:
    traj_path = _output_path(config.output.trajectory_path, out_dir)
    diag_path = _output_path(config.output.diagnostics_path, out_dir)
    spec = build_problem(config)
    started = time.perf_counter()
    try:
        traj = run(spec)
    except Aborted as exc:
        partial = exc.trajectory
        write_trajectory_csv(traj_path, partial)
        payload = {"status": "aborted", "failed_step": exc.index, "last_completed_step": partial.last_index,
                   "error": str(exc), "partial": True}
        if timing:
            payload["wall_time_seconds"] = time.perf_counter() - started
        write_json(diag_path, payload)
        logger.error("solver failed: %s", exc)
        return EXIT_SOLVER

    ms = config.manufactured
    extra = {"error": mms_errors(traj, ms)} if ms is not None else None
    write_trajectory_csv(traj_path, traj, extra)
    payload = diagnostics(traj, config)
    if timing:
        payload["wall_time_seconds"] = time.perf_counter() - started
    write_json(diag_path, payload)
    logger.info("wrote %s and %s", traj_path, diag_path)
    return EXIT_OK


def cmd_solve(args) -> int:
    return _solve(load_config(args), args.out_dir, args.timing)


def cmd_example51(args) -> int:
    try:
        config = example51_config(args.subdivisions, ramp=args.ramp)
    except ValidationError as exc:
        raise ConfigValidationError(format_validation_error(exc)) from exc
    return _solve(config, args.out_dir, args.timing)


def convergence_study(config: RunConfig, levels: int) -> tuple[list[list], bool]:
    """Rows ``n, h, cauchy_diff(n, 2n), mms_error, observed_order`` and the decay flag."""
    sizes = [config.subdivisions * 2**k for k in range(levels + 1)]
    with ThreadPoolExecutor(max_workers=min(thread_count(), len(sizes))) as pool:
        trajectories = list(pool.map(lambda n: run(build_problem(config, n)), sizes))

    ms = config.manufactured
    rows = []
    cauchy = [cauchy_diff(trajectories[k], trajectories[k + 1]) for k in range(levels)]
    errors = [mms_error(trajectories[k], ms) for k in range(levels)] if ms is not None else None
    measured = errors if errors is not None else cauchy
    for k in range(levels):
        order = None
        if k > 0 and measured[k] > 0.0 and measured[k - 1] > 0.0:
            order = math.log2(measured[k - 1] / measured[k])
        rows.append([sizes[k], trajectories[k].grid.step, cauchy[k], errors[k] if errors else None, order])
    monotone = all(b < a for a, b in zip(cauchy, cauchy[1:]))
    if errors is not None:
        monotone = monotone and all(b < a for a, b in zip(errors, errors[1:]))
    return rows, monotone


def cmd_convergence(args) -> int:
    config = load_config(args)
    if args.levels < 3:
        raise ConfigError("--levels must be >= 3")
    try:
        rows, monotone = convergence_study(config, args.levels)
    except Aborted as exc:
        logger.error("solver failed during the study: %s", exc)
        return EXIT_SOLVER
    study_path = _output_path(config.output.study_path, args.out_dir)
    header = ["n", "h", "cauchy_diff", "mms_error", "observed_order"]
    write_table_csv(study_path, header, rows)
    write_json(study_path.with_suffix(".json"), {
        "monotone_decay": monotone,
        "rows": [dict(zip(header, row)) for row in rows],
    })
    if not monotone:
        logger.warning("non-monotone decay in %s", study_path)
        return EXIT_DECAY
    return EXIT_OK


def cmd_verify(args) -> int:
    config = load_config(args)
    checks = run_suite(lambda n: build_problem(config, n), config.subdivisions, config.seed)
    summary = summarize(checks)
    write_json(_output_path(config.output.report_path, args.out_dir), summary)
    for check in checks:
        print(f"{'PASS' if check.passed else 'FAIL'}  {check.name}")
    if not summary["all_pass"]:
        print("failed checks: " + ", ".join(summary["failed"]), file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fracrothe", description="Rothe solver for multi-term fractional delay equations.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="path to the JSON run configuration")
        p.add_argument("--out-dir", help="write outputs here instead of the configured paths")
        p.add_argument("--seed", type=int, help="override the configured seed")

    p = sub.add_parser("solve", help="run the scheme and write trajectory CSV + diagnostics JSON")
    common(p)
    p.add_argument("--timing", action="store_true", help="record wall time in the diagnostics")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("convergence", help="refinement study over successive doublings of n")
    common(p)
    p.add_argument("--levels", type=int, default=3, help="number of table rows (>= 3)")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("verify", help="run the invariant suite and write a pass/fail report")
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("example51", help="solve the built-in heat problem with delay 2 pi")
    p.add_argument("--out-dir", help="output directory (default: current directory)")
    p.add_argument("--seed", type=int, help="accepted for symmetry; the preset uses no randomness")
    p.add_argument("--subdivisions", type=int, default=256, help="steps per delay interval")
    p.add_argument("--ramp", action="store_true", help="use the history sin(pi x)(1 + t/(2 pi))")
    p.add_argument("--timing", action="store_true", help="record wall time in the diagnostics")
    p.set_defaults(func=cmd_example51)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, OSError) as exc:
        print(f"fracrothe: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FracRotheError as exc:
        print(f"fracrothe: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
