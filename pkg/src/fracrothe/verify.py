"""Invariant checks run by ``fracrothe verify``.

Every check returns a :class:`Check`; a check that cannot be evaluated because
the solver failed is reported as failed with the error message.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from fracrothe.errors import FracRotheError
from fracrothe.fracgrid import l1_weights
from fracrothe.rothe import RotheFunctions, apriori_statistics, interpolation_gap
from fracrothe.spaceop import verify_accretivity
from fracrothe.stepper import ProblemSpec, Trajectory, run, step_residuals

logger = logging.getLogger(__name__)

STABILITY_SPREAD = 0.10
RESIDUAL_TOLERANCE = 1e-8
WEIGHT_TOLERANCE = 1e-12
NODE_TOLERANCE = 1e-12


@dataclass
class Check:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"pass": self.passed, **self.details}


def spread(values) -> float:
    """``(max - min) / max`` of positive values; 0 when all vanish."""
    values = np.asarray(values, dtype=np.float64)
    top = float(np.max(np.abs(values)))
    return 0.0 if top == 0.0 else float((np.max(values) - np.min(values)) / top)


def check_weights(spec: ProblemSpec) -> Check:
    count = max(spec.grid.m, 1)
    worst = 0.0
    monotone = True
    first = True
    for term in spec.terms:
        b = l1_weights(term.order, count).values
        first &= b[0] == 1.0
        monotone &= bool(np.all(np.diff(b) < 0.0))
        j = np.arange(1, count + 1)
        exact = j ** (1.0 - term.order)
        worst = max(worst, float(np.max(np.abs(np.cumsum(b) - exact) / exact)))
    passed = first and monotone and worst <= WEIGHT_TOLERANCE
    return Check("weight_identities", passed, {"b0_is_one": first, "strictly_decreasing": monotone,
                                               "max_telescoping_error": worst})


def check_accretivity(spec: ProblemSpec, seed: int) -> Check:
    report = verify_accretivity(spec.operator, trials=100, seed=seed)
    return Check("accretivity", report.passed, {"min_ratio": report.min_ratio, "trials": report.trials})


def check_step_residual(spec: ProblemSpec, traj: Trajectory) -> Check:
    residuals, forcing = step_residuals(spec, traj)
    scaled = residuals / (1.0 + forcing)
    worst = float(np.max(scaled)) if len(scaled) else 0.0
    return Check("step_residual", worst <= RESIDUAL_TOLERANCE,
                 {"max_scaled_residual": worst, "tolerance": RESIDUAL_TOLERANCE})


def check_interpolants(traj: Trajectory, seed: int, samples: int = 50) -> Check:
    rf = RotheFunctions(traj)
    grid = traj.grid
    node_exact = all(
        np.array_equal(rf.eval_U(grid.node(j)), traj.state(j))
        and np.array_equal(rf.eval_X(grid.node(j)), traj.state(j))
        for j in range(1, grid.m + 1)
    )
    rng = np.random.default_rng(seed)
    gap_error = 0.0
    for t in rng.uniform(0.0, grid.effective_horizon, samples):
        if t <= 0.0:
            continue
        actual, predicted = interpolation_gap(rf, float(t))
        gap_error = max(gap_error, abs(actual - predicted) / (1.0 + predicted))
    caputo_error = 0.0
    for q, term in enumerate(traj.spec.terms):
        for j in range(1, grid.m + 1):
            t = grid.node(j)
            v = rf.eval_v(q, t)
            exact = rf.exact_caputo_of_U(term.order, t)
            caputo_error = max(caputo_error, traj.norm(exact - v) / (1.0 + traj.norm(v)))
    passed = node_exact and gap_error <= NODE_TOLERANCE and caputo_error <= NODE_TOLERANCE
    return Check("interpolant_consistency", passed, {
        "nodes_exact": node_exact, "max_gap_error": gap_error, "max_node_caputo_error": caputo_error,
    })


def check_residual_profile(trajectories: list[Trajectory]) -> Check:
    maxima = []
    for traj in trajectories:
        rf = RotheFunctions(traj)
        maxima.append([rf.caputo_residual_profile(q, 3).max for q in range(len(traj.spec.terms))])
    maxima = np.array(maxima).reshape(len(trajectories), -1)
    decreasing = bool(np.all(np.diff(maxima, axis=0) < 0.0)) if maxima.size else True
    return Check("residual_profile_decay", decreasing, {
        "n": [t.grid.n for t in trajectories], "max_residual": maxima.tolist(),
    })


def check_apriori(trajectories: list[Trajectory]) -> Check:
    stats = [apriori_statistics(t) for t in trajectories]
    spreads = {
        "max_state_deviation": spread([s.max_state_deviation for s in stats]),
        "max_difference_norm": spread([s.max_difference_norm for s in stats]),
    }
    for q in range(len(stats[0].max_caputo_norm)):
        spreads[f"max_caputo_norm[{q}]"] = spread([s.max_caputo_norm[q] for s in stats])
    passed = all(v < STABILITY_SPREAD for v in spreads.values())
    return Check("apriori_stability", passed, {
        "n": [t.grid.n for t in trajectories], "spread": spreads,
        "statistics": [s.as_dict() for s in stats],
    })


def implicit_euler_with_delay(spec: ProblemSpec) -> np.ndarray:
    """``(I + h A) theta_j = theta_{j-1} + h f(t_j, theta_{j-n})`` with a dense solve."""
    grid = spec.grid
    n, m, h = grid.n, grid.m, grid.step
    dim = spec.dimension
    matrix = np.column_stack([spec.operator.apply(e) for e in np.eye(dim)])
    lhs = np.eye(dim) + h * matrix
    states = np.empty((n + m + 1, dim))
    states[: n + 1] = spec.history.samples
    for j in range(1, m + 1):
        forcing = np.broadcast_to(np.asarray(spec.forcing(j * h, states[j]), dtype=float), (dim,))
        states[n + j] = np.linalg.solve(lhs, states[n + j - 1] + h * forcing)
    return states


def check_reduction(spec: ProblemSpec, traj: Trajectory) -> Check:
    oracle = implicit_euler_with_delay(spec)
    gap = float(np.max(np.abs(oracle - traj.states)))
    scale = max(1.0, float(np.max(np.abs(oracle))))
    return Check("reduction_to_backward_euler", gap <= 1e-12 * scale, {"max_abs_difference": gap})


def run_suite(problem: Callable[[int], ProblemSpec], n: int, seed: int = 0) -> list[Check]:
    """All checks for the problem family ``problem(n)`` at ``n``, ``2n`` and ``4n``."""
    base = problem(n)
    checks = [check_weights(base), check_accretivity(base, seed)]

    trajectories: list[Trajectory] = []
    failure = None
    for level in (n, 2 * n, 4 * n):
        try:
            trajectories.append(run(base if level == n else problem(level)))
        except FracRotheError as exc:
            failure = f"run at n={level} failed: {exc}"
            logger.warning(failure)
            break

    dependent = ["step_residual", "interpolant_consistency", "residual_profile_decay", "apriori_stability"]
    reduction = all(term.weight == 0.0 for term in base.terms)
    if reduction:
        dependent.append("reduction_to_backward_euler")
    if failure is not None:
        checks.extend(Check(name, False, {"error": failure}) for name in dependent)
        return checks

    traj = trajectories[0]
    checks.append(check_step_residual(base, traj))
    checks.append(check_interpolants(traj, seed))
    checks.append(check_residual_profile(trajectories))
    checks.append(check_apriori(trajectories))
    if reduction:
        checks.append(check_reduction(base, traj))
    return checks


def summarize(checks: list[Check]) -> dict:
    return {
        "all_pass": all(c.passed for c in checks),
        "checks": {c.name: c.as_dict() for c in checks},
        "failed": [c.name for c in checks if not c.passed],
    }
