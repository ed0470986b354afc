"""Rothe functions built from a discrete trajectory, and convergence diagnostics.

``U`` is the piecewise-linear interpolant of the states, ``X`` the
piecewise-constant one (right-continuous at nodes, i.e. ``X(t) = theta_j`` on
``(t_{j-1}, t_j]``) and ``v`` carries the L1 Caputo values in the same way.
All three follow the history function on ``[-delay, 0]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from fracrothe.errors import BadTermIndex, IncompatibleGrids, OutOfDomain
from fracrothe.fracgrid import _check_order, caputo_l1_all
from fracrothe.stepper import Trajectory

_DOMAIN_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class RotheFunctions:
    trajectory: Trajectory

    @property
    def grid(self):
        return self.trajectory.grid

    @property
    def terms(self):
        return self.trajectory.spec.terms

    def _history(self, t: float) -> np.ndarray:
        return np.asarray(self.trajectory.spec.history.source(t), dtype=np.float64).reshape(-1)

    def _check_domain(self, t: float, lower: float) -> float:
        t = float(t)
        upper = self.grid.effective_horizon
        slack = _DOMAIN_SLACK * max(1.0, upper)
        if not (lower - slack <= t <= upper + slack):
            raise OutOfDomain(f"t={t!r} outside [{lower!r}, {upper!r}]")
        return min(t, upper)

    def eval_U(self, t: float) -> np.ndarray:
        t = self._check_domain(t, -self.grid.delay)
        if t <= 0.0:
            return self._history(t)
        j = self.grid.interval_index(t)
        traj = self.trajectory
        if t == self.grid.node(j):
            return traj.state(j).copy()
        return traj.state(j - 1) + (t - self.grid.node(j - 1)) * traj.differences[j - 1]

    def eval_X(self, t: float) -> np.ndarray:
        t = self._check_domain(t, -self.grid.delay)
        if t <= 0.0:
            return self._history(t)
        return self.trajectory.state(self.grid.interval_index(t)).copy()

    @cached_property
    def _caputo_nodes(self) -> tuple[np.ndarray, ...]:
        diffs = self.trajectory.differences
        h = self.grid.step
        return tuple(caputo_l1_all(diffs, term.order, h) for term in self.terms)

    def caputo_at_nodes(self, term_index: int) -> np.ndarray:
        """L1 values at ``t_1 .. t_m`` (row ``j-1``) for one term."""
        self._check_term(term_index)
        return self._caputo_nodes[term_index]

    def _check_term(self, term_index: int) -> None:
        if not 0 <= term_index < len(self.terms):
            raise BadTermIndex(f"term index {term_index} outside [0, {len(self.terms)})")

    def eval_v(self, term_index: int, t: float) -> np.ndarray:
        self._check_term(term_index)
        t = self._check_domain(t, 0.0)
        if t <= 0.0:
            return np.zeros(self.trajectory.spec.dimension)
        j = self.grid.interval_index(t)
        return self._caputo_nodes[term_index][j - 1].copy()

    def exact_caputo_of_U(self, order: float, t: float) -> np.ndarray:
        """Caputo derivative of the piecewise-linear ``U`` at ``t``, integrated exactly.

        For ``t`` in ``(t_j, t_{j+1}]`` the completed intervals contribute
        ``((t - t_{i-1})^{1-a} - (t - t_i)^{1-a}) delta theta_i`` and the partial
        one ``(t - t_j)^{1-a} delta theta_{j+1}``.
        """
        order = _check_order(order)
        t = self._check_domain(t, 0.0)
        if t <= 0.0:
            raise OutOfDomain("the Caputo derivative of U is evaluated on (0, T0]")
        j = self.grid.interval_index(t) - 1
        return self._exact_caputo_batch(order, j, np.array([t - self.grid.node(j)]))[0]

    def _exact_caputo_batch(self, order: float, j: int, offsets: np.ndarray) -> np.ndarray:
        # offsets are t - t_j for points in (t_j, t_{j+1}]; t - t_i = offset + (j - i) h
        h = self.grid.step
        p = 1.0 - order
        diffs = self.trajectory.differences
        tail = offsets[:, None] ** p * diffs[j][None, :]
        if j == 0:
            return tail / math.gamma(2.0 - order)
        lags = (j - np.arange(1, j + 1)) * h  # t_j - t_i for i = 1..j
        upper = (offsets[:, None] + lags[None, :] + h) ** p
        lower = (offsets[:, None] + lags[None, :]) ** p
        return ((upper - lower) @ diffs[:j] + tail) / math.gamma(2.0 - order)

    def caputo_residual_profile(self, term_index: int, samples: int = 3) -> "ResidualProfile":
        """``|v(t) - D^alpha U(t)|`` at ``samples`` interior points of every interval."""
        self._check_term(term_index)
        if samples < 1:
            raise ValueError("samples must be >= 1")
        order = self.terms[term_index].order
        h = self.grid.step
        # Chebyshev points of (0, 1); both endpoints excluded
        fractions = (1.0 - np.cos(np.pi * (np.arange(samples) + 0.5) / samples)) / 2.0
        offsets = fractions * h
        v_nodes = self._caputo_nodes[term_index]
        op = self.trajectory.spec.operator
        times = []
        residuals = []
        for j in range(self.grid.m):
            exact = self._exact_caputo_batch(order, j, offsets)
            mismatch = exact - v_nodes[j][None, :]
            times.extend(self.grid.node(j) + offsets)
            residuals.extend(op.norm(row) for row in mismatch)
        return ResidualProfile(np.array(times), np.array(residuals))


@dataclass(frozen=True)
class ResidualProfile:
    times: np.ndarray
    residuals: np.ndarray

    @property
    def max(self) -> float:
        return float(np.max(self.residuals)) if len(self.residuals) else 0.0

    def __iter__(self):
        return iter(zip(self.times.tolist(), self.residuals.tolist()))


def rothe_functions(traj: Trajectory) -> RotheFunctions:
    return RotheFunctions(traj)


def eval_U(rf: RotheFunctions, t: float) -> np.ndarray:
    return rf.eval_U(t)


def eval_X(rf: RotheFunctions, t: float) -> np.ndarray:
    return rf.eval_X(t)


def eval_v(rf: RotheFunctions, term_index: int, t: float) -> np.ndarray:
    return rf.eval_v(term_index, t)


def exact_caputo_of_U(rf: RotheFunctions, order: float, t: float) -> np.ndarray:
    return rf.exact_caputo_of_U(order, t)


def caputo_residual_profile(rf: RotheFunctions, term_index: int, samples: int = 3) -> ResidualProfile:
    return rf.caputo_residual_profile(term_index, samples)


def cauchy_diff(traj_coarse: Trajectory, traj_fine: Trajectory) -> float:
    """``max_j |U_fine(t_j) - U_coarse(t_j)|`` over the coarse nodes."""
    coarse, fine = traj_coarse.grid, traj_fine.grid
    if not (
        math.isclose(coarse.delay, fine.delay, rel_tol=1e-14)
        and math.isclose(coarse.horizon, fine.horizon, rel_tol=1e-14)
    ):
        raise IncompatibleGrids("trajectories use different delay or horizon")
    if fine.n % coarse.n != 0:
        raise IncompatibleGrids(f"fine n={fine.n} is not a multiple of coarse n={coarse.n}")
    if traj_coarse.spec.dimension != traj_fine.spec.dimension:
        raise IncompatibleGrids("trajectories have different state dimensions")
    if traj_coarse.last_index != coarse.m or traj_fine.last_index != fine.m:
        raise IncompatibleGrids("cauchy_diff needs completed runs")
    ratio = fine.n // coarse.n
    n_c, n_f = coarse.n, fine.n
    gap = traj_fine.states[n_f :: ratio] - traj_coarse.states[n_c:]
    return max(traj_coarse.norm(row) for row in gap)


@dataclass(frozen=True)
class AprioriStatistics:
    max_state_deviation: float
    max_difference_norm: float
    max_caputo_norm: tuple[float, ...]

    def as_dict(self) -> dict:
        return {
            "max_state_deviation": self.max_state_deviation,
            "max_difference_norm": self.max_difference_norm,
            "max_caputo_norm": list(self.max_caputo_norm),
        }


def apriori_statistics(traj: Trajectory) -> AprioriStatistics:
    """The quantities bounded uniformly in ``n`` by the a-priori estimates.

    * ``max_j |theta_j - chi(0)|``
    * ``max_j |delta theta_j|`` (also the Lipschitz constant of ``U`` on ``[0, T0]``)
    * ``max_j |D^{alpha_q}_{L1} theta_j|`` for each term
    """
    rf = RotheFunctions(traj)
    norm = traj.norm
    start = traj.state(0)
    m = traj.last_index
    deviation = max((norm(traj.state(j) - start) for j in range(1, m + 1)), default=0.0)
    difference = max((norm(row) for row in traj.differences), default=0.0)
    caputo = tuple(
        max((norm(row) for row in rf.caputo_at_nodes(q)), default=0.0) for q in range(len(traj.spec.terms))
    )
    return AprioriStatistics(deviation, difference, caputo)


def interpolation_gap(rf: RotheFunctions, t: float) -> tuple[float, float]:
    """``|U(t) - X(t)|`` and the predicted ``|t - t_j| |delta theta_j|`` on ``(t_{j-1}, t_j]``."""
    grid = rf.grid
    j = grid.interval_index(t)
    norm = rf.trajectory.norm
    actual = norm(rf.eval_U(t) - rf.eval_X(t))
    predicted = abs(t - grid.node(j)) * norm(rf.trajectory.differences[j - 1])
    return actual, predicted
