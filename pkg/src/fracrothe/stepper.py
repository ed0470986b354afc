r"""Implicit time stepping for the multi-term fractional delay equation.

Each step solves

.. math::

    \Big(1 + \sum_q c_q\Big)\vartheta_j + h A \vartheta_j
        = \vartheta_{j-1}
        + \sum_q c_q\Big[\sum_{i=1}^{j-1}(b^q_{j-i-1} - b^q_{j-i})\vartheta_i
                         + b^q_{j-1}\vartheta_0\Big]
        + h f(t_j, \vartheta_{j-n}),

with ``c_q = a_q h^{1-alpha_q} / Gamma(2-alpha_q)``. The delayed argument
``theta_{j-n}`` always precedes ``theta_j``, so a linear ``A`` needs one linear
solve per step and no nonlinear iteration.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from fracrothe.errors import (
    Aborted,
    DimensionMismatch,
    IndexOutOfRange,
    NonFiniteForcing,
    SolveFailure,
)
from fracrothe.fracgrid import (
    FractionalTerm,
    TimeGrid,
    caputo_l1,
    l1_weights,
    multi_term_coefficient,
)
from fracrothe.spaceop import SpatialOperator

logger = logging.getLogger(__name__)

Forcing = Callable[[float, np.ndarray], np.ndarray]
HistoryFunction = Callable[[float], np.ndarray]

# dense storage of every state; beyond this the run is refused
MAX_STORED_VALUES = 10**8


@dataclass(frozen=True)
class DelayHistory:
    """Samples ``chi(t_j)`` for ``j = -n..0`` together with the function itself."""

    source: HistoryFunction
    samples: np.ndarray

    @classmethod
    def sample(cls, source: HistoryFunction, grid: TimeGrid, dimension: int) -> "DelayHistory":
        rows = []
        for j in range(-grid.n, 1):
            value = np.asarray(source(grid.node(j)), dtype=np.float64).reshape(-1)
            if value.shape != (dimension,):
                raise DimensionMismatch(
                    f"history returned shape {value.shape} at t={grid.node(j)!r}, expected ({dimension},)"
                )
            rows.append(value)
        samples = np.vstack(rows)
        samples.setflags(write=False)
        return cls(source=source, samples=samples)

    def lipschitz_estimate(self, step: float, norm: Callable[[np.ndarray], float] | None = None) -> float:
        """Largest ``|chi(t_{j+1}) - chi(t_j)| / h`` over adjacent samples."""
        norm = norm or (lambda v: float(np.linalg.norm(v)))
        if len(self.samples) < 2:
            return 0.0
        return max(norm(b - a) for a, b in zip(self.samples[:-1], self.samples[1:])) / step


@dataclass(frozen=True)
class ProblemSpec:
    grid: TimeGrid
    terms: tuple[FractionalTerm, ...]
    operator: SpatialOperator
    forcing: Forcing
    history: DelayHistory

    def __post_init__(self) -> None:
        object.__setattr__(self, "terms", tuple(self.terms))
        expected = (self.grid.n + 1, self.operator.dimension)
        if self.history.samples.shape != expected:
            raise DimensionMismatch(
                f"history samples have shape {self.history.samples.shape}, expected {expected}"
            )

    @property
    def dimension(self) -> int:
        return self.operator.dimension

    def refined(self, factor: int) -> "ProblemSpec":
        """Same physics on a grid with ``factor`` times more steps per delay."""
        grid = self.grid.refined(factor)
        history = DelayHistory.sample(self.history.source, grid, self.dimension)
        return ProblemSpec(grid, self.terms, self.operator, self.forcing, history)

    def coefficients(self) -> tuple[float, ...]:
        return tuple(multi_term_coefficient(term, self.grid.step) for term in self.terms)

    def evaluate_forcing(self, t: float, delayed: np.ndarray) -> np.ndarray:
        value = np.asarray(self.forcing(t, delayed), dtype=np.float64)
        if value.shape != (self.dimension,):
            value = np.broadcast_to(value, (self.dimension,)).astype(np.float64)
        if not np.all(np.isfinite(value)):
            raise NonFiniteForcing(f"forcing returned non-finite values at t={t!r}")
        return value


def make_problem(
    grid: TimeGrid,
    terms: Sequence[FractionalTerm],
    operator: SpatialOperator,
    forcing: Forcing,
    history: HistoryFunction,
) -> ProblemSpec:
    samples = DelayHistory.sample(history, grid, operator.dimension)
    return ProblemSpec(grid, tuple(terms), operator, forcing, samples)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States ``theta_j`` for ``j = -n..m``; row ``j + n`` of :attr:`states`.

    ``last_index`` is ``m`` for a finished run; an aborted run keeps NaN rows
    after it.
    """

    spec: ProblemSpec
    states: np.ndarray
    last_index: int
    solve_residuals: np.ndarray = field(repr=False)

    @property
    def grid(self) -> TimeGrid:
        return self.spec.grid

    def state(self, j: int) -> np.ndarray:
        if not -self.grid.n <= j <= self.last_index:
            raise IndexOutOfRange(f"state index {j} outside [-{self.grid.n}, {self.last_index}]")
        return self.states[j + self.grid.n]

    def difference(self, j: int) -> np.ndarray:
        if not 1 <= j <= self.last_index:
            raise IndexOutOfRange(f"difference index {j} outside [1, {self.last_index}]")
        n = self.grid.n
        return (self.states[j + n] - self.states[j + n - 1]) / self.grid.step

    @cached_property
    def differences(self) -> np.ndarray:
        """``delta theta_j`` for ``j = 1..last_index`` as rows."""
        n = self.grid.n
        out = np.diff(self.states[n : n + self.last_index + 1], axis=0) / self.grid.step
        out.setflags(write=False)
        return out

    @property
    def times(self) -> np.ndarray:
        return self.grid.nodes()

    def norm(self, u: np.ndarray) -> float:
        return self.spec.operator.norm(u)


class _Scheme:
    """Per-run constants: combined weights of all fractional terms."""

    def __init__(self, spec: ProblemSpec) -> None:
        grid = spec.grid
        self.spec = spec
        self.h = grid.step
        coefficients = spec.coefficients()
        self.sigma = 1.0 + math.fsum(coefficients)
        count = max(grid.m, 1)
        # B[k] = sum_q c_q b^q_k ; D[k] = B[k-1] - B[k]
        combined = np.zeros(count)
        for c, term in zip(coefficients, spec.terms):
            if c != 0.0:
                combined += c * l1_weights(term.order, count).values
        self.combined = combined
        self.drop = np.zeros(count)
        self.drop[1:] = combined[:-1] - combined[1:]

    def rhs(self, states: np.ndarray, j: int) -> np.ndarray:
        n = self.spec.grid.n
        previous = states[n + j - 1]
        rhs = previous.copy()
        if j >= 2:
            # sum over i = 1..j-1 of D[j-i] theta_i ; D reversed against rows 1..j-1
            rhs += self.drop[j - 1 : 0 : -1] @ states[n + 1 : n + j]
        if j >= 1 and self.combined[j - 1] != 0.0:
            rhs += self.combined[j - 1] * states[n]
        delayed = states[j]  # row (j - n) + n
        rhs += self.h * self.spec.evaluate_forcing(self.spec.grid.node(j), delayed)
        return rhs

    def solve(self, states: np.ndarray, j: int) -> tuple[np.ndarray, float]:
        rhs = self.rhs(states, j)
        op = self.spec.operator
        theta = op.solve_shifted(self.sigma, self.h, rhs)
        residual = op.norm(self.sigma * theta + self.h * op.apply(theta) - rhs)
        return theta, residual


def delayed_state(traj: Trajectory, j: int) -> np.ndarray:
    """``theta_{j-n}``, the state one delay before ``t_j``."""
    if not 1 <= j <= traj.grid.m:
        raise IndexOutOfRange(f"step index {j} outside [1, {traj.grid.m}]")
    return traj.state(j - traj.grid.n)


def step(spec: ProblemSpec, traj: Trajectory, j: int) -> np.ndarray:
    """Compute ``theta_j`` from the states ``-n..j-1`` held in ``traj``."""
    if not 1 <= j <= spec.grid.m:
        raise IndexOutOfRange(f"step index {j} outside [1, {spec.grid.m}]")
    if traj.last_index < j - 1:
        raise IndexOutOfRange(f"step {j} needs states up to {j - 1}, trajectory ends at {traj.last_index}")
    theta, _ = _Scheme(spec).solve(traj.states, j)
    return theta


def _check_budget(spec: ProblemSpec) -> None:
    stored = (spec.grid.n + spec.grid.m + 1) * spec.dimension
    if stored > MAX_STORED_VALUES:
        raise MemoryError(f"run would store {stored} values, limit is {MAX_STORED_VALUES}")


def run(spec: ProblemSpec) -> Trajectory:
    """March the scheme from ``t_1`` to ``t_m`` and return every state."""
    _check_budget(spec)
    grid = spec.grid
    n, m = grid.n, grid.m
    states = np.full((n + m + 1, spec.dimension), np.nan)
    states[: n + 1] = spec.history.samples
    residuals = np.zeros(m)
    scheme = _Scheme(spec)

    def partial(last: int) -> Trajectory:
        return Trajectory(spec, states.copy(), last, residuals.copy())

    for j in range(1, m + 1):
        try:
            theta, residuals[j - 1] = scheme.solve(states, j)
        except (SolveFailure, NonFiniteForcing) as exc:
            raise Aborted(f"step {j} failed: {exc}", partial(j - 1), j) from exc
        if not np.all(np.isfinite(theta)):
            raise Aborted(f"non-finite state at step {j} (t={grid.node(j)!r})", partial(j - 1), j)
        states[n + j] = theta

    logger.debug("run finished: n=%d m=%d dim=%d", n, m, spec.dimension)
    states.setflags(write=False)
    residuals.setflags(write=False)
    return Trajectory(spec, states, m, residuals)


def step_residual(spec: ProblemSpec, traj: Trajectory, j: int) -> float:
    """Norm of the difference form of step ``j`` evaluated on the stored states.

    This re-evaluates ``delta theta_j + sum_q a_q D^{alpha_q}_{L1} theta_j +
    A theta_j - f(t_j, theta_{j-n})`` term by term, independently of the
    rearranged system used by :func:`run`.
    """
    if not 1 <= j <= traj.last_index:
        raise IndexOutOfRange(f"step index {j} outside [1, {traj.last_index}]")
    h = spec.grid.step
    diffs = traj.differences[:j]
    total = diffs[j - 1].copy()
    for term in spec.terms:
        if term.weight != 0.0:
            total += term.weight * caputo_l1(diffs, term.order, h)
    total += spec.operator.apply(traj.state(j))
    total -= spec.evaluate_forcing(spec.grid.node(j), delayed_state(traj, j))
    return spec.operator.norm(total)


def step_residuals(spec: ProblemSpec, traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    """:func:`step_residual` for every step, and ``|f(t_j, theta_{j-n})|`` for scaling."""
    steps = range(1, traj.last_index + 1)
    residuals = np.array([step_residual(spec, traj, j) for j in steps])
    forcing = np.array(
        [
            spec.operator.norm(spec.evaluate_forcing(spec.grid.node(j), delayed_state(traj, j)))
            for j in steps
        ]
    )
    return residuals, forcing
