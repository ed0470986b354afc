"""Manufactured solutions and independent reference evaluators.

The manufactured solution is ``u(t, x) = (t^gamma + beta) sin(k pi x / L)``.
Its forcing is built as ``f(t, w) = w + G(t)`` so that the delayed state
really enters the right-hand side: a wrong delay index changes the answer.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from fracrothe.errors import BadExponent, OutOfDomain, QuadratureNonConvergence
from fracrothe.fracgrid import FractionalTerm, TimeGrid, _check_order
from fracrothe.spaceop import DirichletLaplacian1D
from fracrothe.stepper import ProblemSpec, Trajectory, make_problem, run


def exact_caputo_power(gamma_exponent: float, order: float, t: float) -> float:
    """Caputo derivative of ``t^gamma`` (lower limit 0).

    ``gamma_exponent == 0`` is the constant function, whose derivative is 0.
    """
    order = _check_order(order)
    if gamma_exponent < 0.0 or not math.isfinite(gamma_exponent):
        raise BadExponent(f"exponent must be >= 0, got {gamma_exponent!r}")
    if t < 0.0:
        raise OutOfDomain(f"t must be >= 0, got {t!r}")
    if gamma_exponent == 0.0 or t == 0.0:
        return 0.0
    return (
        math.gamma(gamma_exponent + 1.0)
        / math.gamma(gamma_exponent + 1.0 - order)
        * t ** (gamma_exponent - order)
    )


def caputo_by_quadrature(
    g_prime: Callable[[float], float],
    order: float,
    t: float,
    tol: float = 1e-10,
    breakpoints: Sequence[float] = (),
) -> float:
    r"""Caputo derivative from its defining integral by adaptive quadrature.

    With ``u = (t - s)^{1-alpha}`` the weakly singular kernel disappears:

    .. math::

        \int_0^t \frac{g'(s)}{(t-s)^\alpha} ds
            = \frac{1}{1-\alpha} \int_0^{t^{1-\alpha}} g'(t - u^{1/(1-\alpha)}) du.

    ``breakpoints`` are points in ``(0, t)`` where ``g'`` jumps.
    """
    order = _check_order(order)
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    if t < 0.0:
        raise OutOfDomain(f"t must be >= 0, got {t!r}")
    if t == 0.0:
        return 0.0
    p = 1.0 - order
    upper = t**p
    points = sorted({(t - s) ** p for s in breakpoints if 0.0 < s < t})

    def integrand(u: float) -> float:
        return g_prime(t - u ** (1.0 / p))

    scale = p * math.gamma(1.0 - order)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, error = integrate.quad(
                integrand,
                0.0,
                upper,
                epsabs=0.25 * tol * scale,
                epsrel=0.0,
                limit=500,
                points=points or None,
            )
        except integrate.IntegrationWarning as exc:
            raise QuadratureNonConvergence(str(exc)) from exc
    if error / scale > tol:
        raise QuadratureNonConvergence(f"estimated error {error / scale:.3g} exceeds tol {tol:.3g}")
    return value / scale


@dataclass(frozen=True)
class ManufacturedSolution:
    """``u(t, x) = (t^gamma + beta) sin(k pi x / L)``.

    For ``t < 0`` the time profile is ``|t|^gamma + beta``; only its values feed
    the history and the delayed state.
    """

    gamma_exponent: float = 2.0
    shift: float = 1.0
    mode: int = 1
    length: float = 1.0

    def __post_init__(self) -> None:
        if not self.gamma_exponent > 1.0:
            raise BadExponent(
                f"manufactured solutions need gamma > 1 (bounded difference quotients near t=0), "
                f"got {self.gamma_exponent!r}"
            )
        if self.mode < 1:
            raise ValueError("mode must be a positive integer")

    def profile(self, t: float) -> float:
        return abs(t) ** self.gamma_exponent + self.shift

    def profile_derivative(self, t: float) -> float:
        return self.gamma_exponent * t ** (self.gamma_exponent - 1.0) if t > 0.0 else 0.0

    def profile_caputo(self, order: float, t: float) -> float:
        return exact_caputo_power(self.gamma_exponent, order, t)

    @property
    def eigenvalue(self) -> float:
        """``(k pi / L)^2``, the image of the sine mode under ``-d^2/dx^2``."""
        return (self.mode * math.pi / self.length) ** 2

    def shape(self, x: np.ndarray) -> np.ndarray:
        return np.sin(self.mode * math.pi * np.asarray(x) / self.length)

    def exact(self, t: float, x: np.ndarray) -> np.ndarray:
        return self.profile(t) * self.shape(x)

    def source_profile(self, t: float, terms: Sequence[FractionalTerm], delay: float) -> float:
        """``G(t)`` divided by the sine mode."""
        fractional = math.fsum(term.weight * self.profile_caputo(term.order, t) for term in terms)
        return (
            self.profile_derivative(t)
            + fractional
            + self.eigenvalue * self.profile(t)
            - self.profile(t - delay)
        )


def build_mms_spec(
    ms: ManufacturedSolution,
    terms: Sequence[FractionalTerm],
    grid: TimeGrid,
    interior_nodes: int = 64,
    length: float | None = None,
) -> ProblemSpec:
    """Problem whose exact solution is ``ms`` on the given mesh and Laplacian."""
    length = ms.length if length is None else float(length)
    if not math.isclose(length, ms.length):
        raise ValueError("the operator length must match the manufactured solution's length")
    op = DirichletLaplacian1D(interior_nodes, length)
    shape = ms.shape(op.grid())
    terms = tuple(terms)
    delay = grid.delay

    def forcing(t: float, delayed: np.ndarray) -> np.ndarray:
        return delayed + ms.source_profile(t, terms, delay) * shape

    def history(t: float) -> np.ndarray:
        return ms.profile(t) * shape

    return make_problem(grid, terms, op, forcing, history)


def mms_error(traj: Trajectory, ms: ManufacturedSolution, j: int | None = None) -> float:
    """``|theta_j - u(t_j)|`` in the operator norm; ``j`` defaults to the last node."""
    j = traj.last_index if j is None else j
    x = traj.spec.operator.grid()
    return traj.norm(traj.state(j) - ms.exact(traj.grid.node(j), x))


def mms_errors(traj: Trajectory, ms: ManufacturedSolution) -> np.ndarray:
    """Error at every node ``j = -n..m`` (zero on the history window)."""
    x = traj.spec.operator.grid()
    shape = ms.shape(x)
    times = traj.grid.nodes()
    return np.array(
        [traj.norm(row - ms.profile(t) * shape) for row, t in zip(traj.states, times)]
    )


def reference_solve(spec: ProblemSpec, refinement: int) -> Trajectory:
    """Run the scheme ``refinement`` times finer and keep the coarse nodes."""
    if refinement < 1 or int(refinement) != refinement:
        raise ValueError(f"refinement must be a positive integer, got {refinement!r}")
    if refinement == 1:
        return run(spec)
    fine = run(spec.refined(int(refinement)))
    n_f = fine.grid.n
    # coarse node j sits at fine index j * r; j runs over -n..m
    indices = np.arange(-spec.grid.n, spec.grid.m + 1) * int(refinement) + n_f
    states = fine.states[indices]
    states.setflags(write=False)
    return Trajectory(spec, states, spec.grid.m, np.zeros(spec.grid.m))
