"""Ready-made problems used by the CLI and the test-suite."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from fracrothe.fracgrid import FractionalTerm, make_grid
from fracrothe.mms import ManufacturedSolution, build_mms_spec
from fracrothe.spaceop import DirichletLaplacian1D
from fracrothe.stepper import ProblemSpec, make_problem

EXAMPLE51_DELAY = 2.0 * math.pi
DEFAULT_TERMS = (FractionalTerm(1.0, 0.5),)


# phi(-2 pi) = pi^2 phi(0): with f(t, w) = w the forcing balances A phi(0) at
# t = 0, so the solution starts with zero slope and no initial layer
EXAMPLE51_SLOPE = (1.0 - math.pi**2) / EXAMPLE51_DELAY
# the plain ramp 1 + t / (2 pi); its initial layer is under-resolved for n < ~1000
RAMP_SLOPE = 1.0 / EXAMPLE51_DELAY


def example51_history_profile(t: float, slope: float = EXAMPLE51_SLOPE) -> float:
    return 1.0 + slope * t


def example51_spec(
    n: int = 256,
    interior_nodes: int = 64,
    terms: Sequence[FractionalTerm] = DEFAULT_TERMS,
    slope: float = EXAMPLE51_SLOPE,
) -> ProblemSpec:
    """Heat equation with delay ``2 pi`` on ``[0, 1]``, ``f(t, w) = w``.

    The history is ``phi(t, x) = sin(pi x) (1 + slope * t)`` on ``[-2 pi, 0]``.
    """
    grid = make_grid(EXAMPLE51_DELAY, EXAMPLE51_DELAY, n)
    op = DirichletLaplacian1D(interior_nodes, 1.0)
    shape = np.sin(math.pi * op.grid())

    def history(t: float) -> np.ndarray:
        return example51_history_profile(t, slope) * shape

    def forcing(t: float, delayed: np.ndarray) -> np.ndarray:
        return delayed

    return make_problem(grid, terms, op, forcing, history)


MMS_SOLUTION = ManufacturedSolution(gamma_exponent=2.0, shift=1.0, mode=1)


def mms_spec(
    n: int = 256,
    interior_nodes: int = 256,
    terms: Sequence[FractionalTerm] = DEFAULT_TERMS,
    delay: float = 1.0,
    horizon: float = 2.0,
    solution: ManufacturedSolution = MMS_SOLUTION,
) -> ProblemSpec:
    return build_mms_spec(solution, terms, make_grid(delay, horizon, n), interior_nodes)
