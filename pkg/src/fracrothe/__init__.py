"""Rothe time discretization for multi-term time-fractional delay diffusion equations."""

from fracrothe.fracgrid import (
    FractionalTerm,
    L1Weights,
    TimeGrid,
    caputo_l1,
    l1_weights,
    make_grid,
    multi_term_coefficient,
)
from fracrothe.rothe import RotheFunctions, apriori_statistics, cauchy_diff
from fracrothe.spaceop import DirichletLaplacian1D, SpatialOperator, ZeroOperator, verify_accretivity
from fracrothe.stepper import DelayHistory, ProblemSpec, Trajectory, make_problem, run, step, step_residual

__version__ = "0.1.0"

__all__ = [
    "DelayHistory",
    "DirichletLaplacian1D",
    "FractionalTerm",
    "L1Weights",
    "ProblemSpec",
    "RotheFunctions",
    "SpatialOperator",
    "TimeGrid",
    "Trajectory",
    "ZeroOperator",
    "apriori_statistics",
    "caputo_l1",
    "cauchy_diff",
    "l1_weights",
    "make_grid",
    "make_problem",
    "multi_term_coefficient",
    "run",
    "step",
    "step_residual",
    "verify_accretivity",
]
