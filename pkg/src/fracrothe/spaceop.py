"""Spatial operators for the implicit step.

The stepper only needs two things from ``A``: its action and the solution of
``(sigma I + h A) u = rhs``. Anything providing those (plus an inner product
for the state space) can be plugged into a problem.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from fracrothe.errors import DimensionMismatch, NonPositiveInput, SolveFailure

ACCRETIVITY_TOLERANCE = 1e-12


class SpatialOperator(abc.ABC):
    """Linear accretive operator on a finite-dimensional state space."""

    dimension: int

    @abc.abstractmethod
    def _apply(self, u: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def _solve_shifted(self, sigma: float, h: float, rhs: np.ndarray) -> np.ndarray: ...

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(np.dot(u, v))

    def norm(self, u: np.ndarray) -> float:
        return math.sqrt(max(self.inner(u, u), 0.0))

    def _check(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if u.shape != (self.dimension,):
            raise DimensionMismatch(
                f"operator of dimension {self.dimension} got a vector of shape {u.shape}"
            )
        return u

    def apply(self, u) -> np.ndarray:
        return self._apply(self._check(u))

    def solve_shifted(self, sigma: float, h: float, rhs) -> np.ndarray:
        """Solve ``(sigma I + h A) u = rhs``."""
        rhs = self._check(rhs)
        if not h > 0.0:
            raise NonPositiveInput(f"h must be positive, got {h!r}")
        if not np.all(np.isfinite(rhs)):
            raise SolveFailure("right-hand side has non-finite entries")
        u = self._solve_shifted(float(sigma), float(h), rhs)
        if not np.all(np.isfinite(u)):
            raise SolveFailure(f"shifted solve with sigma={sigma!r}, h={h!r} produced non-finite values")
        return u


def apply(op: SpatialOperator, u) -> np.ndarray:
    return op.apply(u)


def solve_shifted(op: SpatialOperator, sigma: float, h: float, rhs) -> np.ndarray:
    return op.solve_shifted(sigma, h, rhs)


class ZeroOperator(SpatialOperator):
    def __init__(self, dimension: int = 1) -> None:
        if dimension < 1:
            raise NonPositiveInput("dimension must be >= 1")
        self.dimension = int(dimension)

    def _apply(self, u):
        return np.zeros_like(u)

    def _solve_shifted(self, sigma, h, rhs):
        return rhs / sigma

    def __repr__(self) -> str:
        return f"ZeroOperator(dimension={self.dimension})"


class DenseOperator(SpatialOperator):
    """Operator given by an explicit matrix; the inner product is ``weight * u.v``."""

    def __init__(self, matrix, weight: float = 1.0) -> None:
        matrix = np.array(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {matrix.shape}")
        matrix.setflags(write=False)
        self.matrix = matrix
        self.weight = float(weight)
        self.dimension = matrix.shape[0]

    def _apply(self, u):
        return self.matrix @ u

    def _solve_shifted(self, sigma, h, rhs):
        lhs = sigma * np.eye(self.dimension) + h * self.matrix
        try:
            return np.linalg.solve(lhs, rhs)
        except np.linalg.LinAlgError as exc:
            raise SolveFailure(str(exc)) from exc

    def inner(self, u, v):
        return self.weight * float(np.dot(u, v))


class ScaledOperator(SpatialOperator):
    """``factor * base``. A negative factor gives a deliberately non-accretive operator."""

    def __init__(self, base: SpatialOperator, factor: float) -> None:
        self.base = base
        self.factor = float(factor)
        self.dimension = base.dimension

    def _apply(self, u):
        return self.factor * self.base._apply(u)

    def _solve_shifted(self, sigma, h, rhs):
        if self.factor > 0.0:
            return self.base._solve_shifted(sigma, h * self.factor, rhs)
        if self.factor == 0.0:
            return rhs / sigma
        dense = np.column_stack([self.base._apply(e) for e in np.eye(self.dimension)])
        return DenseOperator(self.factor * dense)._solve_shifted(sigma, h, rhs)

    def inner(self, u, v):
        return self.base.inner(u, v)


class DirichletLaplacian1D(SpatialOperator):
    """``-d^2/dx^2`` on ``(0, length)`` with zero Dirichlet data, three-point stencil.

    States are values at the interior nodes ``x_i = i * dx``, ``i = 1..N``, with
    ``dx = length / (N + 1)``. The inner product is the discrete L2 one,
    ``dx * sum(u * v)``.
    """

    def __init__(self, interior_nodes: int, length: float = 1.0) -> None:
        if interior_nodes < 1:
            raise NonPositiveInput(f"interior_nodes must be >= 1, got {interior_nodes!r}")
        if not length > 0.0:
            raise NonPositiveInput(f"length must be positive, got {length!r}")
        self.dimension = int(interior_nodes)
        self.length = float(length)
        self.dx = self.length / (self.dimension + 1)

    @property
    def interior_nodes(self) -> int:
        return self.dimension

    def grid(self) -> np.ndarray:
        return np.arange(1, self.dimension + 1) * self.dx

    def _apply(self, u):
        out = 2.0 * u
        out[1:] -= u[:-1]
        out[:-1] -= u[1:]
        return out / self.dx**2

    def _solve_shifted(self, sigma, h, rhs):
        # symmetric tridiagonal and strictly diagonally dominant for sigma >= 1,
        # so the banded LU never needs to pivot
        r = h / self.dx**2
        bands = np.empty((3, self.dimension))
        bands[0, :] = -r
        bands[1, :] = sigma + 2.0 * r
        bands[2, :] = -r
        try:
            return solve_banded((1, 1), bands, rhs, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise SolveFailure(str(exc)) from exc

    def inner(self, u, v):
        return self.dx * float(np.dot(u, v))

    def eigenvalues(self) -> np.ndarray:
        k = np.arange(1, self.dimension + 1)
        return 4.0 / self.dx**2 * np.sin(k * np.pi * self.dx / (2.0 * self.length)) ** 2

    def eigenvector(self, k: int) -> np.ndarray:
        return np.sin(k * np.pi * self.grid() / self.length)

    def matrix(self) -> np.ndarray:
        n = self.dimension
        return (2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / self.dx**2

    def __repr__(self) -> str:
        return f"DirichletLaplacian1D(interior_nodes={self.dimension}, length={self.length})"


@dataclass(frozen=True)
class AccretivityReport:
    min_ratio: float
    passed: bool
    trials: int


def verify_accretivity(
    op: SpatialOperator,
    trials: int = 100,
    seed: int = 0,
    sweeps: int = 30,
) -> AccretivityReport:
    """Estimate ``min <Au, u> / |u|^2`` over seeded random vectors.

    Each random vector is also pushed through ``sweeps`` resolvent iterations
    ``u <- (I + A)^{-1} u``, which converge to the direction with the smallest
    Rayleigh quotient; plain random draws rarely get near it.
    """
    if trials < 1:
        raise NonPositiveInput("trials must be >= 1")
    rng = np.random.default_rng(seed)

    def ratio(u):
        return op.inner(op.apply(u), u) / op.inner(u, u)

    best = math.inf
    for _ in range(trials):
        u = rng.standard_normal(op.dimension)
        best = min(best, ratio(u))
        for _ in range(sweeps):
            try:
                u = op.solve_shifted(1.0, 1.0, u)
            except SolveFailure:
                break
            size = op.norm(u)
            if size == 0.0 or not math.isfinite(size):
                break
            u = u / size
            best = min(best, ratio(u))
    return AccretivityReport(min_ratio=best, passed=best >= -ACCRETIVITY_TOLERANCE, trials=trials)
