r"""Time mesh and discrete fractional-calculus kernels.

The mesh covers the history window ``[-delay, 0]`` with ``n`` uniform steps
and continues with the same step up to the largest multiple of the delay not
exceeding the horizon. The Caputo derivative of order ``alpha`` is replaced by
the L1 formula

.. math::

    D^\alpha \vartheta_j \approx \frac{h^{1-\alpha}}{\Gamma(2-\alpha)}
        \sum_{i=1}^{j} b_{j-i}\, \delta\vartheta_i,
    \qquad b_i = (i+1)^{1-\alpha} - i^{1-\alpha}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from fracrothe.errors import (
    DelayExceedsHorizon,
    DimensionMismatch,
    EmptyHistory,
    NegativeWeight,
    NonPositiveInput,
    OrderOutOfRange,
    StepTooLarge,
)


def _check_order(order: float) -> float:
    order = float(order)
    if not (0.0 < order < 1.0):
        raise OrderOutOfRange(f"fractional order must lie in (0, 1), got {order!r}")
    return order


@dataclass(frozen=True)
class FractionalTerm:
    """One summand ``weight * D^order`` of the multi-term operator."""

    weight: float
    order: float

    def __post_init__(self) -> None:
        weight = float(self.weight)
        if not math.isfinite(weight) or weight < 0.0:
            raise NegativeWeight(f"term weight must be finite and >= 0, got {weight!r}")
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "order", _check_order(self.order))


@dataclass(frozen=True)
class TimeGrid:
    """Uniform mesh ``t_j = j * step`` for ``-subdivisions <= j <= step_count``.

    Build it with :func:`make_grid`, which validates the inputs.
    """

    delay: float
    horizon: float
    subdivisions: int
    step: float
    effective_horizon: float
    step_count: int

    @property
    def n(self) -> int:
        return self.subdivisions

    @property
    def m(self) -> int:
        return self.step_count

    @property
    def delay_multiples(self) -> int:
        return self.step_count // self.subdivisions

    def node(self, j: int) -> float:
        # j * h, never accumulated, so every module sees identical node values
        return j * self.step

    def nodes(self) -> np.ndarray:
        """All node times from ``-n`` to ``m`` inclusive."""
        return np.arange(-self.subdivisions, self.step_count + 1) * self.step

    def interval_index(self, t: float) -> int:
        """Index ``j >= 1`` with ``t_{j-1} < t <= t_j`` for ``0 < t <= T0``."""
        j = max(1, min(self.step_count, math.ceil(t / self.step)))
        if j > 1 and t <= self.node(j - 1):
            j -= 1
        elif j < self.step_count and t > self.node(j):
            j += 1
        return j

    def refined(self, factor: int) -> "TimeGrid":
        return make_grid(self.delay, self.horizon, self.subdivisions * factor)


def _floor_ratio(horizon: float, delay: float) -> int:
    ratio = horizon / delay
    nearest = round(ratio)
    # T = 3 * nu typed by hand can land a hair below 3 after division
    if abs(ratio - nearest) <= 1e-12 * max(1.0, ratio):
        return int(nearest)
    return math.floor(ratio)


def make_grid(delay: float, horizon: float, subdivisions: int) -> TimeGrid:
    """Build the time mesh for delay ``delay``, horizon ``horizon`` and ``n`` steps per delay."""
    delay = float(delay)
    horizon = float(horizon)
    if not (math.isfinite(delay) and delay > 0.0):
        raise NonPositiveInput(f"delay must be positive, got {delay!r}")
    if not (math.isfinite(horizon) and horizon > 0.0):
        raise NonPositiveInput(f"horizon must be positive, got {horizon!r}")
    if isinstance(subdivisions, bool) or int(subdivisions) != subdivisions or subdivisions < 1:
        raise NonPositiveInput(f"subdivisions must be a positive integer, got {subdivisions!r}")
    subdivisions = int(subdivisions)
    if delay > horizon:
        raise DelayExceedsHorizon(f"delay {delay!r} exceeds horizon {horizon!r}; need delay <= horizon")

    step = delay / subdivisions
    if step >= min(1.0, delay):
        raise StepTooLarge(f"step {step!r} must be < min(1, delay) = {min(1.0, delay)!r}")

    multiples = _floor_ratio(horizon, delay)
    return TimeGrid(
        delay=delay,
        horizon=horizon,
        subdivisions=subdivisions,
        step=step,
        effective_horizon=multiples * delay,
        step_count=multiples * subdivisions,
    )


@dataclass(frozen=True)
class L1Weights:
    """L1 coefficients ``b_0 .. b_{count-1}`` for one fractional order."""

    order: float
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.values)


def l1_weights(order: float, count: int) -> L1Weights:
    order = _check_order(order)
    if count < 1:
        raise NonPositiveInput(f"count must be >= 1, got {count!r}")
    powers = np.arange(count + 1, dtype=np.float64) ** (1.0 - order)
    # consecutive powers are within a factor 2 of each other for i >= 1, so each
    # difference is exact and the partial sums telescope to j^(1-alpha)
    values = np.diff(powers)
    values.setflags(write=False)
    return L1Weights(order=order, values=values)


def multi_term_coefficient(term: FractionalTerm, step: float) -> float:
    """Return ``a h^(1-alpha) / Gamma(2-alpha)`` for one term."""
    if not step > 0.0:
        raise NonPositiveInput(f"step must be positive, got {step!r}")
    return term.weight * step ** (1.0 - term.order) / math.gamma(2.0 - term.order)


def caputo_l1(
    differences: Sequence | np.ndarray,
    order: float,
    step: float,
    weights: L1Weights | None = None,
) -> np.ndarray:
    """Discrete Caputo derivative at ``t_j`` from ``delta theta_1 .. delta theta_j``.

    ``differences`` has shape ``(j,)`` for a scalar state or ``(j, N)``. Passing
    precomputed ``weights`` (at least ``j`` long) skips recomputing the powers.
    """
    order = _check_order(order)
    if not step > 0.0:
        raise NonPositiveInput(f"step must be positive, got {step!r}")
    try:
        diffs = np.asarray(differences, dtype=np.float64)
    except ValueError as exc:
        raise DimensionMismatch("difference vectors must share one dimension") from exc
    if diffs.ndim == 0 or diffs.shape[0] == 0:
        raise EmptyHistory("caputo_l1 needs at least one difference")
    if diffs.ndim > 2:
        raise DimensionMismatch(f"expected shape (j,) or (j, N), got {diffs.shape}")

    j = diffs.shape[0]
    if weights is None:
        weights = l1_weights(order, j)
    elif weights.order != order or len(weights) < j:
        raise DimensionMismatch("weights do not cover the requested history")
    # b_{j-i} for i = 1..j is b reversed
    kernel = weights.values[j - 1 :: -1]
    scale = step ** (1.0 - order) / math.gamma(2.0 - order)
    return scale * (kernel @ diffs)


def caputo_l1_all(differences: np.ndarray, order: float, step: float) -> np.ndarray:
    """L1 values at every node ``t_1 .. t_m`` (row ``j-1`` holds node ``j``)."""
    diffs = np.asarray(differences, dtype=np.float64)
    if diffs.shape[0] == 0:
        raise EmptyHistory("caputo_l1_all needs at least one difference")
    weights = l1_weights(order, diffs.shape[0])
    out = np.empty_like(diffs)
    reversed_b = weights.values[::-1]
    m = diffs.shape[0]
    for j in range(1, m + 1):
        out[j - 1] = reversed_b[m - j :] @ diffs[:j]
    return out * (step ** (1.0 - order) / math.gamma(2.0 - order))
