import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracrothe.errors import BadTermIndex, IncompatibleGrids, OutOfDomain
from fracrothe.fracgrid import FractionalTerm, make_grid
from fracrothe.mms import caputo_by_quadrature
from fracrothe.presets import example51_spec, mms_spec
from fracrothe.rothe import (
    RotheFunctions,
    apriori_statistics,
    cauchy_diff,
    eval_U,
    eval_v,
    eval_X,
    interpolation_gap,
)
from fracrothe.spaceop import ZeroOperator
from fracrothe.stepper import Trajectory, make_problem, run

TERMS = (FractionalTerm(1.0, 0.5), FractionalTerm(0.5, 0.2))


def manual_trajectory(values, n=4, delay=1.0, terms=TERMS, history=None):
    """Scalar trajectory with prescribed states ``theta_0 .. theta_m``."""
    values = np.asarray(values, dtype=float)
    m = len(values) - 1
    grid = make_grid(delay, delay * m / n, n)
    assert grid.m == m
    history = history or (lambda t: np.array([values[0]]))
    spec = make_problem(grid, terms, ZeroOperator(1), lambda t, w: w, history)
    states = np.vstack([spec.history.samples, values[1:, None]])
    return Trajectory(spec, states, m, np.zeros(m))


@pytest.fixture
def zigzag():
    # h = 0.25, states 0, 1, 3, 2, 2
    return RotheFunctions(manual_trajectory([0.0, 1.0, 3.0, 2.0, 2.0]))


def test_U_and_X_examples(zigzag):
    assert eval_U(zigzag, 0.125)[0] == pytest.approx(0.5)
    assert eval_U(zigzag, 0.25)[0] == 1.0
    assert eval_U(zigzag, 0.625)[0] == pytest.approx(2.5)
    assert eval_X(zigzag, 0.125)[0] == 1.0
    # left-open, right-closed: the node belongs to the interval it ends
    assert eval_X(zigzag, 0.25)[0] == 1.0
    assert eval_X(zigzag, 0.2500001)[0] == 3.0
    assert eval_U(zigzag, 1.0)[0] == 2.0


def test_history_window():
    rf = RotheFunctions(manual_trajectory([1.0, 2.0, 2.0, 2.0, 2.0], history=lambda t: np.array([1.0 + t])))
    assert rf.eval_U(-0.3)[0] == pytest.approx(0.7)
    assert rf.eval_X(-1.0)[0] == 0.0
    assert rf.eval_U(0.0)[0] == 1.0
    with pytest.raises(OutOfDomain):
        rf.eval_U(-1.5)
    with pytest.raises(OutOfDomain):
        rf.eval_U(1.1)
    with pytest.raises(OutOfDomain):
        rf.eval_v(0, -0.1)


def test_v_is_step_function_of_l1_values(zigzag):
    nodes = zigzag.caputo_at_nodes(0)
    assert eval_v(zigzag, 0, 0.1)[0] == nodes[0, 0]
    assert eval_v(zigzag, 0, 0.25)[0] == nodes[0, 0]
    assert eval_v(zigzag, 0, 0.3)[0] == nodes[1, 0]
    assert eval_v(zigzag, 1, 1.0)[0] == zigzag.caputo_at_nodes(1)[3, 0]
    # first node: c * delta theta_1 with the L1 scale h^{1-a}/Gamma(2-a)
    assert nodes[0, 0] == pytest.approx(4.0 * 0.25**0.5 / math.gamma(1.5), rel=1e-14)
    with pytest.raises(BadTermIndex):
        zigzag.eval_v(2, 0.5)


@pytest.mark.parametrize("order", [0.1, 0.5, 0.9])
@pytest.mark.parametrize("t", [0.1, 0.25, 0.4, 0.75, 0.999, 1.0])
def test_exact_caputo_of_U_matches_quadrature(zigzag, order, t):
    slopes = zigzag.trajectory.differences[:, 0]

    def g_prime(s):
        # slope of the interval (t_{i-1}, t_i] holding s; s rounds onto t itself near u = 0
        return slopes[min(max(math.ceil(s / 0.25) - 1, 0), 3)]

    reference = caputo_by_quadrature(g_prime, order, t, tol=1e-11, breakpoints=[0.25, 0.5, 0.75])
    assert zigzag.exact_caputo_of_U(order, t)[0] == pytest.approx(reference, abs=1e-8)


def test_exact_caputo_equals_l1_at_nodes(zigzag):
    for q, term in enumerate(TERMS):
        for j in range(1, 5):
            exact = zigzag.exact_caputo_of_U(term.order, 0.25 * j)
            assert exact[0] == pytest.approx(zigzag.caputo_at_nodes(q)[j - 1, 0], rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("order", [0.3, 0.5, 0.8])
def test_residual_profile_on_linear_trajectory(order):
    # for theta = d t the residual at s in (t_j, t_{j+1}] is d |t_{j+1}^p - s^p| / Gamma(2 - a)
    d, n, m = 1.7, 8, 16
    h = 1.0 / n
    traj = manual_trajectory(d * h * np.arange(m + 1), n=n, terms=(FractionalTerm(1.0, order),),
                             history=lambda t: np.array([d * t]))
    profile = RotheFunctions(traj).caputo_residual_profile(0, samples=3)
    assert len(profile.times) == 3 * m
    p = 1.0 - order
    for s, r in profile:
        upper = math.ceil(s / h) * h
        assert r == pytest.approx(d * abs(upper**p - s**p) / math.gamma(2.0 - order), rel=1e-10, abs=1e-13)
    assert profile.max == pytest.approx(max(profile.residuals))


def test_residual_profile_points_are_interior():
    traj = run(mms_spec(n=8, interior_nodes=8))
    profile = RotheFunctions(traj).caputo_residual_profile(0, samples=5)
    h = traj.grid.step
    fractions = (profile.times / h) % 1.0
    assert np.all((fractions > 0.0) & (fractions < 1.0))


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-6, 1.0))
def test_interpolation_gap_identity(t):
    rf = RotheFunctions(manual_trajectory([0.0, 1.0, 3.0, 2.0, 2.0]))
    actual, predicted = interpolation_gap(rf, t)
    assert actual == pytest.approx(predicted, rel=1e-12, abs=1e-14)


class TestCauchyDiff:
    def test_self_difference_is_zero(self):
        traj = run(example51_spec(n=16, interior_nodes=8))
        assert cauchy_diff(traj, traj) == 0.0

    def test_compares_coarse_nodes(self):
        coarse = manual_trajectory([0.0, 1.0, 2.0, 3.0, 4.0], n=4)
        fine = manual_trajectory([0.0, 0.0, 1.0, 0.0, 2.0, 0.0, 3.0, 0.0, 4.5], n=8)
        assert cauchy_diff(coarse, fine) == pytest.approx(0.5)

    def test_incompatible(self):
        a = run(example51_spec(n=16, interior_nodes=8))
        with pytest.raises(IncompatibleGrids):
            cauchy_diff(a, run(example51_spec(n=24, interior_nodes=8)))
        with pytest.raises(IncompatibleGrids):
            cauchy_diff(a, run(example51_spec(n=32, interior_nodes=4)))
        with pytest.raises(IncompatibleGrids):
            cauchy_diff(a, run(mms_spec(n=32, interior_nodes=8)))

    def test_decreases_under_refinement(self):
        runs = [run(example51_spec(n=n, interior_nodes=16)) for n in (16, 32, 64, 128)]
        diffs = [cauchy_diff(a, b) for a, b in zip(runs, runs[1:])]
        assert diffs[0] > diffs[1] > diffs[2]


def test_apriori_statistics_by_hand(zigzag):
    stats = apriori_statistics(zigzag.trajectory)
    assert stats.max_state_deviation == 3.0
    assert stats.max_difference_norm == 8.0
    assert len(stats.max_caputo_norm) == 2
    assert stats.max_caputo_norm[0] == pytest.approx(np.max(np.abs(zigzag.caputo_at_nodes(0))))
