import math

import numpy as np
import pytest

from fracrothe.errors import Aborted, DimensionMismatch, IndexOutOfRange, NonFiniteForcing
from fracrothe.fracgrid import FractionalTerm, make_grid
from fracrothe.presets import example51_spec, mms_spec
from fracrothe.spaceop import DenseOperator, DirichletLaplacian1D, ZeroOperator
from fracrothe.stepper import (
    Trajectory,
    delayed_state,
    make_problem,
    run,
    step,
    step_residual,
    step_residuals,
)
from fracrothe.verify import implicit_euler_with_delay

HALF = (FractionalTerm(1.0, 0.5),)


def scalar_problem(n=4, delay=1.0, horizon=2.0, terms=HALF, forcing=None, history=None):
    grid = make_grid(delay, horizon, n)
    return make_problem(
        grid,
        terms,
        ZeroOperator(1),
        forcing or (lambda t, w: np.ones(1)),
        history or (lambda t: np.zeros(1)),
    )


def test_first_step_value():
    # (1 + c) theta_1 = h with c = 1/sqrt(pi); 30-digit value from mpmath
    traj = run(scalar_problem())
    assert traj.state(1)[0] == pytest.approx(0.159827173527758790141, rel=1e-14)


def test_delayed_state_indices():
    spec = scalar_problem(forcing=lambda t, w: w + 1.0, history=lambda t: np.array([t]))
    traj = run(spec)
    n = spec.grid.n
    for j in range(1, spec.grid.m + 1):
        np.testing.assert_array_equal(delayed_state(traj, j), traj.state(j - n))
    # for j <= n the delayed state is a history sample
    assert delayed_state(traj, 1)[0] == pytest.approx(-0.75)
    assert delayed_state(traj, 4)[0] == 0.0
    with pytest.raises(IndexOutOfRange):
        delayed_state(traj, 0)


def test_forcing_sees_history_samples():
    calls = []

    def forcing(t, w):
        calls.append((t, float(w[0])))
        return np.zeros(1)

    spec = scalar_problem(n=4, forcing=forcing, history=lambda t: np.array([10.0 + t]))
    run(spec)
    assert [c[0] for c in calls[:4]] == pytest.approx([0.25, 0.5, 0.75, 1.0])
    assert [c[1] for c in calls[:4]] == pytest.approx([9.25, 9.5, 9.75, 10.0])


def test_constant_solution_is_preserved():
    # A = 0, f = 0 and a constant history: every step returns the constant
    spec = scalar_problem(n=8, forcing=lambda t, w: np.zeros(1), history=lambda t: np.array([3.0]))
    traj = run(spec)
    np.testing.assert_allclose(traj.states, 3.0, rtol=1e-14)


def test_single_delay_interval():
    # T = nu gives m = n
    spec = scalar_problem(n=16, delay=1.0, horizon=1.0)
    traj = run(spec)
    assert traj.last_index == spec.grid.m == 16
    assert np.all(np.isfinite(traj.states))


def test_step_matches_run():
    spec = example51_spec(n=16, interior_nodes=8)
    traj = run(spec)
    for j in (1, 2, 9, spec.grid.m):
        np.testing.assert_allclose(step(spec, traj, j), traj.state(j), rtol=1e-14, atol=1e-14)


@pytest.mark.parametrize(
    "spec",
    [
        example51_spec(n=32, interior_nodes=16),
        mms_spec(n=32, interior_nodes=32),
        scalar_problem(n=16, terms=(FractionalTerm(0.7, 0.2), FractionalTerm(2.0, 0.9))),
    ],
    ids=["example51", "mms", "two_terms"],
)
def test_scheme_form_equivalence(spec):
    traj = run(spec)
    residuals, forcing = step_residuals(spec, traj)
    assert np.all(residuals <= 1e-8 * (1.0 + forcing))
    assert np.all(traj.solve_residuals <= 1e-8 * (1.0 + np.max(np.abs(traj.states))))


def test_perturbed_state_is_detected():
    spec = example51_spec(n=16, interior_nodes=8)
    traj = run(spec)
    states = traj.states.copy()
    j = 5
    states[spec.grid.n + j] += 1e-3
    bad = Trajectory(spec, states, traj.last_index, traj.solve_residuals)
    assert step_residual(spec, bad, j) >= 1e-4


def test_reduction_to_implicit_euler():
    grid = make_grid(0.5, 2.0, 10)
    op = DirichletLaplacian1D(12)
    x = op.grid()
    spec = make_problem(
        grid,
        (FractionalTerm(0.0, 0.4),),
        op,
        lambda t, w: np.cos(t) * w + x,
        lambda t: (1.0 + t) * np.sin(np.pi * x),
    )
    traj = run(spec)
    oracle = implicit_euler_with_delay(spec)
    assert np.max(np.abs(oracle - traj.states)) <= 1e-12 * max(1.0, np.max(np.abs(oracle)))


def test_no_terms_behaves_like_zero_weight():
    a = run(scalar_problem(n=8, terms=()))
    b = run(scalar_problem(n=8, terms=(FractionalTerm(0.0, 0.5),)))
    np.testing.assert_array_equal(a.states, b.states)


def test_method_of_steps_closed_form():
    # theta' = theta(t - 1), chi = 1: exact 1 + t on [0, 1]; backward Euler is first order
    errors = []
    for n in (32, 64, 128):
        spec = scalar_problem(n=n, terms=(), forcing=lambda t, w: w, history=lambda t: np.ones(1))
        traj = run(spec)
        t = traj.times[n:]
        exact = np.where(t <= 1.0, 1.0 + t, 1.0 + t + (t - 1.0) ** 2 / 2.0)
        errors.append(np.max(np.abs(traj.states[n:, 0] - exact)))
    assert errors[0] / errors[1] == pytest.approx(2.0, rel=0.1)
    assert errors[1] / errors[2] == pytest.approx(2.0, rel=0.1)


def test_aborted_carries_partial_trajectory():
    def forcing(t, w):
        return np.array([math.nan]) if t > 0.6 else np.ones(1)

    spec = scalar_problem(n=4, forcing=forcing)
    with pytest.raises(Aborted) as info:
        run(spec)
    partial = info.value.trajectory
    assert info.value.index == 3
    assert partial.last_index == 2
    assert np.all(np.isfinite(partial.states[: 4 + 3]))
    assert np.all(np.isnan(partial.states[4 + 3 :]))
    with pytest.raises(IndexOutOfRange):
        partial.state(3)


def test_non_finite_forcing_in_residual_check():
    spec = scalar_problem(forcing=lambda t, w: np.array([math.inf]))
    with pytest.raises(NonFiniteForcing):
        spec.evaluate_forcing(0.5, np.zeros(1))


def test_history_shape_is_checked():
    grid = make_grid(1.0, 2.0, 4)
    with pytest.raises(DimensionMismatch):
        make_problem(grid, HALF, ZeroOperator(2), lambda t, w: w, lambda t: np.zeros(3))


def test_trajectory_is_read_only():
    traj = run(scalar_problem())
    with pytest.raises(ValueError):
        traj.states[0, 0] = 1.0


def test_dense_operator_problem():
    op = DenseOperator([[2.0, -1.0], [-1.0, 2.0]])
    spec = make_problem(make_grid(1.0, 1.0, 8), HALF, op, lambda t, w: 0.0 * w, lambda t: np.array([1.0, -1.0]))
    traj = run(spec)
    # antisymmetric data is an eigenvector with eigenvalue 3 and decays monotonically
    norms = [np.linalg.norm(traj.state(j)) for j in range(0, 9)]
    assert all(b < a for a, b in zip(norms, norms[1:]))
    np.testing.assert_allclose(traj.states[:, 0], -traj.states[:, 1])
