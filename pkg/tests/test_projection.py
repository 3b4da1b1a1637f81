import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from liftcon.curves import Curve, TimeGrid
from liftcon.errors import GainDesignError, ProjectionDivergence
from liftcon.models import Pvtol, PvtolParams
from liftcon.projection import (
    GainSchedule,
    Linearization,
    defect,
    design_gain,
    is_trajectory,
    project,
    rk4_step,
    simulate,
    step_hessians,
    tangent_project,
)


def test_projection_is_idempotent(toy, rng):
    xi = toy.eta.axpy(0.05, toy.random(rng))
    p1 = project(xi, toy.K, toy.model, toy.x0)
    p2 = project(p1, toy.K, toy.model, toy.x0)
    assert (p2 - p1).sup_norm() <= 1e-12
    assert is_trajectory(p1, toy.K, toy.model)


def test_projection_output_satisfies_dynamics(toy, rng):
    xi = toy.eta.axpy(0.05, toy.random(rng))
    eta = project(xi, toy.K, toy.model, toy.x0)
    assert defect(eta, toy.model) <= 1e-12
    x = simulate(toy.model, toy.grid, toy.x0, eta.inputs)
    np.testing.assert_allclose(x, eta.states, atol=1e-12)


def test_zero_gain_projection_is_open_loop(toy):
    K0 = GainSchedule.zeros(toy.grid, 6, 2)
    eta = project(toy.sketch, K0, toy.model, toy.x0)
    np.testing.assert_array_equal(eta.inputs, toy.sketch.inputs)


def test_divergence_is_reported(toy):
    K0 = GainSchedule.zeros(toy.grid, 6, 2)
    wild = toy.sketch.replace(inputs=toy.sketch.inputs * 1e3)
    with pytest.raises(ProjectionDivergence):
        project(wild, K0, toy.model, toy.x0, escape_radius=1e3)


def test_step_jacobians_match_differences(toy):
    k = 41
    w0 = np.concatenate([toy.eta.states[k], toy.eta.inputs[k], toy.eta.inputs[k + 1]])
    J = np.concatenate([toy.lin.Ad[k], toy.lin.Bd0[k], toy.lin.Bd1[k]], axis=1)

    def step(w):
        return rk4_step(toy.model, toy.grid.t[k], toy.grid.h, w[:6], w[6:8], w[8:])

    I = np.eye(10)
    Jfd = np.column_stack([(step(w0 + 1e-6 * I[i]) - step(w0 - 1e-6 * I[i])) / 2e-6 for i in range(10)])
    assert np.abs(J - Jfd).max() < 1e-8


def test_step_hessians_match_differences(toy, rng):
    lam = rng.normal(size=(toy.grid.N, 6))
    H = step_hessians(toy.model, toy.lin, lam)
    k = 17
    w0 = np.concatenate([toy.eta.states[k], toy.eta.inputs[k], toy.eta.inputs[k + 1]])
    I = np.eye(10)

    def grad(w):
        def phi(v):
            return rk4_step(toy.model, toy.grid.t[k], toy.grid.h, v[:6], v[6:8], v[8:]) @ lam[k]

        return np.array([(phi(w + 1e-5 * I[i]) - phi(w - 1e-5 * I[i])) / 2e-5 for i in range(10)])

    Hfd = np.array([(grad(w0 + 1e-4 * I[i]) - grad(w0 - 1e-4 * I[i])) / 2e-4 for i in range(10)])
    assert np.abs(Hfd - H[k]).max() < 1e-5 * max(1.0, np.abs(H[k]).max())
    np.testing.assert_allclose(H[k], H[k].T, atol=1e-12)


def test_tangent_projection_matches_differences(toy, rng):
    for _ in range(3):
        z = toy.random(rng)
        tp = tangent_project(z, toy.eta, toy.lin, toy.K)
        h = 1e-5
        d = project(toy.eta.axpy(h, z), toy.K, toy.model, toy.x0) - project(toy.eta.axpy(-h, z), toy.K, toy.model, toy.x0)
        fd = d.replace(d.states / (2 * h), d.inputs / (2 * h))
        assert (fd - tp).sup_norm() / tp.sup_norm() < 1e-6
        # DP is itself a projection onto the tangent space
        assert (tangent_project(tp, toy.eta, toy.lin, toy.K) - tp).sup_norm() < 1e-10 * tp.sup_norm()
        assert np.abs(tp.states[0]).max() == 0.0


def test_scalar_riccati_constant_solution():
    grid = TimeGrid(5.0, 500)
    lin = Linearization(grid, np.zeros((501, 1, 1)), np.ones((501, 1, 1)))
    # P' = -(2AP - P B R^-1 B P + Q) with A=0, B=Q=R=1 keeps P = 1
    K = design_gain(lin, np.eye(1), np.eye(1), np.eye(1))
    np.testing.assert_allclose(K.K, 1.0, atol=1e-12)


def test_riccati_reaches_algebraic_solution():
    A = np.array([[0.0, 1.0], [2.0, 0.0]])
    B = np.array([[0.0], [1.0]])
    grid = TimeGrid(20.0, 2000)
    lin = Linearization(grid, np.broadcast_to(A, (2001, 2, 2)).copy(), np.broadcast_to(B, (2001, 2, 1)).copy())
    P = scipy.linalg.solve_continuous_are(A, B, np.eye(2), np.eye(1))
    K = design_gain(lin, np.eye(2), np.eye(1), np.zeros((2, 2)))
    np.testing.assert_allclose(K.K[0], B.T @ P, atol=1e-8)


def test_riccati_blowup_raises():
    grid = TimeGrid(5.0, 50)
    A = np.broadcast_to(np.array([[5.0]]), (51, 1, 1)).copy()
    lin = Linearization(grid, A, np.zeros((51, 1, 1)))
    with pytest.raises(GainDesignError):
        design_gain(lin, np.eye(1), np.eye(1), np.eye(1), blowup=1e6)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 1.5), st.integers(0, 2**31))
def test_projection_fixed_point_property(eps, seed):
    """Any trajectory of the plant is left unchanged by P, whatever the gain."""
    grid = TimeGrid(1.0, 50)
    rng = np.random.default_rng(seed)
    model = Pvtol(PvtolParams(eps=eps))
    u = np.column_stack([9.81 + rng.normal(size=51), rng.normal(size=51)])
    x = simulate(model, grid, np.zeros(6), u)
    traj = Curve(grid, x, u)
    K = GainSchedule(grid, rng.normal(size=(51, 2, 6)))
    assert (project(traj, K, model, np.zeros(6)) - traj).sup_norm() < 1e-12
