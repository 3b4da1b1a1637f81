"""Trajectory-tracking projection operator and its linearization.

Discretization. A sampled curve is a trajectory when consecutive nodes are linked
by one RK4 step with the input interpolated linearly between nodes:

    x_{k+1} = Phi_k(x_k, u_k, u_{k+1})

The projection runs the tracking loop u = mu + K (alpha - x) on that scheme, with
the tracking error sampled at the start of every step:

    u_0     = mu_0     + K_0     (alpha_0 - x_0)
    u_{k+1} = mu_{k+1} + K_{k+1} (alpha_k - x_k)

so each step stays explicit. Trajectories are then exact fixed points and the
operator is idempotent to roundoff. The tangent map below is the exact derivative
of this discrete operator.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .curves import Curve, TimeGrid, check_same_grid
from .errors import GainDesignError, GridMismatch, ProjectionDivergence
from .models import PlantModel

_C = (0.0, 0.5, 0.5, 1.0)
_BW = (1 / 6, 1 / 3, 1 / 3, 1 / 6)


@dataclass(frozen=True, eq=False)
class GainSchedule:
    grid: TimeGrid
    K: np.ndarray  # (N+1, m, n)
    P: np.ndarray | None = None  # Riccati solution at the nodes

    def __post_init__(self):
        if self.K.shape[0] != self.grid.N + 1:
            raise GridMismatch("gain schedule length does not match grid")
        if not np.all(np.isfinite(self.K)):
            raise GainDesignError("non-finite gain")

    @classmethod
    def zeros(cls, grid: TimeGrid, n: int, m: int):
        return cls(grid, np.zeros((grid.N + 1, m, n)))


@dataclass(frozen=True, eq=False)
class Linearization:
    """Jacobians along a curve.

    ``A``/``B`` are f_x, f_u at the nodes. ``Ad``, ``Bd0``, ``Bd1`` are the
    derivatives of the step map Phi_k with respect to x_k, u_k and u_{k+1}
    (present when built with ``discrete=True``).
    """

    grid: TimeGrid
    A: np.ndarray
    B: np.ndarray
    Ad: np.ndarray | None = None
    Bd0: np.ndarray | None = None
    Bd1: np.ndarray | None = None
    _stages: dict | None = field(default=None, repr=False)

    @property
    def n(self):
        return self.A.shape[1]

    @property
    def m(self):
        return self.B.shape[2]


# --- simulation --------------------------------------------------------------------


def rk4_step(model: PlantModel, t: float, h: float, x, u0, u1) -> np.ndarray:
    """One RK4 step of x' = f(t, x, u) with u linear between u0 and u1."""
    um = 0.5 * (u0 + u1)
    x = x[None, :]
    tt = np.array([t])
    th = np.array([t + 0.5 * h])
    k1 = model.f(tt, x, u0[None, :])
    k2 = model.f(th, x + 0.5 * h * k1, um[None, :])
    k3 = model.f(th, x + 0.5 * h * k2, um[None, :])
    k4 = model.f(np.array([t + h]), x + h * k3, u1[None, :])
    return (x + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4))[0]


def simulate(model: PlantModel, grid: TimeGrid, x0, inputs) -> np.ndarray:
    """Open-loop discrete simulation; returns the node states."""
    u = np.asarray(inputs, dtype=float)
    x = np.empty((grid.N + 1, model.n))
    x[0] = x0
    t, h = grid.t, grid.h
    for k in range(grid.N):
        x[k + 1] = rk4_step(model, t[k], h, x[k], u[k], u[k + 1])
    return x


def project(
    xi: Curve,
    K: GainSchedule,
    model: PlantModel,
    x0=None,
    escape_radius: float = 1e6,
) -> Curve:
    """Map a state-input curve to a trajectory through the tracking feedback loop."""
    if K.grid != xi.grid:
        raise GridMismatch("gain and curve grids differ")
    grid = xi.grid
    alpha, mu, Kk = xi.states, xi.inputs, K.K
    t, h = grid.t, grid.h
    x = np.empty_like(alpha)
    u = np.empty_like(mu)
    x[0] = alpha[0] if x0 is None else x0
    u[0] = mu[0] + Kk[0] @ (alpha[0] - x[0])
    for k in range(grid.N):
        u[k + 1] = mu[k + 1] + Kk[k + 1] @ (alpha[k] - x[k])
        x[k + 1] = rk4_step(model, t[k], h, x[k], u[k], u[k + 1])
        nrm = np.linalg.norm(x[k + 1])
        if not nrm < escape_radius:
            raise ProjectionDivergence(t[k + 1], nrm)
    return xi.replace(x, u)


def is_trajectory(xi: Curve, K: GainSchedule, model: PlantModel, tol: float = 1e-6) -> bool:
    try:
        eta = project(xi, K, model)
    except ProjectionDivergence:
        return False
    return (eta - xi).sup_norm() <= tol


def defect(xi: Curve, model: PlantModel) -> float:
    """Largest node-to-node mismatch of the discrete dynamics."""
    x, u = xi.states, xi.inputs
    t, h = xi.grid.t, xi.grid.h
    return float(
        max(np.max(np.abs(x[k + 1] - rk4_step(model, t[k], h, x[k], u[k], u[k + 1]))) for k in range(xi.grid.N))
    )


# --- linearization -----------------------------------------------------------------


def linearize(model: PlantModel, eta: Curve, discrete: bool = True) -> Linearization:
    grid = eta.grid
    t = grid.t
    x, u = eta.states, eta.inputs
    A = model.f_x(t, x, u)
    B = model.f_u(t, x, u)
    if not discrete:
        return Linearization(grid, A, B)
    n, m, N, h = model.n, model.m, grid.N, grid.h
    nw = n + 2 * m
    t0 = t[:-1]
    X1, U0, U1 = x[:-1], u[:-1], u[1:]
    Um = 0.5 * (U0 + U1)
    ts = (t0, t0 + 0.5 * h, t0 + 0.5 * h, t0 + h)
    Us = (U0, Um, Um, U1)
    E = np.zeros((4, m, nw))
    E[0][:, n : n + m] = np.eye(m)
    E[1][:, n : n + m] = E[1][:, n + m :] = 0.5 * np.eye(m)
    E[2] = E[1]
    E[3][:, n + m :] = np.eye(m)
    Jx = np.zeros((n, nw))
    Jx[:, :n] = np.eye(n)
    Xs, As, Bs, Js = [], [], [], []
    Xi = X1
    J = np.broadcast_to(Jx, (N, n, nw))
    Phi_w = np.broadcast_to(Jx, (N, n, nw)).copy()
    for i in range(4):
        Xs.append(Xi)
        Js.append(J)
        Ai = model.f_x(ts[i], Xi, Us[i])
        Bi = model.f_u(ts[i], Xi, Us[i])
        As.append(Ai)
        Bs.append(Bi)
        Gi = Ai @ J + Bi @ E[i]
        Phi_w += (h * _BW[i]) * Gi
        if i < 3:
            ki = model.f(ts[i], Xi, Us[i])
            Xi = X1 + (_C[i + 1] * h) * ki
            J = Jx + (_C[i + 1] * h) * Gi
    stages = dict(t=ts, X=Xs, U=Us, A=As, B=Bs, J=Js, E=E)
    return Linearization(
        grid, A, B, Phi_w[:, :, :n].copy(), Phi_w[:, :, n : n + m].copy(), Phi_w[:, :, n + m :].copy(), stages
    )


def step_hessians(model: PlantModel, lin: Linearization, lam: np.ndarray) -> np.ndarray:
    """Hessians of lam_{k+1} . Phi_k in (x_k, u_k, u_{k+1}); ``lam`` has shape (N, n).

    Second-order adjoint through the RK4 stages: each stage contributes
    [J_i; E_i]^T Hess(omega_i . f)[J_i; E_i] with omega_i the stage adjoint.
    """
    st = lin._stages
    if st is None:
        raise ValueError("step Hessians need a discrete linearization")
    h = lin.grid.h
    omegas = [None] * 4
    psi = None
    for i in (3, 2, 1, 0):
        om = (h * _BW[i]) * lam
        if i < 3:
            om = om + (_C[i + 1] * h) * psi
        omegas[i] = om
        psi = np.einsum("kji,kj->ki", st["A"][i], om)
    n, m = lin.n, lin.m
    H = 0.0
    for i in range(4):
        Hf = model.hess(st["t"][i], st["X"][i], st["U"][i], omegas[i])
        JE = np.concatenate([st["J"][i], np.broadcast_to(st["E"][i], (lin.grid.N, m, n + 2 * m))], axis=1)
        H = H + np.einsum("kai,kab,kbj->kij", JE, Hf, JE)
    return H


def tangent_project(zeta: Curve, eta: Curve, lin: Linearization, K: GainSchedule) -> Curve:
    """Derivative of ``project`` at eta applied to the perturbation zeta = (beta, nu)."""
    check_same_grid(zeta, eta)
    if lin.Ad is None:
        raise ValueError("tangent projection needs a discrete linearization")
    beta, nu, Kk = zeta.states, zeta.inputs, K.K
    z = np.zeros_like(beta)
    v = np.empty_like(nu)
    v[0] = nu[0] + Kk[0] @ beta[0]
    for k in range(zeta.grid.N):
        v[k + 1] = nu[k + 1] + Kk[k + 1] @ (beta[k] - z[k])
        z[k + 1] = lin.Ad[k] @ z[k] + lin.Bd0[k] @ v[k] + lin.Bd1[k] @ v[k + 1]
    return zeta.replace(z, v)


# --- gain design -------------------------------------------------------------------


def terminal_are(A, B, Q, R) -> np.ndarray:
    """Stabilizing ARE solution at (A, B), or Q when the pair is not stabilizable."""
    try:
        P = scipy.linalg.solve_continuous_are(A, B, Q, R)
    except (np.linalg.LinAlgError, ValueError):
        return np.array(Q, dtype=float)
    if not np.all(np.isfinite(P)):
        return np.array(Q, dtype=float)
    return 0.5 * (P + P.T)


def design_gain(lin: Linearization, Q_K, R_K, P_K=None, blowup: float = 1e12) -> GainSchedule:
    """Finite-horizon LQR gain from the Riccati differential equation.

    -Pdot = A'P + PA - P B R^-1 B' P + Q, P(T) = P_K, integrated backward with RK4
    (A and B linear between nodes). K = R^-1 B' P. ``P_K=None`` selects the
    terminal ARE solution.
    """
    A, B = lin.A, lin.B
    N, h = lin.grid.N, lin.grid.h
    Q = np.atleast_2d(np.asarray(Q_K, dtype=float))
    R = np.atleast_2d(np.asarray(R_K, dtype=float))
    Rinv = np.linalg.inv(R)
    P_T = terminal_are(A[-1], B[-1], Q, R) if P_K is None else np.atleast_2d(np.asarray(P_K, dtype=float))
    BRB = B @ Rinv @ B.transpose(0, 2, 1)
    Am = 0.5 * (A[:-1] + A[1:])
    Bm = 0.5 * (B[:-1] + B[1:])
    BRBm = Bm @ Rinv @ Bm.transpose(0, 2, 1)

    def rhs(P, Ak, Sk):
        AP = Ak.T @ P
        return AP + AP.T - P @ Sk @ P + Q

    Ps = np.empty((N + 1,) + P_T.shape)
    P = P_T
    Ps[N] = P
    for k in range(N - 1, -1, -1):
        k1 = rhs(P, A[k + 1], BRB[k + 1])
        k2 = rhs(P + 0.5 * h * k1, Am[k], BRBm[k])
        k3 = rhs(P + 0.5 * h * k2, Am[k], BRBm[k])
        k4 = rhs(P + h * k3, A[k], BRB[k])
        P = P + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        P = 0.5 * (P + P.T)
        if not np.all(np.isfinite(P)) or np.abs(P).max() > blowup:
            raise GainDesignError(f"Riccati blow-up at t={k * h:.6g}")
        Ps[k] = P
    K = Rinv @ B.transpose(0, 2, 1) @ Ps
    return GainSchedule(lin.grid, K, Ps)


def default_gain(model: PlantModel, curve: Curve, Q_K=None, R_K=None, P_K=None) -> GainSchedule:
    """Gain with the default weights (identity Q_K and R_K, terminal ARE) about ``curve``."""
    lin = linearize(model, curve, discrete=False)
    Q_K = np.eye(model.n) if Q_K is None else Q_K
    R_K = np.eye(model.m) if R_K is None else R_K
    return design_gain(lin, Q_K, R_K, P_K)
