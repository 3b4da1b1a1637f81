"""Lifting desired outputs to full PVTOL trajectories.

Three routes: the closed-form lift of the decoupled plant (eps = 0), the
roll fixed-point iteration built on a Dirichlet two-point BVP, and the embedded
roll optimization that handles the coupled plant.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .curves import (
    G_DEFAULT,
    Curve,
    L2Weights,
    OutputCurve,
    TimeGrid,
    acceleration_profile,
    require_annulus,
)
from .errors import ContractionError
from .models import PVTOL_INPUTS, PVTOL_STATES, EmbeddedRoll, Pvtol, PvtolParams, feedback_transform
from .newton import NewtonConfig, NewtonReport, Problem, newton_solve
from .projection import default_gain, project


def _wrapped_roll(c: OutputCurve, t, g):
    acc = c(t, 2)
    return np.arctan2(acc[:, 0], g - acc[:, 1])


class QuasiStatic:
    """Roll angle aligning the thrust axis with (ydd_d, g - zdd_d), plus two derivatives.

    The angle is unwrapped continuously on a reference grid; evaluations at other
    times pick the 2*pi branch closest to the interpolated reference.
    """

    def __init__(self, c: OutputCurve, g: float = G_DEFAULT, grid: TimeGrid | None = None):
        self.c = c
        self.g = g
        self.grid = grid if grid is not None else TimeGrid(c.T, 4000)
        require_annulus(c, self.grid, g)
        self._t_ref = self.grid.t
        self._phi_ref = np.unwrap(_wrapped_roll(c, self._t_ref, g))

    def phi(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        raw = _wrapped_roll(self.c, t, self.g)
        ref = np.interp(t, self._t_ref, self._phi_ref)
        return raw + 2 * np.pi * np.round((ref - raw) / (2 * np.pi))

    def _pq(self, t):
        d = self.c.derivatives(np.atleast_1d(np.asarray(t, dtype=float)))
        p, pd, pdd = d[2, :, 0], d[3, :, 0], d[4, :, 0]
        q, qd, qdd = self.g - d[2, :, 1], -d[3, :, 1], -d[4, :, 1]
        return p, pd, pdd, q, qd, qdd

    def phidot(self, t) -> np.ndarray:
        p, pd, _, q, qd, _ = self._pq(t)
        return (q * pd - p * qd) / (p * p + q * q)

    def phiddot(self, t) -> np.ndarray:
        p, pd, pdd, q, qd, qdd = self._pq(t)
        a2 = p * p + q * q
        num = q * pd - p * qd
        return (q * pdd - p * qdd) / a2 - 2 * num * (p * pd + q * qd) / a2**2

    def states(self, t) -> np.ndarray:
        return np.column_stack([self.phi(t), self.phidot(t)])


def quasi_static(c: OutputCurve, g: float = G_DEFAULT, grid: TimeGrid | None = None) -> QuasiStatic:
    return QuasiStatic(c, g, grid)


def lift0(c: OutputCurve, grid: TimeGrid, g: float = G_DEFAULT, qs: QuasiStatic | None = None) -> Curve:
    """Exact lift for the decoupled plant: roll follows the acceleration direction."""
    qs = qs if qs is not None else QuasiStatic(c, g, grid)
    t = grid.t
    d = c.derivatives(t)
    _, a_norm = acceleration_profile(c, t, g)
    states = np.column_stack([d[0, :, 0], d[0, :, 1], qs.phi(t), d[1, :, 0], d[1, :, 1], qs.phidot(t)])
    inputs = np.column_stack([a_norm, qs.phiddot(t)])
    return Curve(grid, states, inputs, PVTOL_STATES, PVTOL_INPUTS)


def decoupled_defect(xi: Curve, c: OutputCurve, g: float = G_DEFAULT) -> float:
    """Node-wise residual of the eps = 0 dynamics along ``xi`` against the output curve."""
    t = xi.t
    d = c.derivatives(t)
    phi, u1 = xi.states[:, 2], xi.inputs[:, 0]
    res = np.concatenate(
        [
            xi.states[:, :2] - d[0],
            xi.states[:, 3:5] - d[1],
            d[2, :, 0] - u1 * np.sin(phi),
            d[2, :, 1] - (g - u1 * np.cos(phi)),
        ],
        axis=None,
    )
    return float(np.max(np.abs(res)))


def eps_p0(qs: QuasiStatic, c: OutputCurve | None = None, grid: TimeGrid | None = None) -> float:
    """1 / sup |phidd_qs| / |a_d| over the grid (+inf when the roll never accelerates)."""
    c = c if c is not None else qs.c
    grid = grid if grid is not None else qs.grid
    t = grid.t
    _, a = acceleration_profile(c, t, qs.g)
    ratio = float(np.max(np.abs(qs.phiddot(t)) / a))
    return math.inf if ratio == 0 else 1.0 / ratio


def theta_bound(eps: float, eps_p0_value: float) -> float:
    if not 0 <= eps < eps_p0_value:
        raise ContractionError(f"eps={eps} outside [0, eps_P0={eps_p0_value})")
    return math.asin(eps / eps_p0_value) if math.isfinite(eps_p0_value) else 0.0


def solve_dirichlet_bvp(eps: float, a, mu, h: float) -> np.ndarray:
    """Central-difference solve of eps*g'' = a*g - a*mu with g = 0 at both ends.

    The matrix is a strictly diagonally dominant M-matrix for a > 0, so the
    discrete solution obeys max|g| <= max|mu|.
    """
    a = np.asarray(a, dtype=float)
    mu = np.asarray(mu, dtype=float)
    n_int = a.size - 2
    gamma = np.zeros_like(mu)
    if n_int <= 0:
        return gamma
    off = eps / h**2
    ab = np.zeros((3, n_int))
    ab[0, 1:] = -off
    ab[1] = 2 * off + a[1:-1]
    ab[2, :-1] = -off
    gamma[1:-1] = scipy.linalg.solve_banded((1, 1), ab, a[1:-1] * mu[1:-1])
    return gamma


@dataclass(eq=False)
class DichotomyResult:
    theta: np.ndarray
    grid: TimeGrid
    eps: float
    eps_p0: float
    bound: float
    changes: list = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.changes)

    @property
    def ratios(self) -> np.ndarray:
        d = np.asarray(self.changes)
        return d[2:] / d[1:-1] if d.size > 2 else np.zeros(0)

    def interior_sup(self, margin: float = 0.05) -> float:
        return float(np.max(np.abs(self.theta[self.grid.interior(margin)])))


def dichotomy_fixed_point(
    qs: QuasiStatic,
    c: OutputCurve,
    eps: float,
    grid: TimeGrid,
    tol: float = 1e-10,
    max_iter: int = 500,
) -> DichotomyResult:
    """Roll offset theta = phi - phi_qs by fixed-point iteration on the BVP operator.

    theta <- A_eps[theta - sin(theta) + eps * phidd_qs / |a_d|]
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    ep0 = eps_p0(qs, c, grid)
    bound = theta_bound(eps, ep0)
    t = grid.t
    _, a = acceleration_profile(c, t, qs.g)
    forcing = eps * qs.phiddot(t) / a
    theta = np.zeros_like(t)
    res = DichotomyResult(theta, grid, eps, ep0, bound)
    for _ in range(max_iter):
        new = solve_dirichlet_bvp(eps, a, theta - np.sin(theta) + forcing, grid.h)
        change = float(np.max(np.abs(new - theta)))
        theta = new
        res.changes.append(change)
        if not np.isfinite(change):
            break
        if change < tol:
            res.theta = theta
            return res
    res.theta = theta
    err = ContractionError(f"fixed-point iteration did not converge in {max_iter} steps")
    err.history = res.changes
    raise err


# --- coupled lift through the embedded roll plant -------------------------------------


@dataclass(frozen=True)
class RollWeights:
    """Weights of the embedded roll problem: state error, terminal, embedding input."""

    q_phi: tuple = (1.0, 1.0)
    p_phi: tuple = (1.0, 1.0)
    r: float = 1e6

    def l2(self) -> L2Weights:
        return L2Weights(np.diag(self.q_phi), np.array([[self.r]]), np.diag(self.p_phi))


@dataclass(eq=False)
class LiftReport:
    trajectory: Curve
    eps: float
    eps_p0: float
    theta_sup: float
    residual: float
    position_error: float = math.nan
    velocity_error: float = math.nan
    roll: Curve | None = None
    newton: NewtonReport | None = None
    csv_path: str | None = None

    def to_dict(self) -> dict:
        ep0 = self.eps_p0 if math.isfinite(self.eps_p0) else None
        return {
            "eps": self.eps,
            "eps_p0": ep0,
            "theta_sup": self.theta_sup,
            "residual": self.residual,
            "position_error": self.position_error,
            "velocity_error": self.velocity_error,
            "newton_iterations": None if self.newton is None else self.newton.iterations,
            "csv_path": self.csv_path,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def output_errors(xi: Curve, c: OutputCurve) -> tuple:
    """Max position error (m) and max velocity error (m/s) against the output curve."""
    d = c.derivatives(xi.t)
    pos = np.max(np.hypot(*(xi.states[:, :2] - d[0]).T))
    vel = np.max(np.hypot(*(xi.states[:, 3:5] - d[1]).T))
    return float(pos), float(vel)


def quasi_static_roll_curve(qs: QuasiStatic, grid: TimeGrid) -> Curve:
    t = grid.t
    return Curve(grid, qs.states(t), qs.phiddot(t)[:, None], EmbeddedRoll.state_names, EmbeddedRoll.input_names)


def assemble_pvtol_curve(roll: Curve, c: OutputCurve, params: PvtolParams) -> Curve:
    """Outputs and velocities from c, roll from ``roll``, inputs by the feedback transform."""
    t = roll.t
    d = c.derivatives(t)
    phi = roll.states[:, 0]
    u1, eps_u2 = feedback_transform(params, phi, d[2])
    states = np.column_stack([d[0, :, 0], d[0, :, 1], phi, d[1, :, 0], d[1, :, 1], roll.states[:, 1]])
    return Curve(roll.grid, states, np.column_stack([u1, eps_u2 / params.eps]), PVTOL_STATES, PVTOL_INPUTS)


def lift_eps(
    xi_init: Curve | None,
    c: OutputCurve,
    params: PvtolParams,
    grid: TimeGrid,
    weights: RollWeights = RollWeights(),
    newton_cfg: NewtonConfig = NewtonConfig(),
    qs: QuasiStatic | None = None,
    log=None,
) -> LiftReport:
    """Coupled lift: fit the embedded roll plant to the quasi-static roll, then project.

    ``xi_init`` is a roll curve (states phi, phidot and input u_emb) used as the
    Newton starting point; None starts from the quasi-static roll.
    """
    qs = qs if qs is not None else QuasiStatic(c, params.g, grid)
    model = EmbeddedRoll(c, params, grid)
    target = quasi_static_roll_curve(qs, grid)
    xi_d = target.replace(inputs=np.zeros_like(target.inputs))
    start = target if xi_init is None else xi_init
    problem = Problem(model, xi_d, weights.l2(), x0=target.states[0])
    rep = newton_solve(start, problem, newton_cfg, log=log)
    roll = rep.trajectory
    assembled = assemble_pvtol_curve(roll, c, params)
    plant = Pvtol(params)
    traj = project(assembled, default_gain(plant, assembled), plant, assembled.states[0])
    pos, vel = output_errors(traj, c)
    return LiftReport(
        trajectory=traj,
        eps=params.eps,
        eps_p0=eps_p0(qs, c, grid),
        theta_sup=float(np.max(np.abs(roll.states[:, 0] - target.states[:, 0]))),
        residual=float(np.max(np.abs(roll.inputs))),
        position_error=pos,
        velocity_error=vel,
        roll=roll,
        newton=rep,
    )
