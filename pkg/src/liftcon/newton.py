"""Projection-operator Newton method on sampled trajectories."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .cost import BarrierParams, ConstraintSet, QuadraticModel, assemble_quadratic_model, objective
from .curves import Curve, L2Weights
from .errors import (
    LineSearchFailure,
    LiftconError,
    NewtonFailure,
    ProjectionDivergence,
    RiccatiFailure,
)
from .projection import GainSchedule, Linearization, design_gain, linearize, project


@dataclass(frozen=True)
class NewtonConfig:
    descent_tol: float = 1e-6
    max_iters: int = 50
    alpha: float = 1e-4
    beta: float = 0.5
    max_backtracks: int = 40
    hessian: str = "gauss_newton"
    gain_q: float = 1.0
    gain_r: float = 1.0
    reg_init: float = 1e-6
    reg_factor: float = 10.0
    reg_tries: int = 5
    p_bound: float = 1e12

    def __post_init__(self):
        if not 0 < self.alpha < 0.5:
            raise ValueError("Armijo alpha must lie in (0, 0.5)")
        if not 0 < self.beta < 1:
            raise ValueError("Armijo beta must lie in (0, 1)")
        if self.hessian not in ("gauss_newton", "full_newton"):
            raise ValueError("hessian must be 'gauss_newton' or 'full_newton'")
        if self.max_iters < 0 or self.descent_tol <= 0:
            raise ValueError("bad iteration limits")


@dataclass(frozen=True, eq=False)
class Problem:
    """Everything that defines g(xi) = h(xi) + eps_c b(xi) over trajectories from x0."""

    model: object
    xi_d: Curve
    weights: L2Weights
    constraints: ConstraintSet | None = None
    barrier: BarrierParams | None = None
    x0: np.ndarray | None = None

    @property
    def initial_state(self):
        return self.xi_d.states[0] if self.x0 is None else np.asarray(self.x0, dtype=float)

    def objective(self, xi: Curve) -> float:
        return objective(xi, self.xi_d, self.weights, self.constraints, self.barrier)


@dataclass(eq=False)
class NewtonReport:
    trajectory: Curve
    iterations: int
    history: list = field(default_factory=list)
    ssc_ok: bool = False
    converged: bool = False

    @property
    def costs(self):
        return [h["cost"] for h in self.history]

    @property
    def zeta_norms(self):
        return [h["zeta_norm"] for h in self.history]

    @property
    def final_cost(self):
        return self.history[-1]["cost"] if self.history else math.nan


# --- LQ search direction ---------------------------------------------------------------


def lq_search_direction(qm: QuadraticModel, lin: Linearization, template: Curve | None = None, p_bound: float = 1e12):
    """Minimize the quadratic model over the tangent space of the discrete dynamics.

    Unknowns are z_0..z_N (z_0 = 0) and v_0..v_N tied by
    z_{k+1} = Ad_k z_k + Bd0_k v_k + Bd1_k v_{k+1}. The dynamic program runs on
    s_k = (z_k, v_k) with v_{k+1} as the control. Returns (zeta, ok) where ``ok``
    means every input block was positive definite and P stayed bounded; raises
    RiccatiFailure otherwise.
    """
    Ad, Bd0, Bd1 = lin.Ad, lin.Bd0, lin.Bd1
    N, n, m = Ad.shape[0], qm.n, qm.m
    ns = n + m
    wts = qm.weights

    def W(k):
        Wk = np.empty((ns, ns))
        Wk[:n, :n] = qm.Q[k]
        Wk[:n, n:] = qm.S[k]
        Wk[n:, :n] = qm.S[k].T
        Wk[n:, n:] = qm.R[k]
        return wts[k] * Wk

    P = W(N)
    P[:n, :n] += qm.P_f
    p = wts[N] * np.concatenate([qm.a[N], qm.b[N]])
    p[:n] += qm.r1
    L = np.empty((N, m, ns))
    lff = np.empty((N, m))
    F = np.zeros((ns, ns))
    G = np.zeros((ns, m))
    G[n:] = np.eye(m)
    for k in range(N - 1, -1, -1):
        F[:n, :n] = Ad[k]
        F[:n, n:] = Bd0[k]
        G[:n] = Bd1[k]
        PF = P @ F
        PG = P @ G
        Qss = W(k) + F.T @ PF
        Qsv = F.T @ PG
        Qvv = G.T @ PG
        if qm.D is not None:
            Dk = qm.D[k]
            Qss = Qss + Dk[:ns, :ns]
            Qsv = Qsv + Dk[:ns, ns:]
            Qvv = Qvv + Dk[ns:, ns:]
        qs = wts[k] * np.concatenate([qm.a[k], qm.b[k]]) + F.T @ p
        qv = G.T @ p
        try:
            cf = scipy.linalg.cho_factor(0.5 * (Qvv + Qvv.T))
        except np.linalg.LinAlgError:
            raise RiccatiFailure(k) from None
        L[k] = -scipy.linalg.cho_solve(cf, Qsv.T)
        lff[k] = -scipy.linalg.cho_solve(cf, qv)
        P = Qss + Qsv @ L[k]
        P = 0.5 * (P + P.T)
        p = qs + Qsv @ lff[k]
        if not np.all(np.isfinite(P)) or np.abs(P).max() > p_bound:
            raise RiccatiFailure(k, "Riccati matrix unbounded")
    try:
        cf = scipy.linalg.cho_factor(P[n:, n:])
    except np.linalg.LinAlgError:
        raise RiccatiFailure(0) from None
    z = np.zeros((N + 1, n))
    v = np.empty((N + 1, m))
    v[0] = -scipy.linalg.cho_solve(cf, p[n:])
    for k in range(N):
        s = np.concatenate([z[k], v[k]])
        v[k + 1] = L[k] @ s + lff[k]
        z[k + 1] = Ad[k] @ z[k] + Bd0[k] @ v[k] + Bd1[k] @ v[k + 1]
    if template is None:
        return Curve(lin.grid, z, v), True
    return template.replace(z, v), True


def regularized_search_direction(qm: QuadraticModel, lin: Linearization, template: Curve, cfg: NewtonConfig):
    """LQ solve with escalating diagonal shifts, then a Gauss-Newton fallback.

    Returns (zeta, ssc_ok): ssc_ok is True only when the unmodified model solved.
    """
    try:
        return lq_search_direction(qm, lin, template, cfg.p_bound)
    except RiccatiFailure:
        pass
    lam = cfg.reg_init
    n, m = qm.n, qm.m
    for _ in range(cfg.reg_tries):
        shifted = QuadraticModel(
            qm.weights, qm.a, qm.b, qm.Q + lam * np.eye(n), qm.S, qm.R + lam * np.eye(m), qm.r1, qm.P_f, qm.D
        )
        try:
            return lq_search_direction(shifted, lin, template, cfg.p_bound)[0], False
        except RiccatiFailure:
            lam *= cfg.reg_factor
    if qm.D is not None:
        return lq_search_direction(qm.gauss_newton(), lin, template, cfg.p_bound)[0], False
    raise RiccatiFailure(0, "LQ problem not solvable after regularization")


# --- line search -----------------------------------------------------------------------


def armijo_step(
    evaluate: Callable[[Curve], float],
    xi: Curve,
    zeta: Curve,
    directional_derivative: float,
    f0: float | None = None,
    alpha: float = 1e-4,
    beta: float = 0.5,
    max_backtracks: int = 40,
    f_tol: float = 1e-13,
):
    """Backtracking search for g(xi + gamma zeta) <= g(xi) + alpha gamma dd.

    ``evaluate`` may raise ProjectionDivergence, counted as +inf. A relative slack
    ``f_tol`` absorbs roundoff once the predicted decrease is negligible.
    Returns (gamma, value).
    """
    if not directional_derivative < 0:
        raise ValueError("directional derivative must be negative")
    if f0 is None:
        f0 = evaluate(xi)
    slack = f_tol * max(1.0, abs(f0))
    gamma = 1.0
    for _ in range(max_backtracks + 1):
        try:
            val = evaluate(xi.axpy(gamma, zeta))
        except ProjectionDivergence:
            val = math.inf
        if val <= f0 + alpha * gamma * directional_derivative + slack:
            return gamma, val
        gamma *= beta
    raise LineSearchFailure(f"no sufficient decrease after {max_backtracks} backtracks")


# --- outer loop ------------------------------------------------------------------------


def _gain(model, lin: Linearization, cfg: NewtonConfig) -> GainSchedule:
    return design_gain(lin, cfg.gain_q * np.eye(model.n), cfg.gain_r * np.eye(model.m))


def newton_solve(xi0: Curve, problem: Problem, cfg: NewtonConfig = NewtonConfig(), log=None) -> NewtonReport:
    """Minimize g over trajectories starting from ``xi0`` (projected first).

    ``log`` is an optional writable text stream receiving one JSON line per iteration.
    """
    model = problem.model
    x0 = problem.initial_state
    history: list = []
    report = NewtonReport(xi0, 0, history)
    try:
        K = _gain(model, linearize(model, xi0, discrete=False), cfg)
        eta = project(xi0, K, model, x0)
    except LiftconError as e:
        raise NewtonFailure(f"initial projection failed: {e}", xi0, report) from e
    report.trajectory = eta
    cost = problem.objective(eta)
    for it in range(cfg.max_iters + 1):
        try:
            lin = linearize(model, eta)
            K = _gain(model, lin, cfg)
            qm = assemble_quadratic_model(
                eta, problem.xi_d, problem.weights, problem.constraints, problem.barrier,
                mode=cfg.hessian, model=model, lin=lin, K=K,
            )
            zeta, ssc = regularized_search_direction(qm, lin, eta, cfg)
        except LiftconError as e:
            raise NewtonFailure(f"iteration {it}: {e}", eta, report) from e
        zn = zeta.sup_norm()
        rec = {"iter": it, "cost": cost, "zeta_norm": zn, "gamma": 0.0, "ssc_ok": bool(ssc)}
        report.ssc_ok = bool(ssc)
        if zn <= cfg.descent_tol or it == cfg.max_iters:
            report.converged = zn <= cfg.descent_tol
            history.append(rec)
            _emit(log, rec)
            break
        dd = qm.gradient_dot(zeta)
        last = {}

        def evaluate(curve, K=K):
            last["traj"] = project(curve, K, model, x0)
            return problem.objective(last["traj"])

        try:
            if not dd < 0:
                raise LineSearchFailure(f"non-descent direction (Dg.zeta={dd:.3e})")
            gamma, cost = armijo_step(
                evaluate, eta, zeta, dd, cost, cfg.alpha, cfg.beta, cfg.max_backtracks
            )
        except LiftconError as e:
            history.append(rec)
            _emit(log, rec)
            raise NewtonFailure(f"iteration {it}: {e}", eta, report) from e
        rec["gamma"] = gamma
        history.append(rec)
        _emit(log, rec)
        eta = last["traj"]
        report.trajectory = eta
        report.iterations = it + 1
    return report


def _emit(log, rec):
    if log is not None:
        log.write(json.dumps(rec) + "\n")
