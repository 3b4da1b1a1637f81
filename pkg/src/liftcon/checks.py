"""Self-verification suite behind ``liftcon check``.

Every check is cheap (coarse grid, few samples) and independent: a failure in
one never short-circuits the rest.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .config import RunConfig
from .cost import BarrierParams, assemble_quadratic_model, barrier_beta, calibrate_relaxation, make_input_box_constraints, objective
from .curves import Curve, L2Weights, TimeGrid, acceleration_profile
from .lifting import QuasiStatic, dichotomy_fixed_point, eps_p0, lift0, solve_dirichlet_bvp
from .models import DynamicExtension, EmbeddedRoll, Pvtol, jacobian_errors
from .projection import default_gain, design_gain, linearize, project, tangent_project

JACOBIAN_TOL = 1e-6
IDEMPOTENCE_TOL = 1e-6
FD_REL_TOL = 1e-4
TUBE_TOL = 1e-3
CONTRACTION_SLACK = 0.05
CHECK_RATE = 50.0  # samples per second on the check grid


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def row(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag}  {self.name:<24} {self.value:11.3e}  (limit {self.threshold:.1e})  {self.detail}"


class _Setup:
    """Shared fixtures: check grid, curve, PVTOL model, a projected lift with its gain."""

    def __init__(self, cfg: RunConfig):
        full = cfg.make_grid()
        self.grid = TimeGrid(full.T, max(50, min(full.N, int(round(full.T * CHECK_RATE)))))
        self.params = cfg.params()
        self.c = cfg.make_curve(self.grid)
        self.model = Pvtol(self.params)
        self.qs = QuasiStatic(self.c, self.params.g, self.grid)
        xi = lift0(self.c, self.grid, self.params.g, self.qs)
        eta = project(xi, default_gain(self.model, xi), self.model, xi.states[0])
        self.lin = linearize(self.model, eta)
        self.K = design_gain(self.lin, np.eye(6), np.eye(2))
        self.x0 = eta.states[0]
        self.eta = project(eta, self.K, self.model, self.x0)
        self.lin = linearize(self.model, self.eta)

    def random_curve(self, rng, scale=1.0) -> Curve:
        return self.eta.replace(rng.normal(size=self.eta.states.shape) * scale, rng.normal(size=self.eta.inputs.shape) * scale)


def check_jacobians(setup: _Setup, rng, models=None) -> CheckResult:
    if models is None:
        base = setup.model
        models = [base, DynamicExtension(base), EmbeddedRoll(setup.c, setup.params, setup.grid)]
    worst, where = 0.0, ""
    for mdl in models:
        errs = jacobian_errors(mdl, rng, 50, (0.0, setup.grid.T))
        for key, val in errs.items():
            if not val <= worst:
                worst, where = val, f"{type(mdl).__name__}.{key}"
    return CheckResult("jacobian_fd", worst <= JACOBIAN_TOL, worst, JACOBIAN_TOL, where)


def check_barrier(setup: _Setup, rng) -> CheckResult:
    delta = 0.1
    worst = 0.0
    for k in (2, 4):
        lo = np.array(barrier_beta(np.array([delta * (1 - 1e-12)]), delta, k)).ravel()
        hi = np.array(barrier_beta(np.array([delta * (1 + 1e-12)]), delta, k)).ravel()
        worst = max(worst, float(np.max(np.abs(lo - hi) / np.maximum(1.0, np.abs(hi)))))
    val0 = float(np.asarray(barrier_beta(np.array([0.0]), 0.1, 2)[0]).ravel()[0])
    ref = 1.5 - math.log(0.1)
    worst = max(worst, abs(val0 - ref))
    return CheckResult("barrier_c2_match", worst <= 1e-9, worst, 1e-9, f"beta(0)={val0:.6f}")


def check_idempotence(setup: _Setup, rng) -> CheckResult:
    xi = setup.eta.axpy(1e-2, setup.random_curve(rng))
    p1 = project(xi, setup.K, setup.model, setup.x0)
    p2 = project(p1, setup.K, setup.model, setup.x0)
    err = (p2 - p1).sup_norm()
    return CheckResult("projection_idempotent", err <= IDEMPOTENCE_TOL, err, IDEMPOTENCE_TOL)


def _central(f: Callable, h: float):
    """Central difference of a scalar- or Curve-valued map of s at s = 0."""
    d = f(h) - f(-h)
    if isinstance(d, Curve):
        return d.replace(d.states / (2 * h), d.inputs / (2 * h))
    return d / (2 * h)


def check_dp(setup: _Setup, rng, samples: int = 3) -> CheckResult:
    worst = 0.0
    for _ in range(samples):
        z = setup.random_curve(rng)
        tp = tangent_project(z, setup.eta, setup.lin, setup.K)
        fd = _central(lambda s: project(setup.eta.axpy(s, z), setup.K, setup.model, setup.x0), 1e-5)
        worst = max(worst, (fd - tp).sup_norm() / tp.sup_norm())
    return CheckResult("projection_dp_fd", worst <= FD_REL_TOL, worst, FD_REL_TOL)


def check_gradient(setup: _Setup, rng, samples: int = 3) -> CheckResult:
    g = setup.params.g
    cs0 = make_input_box_constraints((0.5 * g, 1.5 * g), (-math.radians(80), math.radians(80)), rho=0.5)
    cs = cs0.with_factors(calibrate_relaxation(setup.eta, cs0))
    bp = BarrierParams(1.0)
    w = L2Weights.diagonal([10.0, 10.0, 1, 1, 1, 1], [1.0, 1.0])
    xi_d = setup.eta.axpy(0.1, setup.random_curve(rng))
    qm = assemble_quadratic_model(setup.eta, xi_d, w, cs, bp, "gauss_newton", setup.model, setup.lin, setup.K)
    worst = 0.0
    for _ in range(samples):
        z = tangent_project(setup.random_curve(rng), setup.eta, setup.lin, setup.K)
        fd = _central(lambda s: objective(project(setup.eta.axpy(s, z), setup.K, setup.model, setup.x0), xi_d, w, cs, bp), 1e-5)
        an = qm.gradient_dot(z)
        worst = max(worst, abs(fd - an) / max(abs(fd), 1e-12))
    return CheckResult("gradient_fd", worst <= FD_REL_TOL, worst, FD_REL_TOL)


def check_a_eps(setup: _Setup, rng, samples: int = 50) -> CheckResult:
    grid = setup.grid
    _, a = acceleration_profile(setup.c, grid.t, setup.params.g)
    worst = -math.inf
    inner = grid.interior(0.05)
    for _ in range(samples):
        eps = float(rng.uniform(0.01, 2.0))
        mu = rng.uniform(-1, 1, size=grid.N + 1)
        gam = solve_dirichlet_bvp(eps, a, mu, grid.h)
        worst = max(worst, float(np.max(np.abs(gam[inner])) - np.max(np.abs(mu))))
    return CheckResult("a_eps_norm_bound", worst <= 1e-6, max(worst, 0.0), 1e-6, "sup|gamma| - sup|mu|")


def check_tube(setup: _Setup, rng) -> CheckResult:
    ep0 = eps_p0(setup.qs, setup.c, setup.grid)
    if not math.isfinite(ep0):
        return CheckResult("roll_tube", True, 0.0, TUBE_TOL, "eps_P0 infinite: roll offset vanishes")
    worst, detail = -math.inf, ""
    for frac in (0.1, 0.3, 0.6):
        res = dichotomy_fixed_point(setup.qs, setup.c, frac * ep0, setup.grid)
        tube = res.interior_sup() - res.bound
        ratio = float(np.max(res.ratios)) if res.ratios.size else 0.0
        rate = ratio - (1 - math.cos(res.bound)) - CONTRACTION_SLACK
        if max(tube - TUBE_TOL, rate) > worst:
            worst = max(tube - TUBE_TOL, rate)
            detail = f"eps={frac}*eps_P0: tube excess {tube:.2e}, ratio {ratio:.3f}"
    return CheckResult("roll_tube", worst <= 0, max(worst, 0.0), 0.0, detail)


CHECKS = {
    "jacobian_fd": check_jacobians,
    "barrier_c2_match": check_barrier,
    "projection_idempotent": check_idempotence,
    "projection_dp_fd": check_dp,
    "gradient_fd": check_gradient,
    "a_eps_norm_bound": check_a_eps,
    "roll_tube": check_tube,
}


def run_checks(cfg: RunConfig, seed: int | None = None, jacobian_models=None) -> list:
    """Run every check; ``jacobian_models`` replaces the models under the Jacobian check."""
    seed = cfg.seed if seed is None else seed
    setup = _Setup(cfg)
    results = []
    for i, (name, fn) in enumerate(CHECKS.items()):
        rng = np.random.default_rng([seed, i])
        try:
            if name == "jacobian_fd":
                res = fn(setup, rng, jacobian_models)
            else:
                res = fn(setup, rng)
        except Exception as e:  # a crashing check is a failing check
            res = CheckResult(name, False, math.nan, math.nan, f"{type(e).__name__}: {e}")
        results.append(res)
    return results
