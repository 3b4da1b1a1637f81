"""Lift-and-constrain continuation.

1. Lift: closed-form decoupled lift, then an eps homotopy of the embedded roll
   problem up to the nominal coupling.
2. Constrain: relax the input box so the lift is feasible, then shrink it
   (rho: 0 -> 1) while re-solving the barrier problem at fixed eps_c.
3. Tighten: lower eps_c at rho = 1.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cost import BarrierParams, ConstraintSet, box_constraints, calibrate_relaxation
from .curves import Curve, L2Weights, OutputCurve, TimeGrid, require_annulus, weighted_l2_distance, write_curve_csv
from .errors import LiftconError, StageFailure
from .lifting import LiftReport, QuasiStatic, RollWeights, eps_p0, lift0, lift_eps, output_errors
from .models import DynamicExtension, Pvtol, PvtolParams
from .newton import NewtonConfig, NewtonReport, Problem, newton_solve
from .projection import default_gain, project


@dataclass(frozen=True)
class ContinuationSchedule:
    eps_steps: int = 5
    rho_step: float = 0.2
    eps_c_start: float = 10.0
    eps_c_end: float = 0.1
    eps_c_count: int = 5

    def __post_init__(self):
        if self.eps_steps < 1 or self.eps_c_count < 1:
            raise ValueError("schedules need at least one step")
        if not 0 < self.rho_step <= 1:
            raise ValueError("rho_step must lie in (0, 1]")
        if not self.eps_c_start >= self.eps_c_end > 0:
            raise ValueError("eps_c must decrease toward a positive end value")

    def eps_values(self, nominal: float) -> list:
        return [nominal * (i + 1) / self.eps_steps for i in range(self.eps_steps)]

    def rho_values(self) -> list:
        n = int(round(1 / self.rho_step))
        vals = [min(1.0, round(i * self.rho_step, 12)) for i in range(n + 1)]
        if vals[-1] < 1.0:
            vals.append(1.0)
        return vals

    def eps_c_values(self) -> list:
        if self.eps_c_count == 1:
            return [self.eps_c_end]
        return list(np.geomspace(self.eps_c_start, self.eps_c_end, self.eps_c_count))


@dataclass(frozen=True)
class Bounds:
    """Input box in SI units (u2 in rad/s^2)."""

    u1: tuple = (0.5 * 9.81, 1.5 * 9.81)
    u2: tuple = (-math.radians(80.0), math.radians(80.0))

    @classmethod
    def unbounded(cls):
        return cls((-1e9, 1e9), (-1e9, 1e9))


@dataclass(frozen=True)
class StrategyConfig:
    newton: NewtonConfig = NewtonConfig(hessian="full_newton")
    lift_newton: NewtonConfig = NewtonConfig()
    roll: RollWeights = RollWeights()
    output_weight: float = 1e4
    state_weight: float = 1.0
    input_weight: float = 1.0
    rate_weight: float = 1e-6
    delta_c: float = 0.1
    delta_c_factor: float = 0.1
    delta_c_min: float = 1e-8
    k: int = 2
    calibration_margin: float = 1.1


@dataclass(eq=False)
class StageRecord:
    name: str
    param: str
    value: float
    trajectory: Curve
    newton: NewtonReport
    cost: float
    tracking_cost: float
    min_margin: float
    position_error: float
    velocity_error: float
    delta_c: float = math.nan
    solves: list = field(default_factory=list)

    @property
    def max_iterations(self) -> int:
        return max((r.iterations for r in self.solves), default=0)

    @property
    def all_converged(self) -> bool:
        return all(r.converged for r in self.solves)

    @property
    def filename(self) -> str:
        return f"stage_{self.name}_{self.param}={self.value:.6g}.csv"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "param": self.param,
            "value": self.value,
            "iterations": self.newton.iterations if self.newton else 0,
            "converged": self.newton.converged if self.newton else True,
            "solve_iterations": [r.iterations for r in self.solves],
            "delta_c": self.delta_c,
            "ssc_ok": self.newton.ssc_ok if self.newton else None,
            "final_zeta_norm": self.newton.zeta_norms[-1] if self.newton and self.newton.history else None,
            "cost": self.cost,
            "tracking_cost": self.tracking_cost,
            "min_margin": self.min_margin,
            "position_error": self.position_error,
            "velocity_error": self.velocity_error,
            "csv": self.filename,
        }


@dataclass(eq=False)
class StrategyReport:
    lift: LiftReport
    lift_reports: list
    stages: list
    final: Curve
    constraints: ConstraintSet
    position_error: float
    velocity_error: float
    min_margin: float

    def stages_named(self, name: str) -> list:
        return [s for s in self.stages if s.name == name]

    def to_dict(self) -> dict:
        margins = self.constraints.margins(self.final)
        return {
            "lift": self.lift.to_dict(),
            "lift_steps": [r.to_dict() for r in self.lift_reports],
            "stages": [s.to_dict() for s in self.stages],
            "position_error": self.position_error,
            "velocity_error": self.velocity_error,
            "min_margin": self.min_margin,
            "margins_by_constraint": {
                (c.name or f"c{j}"): float(margins[:, j].min()) for j, c in enumerate(self.constraints.constraints)
            },
            "relaxation_factors": [c.k for c in self.constraints.constraints],
        }

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for s in self.stages:
            write_curve_csv(s.trajectory, out / s.filename)
        write_curve_csv(self.final, out / "final.csv")
        (out / "strategy_report.json").write_text(json.dumps(self.to_dict(), indent=2))
        return out


def stage_weights(n_base: int, m: int, cfg: StrategyConfig, n_extra: int = 0) -> L2Weights:
    """Outputs (y, z) weighted ``output_weight``; extra states are lifted inputs."""
    q = [cfg.output_weight] * 2 + [cfg.state_weight] * (n_base - 2) + [cfg.input_weight] * n_extra
    r = [cfg.rate_weight if n_extra else cfg.input_weight] * m
    return L2Weights.diagonal(q, r)


def run_lift(c: OutputCurve, params: PvtolParams, grid: TimeGrid, schedule: ContinuationSchedule, cfg: StrategyConfig, log=None):
    """Stage 1: returns (final lift report, all lift reports)."""
    require_annulus(c, grid, params.g)
    qs = QuasiStatic(c, params.g, grid)
    ep0 = eps_p0(qs, c, grid)
    if params.eps >= ep0:
        warnings.warn(
            f"nominal eps={params.eps} is not below eps_P0={ep0:.4g}; the roll contraction bound does not apply",
            stacklevel=2,
        )
    if params.eps == 0:
        xi = lift0(c, grid, params.g, qs)
        traj = project(xi, default_gain(Pvtol(params), xi), Pvtol(params), xi.states[0])
        pos, vel = output_errors(traj, c)
        rep = LiftReport(traj, 0.0, ep0, 0.0, 0.0, pos, vel)
        return rep, [rep]
    reports = []
    roll = None
    for eps in schedule.eps_values(params.eps):
        p = PvtolParams(eps, params.g)
        try:
            rep = lift_eps(roll, c, p, grid, cfg.roll, cfg.lift_newton, qs, log=log)
        except LiftconError as e:
            last = reports[-1].trajectory if reports else None
            raise StageFailure("lift", "eps", eps, last, e) from e
        roll = rep.roll
        reports.append(rep)
    return reports[-1], reports


def _solve_stage(name, param, value, start, problem, cfg, c, log, stages, delta_c):
    """Newton solve at fixed (rho, eps_c); shrink delta_c until every margin is on the log branch.

    Returns (trajectory, delta_c).
    """
    solves = []
    xi = start
    while True:
        bp = BarrierParams(problem.barrier.eps_c, delta_c, cfg.k)
        problem = Problem(problem.model, problem.xi_d, problem.weights, problem.constraints, bp)
        try:
            rep = newton_solve(xi, problem, cfg.newton, log=log)
        except LiftconError as e:
            raise StageFailure(name, param, value, start, e) from e
        solves.append(rep)
        xi = rep.trajectory
        margin = problem.constraints.min_margin(xi)
        if margin >= delta_c or delta_c * cfg.delta_c_factor < cfg.delta_c_min:
            break
        delta_c *= cfg.delta_c_factor
    pos, vel = output_errors(xi, c)
    rec = StageRecord(
        name, param, float(value), xi, rep, problem.objective(xi),
        weighted_l2_distance(xi, problem.xi_d, problem.weights), margin, pos, vel, delta_c, solves,
    )
    stages.append(rec)
    if not margin > 0:
        raise StageFailure(name, param, value, start, f"stage output infeasible (min margin {margin:.3e})")
    return xi, delta_c


def constrain(
    model,
    xi_d: Curve,
    c: OutputCurve,
    cs0: ConstraintSet,
    weights: L2Weights,
    schedule: ContinuationSchedule,
    cfg: StrategyConfig,
    log=None,
):
    """Stages 2 and 3 from the trajectory xi_d. Returns (stages, final, constraint set at rho=1)."""
    cs = cs0.with_factors(calibrate_relaxation(xi_d, cs0, cfg.calibration_margin))
    eps_cs = schedule.eps_c_values()
    stages: list = []
    xi_c = xi_d
    delta_c = cfg.delta_c
    for rho in schedule.rho_values():
        problem = Problem(model, xi_d, weights, cs.with_rho(rho), BarrierParams(eps_cs[0], delta_c, cfg.k))
        xi_c, delta_c = _solve_stage("rho", "rho", rho, xi_c, problem, cfg, c, log, stages, delta_c)
    cs1 = cs.with_rho(1.0)
    for eps_c in eps_cs:
        problem = Problem(model, xi_d, weights, cs1, BarrierParams(eps_c, delta_c, cfg.k))
        xi_c, delta_c = _solve_stage("epsc", "eps_c", eps_c, xi_c, problem, cfg, c, log, stages, delta_c)
    return stages, xi_c, cs1


def lift_and_constrain(
    c: OutputCurve,
    params: PvtolParams,
    grid: TimeGrid,
    bounds: Bounds = Bounds(),
    schedule: ContinuationSchedule = ContinuationSchedule(),
    cfg: StrategyConfig = StrategyConfig(),
    log=None,
    lift: tuple | None = None,
) -> StrategyReport:
    """Full pipeline on the PVTOL. ``lift`` may carry a precomputed (report, reports) pair."""
    lift_rep, lift_reps = lift if lift is not None else run_lift(c, params, grid, schedule, cfg, log)
    model = Pvtol(params)
    cs0 = box_constraints(6, 2, [(6, *bounds.u1, 1.0, "u1"), (7, *bounds.u2, 1.0, "u2")], rho=0.0)
    weights = stage_weights(6, 2, cfg)
    stages, final, cs1 = constrain(model, lift_rep.trajectory, c, cs0, weights, schedule, cfg, log)
    pos, vel = output_errors(final, c)
    return StrategyReport(lift_rep, lift_reps, stages, final, cs1, pos, vel, cs1.min_margin(final))


def extend_curve(xi: Curve) -> Curve:
    """Lift a PVTOL curve to the extended plant: inputs become states, rates the inputs."""
    rates = np.gradient(xi.inputs, xi.grid.h, axis=0, edge_order=2)
    names = tuple(xi.state_names) + tuple(xi.input_names)
    return Curve(xi.grid, np.hstack([xi.states, xi.inputs]), rates, names, tuple(f"{u}_rate" for u in xi.input_names))


def run_with_dynamic_extension(
    c: OutputCurve,
    params: PvtolParams,
    grid: TimeGrid,
    bounds: Bounds = Bounds(),
    rate_bounds: tuple | None = ((-50.0, 50.0), (-20.0, 20.0)),
    schedule: ContinuationSchedule = ContinuationSchedule(),
    cfg: StrategyConfig = StrategyConfig(),
    log=None,
    lift: tuple | None = None,
) -> StrategyReport:
    """Same pipeline on the plant x' = f(x, w), w' = v with boxes on w and v.

    ``rate_bounds=None`` leaves the rates unconstrained.
    """
    lift_rep, lift_reps = lift if lift is not None else run_lift(c, params, grid, schedule, cfg, log)
    model = DynamicExtension(Pvtol(params))
    ext_d = extend_curve(lift_rep.trajectory)
    xi_d = project(ext_d, default_gain(model, ext_d), model, ext_d.states[0])
    boxes = [(6, *bounds.u1, 1.0, "u1"), (7, *bounds.u2, 1.0, "u2")]
    if rate_bounds is not None:
        boxes += [(8, *rate_bounds[0], 1.0, "u1_rate"), (9, *rate_bounds[1], 1.0, "u2_rate")]
    cs0 = box_constraints(8, 2, boxes, rho=0.0)
    weights = stage_weights(6, 2, cfg, n_extra=2)
    stages, final, cs1 = constrain(model, xi_d, c, cs0, weights, schedule, cfg, log)
    pos, vel = output_errors(final, c)
    return StrategyReport(lift_rep, lift_reps, stages, final, cs1, pos, vel, cs1.min_margin(final))
