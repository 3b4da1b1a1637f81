"""JSON run configuration.

Units per key: accelerations in m/s^2, u2 bounds in deg/s^2, rate bounds in
m/s^3 (u1) and deg/s^3 (u2), lengths in m, speeds in m/s, times in s.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

from .cost import BarrierParams
from .curves import G_DEFAULT, OutputCurve, TimeGrid, barrel_roll_duration, make_output_curve
from .lifting import RollWeights
from .models import PvtolParams
from .newton import NewtonConfig
from .strategy import Bounds, ContinuationSchedule, StrategyConfig


@dataclass
class PlantSection:
    eps: float = 1.0
    g: float = G_DEFAULT


@dataclass
class ManeuverSection:
    kind: str = "barrel_roll"
    params: dict = field(default_factory=lambda: {"v_d": 10.0, "loop_radius": 12.0, "lead_length": 20.0, "blend_fraction": 0.25})


@dataclass
class GridSection:
    T: float | None = None  # None: natural duration of the maneuver
    samples_per_second: float = 100.0
    N: int | None = None


@dataclass
class BoundsSection:
    u1: list = field(default_factory=lambda: [0.5 * G_DEFAULT, 1.5 * G_DEFAULT])
    u2_deg: list = field(default_factory=lambda: [-80.0, 80.0])
    u1_rate: list | None = None
    u2_rate_deg: list | None = None


@dataclass
class WeightsSection:
    output: float = 1e4
    state: float = 1.0
    input: float = 1.0
    rate: float = 1e-6
    roll_q: list = field(default_factory=lambda: [1.0, 1.0])
    roll_p: list = field(default_factory=lambda: [1.0, 1.0])
    embedding_r: float = 1e6


@dataclass
class ScheduleSection:
    eps_steps: int = 5
    rho_step: float = 0.2
    eps_c_start: float = 10.0
    eps_c_end: float = 0.1
    eps_c_count: int = 5


@dataclass
class SolverSection:
    descent_tol: float = 1e-6
    max_iters: int = 50
    alpha: float = 1e-4
    beta: float = 0.5
    hessian: str = "full_newton"
    lift_hessian: str = "gauss_newton"
    delta_c: float = 0.1
    k: int = 2


@dataclass
class RunConfig:
    plant: PlantSection = field(default_factory=PlantSection)
    maneuver: ManeuverSection = field(default_factory=ManeuverSection)
    grid: GridSection = field(default_factory=GridSection)
    bounds: BoundsSection = field(default_factory=BoundsSection)
    weights: WeightsSection = field(default_factory=WeightsSection)
    schedule: ScheduleSection = field(default_factory=ScheduleSection)
    solver: SolverSection = field(default_factory=SolverSection)
    dynamic_extension: bool = False
    out_dir: str = "runs/default"
    seed: int = 0

    def __post_init__(self):
        self.validate()

    # --- (de)serialization ---------------------------------------------------------

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        kw = {}
        for f in fields(cls):
            if f.name not in d:
                continue
            sub = f.default_factory() if f.default_factory is not field().default_factory else None
            if is_dataclass(sub):
                unknown = set(d[f.name]) - {g.name for g in fields(sub)}
                if unknown:
                    raise ValueError(f"unknown keys in section {f.name!r}: {sorted(unknown)}")
                kw[f.name] = type(sub)(**d[f.name])
            else:
                kw[f.name] = d[f.name]
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**kw)

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    # --- checks and derived objects ------------------------------------------------

    def validate(self) -> None:
        w = self.weights
        for name in ("output", "state", "input", "rate", "embedding_r"):
            if not getattr(w, name) > 0:
                raise ValueError(f"weight {name!r} must be positive")
        if any(q <= 0 for q in w.roll_q) or any(p < 0 for p in w.roll_p):
            raise ValueError("roll weights must be positive (terminal: nonnegative)")
        b = self.bounds
        for name in ("u1", "u2_deg", "u1_rate", "u2_rate_deg"):
            v = getattr(b, name)
            if v is not None and not (len(v) == 2 and v[0] < v[1]):
                raise ValueError(f"bounds {name!r} must be an ordered pair")
        if self.solver.hessian not in ("gauss_newton", "full_newton"):
            raise ValueError("solver.hessian must be gauss_newton or full_newton")
        if self.plant.eps < 0 or self.plant.g <= 0:
            raise ValueError("bad plant parameters")
        BarrierParams(1.0, self.solver.delta_c, self.solver.k)

    def params(self) -> PvtolParams:
        return PvtolParams(self.plant.eps, self.plant.g)

    def natural_duration(self) -> float:
        p = self.maneuver.params
        if self.maneuver.kind == "barrel_roll":
            return barrel_roll_duration(p["v_d"], p["loop_radius"], p["lead_length"], p.get("blend_fraction", 0.25))
        if self.grid.T is None:
            raise ValueError(f"grid.T is required for maneuver kind {self.maneuver.kind!r}")
        return self.grid.T

    def make_grid(self) -> TimeGrid:
        T = self.grid.T if self.grid.T is not None else self.natural_duration()
        N = self.grid.N if self.grid.N is not None else max(2, int(round(T * self.grid.samples_per_second)))
        return TimeGrid(T, N)

    def make_curve(self, grid: TimeGrid) -> OutputCurve:
        return make_output_curve(self.maneuver.kind, grid, self.plant.g, **self.maneuver.params)

    def make_bounds(self) -> Bounds:
        return Bounds(tuple(self.bounds.u1), tuple(math.radians(v) for v in self.bounds.u2_deg))

    def make_rate_bounds(self):
        b = self.bounds
        if b.u1_rate is None and b.u2_rate_deg is None:
            return None
        big = 1e9
        r1 = tuple(b.u1_rate) if b.u1_rate is not None else (-big, big)
        r2 = tuple(math.radians(v) for v in b.u2_rate_deg) if b.u2_rate_deg is not None else (-big, big)
        return (r1, r2)

    def make_schedule(self) -> ContinuationSchedule:
        return ContinuationSchedule(**asdict(self.schedule))

    def make_strategy_config(self) -> StrategyConfig:
        s, w = self.solver, self.weights
        newton = NewtonConfig(descent_tol=s.descent_tol, max_iters=s.max_iters, alpha=s.alpha, beta=s.beta, hessian=s.hessian)
        lift_newton = NewtonConfig(descent_tol=s.descent_tol, max_iters=s.max_iters, alpha=s.alpha, beta=s.beta, hessian=s.lift_hessian)
        return StrategyConfig(
            newton=newton,
            lift_newton=lift_newton,
            roll=RollWeights(tuple(w.roll_q), tuple(w.roll_p), w.embedding_r),
            output_weight=w.output,
            state_weight=w.state,
            input_weight=w.input,
            rate_weight=w.rate,
            delta_c=s.delta_c,
            k=s.k,
        )
