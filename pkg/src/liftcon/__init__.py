"""Feasible trajectory generation for the PVTOL by lift-and-constrain continuation."""
from .curves import Curve, L2Weights, OutputCurve, TimeGrid, make_barrel_roll, make_output_curve
from .errors import LiftconError
from .models import DynamicExtension, EmbeddedRoll, Pvtol, PvtolParams
from .newton import NewtonConfig, Problem, newton_solve
from .projection import default_gain, design_gain, linearize, project
from .strategy import Bounds, ContinuationSchedule, StrategyConfig, lift_and_constrain, run_with_dynamic_extension

__all__ = [
    "Bounds",
    "ContinuationSchedule",
    "Curve",
    "DynamicExtension",
    "EmbeddedRoll",
    "L2Weights",
    "LiftconError",
    "NewtonConfig",
    "OutputCurve",
    "Problem",
    "Pvtol",
    "PvtolParams",
    "StrategyConfig",
    "TimeGrid",
    "default_gain",
    "design_gain",
    "lift_and_constrain",
    "linearize",
    "make_barrel_roll",
    "make_output_curve",
    "newton_solve",
    "project",
    "run_with_dynamic_extension",
]
