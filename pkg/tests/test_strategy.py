import math

import numpy as np
import pytest

from liftcon.curves import TimeGrid, make_weave
from liftcon.lifting import output_errors
from liftcon.models import PvtolParams
from liftcon.strategy import (
    Bounds,
    ContinuationSchedule,
    StrategyConfig,
    extend_curve,
    lift_and_constrain,
    run_lift,
    stage_weights,
)

G = 9.81


@pytest.fixture(scope="module")
def weave_setup():
    grid = TimeGrid(4.0, 200)
    # vertical weave: zdd swings by 0.6 g around hover, so u1 leaves [0.5 g, 1.5 g]
    amp = 0.6 * G / (2 * np.pi / 2.0) ** 2
    c = make_weave(v_d=3.0, amplitude=amp, period=2.0, T=grid.T)
    lift = run_lift(c, PvtolParams(1.0), grid, ContinuationSchedule(), StrategyConfig())
    return c, grid, lift


def test_schedule_values():
    s = ContinuationSchedule()
    assert s.rho_values() == [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
    np.testing.assert_allclose(s.eps_c_values(), [10, 10**0.5, 1, 10**-0.5, 0.1])
    np.testing.assert_allclose(s.eps_values(1.0), [0.2, 0.4, 0.6, 0.8, 1.0])
    with pytest.raises(ValueError):
        ContinuationSchedule(rho_step=0.0)
    with pytest.raises(ValueError):
        ContinuationSchedule(eps_c_start=0.1, eps_c_end=1.0)


def test_stage_weights_emphasize_outputs():
    w = stage_weights(6, 2, StrategyConfig())
    np.testing.assert_allclose(np.diag(w.Q), [1e4, 1e4, 1, 1, 1, 1])
    np.testing.assert_allclose(w.P_f, w.Q)
    we = stage_weights(6, 2, StrategyConfig(), n_extra=2)
    assert we.Q.shape == (8, 8) and np.allclose(np.diag(we.R), 1e-6)


def test_extend_curve_layout(weave_setup):
    _, _, (rep, _) = weave_setup
    ext = extend_curve(rep.trajectory)
    assert ext.n == 8 and ext.m == 2
    np.testing.assert_array_equal(ext.states[:, 6:], rep.trajectory.inputs)


def test_unbounded_box_returns_the_lift(weave_setup):
    c, grid, lift = weave_setup
    rep = lift_and_constrain(c, PvtolParams(1.0), grid, Bounds.unbounded(), lift=lift)
    assert (rep.final - lift[0].trajectory).sup_norm() < 1e-4
    assert all(s.tracking_cost < 1e-6 for s in rep.stages)


def test_constrained_weave(weave_setup, tmp_path):
    c, grid, lift = weave_setup
    assert lift[0].trajectory.inputs[:, 0].min() < 0.5 * G
    rep = lift_and_constrain(c, PvtolParams(1.0), grid, Bounds(), lift=lift)
    assert rep.min_margin > 0
    u1 = rep.final.inputs[:, 0]
    assert 0.5 * G < u1.min() and u1.max() < 1.5 * G
    rho = rep.stages_named("rho")
    assert [s.value for s in rho] == [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
    eps_c = [s.value for s in rep.stages_named("epsc")]
    assert eps_c[0] == pytest.approx(10) and eps_c[-1] == pytest.approx(0.1)
    # tighter regions cannot track better
    costs = [s.tracking_cost for s in rho]
    assert all(b >= a * (1 - 1e-9) for a, b in zip(costs, costs[1:]))
    # the constrained output error exceeds the lift's and shrinks with eps_c
    pos = [s.position_error for s in rep.stages_named("epsc")]
    assert pos[-1] > lift[0].position_error
    assert all(b <= a * (1 + 1e-6) for a, b in zip(pos, pos[1:]))
    assert output_errors(rep.final, c) == (rep.position_error, rep.velocity_error)
    out = rep.write(tmp_path)
    names = sorted(p.name for p in out.iterdir())
    assert "stage_rho_rho=0.2.csv" in names and "stage_epsc_eps_c=0.1.csv" in names
    assert "strategy_report.json" in names and "final.csv" in names
