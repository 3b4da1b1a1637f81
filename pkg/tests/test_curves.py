import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liftcon.curves import (
    Curve,
    L2Weights,
    TimeGrid,
    acceleration_profile,
    barrel_roll_duration,
    make_barrel_roll,
    make_hover,
    make_output_curve,
    read_curve_csv,
    require_annulus,
    weighted_l2_distance,
    write_curve_csv,
)
from liftcon.errors import AnnulusViolation, GridMismatch


def test_grid_basics():
    g = TimeGrid(2.0, 4)
    assert g.h == 0.5
    np.testing.assert_allclose(g.t, [0, 0.5, 1, 1.5, 2])
    assert g.trapezoid_weights.sum() == pytest.approx(2.0)
    with pytest.raises(ValueError):
        TimeGrid(0.0, 10)
    with pytest.raises(ValueError):
        TimeGrid(1.0, 1)


def test_curve_is_immutable_and_checks_shape():
    g = TimeGrid(1.0, 10)
    c = Curve(g, np.zeros((11, 2)), np.zeros((11, 1)))
    with pytest.raises(ValueError):
        c.states[0, 0] = 1.0
    with pytest.raises(GridMismatch):
        Curve(g, np.zeros((10, 2)), np.zeros((11, 1)))
    with pytest.raises(GridMismatch):
        c.axpy(1.0, Curve(TimeGrid(1.0, 11), np.zeros((12, 2)), np.zeros((12, 1))))


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_axpy_is_linear(a, b):
    g = TimeGrid(1.0, 5)
    rng = np.random.default_rng(0)
    x = Curve(g, rng.normal(size=(6, 2)), rng.normal(size=(6, 1)))
    y = Curve(g, rng.normal(size=(6, 2)), rng.normal(size=(6, 1)))
    lhs = x.axpy(a, y).axpy(b, y)
    rhs = x.axpy(a + b, y)
    assert (lhs - rhs).sup_norm() <= 1e-12 * (1 + abs(a) + abs(b))


def test_weighted_distance_hand_value():
    g = TimeGrid(1.0, 2)
    a = Curve(g, np.ones((3, 1)), np.zeros((3, 1)))
    b = a.zeros_like()
    w = L2Weights.diagonal([2.0], [1.0], [4.0])
    # 1/2 * 2 * 1 (integral) + 1/2 * 4 (terminal)
    assert weighted_l2_distance(a, b, w) == pytest.approx(3.0)


def test_weights_reject_indefinite():
    with pytest.raises(ValueError):
        L2Weights.diagonal([1.0, -1.0], [1.0])


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_barrel_roll_derivatives_match_differences(order):
    c = make_barrel_roll(10.0, 12.0, 10.0)
    t = np.linspace(0.3, c.T - 0.3, 41)
    h = 1e-4
    fd = (c(t + h, order - 1) - c(t - h, order - 1)) / (2 * h)
    scale = max(1.0, np.abs(c(t, order)).max())
    assert np.abs(fd - c(t, order)).max() / scale < 1e-5


def test_barrel_roll_geometry():
    R, lead = 12.0, 10.0
    c = make_barrel_roll(10.0, R, lead)
    assert c.T == pytest.approx(barrel_roll_duration(10.0, R, lead))
    speed = np.hypot(*c(np.linspace(0, c.T, 200), 1).T)
    np.testing.assert_allclose(speed, 10.0, rtol=1e-9)
    end = c(c.T)
    # a full loop returns to the starting altitude and heading
    assert end[1] == pytest.approx(0.0, abs=1e-8)
    np.testing.assert_allclose(c(c.T, 1), [10.0, 0.0], atol=1e-9)
    top = c(np.linspace(0, c.T, 2000))[:, 1].min()
    assert -2.2 * R < top < -1.5 * R  # z points down: the loop climbs


def test_grid_fills_horizon_with_lead_out():
    T = barrel_roll_duration(10.0, 12.0, 10.0) + 1.0
    c = make_barrel_roll(10.0, 12.0, 10.0, TimeGrid(T, 100))
    assert c.T == pytest.approx(T)
    assert c.meta["lead_out"] == pytest.approx(20.0)


def test_annulus_violation_names_time():
    grid = TimeGrid(1.0, 10)
    c = make_output_curve("free_fall", grid)
    with pytest.raises(AnnulusViolation) as exc:
        require_annulus(c, grid)
    assert exc.value.t == 0.0
    require_annulus(make_hover(1.0), grid)
    _, a = acceleration_profile(make_hover(1.0), grid.t)
    np.testing.assert_allclose(a, 9.81)


def test_csv_round_trip(tmp_path):
    g = TimeGrid(1.3, 7)
    rng = np.random.default_rng(3)
    c = Curve(g, rng.normal(size=(8, 3)), rng.normal(size=(8, 2)), ("a", "b", "c"), ("u", "v"))
    write_curve_csv(c, tmp_path / "c.csv")
    back = read_curve_csv(tmp_path / "c.csv", 3)
    assert back.grid == g
    assert (back - c).sup_norm() == 0.0
    assert back.state_names == ("a", "b", "c")
