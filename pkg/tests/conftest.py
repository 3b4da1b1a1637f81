import numpy as np
import pytest

from liftcon.curves import Curve, TimeGrid, make_barrel_roll, make_weave
from liftcon.models import Pvtol, PvtolParams
from liftcon.projection import default_gain, design_gain, linearize, project


class Toy:
    """A projected PVTOL trajectory near a sinusoidal sketch, with gain and linearization."""

    def __init__(self, eps=0.5, T=3.0, N=300):
        self.grid = TimeGrid(T, N)
        t = self.grid.t
        xs = np.zeros((N + 1, 6))
        xs[:, 0] = np.sin(t)
        xs[:, 3] = np.cos(t)
        us = np.column_stack([9.81 + np.sin(2 * t), 0.3 * np.cos(t)])
        self.model = Pvtol(PvtolParams(eps=eps))
        self.sketch = Curve(self.grid, xs, us)
        eta = project(self.sketch, default_gain(self.model, self.sketch), self.model)
        self.K = design_gain(linearize(self.model, eta), np.eye(6), np.eye(2))
        self.x0 = eta.states[0]
        self.eta = project(eta, self.K, self.model, self.x0)
        self.lin = linearize(self.model, self.eta)

    def random(self, rng, scale=1.0):
        return self.eta.replace(
            scale * rng.normal(size=self.eta.states.shape), scale * rng.normal(size=self.eta.inputs.shape)
        )


@pytest.fixture(scope="session")
def toy():
    return Toy()


@pytest.fixture(scope="session")
def weave():
    grid = TimeGrid(4.0, 400)
    return make_weave(v_d=5.0, amplitude=1.0, period=2.0, T=grid.T), grid


@pytest.fixture(scope="session")
def roll_curve():
    c = make_barrel_roll(10.0, 12.0, 5.0)
    return c, TimeGrid(c.T, int(round(c.T * 100)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS, summary_lines

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in summary_lines():
            terminalreporter.write_line(line)
