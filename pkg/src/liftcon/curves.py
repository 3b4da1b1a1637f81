"""Time grids, sampled state-input curves and desired output curves.

Everything downstream works on a :class:`Curve`, the uniformly sampled pair
(x(t_k), u(t_k)). Desired outputs (y_d, z_d) are :class:`OutputCurve` objects that
expose analytic time derivatives up to order four.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .errors import AnnulusViolation, GridMismatch

G_DEFAULT = 9.81


@dataclass(frozen=True)
class TimeGrid:
    T: float
    N: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        if int(self.N) != self.N or self.N < 2:
            raise ValueError("need N >= 2 intervals")

    @property
    def h(self) -> float:
        return self.T / self.N

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.N + 1) * (self.T / self.N)

    @property
    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.N + 1, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w

    def interior(self, margin: float = 0.05) -> np.ndarray:
        """Boolean mask of nodes in [margin*T, (1-margin)*T]."""
        t = self.t
        return (t >= margin * self.T - 1e-12) & (t <= (1 - margin) * self.T + 1e-12)


@dataclass(frozen=True, eq=False)
class Curve:
    """Sampled state-input curve on a TimeGrid.

    ``states`` has shape (N+1, n) and ``inputs`` (N+1, m). The same container is
    used for perturbations (tangent vectors) of a curve.
    """

    grid: TimeGrid
    states: np.ndarray
    inputs: np.ndarray
    state_names: tuple = ()
    input_names: tuple = ()

    def __post_init__(self):
        x = np.array(self.states, dtype=float)
        u = np.array(self.inputs, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if u.ndim == 1:
            u = u[:, None]
        n_nodes = self.grid.N + 1
        if x.shape[0] != n_nodes or u.shape[0] != n_nodes:
            raise GridMismatch(f"curve has {x.shape[0]}/{u.shape[0]} samples, grid needs {n_nodes}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
            raise ValueError("curve contains non-finite entries")
        x.setflags(write=False)
        u.setflags(write=False)
        object.__setattr__(self, "states", x)
        object.__setattr__(self, "inputs", u)
        sn = tuple(self.state_names) or tuple(f"x{i + 1}" for i in range(x.shape[1]))
        un = tuple(self.input_names) or tuple(f"u{i + 1}" for i in range(u.shape[1]))
        object.__setattr__(self, "state_names", sn)
        object.__setattr__(self, "input_names", un)

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def m(self) -> int:
        return self.inputs.shape[1]

    @property
    def t(self) -> np.ndarray:
        return self.grid.t

    def replace(self, states=None, inputs=None) -> "Curve":
        return Curve(
            self.grid,
            self.states if states is None else states,
            self.inputs if inputs is None else inputs,
            self.state_names,
            self.input_names,
        )

    def axpy(self, gamma: float, other: "Curve") -> "Curve":
        """Return self + gamma * other."""
        check_same_grid(self, other)
        return self.replace(self.states + gamma * other.states, self.inputs + gamma * other.inputs)

    def __sub__(self, other: "Curve") -> "Curve":
        return self.axpy(-1.0, other)

    def zeros_like(self) -> "Curve":
        return self.replace(np.zeros_like(self.states), np.zeros_like(self.inputs))

    def sup_norm(self) -> float:
        return float(max(np.max(np.abs(self.states)), np.max(np.abs(self.inputs))))


def check_same_grid(a: Curve, b: Curve) -> None:
    if a.grid != b.grid:
        raise GridMismatch(f"grid mismatch: {a.grid} vs {b.grid}")
    if a.states.shape != b.states.shape or a.inputs.shape != b.inputs.shape:
        raise GridMismatch("curve dimensions differ")


def sup_distance(a: Curve, b: Curve) -> float:
    return (a - b).sup_norm()


class OutputCurve:
    """Desired output (y_d, z_d) with analytic derivatives through order four.

    ``fn(t, order)`` must return an array of shape (len(t), 2).
    """

    max_order = 4

    def __init__(self, T: float, fn: Callable[[np.ndarray, int], np.ndarray], name: str = "output"):
        self.T = float(T)
        self._fn = fn
        self.name = name
        self.meta: dict = {}

    def __call__(self, t, order: int = 0) -> np.ndarray:
        if not 0 <= order <= self.max_order:
            raise ValueError("derivative order must be in 0..4")
        scalar = np.ndim(t) == 0
        out = np.asarray(self._fn(np.atleast_1d(np.asarray(t, dtype=float)), order), dtype=float)
        return out[0] if scalar else out

    def derivatives(self, t) -> np.ndarray:
        """All orders 0..4 stacked: shape (5, len(t), 2)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.stack([self(t, j) for j in range(self.max_order + 1)])


@dataclass(frozen=True, eq=False)
class L2Weights:
    Q: np.ndarray
    R: np.ndarray
    P_f: np.ndarray

    def __post_init__(self):
        Q, R, P = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (self.Q, self.R, self.P_f))
        for name, M in (("Q", Q), ("R", R), ("P_f", P)):
            if M.shape[0] != M.shape[1] or not np.allclose(M, M.T, atol=1e-12):
                raise ValueError(f"{name} must be square and symmetric")
        for name, M in (("Q", Q), ("R", R)):
            try:
                np.linalg.cholesky(M)
            except np.linalg.LinAlgError:
                raise ValueError(f"{name} must be positive definite") from None
        if np.linalg.eigvalsh(P).min() < -1e-12:
            raise ValueError("P_f must be positive semidefinite")
        if P.shape != Q.shape:
            raise ValueError("P_f and Q dimensions differ")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "P_f", P)

    @classmethod
    def diagonal(cls, q: Sequence[float], r: Sequence[float], pf: Sequence[float] | None = None):
        pf = q if pf is None else pf
        return cls(np.diag(q), np.diag(r), np.diag(pf))


def weighted_l2_distance(xi: Curve, xi_d: Curve, w: L2Weights) -> float:
    """1/2 int |x-x_d|_Q^2 + |u-u_d|_R^2 dt + 1/2 |x(T)-x_d(T)|_Pf^2 (trapezoid rule)."""
    check_same_grid(xi, xi_d)
    dx = xi.states - xi_d.states
    du = xi.inputs - xi_d.inputs
    integrand = np.einsum("ki,ij,kj->k", dx, w.Q, dx) + np.einsum("ki,ij,kj->k", du, w.R, du)
    return float(0.5 * xi.grid.trapezoid_weights @ integrand + 0.5 * dx[-1] @ w.P_f @ dx[-1])


# --- acceleration profile -------------------------------------------------------------


def acceleration_profile(c: OutputCurve, t, g: float = G_DEFAULT):
    """Return a_d(t) = (ydd, g - zdd) and its norm."""
    acc = c(t, 2)
    a_vec = np.stack([acc[..., 0], g - acc[..., 1]], axis=-1)
    return a_vec, np.linalg.norm(a_vec, axis=-1)


def acceleration_range(c: OutputCurve, grid: TimeGrid, g: float = G_DEFAULT):
    _, a = acceleration_profile(c, grid.t, g)
    return float(a.min()), float(a.max())


def annulus_holds(c: OutputCurve, grid: TimeGrid, g: float = G_DEFAULT, a_floor: float = 1e-9) -> bool:
    return acceleration_range(c, grid, g)[0] > a_floor


def require_annulus(c: OutputCurve, grid: TimeGrid, g: float = G_DEFAULT, a_floor: float = 1e-9) -> None:
    _, a = acceleration_profile(c, grid.t, g)
    k = int(np.argmin(a))
    if not a[k] > a_floor:
        raise AnnulusViolation(grid.t[k], a[k])


# --- maneuver generators -------------------------------------------------------------

# smootherstep of order nine: S(0)=0, S(1)=1, derivatives 1..4 vanish at both ends
_S = Polynomial([0, 0, 0, 0, 0, 126, -420, 540, -315, 70])
_S1, _S2, _IS = _S.deriv(1), _S.deriv(2), _S.integ()
_GL_X, _GL_W = np.polynomial.legendre.leggauss(32)


class _LoopPath:
    """Arc-length parametrized line / ramp / circle / ramp / line path."""

    def __init__(self, radius: float, lead_in: float, lead_out: float, blend_fraction: float):
        self.kappa = 0.0 if not np.isfinite(radius) else 1.0 / radius
        if self.kappa > 0:
            circumference = 2 * np.pi * radius
            L_r = blend_fraction * circumference
            L_c = circumference - L_r
        else:
            L_r = L_c = 0.0
        self.L_r = L_r
        self.breaks = np.cumsum([0.0, lead_in, L_r, L_c, L_r, lead_out])
        self.length = self.breaks[-1]
        # positions at breakpoints via piecewise quadrature
        pos = [0.0 + 0.0j]
        for j in range(5):
            pos.append(pos[-1] + self._quad(np.array([self.breaks[j]]), np.array([self.breaks[j + 1]]))[0])
        self.break_pos = np.array(pos)

    def _segment(self, s):
        return np.clip(np.searchsorted(self.breaks, s, side="right") - 1, 0, 4)

    def curvature(self, s):
        """kappa, kappa', kappa'' with respect to arc length."""
        s = np.asarray(s, dtype=float)
        k0 = np.zeros_like(s)
        k1 = np.zeros_like(s)
        k2 = np.zeros_like(s)
        if self.kappa == 0:
            return k0, k1, k2
        b = self.breaks
        seg = self._segment(s)
        up = seg == 1
        x = (s[up] - b[1]) / self.L_r
        k0[up] = self.kappa * _S(x)
        k1[up] = self.kappa * _S1(x) / self.L_r
        k2[up] = self.kappa * _S2(x) / self.L_r**2
        mid = seg == 2
        k0[mid] = self.kappa
        dn = seg == 3
        x = (b[4] - s[dn]) / self.L_r
        k0[dn] = self.kappa * _S(x)
        k1[dn] = -self.kappa * _S1(x) / self.L_r
        k2[dn] = self.kappa * _S2(x) / self.L_r**2
        return k0, k1, k2

    def heading(self, s):
        s = np.asarray(s, dtype=float)
        psi = np.zeros_like(s)
        if self.kappa == 0:
            return psi
        b, kap, L_r = self.breaks, self.kappa, self.L_r
        seg = self._segment(s)
        m = seg == 1
        psi[m] = kap * L_r * _IS((s[m] - b[1]) / L_r)
        psi_2 = kap * L_r / 2
        m = seg == 2
        psi[m] = psi_2 + kap * (s[m] - b[2])
        psi_3 = psi_2 + kap * (b[3] - b[2])
        m = seg == 3
        psi[m] = psi_3 + kap * L_r * (0.5 - _IS((b[4] - s[m]) / L_r))
        m = seg >= 4
        psi[m] = 2 * np.pi
        return psi

    def _quad(self, a, b):
        """int_a^b exp(-i psi(s)) ds for same-segment pairs (vectorized)."""
        half = 0.5 * (b - a)
        nodes = 0.5 * (a + b)[:, None] + half[:, None] * _GL_X[None, :]
        vals = np.exp(-1j * self.heading(nodes.ravel())).reshape(nodes.shape)
        return half * (vals @ _GL_W)

    def position(self, s):
        s = np.asarray(s, dtype=float)
        seg = self._segment(s)
        return self.break_pos[seg] + self._quad(self.breaks[seg], s)


def _complex_derivatives(path: _LoopPath, s, v: float, order: int):
    """d^order/dt^order of y + i z along the path traversed at constant speed v."""
    if order == 0:
        return path.position(s)
    e = np.exp(-1j * path.heading(s))
    if order == 1:
        return v * e
    k0, k1, k2 = path.curvature(s)
    if order == 2:
        return v**2 * (-1j * k0) * e
    if order == 3:
        return v**3 * (-1j * k1 - k0**2) * e
    return v**4 * (-1j * (k2 - k0**3) - 3 * k0 * k1) * e


def make_barrel_roll(
    v_d: float,
    loop_radius: float,
    lead_length: float,
    grid: TimeGrid | None = None,
    blend_fraction: float = 0.25,
    g: float = G_DEFAULT,
    check_annulus: bool = True,
) -> OutputCurve:
    """Constant-speed loop: straight lead-in, full vertical circle, straight lead-out.

    Curvature ramps up from zero along a ninth-order smootherstep over
    ``blend_fraction`` of the circumference and ramps down symmetrically, which makes
    the outputs C^4 (in fact C^6). z points down, so the loop climbs first. When a
    grid is given the lead-out absorbs the remaining horizon.
    """
    if not v_d > 0:
        raise ValueError("v_d must be positive")
    if not loop_radius > 0:
        raise ValueError("loop_radius must be positive")
    if lead_length < 0:
        raise ValueError("lead_length must be nonnegative")
    if not 0 < blend_fraction <= 1:
        raise ValueError("blend_fraction must lie in (0, 1]")
    probe = _LoopPath(loop_radius, lead_length, 0.0, blend_fraction)
    if grid is None:
        lead_out = lead_length
    else:
        lead_out = v_d * grid.T - probe.length
        if lead_out < -1e-9:
            raise ValueError(f"horizon too short: maneuver needs {probe.length / v_d + 0.0:.4g} s")
        lead_out = max(lead_out, 0.0)
    path = _LoopPath(loop_radius, lead_length, lead_out, blend_fraction)
    T = path.length / v_d

    def fn(t, order):
        s = np.clip(v_d * t, 0.0, path.length)
        w = _complex_derivatives(path, s, v_d, order)
        return np.stack([w.real, w.imag], axis=-1)

    c = OutputCurve(T, fn, name="barrel_roll")
    c.meta = dict(
        kind="barrel_roll",
        v_d=v_d,
        loop_radius=loop_radius,
        lead_length=lead_length,
        lead_out=lead_out,
        blend_fraction=blend_fraction,
        loop_start=path.breaks[1] / v_d,
        loop_end=path.breaks[4] / v_d,
    )
    if check_annulus:
        require_annulus(c, grid if grid is not None else TimeGrid(T, max(int(T * 200), 2)), g)
    return c


def barrel_roll_duration(v_d: float, loop_radius: float, lead_length: float, blend_fraction: float = 0.25) -> float:
    return _LoopPath(loop_radius, lead_length, lead_length, blend_fraction).length / v_d


def make_weave(v_d: float, amplitude: float, period: float, T: float) -> OutputCurve:
    """Level flight at speed v_d with a sinusoidal altitude weave z = A sin(2 pi t / P)."""
    w = 2 * np.pi / period

    def fn(t, order):
        y = v_d * t if order == 0 else (np.full_like(t, v_d) if order == 1 else np.zeros_like(t))
        z = amplitude * w**order * np.sin(w * t + order * np.pi / 2)
        return np.stack([y, z], axis=-1)

    c = OutputCurve(T, fn, name="weave")
    c.meta = dict(kind="weave", v_d=v_d, amplitude=amplitude, period=period)
    return c


def make_hover(T: float, y0: float = 0.0, z0: float = 0.0) -> OutputCurve:
    def fn(t, order):
        out = np.zeros((len(t), 2))
        if order == 0:
            out[:] = (y0, z0)
        return out

    c = OutputCurve(T, fn, name="hover")
    c.meta = dict(kind="hover")
    return c


def make_output_curve(kind: str, grid: TimeGrid, g: float = G_DEFAULT, **params) -> OutputCurve:
    """Maneuver factory used by the CLI configuration."""
    if kind == "barrel_roll":
        return make_barrel_roll(grid=grid, g=g, **params)
    if kind == "weave":
        return make_weave(T=grid.T, **params)
    if kind == "hover":
        return make_hover(grid.T, **params)
    if kind == "free_fall":
        # deliberately violates the annulus: zdd = g everywhere
        def fn(t, order):
            out = np.zeros((len(t), 2))
            if order == 0:
                out[:, 1] = 0.5 * g * t**2
            elif order == 1:
                out[:, 1] = g * t
            elif order == 2:
                out[:, 1] = g
            return out

        return OutputCurve(grid.T, fn, name="free_fall")
    raise ValueError(f"unknown maneuver kind {kind!r}")


# --- CSV -------------------------------------------------------------------------------


def write_curve_csv(curve: Curve, path, extra: dict | None = None) -> None:
    """Write ``t,<states>,<inputs>[,extra...]`` with 17 significant digits."""
    cols = [curve.t, *curve.states.T, *curve.inputs.T]
    header = ["t", *curve.state_names, *curve.input_names]
    for name, col in (extra or {}).items():
        header.append(name)
        cols.append(np.asarray(col, dtype=float))
    data = np.column_stack(cols)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for row in data:
            wr.writerow([f"{v:.17g}" for v in row])


def read_curve_csv(path, n_states: int) -> Curve:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    t = body[:, 0]
    N = len(t) - 1
    grid = TimeGrid(float(t[-1]), N)
    if not np.allclose(t, grid.t, rtol=0, atol=1e-9 * max(1.0, grid.T)):
        raise ValueError("CSV time column is not a uniform grid from 0")
    states = body[:, 1 : 1 + n_states]
    inputs = body[:, 1 + n_states :]
    return Curve(grid, states, inputs, tuple(header[1 : 1 + n_states]), tuple(header[1 + n_states :]))
