"""Tracking cost, approximate log barrier and the quadratic model fed to the LQ solver."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .curves import Curve, L2Weights, check_same_grid, weighted_l2_distance
from .errors import NonFiniteModel
from .projection import step_hessians


@dataclass(frozen=True)
class BarrierParams:
    eps_c: float = 10.0
    delta_c: float = 0.1
    k: int = 2

    def __post_init__(self):
        if not self.eps_c > 0:
            raise ValueError("eps_c must be positive")
        if not 0 < self.delta_c <= 1:
            raise ValueError("delta_c must lie in (0, 1]")
        if int(self.k) != self.k or self.k < 2 or self.k % 2:
            raise ValueError("barrier order k must be an even integer >= 2")


def barrier_beta(z, delta_c: float = 0.1, k: int = 2):
    """Approximate barrier: -log z above delta_c, a degree-k polynomial below.

    Returns (value, first derivative, second derivative), vectorized over z.
    """
    z = np.asarray(z, dtype=float)
    log_branch = z > delta_c
    zl = np.where(log_branch, z, 1.0)
    s = (z - k * delta_c) / ((k - 1) * delta_c)
    s = np.where(log_branch, 0.0, s)
    val = np.where(log_branch, -np.log(zl), (k - 1) / k * (s**k - 1) - np.log(delta_c))
    d1 = np.where(log_branch, -1.0 / zl, s ** (k - 1) / delta_c)
    d2 = np.where(log_branch, 1.0 / zl**2, s ** (k - 2) / delta_c**2)
    return val, d1, d2


# --- constraints ---------------------------------------------------------------------


@dataclass(frozen=True)
class BoxConstraint:
    """(w_i - mid)^2 - ((rho + (1 - rho) k) half)^2 <= 0 on entry i of w = (x, u).

    With k >= 1 the admissible interval shrinks monotonically as rho grows and
    equals [lo, hi] at rho = 1.
    """

    index: int
    lo: float
    hi: float
    k: float = 1.0
    name: str = ""

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("box bounds must satisfy lo < hi")
        if not self.k >= 1:
            raise ValueError("relaxation factor k must be >= 1")

    @property
    def mid(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def half(self):
        return 0.5 * (self.hi - self.lo)

    def half_width(self, rho):
        return (rho + (1 - rho) * self.k) * self.half

    def value(self, w, rho):
        return (w[:, self.index] - self.mid) ** 2 - self.half_width(rho) ** 2


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """Constraints c_j(x, u; rho) <= 0 evaluated on stacked w = (x, u)."""

    n: int
    m: int
    constraints: tuple = ()
    rho: float = 1.0

    def __len__(self):
        return len(self.constraints)

    def with_rho(self, rho: float) -> "ConstraintSet":
        return ConstraintSet(self.n, self.m, self.constraints, float(rho))

    def with_factors(self, ks: Sequence[float]) -> "ConstraintSet":
        cons = tuple(BoxConstraint(c.index, c.lo, c.hi, float(k), c.name) for c, k in zip(self.constraints, ks))
        return ConstraintSet(self.n, self.m, cons, self.rho)

    def _w(self, x, u):
        return np.concatenate([np.atleast_2d(x), np.atleast_2d(u)], axis=1)

    def values(self, x, u) -> np.ndarray:
        w = self._w(x, u)
        if not self.constraints:
            return np.zeros((w.shape[0], 0))
        return np.column_stack([c.value(w, self.rho) for c in self.constraints])

    def gradients(self, x, u) -> np.ndarray:
        w = self._w(x, u)
        G = np.zeros((w.shape[0], len(self), w.shape[1]))
        for j, c in enumerate(self.constraints):
            G[:, j, c.index] = 2 * (w[:, c.index] - c.mid)
        return G

    def hessians(self, x, u) -> np.ndarray:
        """Constant for boxes; shape (J, n+m, n+m)."""
        H = np.zeros((len(self), self.n + self.m, self.n + self.m))
        for j, c in enumerate(self.constraints):
            H[j, c.index, c.index] = 2.0
        return H

    def margins(self, xi: Curve) -> np.ndarray:
        return -self.values(xi.states, xi.inputs)

    def min_margin(self, xi: Curve) -> float:
        return float(self.margins(xi).min()) if self.constraints else np.inf


def box_constraints(n: int, m: int, boxes: Sequence[tuple], rho: float = 1.0) -> ConstraintSet:
    """Boxes given as (index, lo, hi[, k[, name]]) on w = (x, u)."""
    return ConstraintSet(n, m, tuple(BoxConstraint(*b) for b in boxes), rho)


def make_input_box_constraints(u1_bounds, u2_bounds, k1: float = 1.0, k2: float = 1.0, n: int = 6, rho: float = 0.0):
    return box_constraints(
        n, 2, [(n, *u1_bounds, k1, "u1"), (n + 1, *u2_bounds, k2, "u2")], rho
    )


def calibrate_relaxation(xi_d: Curve, cs: ConstraintSet, margin: float = 1.1) -> tuple:
    """Relaxation factors k_j = max(1, margin * max_t |w_j - mid_j| / half_j)."""
    w = np.concatenate([xi_d.states, xi_d.inputs], axis=1)
    return tuple(max(1.0, margin * float(np.max(np.abs(w[:, c.index] - c.mid))) / c.half) for c in cs.constraints)


# --- functionals ---------------------------------------------------------------------


def barrier_functional(xi: Curve, cs: ConstraintSet, bp: BarrierParams) -> float:
    """Trapezoid integral of sum_j beta(-c_j) (without the eps_c weight)."""
    if cs is None or not len(cs):
        return 0.0
    val, _, _ = barrier_beta(cs.margins(xi), bp.delta_c, bp.k)
    return float(xi.grid.trapezoid_weights @ val.sum(axis=1))


def objective(xi: Curve, xi_d: Curve, w: L2Weights, cs: ConstraintSet | None = None, bp: BarrierParams | None = None) -> float:
    h = weighted_l2_distance(xi, xi_d, w)
    if cs is None or not len(cs):
        return h
    return h + bp.eps_c * barrier_functional(xi, cs, bp)


@dataclass(frozen=True, eq=False)
class QuadraticModel:
    """Node-wise first and second derivative data of the objective along a trajectory.

    The linear part is sum_k wt_k (a_k.z_k + b_k.v_k) + r1.z_N with trapezoid
    weights wt_k; the quadratic part uses W_k = [[Q, S], [S^T, R]], the terminal
    block P_f and, in full-Newton mode, the per-step dynamics curvature ``D``
    acting on (z_k, v_k, v_{k+1}).
    """

    weights: np.ndarray
    a: np.ndarray
    b: np.ndarray
    Q: np.ndarray
    S: np.ndarray
    R: np.ndarray
    r1: np.ndarray
    P_f: np.ndarray
    D: np.ndarray | None = None

    @property
    def n(self):
        return self.a.shape[1]

    @property
    def m(self):
        return self.b.shape[1]

    def gradient_dot(self, zeta: Curve) -> float:
        """Dg(xi) . zeta."""
        z, v = zeta.states, zeta.inputs
        return float(self.weights @ (np.sum(self.a * z, 1) + np.sum(self.b * v, 1)) + self.r1 @ z[-1])

    def curvature(self, zeta: Curve) -> float:
        """Second-order term zeta' H zeta (no 1/2)."""
        z, v = zeta.states, zeta.inputs
        val = self.weights @ (
            np.einsum("ki,kij,kj->k", z, self.Q, z)
            + 2 * np.einsum("ki,kij,kj->k", z, self.S, v)
            + np.einsum("ki,kij,kj->k", v, self.R, v)
        )
        val += z[-1] @ self.P_f @ z[-1]
        if self.D is not None:
            wv = np.concatenate([z[:-1], v[:-1], v[1:]], axis=1)
            val += np.einsum("ki,kij,kj->", wv, self.D, wv)
        return float(val)

    def with_regularization(self, lam: float) -> "QuadraticModel":
        n = self.n
        return QuadraticModel(self.weights, self.a, self.b, self.Q + lam * np.eye(n), self.S, self.R, self.r1, self.P_f, self.D)

    def gauss_newton(self) -> "QuadraticModel":
        return QuadraticModel(self.weights, self.a, self.b, self.Q, self.S, self.R, self.r1, self.P_f, None)


def _floor_eigenvalues(R: np.ndarray, floor: float) -> np.ndarray:
    lam, V = np.linalg.eigh(R)
    if lam.min() >= floor:
        return R
    lam = np.maximum(lam, floor)
    return np.einsum("kij,kj,klj->kil", V, lam, V)


def assemble_quadratic_model(
    eta: Curve,
    xi_d: Curve,
    w: L2Weights,
    cs: ConstraintSet | None = None,
    bp: BarrierParams | None = None,
    mode: str = "gauss_newton",
    model=None,
    lin=None,
    K=None,
    r_floor: float = 1e-8,
) -> QuadraticModel:
    """Derivatives of h + eps_c * b at the trajectory ``eta``.

    ``full_newton`` also needs the plant, a discrete linearization and the gain
    used by the projection: the dynamics curvature is weighted by the adjoint of
    the closed tracking loop.
    """
    check_same_grid(eta, xi_d)
    n, m = eta.n, eta.m
    x, u = eta.states, eta.inputs
    dx, du = x - xi_d.states, u - xi_d.inputs
    Nn = x.shape[0]
    a = dx @ w.Q
    b = du @ w.R
    H = np.zeros((Nn, n + m, n + m))
    H[:, :n, :n] = w.Q
    H[:, n:, n:] = w.R
    if cs is not None and len(cs):
        margin = cs.margins(eta)
        _, d1, d2 = barrier_beta(margin, bp.delta_c, bp.k)
        G = cs.gradients(x, u)
        grad = -bp.eps_c * np.einsum("kj,kji->ki", d1, G)
        a = a + grad[:, :n]
        b = b + grad[:, n:]
        H = H + bp.eps_c * (np.einsum("kj,kja,kjb->kab", d2, G, G) - np.einsum("kj,jab->kab", d1, cs.hessians(x, u)))
    for name, arr in (("gradient", np.concatenate([a, b], 1)), ("Hessian", H.reshape(Nn, -1))):
        bad = ~np.all(np.isfinite(arr), axis=1)
        if bad.any():
            raise NonFiniteModel(name, int(np.argmax(bad)))
    R = _floor_eigenvalues(0.5 * (H[:, n:, n:] + H[:, n:, n:].transpose(0, 2, 1)), r_floor)
    wts = eta.grid.trapezoid_weights
    r1 = w.P_f @ dx[-1]
    D = None
    if mode == "full_newton":
        if model is None or lin is None or K is None:
            raise ValueError("full_newton needs model, lin and K")
        lam = closed_loop_adjoint(wts, a, b, r1, lin, K)
        D = step_hessians(model, lin, lam)
        if not np.all(np.isfinite(D)):
            raise NonFiniteModel("dynamics curvature", int(np.argmax(~np.isfinite(D).all(axis=(1, 2)))))
    elif mode != "gauss_newton":
        raise ValueError(f"unknown Hessian mode {mode!r}")
    return QuadraticModel(wts, a, b, H[:, :n, :n].copy(), H[:, :n, n:].copy(), R, r1, w.P_f.copy(), D)


def closed_loop_adjoint(wts, a, b, r1, lin, K) -> np.ndarray:
    """State part of the adjoint of the tracking loop, lam_1 .. lam_N (shape (N, n)).

    Second-order state variations obey s_{k+1} = M_k s_k + forcing with
    s = (dx, du) and M_k = [[Ad - Bd1 K_{k+1}, Bd0], [-K_{k+1}, 0]].
    """
    N = lin.Ad.shape[0]
    n = a.shape[1]
    Kk = K.K
    lam = np.empty((N, n))
    lz = wts[N] * a[N] + r1
    lv = wts[N] * b[N]
    lam[N - 1] = lz
    for k in range(N - 1, 0, -1):
        Kn = Kk[k + 1]
        nz = wts[k] * a[k] + (lin.Ad[k] - lin.Bd1[k] @ Kn).T @ lz - Kn.T @ lv
        nv = wts[k] * b[k] + lin.Bd0[k].T @ lz
        lz, lv = nz, nv
        lam[k - 1] = lz
    return lam
