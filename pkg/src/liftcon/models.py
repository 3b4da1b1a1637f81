"""Plant models with analytic first and second derivatives.

All evaluators are vectorized over a leading batch axis: ``t`` has shape (B,),
``x`` (B, n), ``u`` (B, m). ``hess(t, x, u, w)`` returns the Hessian of w . f with
respect to the stacked variable (x, u), shape (B, n+m, n+m).

Angles are unwrapped reals throughout.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curves import G_DEFAULT, OutputCurve, TimeGrid

PVTOL_STATES = ("y", "z", "phi", "ydot", "zdot", "phidot")
PVTOL_INPUTS = ("u1", "u2")


@dataclass(frozen=True)
class PvtolParams:
    eps: float = 1.0
    g: float = G_DEFAULT

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError("g must be positive")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")


class PlantModel:
    """Base class: subclasses implement f, f_x, f_u and hess on batches."""

    n: int
    m: int
    state_names: tuple = ()
    input_names: tuple = ()

    def f(self, t, x, u):
        raise NotImplementedError

    def f_x(self, t, x, u):
        raise NotImplementedError

    def f_u(self, t, x, u):
        raise NotImplementedError

    def hess(self, t, x, u, w):
        raise NotImplementedError

    def __call__(self, t, x, u):
        """Single-point convenience wrapper returning an (n,) array."""
        return self.f(np.atleast_1d(t), np.atleast_2d(x), np.atleast_2d(u))[0]


def _b(x):
    return np.atleast_2d(np.asarray(x, dtype=float))


class Pvtol(PlantModel):
    n, m = 6, 2
    state_names, input_names = PVTOL_STATES, PVTOL_INPUTS

    def __init__(self, params: PvtolParams = PvtolParams()):
        self.params = params

    def __repr__(self):
        return f"Pvtol(eps={self.params.eps}, g={self.params.g})"

    def f(self, t, x, u):
        x, u = _b(x), _b(u)
        eps, g = self.params.eps, self.params.g
        s, c = np.sin(x[:, 2]), np.cos(x[:, 2])
        u1, u2 = u[:, 0], u[:, 1]
        return np.column_stack(
            [x[:, 3], x[:, 4], x[:, 5], u1 * s - eps * u2 * c, -u1 * c - eps * u2 * s + g, u2]
        )

    def f_x(self, t, x, u):
        x, u = _b(x), _b(u)
        eps = self.params.eps
        s, c = np.sin(x[:, 2]), np.cos(x[:, 2])
        u1, u2 = u[:, 0], u[:, 1]
        A = np.zeros((x.shape[0], 6, 6))
        A[:, 0, 3] = A[:, 1, 4] = A[:, 2, 5] = 1.0
        A[:, 3, 2] = u1 * c + eps * u2 * s
        A[:, 4, 2] = u1 * s - eps * u2 * c
        return A

    def f_u(self, t, x, u):
        x = _b(x)
        eps = self.params.eps
        s, c = np.sin(x[:, 2]), np.cos(x[:, 2])
        B = np.zeros((x.shape[0], 6, 2))
        B[:, 3, 0], B[:, 3, 1] = s, -eps * c
        B[:, 4, 0], B[:, 4, 1] = -c, -eps * s
        B[:, 5, 1] = 1.0
        return B

    def hess(self, t, x, u, w):
        x, u, w = _b(x), _b(u), _b(w)
        eps = self.params.eps
        s, c = np.sin(x[:, 2]), np.cos(x[:, 2])
        u1, u2 = u[:, 0], u[:, 1]
        w4, w5 = w[:, 3], w[:, 4]
        H = np.zeros((x.shape[0], 8, 8))
        H[:, 2, 2] = w4 * (-u1 * s + eps * u2 * c) + w5 * (u1 * c + eps * u2 * s)
        H[:, 2, 6] = H[:, 6, 2] = w4 * c + w5 * s
        H[:, 2, 7] = H[:, 7, 2] = eps * (w4 * s - w5 * c)
        return H


def pvtol_dynamics(params: PvtolParams, x, u) -> np.ndarray:
    """Right-hand side of the PVTOL equations for a single (x, u)."""
    return Pvtol(params)(0.0, x, u)


def _M(phi):
    s, c = np.sin(phi), np.cos(phi)
    return np.array([[s, -c], [-c, -s]])


def feedback_transform(params: PvtolParams, phi, v):
    """(u1, eps*u2) = M(phi) ((0, -g) + v), M(phi) = [[sin, -cos], [-cos, -sin]].

    Vectorized over trailing arrays: ``phi`` shape (K,), ``v`` shape (K, 2).
    """
    phi = np.asarray(phi, dtype=float)
    v = np.asarray(v, dtype=float)
    s, c = np.sin(phi), np.cos(phi)
    w1, w2 = v[..., 0], v[..., 1] - params.g
    return s * w1 - c * w2, -c * w1 - s * w2


def inverse_feedback_transform(params: PvtolParams, phi, u1, eps_u2) -> np.ndarray:
    """Recover v from (u1, eps*u2, phi); M(phi) is an involution."""
    s, c = np.sin(phi), np.cos(phi)
    w1 = s * u1 - c * eps_u2
    w2 = -c * u1 - s * eps_u2
    return np.stack([w1, w2 + params.g], axis=-1)


class PendulumForm(PlantModel):
    """PVTOL after the feedback transformation; inputs are the accelerations v."""

    n, m = 6, 2
    state_names, input_names = PVTOL_STATES, ("v1", "v2")

    def __init__(self, params: PvtolParams):
        if not params.eps > 0:
            raise ValueError("pendulum form needs eps > 0; the eps = 0 case is algebraic")
        self.params = params

    def f(self, t, x, u):
        x, u = _b(x), _b(u)
        eps, g = self.params.eps, self.params.g
        s, c = np.sin(x[:, 2]), np.cos(x[:, 2])
        return np.column_stack(
            [x[:, 3], x[:, 4], x[:, 5], u[:, 0], u[:, 1], ((g - u[:, 1]) * s - u[:, 0] * c) / eps]
        )

    def f_x(self, t, x, u):
        x, u = _b(x), _b(u)
        eps, g = self.params.eps, self.params.g
        s, c = np.sin(x[:, 2]), np.cos(x[:, 2])
        A = np.zeros((x.shape[0], 6, 6))
        A[:, 0, 3] = A[:, 1, 4] = A[:, 2, 5] = 1.0
        A[:, 5, 2] = ((g - u[:, 1]) * c + u[:, 0] * s) / eps
        return A

    def f_u(self, t, x, u):
        x = _b(x)
        eps = self.params.eps
        s, c = np.sin(x[:, 2]), np.cos(x[:, 2])
        B = np.zeros((x.shape[0], 6, 2))
        B[:, 3, 0] = B[:, 4, 1] = 1.0
        B[:, 5, 0], B[:, 5, 1] = -c / eps, -s / eps
        return B

    def hess(self, t, x, u, w):
        x, u, w = _b(x), _b(u), _b(w)
        eps, g = self.params.eps, self.params.g
        s, c = np.sin(x[:, 2]), np.cos(x[:, 2])
        w6 = w[:, 5]
        H = np.zeros((x.shape[0], 8, 8))
        H[:, 2, 2] = w6 * (-(g - u[:, 1]) * s + u[:, 0] * c) / eps
        H[:, 2, 6] = H[:, 6, 2] = w6 * s / eps
        H[:, 2, 7] = H[:, 7, 2] = -w6 * c / eps
        return H


def pendulum_form_dynamics(params: PvtolParams, x, v) -> np.ndarray:
    return PendulumForm(params)(0.0, x, v)


class EmbeddedRoll(PlantModel):
    """Roll dynamics driven by the desired accelerations plus an embedding input.

    eps * phidd = (g - zdd_d(t)) sin(phi) - ydd_d(t) cos(phi) + eps * u_emb

    Desired accelerations are tabulated on the nodes and half-steps of ``grid``;
    other times fall back to evaluating the output curve.
    """

    n, m = 2, 1
    state_names, input_names = ("phi", "phidot"), ("u_emb",)

    def __init__(self, c: OutputCurve, params: PvtolParams, grid: TimeGrid | None = None):
        if not params.eps > 0:
            raise ValueError("embedded roll plant needs eps > 0")
        self.c = c
        self.params = params
        self._grid = grid
        if grid is not None:
            th = np.arange(2 * grid.N + 1) * (grid.h / 2)
            self._table = self._accel(th)

    def _accel(self, t):
        acc = self.c(t, 2)
        return np.column_stack([acc[:, 0], self.params.g - acc[:, 1]])

    def accel(self, t):
        """(p, q) = (ydd_d, g - zdd_d) at times t."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self._grid is not None:
            idx = np.rint(t / (self._grid.h / 2)).astype(int)
            ok = (idx >= 0) & (idx < len(self._table)) & np.isclose(idx * (self._grid.h / 2), t, rtol=0, atol=1e-12 * self._grid.T)
            if np.all(ok):
                return self._table[idx]
        return self._accel(t)

    def f(self, t, x, u):
        x, u = _b(x), _b(u)
        pq = self.accel(t)
        s, c = np.sin(x[:, 0]), np.cos(x[:, 0])
        return np.column_stack([x[:, 1], (pq[:, 1] * s - pq[:, 0] * c) / self.params.eps + u[:, 0]])

    def f_x(self, t, x, u):
        x = _b(x)
        pq = self.accel(t)
        s, c = np.sin(x[:, 0]), np.cos(x[:, 0])
        A = np.zeros((x.shape[0], 2, 2))
        A[:, 0, 1] = 1.0
        A[:, 1, 0] = (pq[:, 1] * c + pq[:, 0] * s) / self.params.eps
        return A

    def f_u(self, t, x, u):
        B = np.zeros((_b(x).shape[0], 2, 1))
        B[:, 1, 0] = 1.0
        return B

    def hess(self, t, x, u, w):
        x, w = _b(x), _b(w)
        pq = self.accel(t)
        s, c = np.sin(x[:, 0]), np.cos(x[:, 0])
        H = np.zeros((x.shape[0], 3, 3))
        H[:, 0, 0] = w[:, 1] * (-pq[:, 1] * s + pq[:, 0] * c) / self.params.eps
        return H


class DynamicExtension(PlantModel):
    """x' = f(x, w), w' = v: the base inputs become states, their rates the inputs."""

    def __init__(self, base: PlantModel):
        self.base = base
        self.n = base.n + base.m
        self.m = base.m
        self.state_names = tuple(base.state_names) + tuple(base.input_names)
        self.input_names = tuple(f"{nm}_rate" for nm in base.input_names)

    def __repr__(self):
        return f"DynamicExtension({self.base!r})"

    def _split(self, x):
        x = _b(x)
        return x[:, : self.base.n], x[:, self.base.n :]

    def f(self, t, x, u):
        xb, w = self._split(x)
        return np.concatenate([self.base.f(t, xb, w), _b(u)], axis=1)

    def f_x(self, t, x, u):
        xb, w = self._split(x)
        nb = self.base.n
        A = np.zeros((xb.shape[0], self.n, self.n))
        A[:, :nb, :nb] = self.base.f_x(t, xb, w)
        A[:, :nb, nb:] = self.base.f_u(t, xb, w)
        return A

    def f_u(self, t, x, u):
        B = np.zeros((_b(x).shape[0], self.n, self.m))
        B[:, self.base.n :, :] = np.eye(self.m)
        return B

    def hess(self, t, x, u, w):
        xb, wb = self._split(x)
        w = _b(w)
        H = np.zeros((xb.shape[0], self.n + self.m, self.n + self.m))
        H[:, : self.n, : self.n] = self.base.hess(t, xb, wb, w[:, : self.base.n])
        return H


def dynamic_extension(base: PlantModel) -> DynamicExtension:
    return DynamicExtension(base)


def jacobian_errors(model: PlantModel, rng: np.random.Generator, n_points: int = 100, t_range=(0.0, 1.0)):
    """Largest relative mismatch of f_x, f_u and hess against central differences.

    Relative error is |analytic - fd| / max(1, |analytic|_max) per point.
    """
    n, m = model.n, model.m
    t = rng.uniform(*t_range, size=n_points)
    x = rng.normal(size=(n_points, n))
    u = rng.normal(size=(n_points, m))
    w = rng.normal(size=(n_points, n))
    A, B = model.f_x(t, x, u), model.f_u(t, x, u)
    H = model.hess(t, x, u, w)
    errA = errB = errH = 0.0
    for j in range(n):
        d = np.zeros(n)
        hj = 1e-6 * max(1.0, np.abs(x[:, j]).max())
        d[j] = hj
        fd = (model.f(t, x + d, u) - model.f(t, x - d, u)) / (2 * hj)
        errA = max(errA, np.max(np.abs(A[:, :, j] - fd) / np.maximum(1.0, np.abs(A).max(axis=(1, 2)))[:, None]))
        gfd = (np.einsum("bij,bi->bj", model.f_x(t, x + d, u), w) - np.einsum("bij,bi->bj", model.f_x(t, x - d, u), w)) / (2 * hj)
        hfd = np.concatenate([gfd, (np.einsum("bij,bi->bj", model.f_u(t, x + d, u), w) - np.einsum("bij,bi->bj", model.f_u(t, x - d, u), w)) / (2 * hj)], axis=1)
        errH = max(errH, np.max(np.abs(H[:, :, j] - hfd) / np.maximum(1.0, np.abs(H).max(axis=(1, 2)))[:, None]))
    for j in range(m):
        d = np.zeros(m)
        hj = 1e-6 * max(1.0, np.abs(u[:, j]).max())
        d[j] = hj
        fd = (model.f(t, x, u + d) - model.f(t, x, u - d)) / (2 * hj)
        errB = max(errB, np.max(np.abs(B[:, :, j] - fd) / np.maximum(1.0, np.abs(B).max(axis=(1, 2)))[:, None]))
        gfd = np.concatenate(
            [
                (np.einsum("bij,bi->bj", model.f_x(t, x, u + d), w) - np.einsum("bij,bi->bj", model.f_x(t, x, u - d), w)) / (2 * hj),
                (np.einsum("bij,bi->bj", model.f_u(t, x, u + d), w) - np.einsum("bij,bi->bj", model.f_u(t, x, u - d), w)) / (2 * hj),
            ],
            axis=1,
        )
        errH = max(errH, np.max(np.abs(H[:, :, n + j] - gfd) / np.maximum(1.0, np.abs(H).max(axis=(1, 2)))[:, None]))
    return {"f_x": float(errA), "f_u": float(errB), "hess": float(errH)}
