"""Characteristic tracing through a frozen field iterate.

A characteristic through (x, y) with slope field w is the curve tau -> g(tau)
with g' = w(tau, g) and g(x) = y. Values are transported by integrating a
right-hand side along that curve from the axis x = 0.

The scalar API (``interpolate``, ``trace``, ``integrate_along``) is what tests
and the verifier use. The solver calls ``sweep``, which traces every grid node
at once with the same arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import OutOfDomain

FIELDS = ("r", "s", "p", "q", "z")
FIELD_INDEX = {name: i for i, name in enumerate(FIELDS)}


@dataclass(frozen=True, eq=False)
class FieldGrid:
    """Five fields on levels x_k = k*h_x (k = 0..K) times a uniform y-grid.

    ``values`` has shape (5, K+1, J) in the order r, s, p, q, z.
    ``clamped`` marks nodes whose characteristics left the y-extent.
    """

    h_x: float
    y_min: float
    h_y: float
    values: np.ndarray
    clamped: np.ndarray

    def __post_init__(self):
        self.values.setflags(write=False)
        self.clamped.setflags(write=False)

    @property
    def K(self):
        return self.values.shape[1] - 1

    @property
    def J(self):
        return self.values.shape[2]

    @property
    def xs(self):
        return self.h_x * np.arange(self.K + 1)

    @property
    def ys(self):
        return self.y_min + self.h_y * np.arange(self.J)

    @property
    def x_max(self):
        return self.h_x * self.K

    @property
    def y_max(self):
        return self.y_min + self.h_y * (self.J - 1)

    def field(self, name):
        return self.values[FIELD_INDEX[name]]

    def replace(self, values, clamped=None):
        return FieldGrid(self.h_x, self.y_min, self.h_y, values,
                         self.clamped if clamped is None else clamped)


def _locate(grid, x, y):
    K, J = grid.K, grid.J
    lx = np.asarray(x, dtype=float) / grid.h_x
    if K == 0:
        L = np.zeros(np.shape(lx), dtype=int)
        wx = np.zeros(np.shape(lx))
    else:
        L = np.clip(np.floor(lx).astype(int), 0, K - 1)
        wx = lx - L
    t = (np.asarray(y, dtype=float) - grid.y_min) / grid.h_y
    clamped = (t < -1e-9) | (t > J - 1 + 1e-9)
    t = np.clip(t, 0.0, J - 1)
    i = np.minimum(np.floor(t).astype(int), J - 2)
    wy = t - i
    return L, wx, i, wy, clamped


def _bilinear(vals, L, wx, i, wy, K):
    """vals: (..., K+1, J); returns (..., N)."""
    a = vals[..., L, i] * (1.0 - wy) + vals[..., L, i + 1] * wy
    if K == 0:
        return a
    b = vals[..., L + 1, i] * (1.0 - wy) + vals[..., L + 1, i + 1] * wy
    return a * (1.0 - wx) + b * wx


def sample(grid: FieldGrid, x, y, which=None):
    """Bilinear values of all (or selected) fields; returns (values, clamped)."""
    L, wx, i, wy, clamped = _locate(grid, x, y)
    vals = grid.values if which is None else grid.values[which]
    return _bilinear(vals, L, wx, i, wy, grid.K), clamped


def interpolate(grid: FieldGrid, x, y, field):
    """Bilinear interpolation of one field; y outside the grid is clamped."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < -1e-12) or np.any(xa > grid.x_max * (1 + 1e-12) + 1e-12):
        raise OutOfDomain(f"x = {x} outside [0, {grid.x_max}]")
    vals, _ = sample(grid, np.clip(xa, 0.0, grid.x_max), y, FIELD_INDEX[field])
    return float(vals) if np.ndim(vals) == 0 else vals


@dataclass(frozen=True)
class CharPath:
    slope_field: str
    taus: np.ndarray  # from the query x down to 0
    ys: np.ndarray
    clamped: bool

    @property
    def foot(self):
        return float(self.ys[-1])


def _rk4_back(grid, slope_idx, tau, g, h):
    """One classical RK4 step of g' = w(tau, g) from tau to tau - h."""
    slope = grid.values[slope_idx]
    K = grid.K

    def w(t, y):
        L, wx, i, wy, c = _locate(grid, t, y)
        return _bilinear(slope, L, wx, i, wy, K), c

    k1, c1 = w(tau, g)
    k2, c2 = w(tau - h / 2, g - h / 2 * k1)
    k3, c3 = w(tau - h / 2, g - h / 2 * k2)
    k4, c4 = w(tau - h, g - h * k3)
    g_new = g - h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return g_new, c1 | c2 | c3 | c4


def trace(grid: FieldGrid, start, slope_field, substeps=1) -> CharPath:
    """Trace the characteristic through ``start`` = (x, y) back to x = 0."""
    x, y = float(start[0]), float(start[1])
    if x < -1e-12 or x > grid.x_max * (1 + 1e-12) + 1e-12:
        raise OutOfDomain(f"x = {x} outside [0, {grid.x_max}]")
    n = int(np.ceil(x / grid.h_x - 1e-9)) * substeps
    taus = [x]
    ys = [y]
    clamped = bool(_locate(grid, x, y)[4])
    if n > 0:
        h = x / n
        g = np.array([y])
        idx = FIELD_INDEX[slope_field]
        for m in range(n):
            tau = x - m * h
            g, c = _rk4_back(grid, idx, np.array([tau]), g, h)
            clamped |= bool(c[0]) or bool(_locate(grid, tau - h, g)[4][0])
            taus.append(x - (m + 1) * h)
            ys.append(float(g[0]))
    return CharPath(slope_field, np.array(taus), np.array(ys), clamped)


def integrate_along(grid: FieldGrid, path: CharPath, integrand, init=0.0, vectorized=False):
    """init + trapezoid rule of integrand(tau, y, state) over the path nodes.

    ``state`` is the 5-vector of bilinearly interpolated fields at the node.
    With ``vectorized`` the integrand is called once with arrays of all
    nodes and a (5, N) state.
    """
    vals, _ = sample(grid, path.taus, path.ys)
    if vectorized:
        f = np.broadcast_to(np.asarray(integrand(path.taus, path.ys, vals), dtype=float),
                            path.taus.shape)
    else:
        f = np.array([float(integrand(t, y, vals[:, k]))
                      for k, (t, y) in enumerate(zip(path.taus, path.ys))])
    if len(f) < 2:
        return float(init)
    # taus decrease along the path
    return float(init + np.sum(0.5 * (f[:-1] + f[1:]) * (path.taus[:-1] - path.taus[1:])))


@njit(cache=True, nogil=True, inline="always")
def _cell(K, J, tau, y, h_x, y_min, h_y):
    lx = tau / h_x
    if K == 0:
        L = 0
        wx = 0.0
    else:
        L = int(np.floor(lx))
        L = min(max(L, 0), K - 1)
        wx = lx - L
    t = (y - y_min) / h_y
    out = t < -1e-9 or t > J - 1 + 1e-9
    t = min(max(t, 0.0), J - 1.0)
    i = min(int(np.floor(t)), J - 2)
    return L, wx, i, t - i, out


@njit(cache=True, nogil=True, inline="always")
def _blend(V, K, L, wx, i, wy):
    a = V[L, i] * (1.0 - wy) + V[L, i + 1] * wy
    if K == 0:
        return a
    b = V[L + 1, i] * (1.0 - wy) + V[L + 1, i + 1] * wy
    return a * (1.0 - wx) + b * wx


@njit(cache=True, nogil=True)
def _sweep_kernel(slope, F, levels, cols, h_x, y_min, h_y, substeps, foot, acc, clamped):
    K = slope.shape[0] - 1
    J = slope.shape[1]
    m = F.shape[0]
    h = h_x / substeps
    f_prev = np.empty(m)
    for n in range(levels.shape[0]):
        k = levels[n]
        x = h_x * k
        g = y_min + h_y * cols[n]
        L, wx, i, wy, out = _cell(K, J, x, g, h_x, y_min, h_y)
        hit = out
        for f in range(m):
            f_prev[f] = _blend(F[f], K, L, wx, i, wy)
            acc[f, n] = 0.0
        for step in range(k * substeps):
            tau = x - step * h
            L, wx, i, wy, out = _cell(K, J, tau, g, h_x, y_min, h_y)
            k1 = _blend(slope, K, L, wx, i, wy)
            hit |= out
            L, wx, i, wy, out = _cell(K, J, tau - h / 2, g - h / 2 * k1, h_x, y_min, h_y)
            k2 = _blend(slope, K, L, wx, i, wy)
            hit |= out
            L, wx, i, wy, out = _cell(K, J, tau - h / 2, g - h / 2 * k2, h_x, y_min, h_y)
            k3 = _blend(slope, K, L, wx, i, wy)
            hit |= out
            L, wx, i, wy, out = _cell(K, J, tau - h, g - h * k3, h_x, y_min, h_y)
            k4 = _blend(slope, K, L, wx, i, wy)
            hit |= out
            g = g - h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            L, wx, i, wy, out = _cell(K, J, tau - h, g, h_x, y_min, h_y)
            hit |= out
            for f in range(m):
                fv = _blend(F[f], K, L, wx, i, wy)
                acc[f, n] += 0.5 * h * (f_prev[f] + fv)
                f_prev[f] = fv
        foot[n] = g
        clamped[n] = hit


def sweep(slope_grid: FieldGrid, integrand_vals, slope_field, levels, cols, substeps=1):
    """Trace every node (levels[i], cols[i]) back to the axis in one batch.

    ``integrand_vals`` holds right-hand sides already evaluated at the grid
    nodes, shape (m, K+1, J); along the path they are interpolated like the
    fields. Returns (foot y, accumulated integrals (m, N), clamped flags).
    Arithmetic matches ``trace`` + trapezoid accumulation node by node.
    """
    levels = np.ascontiguousarray(levels, dtype=np.int64)
    cols = np.ascontiguousarray(cols, dtype=np.int64)
    F = np.ascontiguousarray(integrand_vals, dtype=float)
    slope = np.ascontiguousarray(slope_grid.values[FIELD_INDEX[slope_field]])
    n = len(levels)
    foot = np.empty(n)
    acc = np.empty((F.shape[0], n))
    clamped = np.empty(n, dtype=np.bool_)
    _sweep_kernel(slope, F, levels, cols, float(slope_grid.h_x), float(slope_grid.y_min),
                  float(slope_grid.h_y), int(substeps), foot, acc, clamped)
    return foot, acc, clamped
