"""Successive approximations for the five transport equations.

Iterate n+1 is obtained from iterate n by tracing, for every node, the two
characteristic families back to the axis and integrating the right-hand sides
frozen at iterate n:

    r, p  along slope s;   s, q, z  along slope r.

After convergence the second derivatives are reconstructed from (r, s) and
the equation residual is evaluated twice: algebraically (zero by
construction) and from finite differences of z (an independent check).
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .coeffs import (HYPERBOLICITY_FLOOR, SEPARATION_FLOOR, CoefficientSet,
                     pde_residual, rhs_arrays, second_derivatives)
from .errors import ConfigError, NotConverged
from .initdata import InitialData, YGrid
from .trace import FieldGrid, sweep


@dataclass
class SolverConfig:
    x_max: float = 1.0
    y_min: float = -1.0
    y_max: float = 1.0
    h_x: float = 1 / 64
    h_y: float = 1 / 64
    x_min: float = 0.0
    max_iterations: int = 50
    convergence_tol: float = 1e-10
    slope_mode: str = "lagged"
    inner_iters: int = 1
    substeps: int = 1
    halo: float | None = None  # None: sized from the initial slopes
    threads: int = 1
    hyperbolicity_floor: float = HYPERBOLICITY_FLOOR
    separation_floor: float = SEPARATION_FLOOR

    def __post_init__(self):
        if not (self.h_x > 0 and self.h_y > 0):
            raise ConfigError("steps must be positive")
        if not self.convergence_tol > 0:
            raise ConfigError("convergence_tol must be positive")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if self.slope_mode not in ("lagged", "inner-fixed-point"):
            raise ConfigError(f"unknown slope_mode {self.slope_mode!r}")
        if not (self.x_max >= 0 >= self.x_min and self.x_max > self.x_min):
            raise ConfigError("need x_min <= 0 <= x_max with a nonempty range")
        for span in (self.x_max, -self.x_min):
            k = span / self.h_x
            if abs(k - round(k)) > 1e-9 * max(1.0, k):
                raise ConfigError(f"h_x = {self.h_x} does not divide x-range")
        YGrid(self.y_min, self.y_max, self.h_y)

    @property
    def levels(self):
        return int(round(self.x_max / self.h_x))


def working_grid(cfg: SolverConfig, slope_bound: float, x_span=None) -> YGrid:
    """y-grid padded so that characteristics from the window stay inside.

    The pad is 1.25 * x_span * slope_bound plus one step, rounded up to a
    whole number of steps; an explicit ``cfg.halo`` overrides it.
    """
    if x_span is None:
        x_span = max(cfg.x_max, -cfg.x_min)
    pad = cfg.halo if cfg.halo is not None else 1.25 * x_span * slope_bound + cfg.h_y
    n = int(math.ceil(pad / cfg.h_y - 1e-9))
    return YGrid(cfg.y_min - n * cfg.h_y, cfg.y_max + n * cfg.h_y, cfg.h_y)


def initial_grid(init: InitialData, cfg: SolverConfig, levels=None) -> FieldGrid:
    K = cfg.levels if levels is None else levels
    vals = np.repeat(init.fields()[:, None, :], K + 1, axis=1)
    return FieldGrid(cfg.h_x, init.grid.y_min, init.grid.h, vals,
                     np.zeros((K + 1, init.grid.n), dtype=bool))


def _stack(vals, n):
    return np.stack([np.broadcast_to(np.asarray(v, dtype=float), (n,)) for v in vals])


def node_rhs(cs, grid: FieldGrid):
    """All five right-hand sides at every node of ``grid``, shape (5, K+1, J)."""
    X, Y = np.meshgrid(grid.xs, grid.ys, indexing="ij")
    out = rhs_arrays(cs, X, Y, *grid.values)
    return np.stack([np.broadcast_to(np.asarray(v, dtype=float), X.shape) for v in out])


def _sweep_chunk(slope_grid, F, init, cols, substeps):
    K = slope_grid.K
    levels = np.repeat(np.arange(K + 1), len(cols))
    cc = np.tile(cols, K + 1)
    foot_s, acc_s, cl_s = sweep(slope_grid, F[[0, 2]], "s", levels, cc, substeps)
    foot_r, acc_r, cl_r = sweep(slope_grid, F[[1, 3, 4]], "r", levels, cc, substeps)
    at_s, out_s = init.at(foot_s)
    at_r, out_r = init.at(foot_r)
    new = np.empty((5, len(levels)))
    new[0] = at_s[0] + acc_s[0]
    new[2] = at_s[2] + acc_s[1]
    new[1] = at_r[1] + acc_r[0]
    new[3] = at_r[3] + acc_r[1]
    new[4] = at_r[4] + acc_r[2]
    clamped = cl_s | cl_r | out_s | out_r
    return new.reshape(5, K + 1, len(cols)), clamped.reshape(K + 1, len(cols))


def _sweep(slope_grid, F, init, cfg):
    J = slope_grid.J
    nt = max(1, int(cfg.threads))
    if nt == 1:
        vals, cl = _sweep_chunk(slope_grid, F, init, np.arange(J), cfg.substeps)
    else:
        chunks = np.array_split(np.arange(J), nt)
        with ThreadPoolExecutor(max_workers=nt) as ex:
            parts = list(ex.map(lambda c: _sweep_chunk(slope_grid, F, init, c, cfg.substeps),
                                chunks))
        vals = np.concatenate([p[0] for p in parts], axis=2)
        cl = np.concatenate([p[1] for p in parts], axis=1)
    return slope_grid.replace(vals, cl)


def iterate_once(cs: CoefficientSet, prev: FieldGrid, init: InitialData, cfg: SolverConfig) -> FieldGrid:
    """One successive-approximation step.

    Right-hand sides are always frozen at ``prev``: they are evaluated at its
    nodes and interpolated along the characteristics. In lagged mode the
    slopes come from ``prev`` too; in inner-fixed-point mode the sweep is
    repeated ``inner_iters`` more times with slopes from the newest result.
    """
    F = node_rhs(cs, prev)
    new = _sweep(prev, F, init, cfg)
    if cfg.slope_mode == "inner-fixed-point":
        for _ in range(cfg.inner_iters):
            new = _sweep(new, F, init, cfg)
    return new


def sup_difference(a: FieldGrid, b: FieldGrid) -> float:
    return float(np.max(np.abs(a.values - b.values)))


def _second_diff(a, h, axis):
    a = np.moveaxis(a, axis, 0)
    out = np.full(a.shape, np.nan)
    n = a.shape[0]
    if n >= 3:
        out[1:-1] = (a[2:] - 2 * a[1:-1] + a[:-2]) / h ** 2
    if n >= 4:
        out[0] = (2 * a[0] - 5 * a[1] + 4 * a[2] - a[3]) / h ** 2
        out[-1] = (2 * a[-1] - 5 * a[-2] + 4 * a[-3] - a[-4]) / h ** 2
    return np.moveaxis(out, 0, axis)


def _first_diff(a, h, axis):
    if a.shape[axis] < 3:
        return np.full(a.shape, np.nan)
    return np.gradient(a, h, axis=axis, edge_order=2)


@dataclass
class SolveResult:
    """Converged (or last) iterate restricted to the requested window.

    ``fields`` has shape (5, nx, ny) on ``xs`` x ``ys``; ``grid`` is the
    full working grid of the x >= 0 half including the y-halo.
    """

    xs: np.ndarray
    ys: np.ndarray
    fields: np.ndarray
    clamped: np.ndarray
    history: list
    converged: bool
    grid: FieldGrid
    zxx: np.ndarray = None
    zxy: np.ndarray = None
    zyy: np.ndarray = None
    residual_alg: np.ndarray = None
    residual_fd: np.ndarray = None
    iterates: list = field(default_factory=list)
    reflected: "SolveResult | None" = None
    elapsed: float = 0.0

    @property
    def iterations(self):
        return len(self.history)

    def field(self, name):
        return self.fields["rspqz".index(name)]

    @property
    def h_x(self):
        return float(self.xs[1] - self.xs[0]) if len(self.xs) > 1 else float("nan")

    @property
    def h_y(self):
        return float(self.ys[1] - self.ys[0])


def _window(grid: FieldGrid, cfg: SolverConfig):
    j0 = int(round((cfg.y_min - grid.y_min) / grid.h_y))
    j1 = int(round((cfg.y_max - grid.y_min) / grid.h_y)) + 1
    if j0 < 0 or j1 > grid.J:
        raise ConfigError("initial data does not cover the requested y-range")
    return slice(j0, j1)


def _run_half(cs, init, cfg, record_iterates, callback):
    cur = initial_grid(init, cfg)
    history = []
    iterates = [cur] if record_iterates else []
    converged = False
    for n in range(1, cfg.max_iterations + 1):
        nxt = iterate_once(cs, cur, init, cfg)
        R = sup_difference(nxt, cur)
        history.append(R)
        cur = nxt
        if record_iterates:
            iterates.append(cur)
        if callback is not None:
            callback(n, R, cur)
        if not math.isfinite(R):
            break
        if R <= cfg.convergence_tol:
            converged = True
            break
    return cur, history, converged, iterates


def reconstruct(cs, res: SolveResult, cfg: SolverConfig):
    """Fill second derivatives and both PDE residuals on ``res`` in place."""
    r, s, p, q, z = res.fields
    X, Y = np.meshgrid(res.xs, res.ys, indexing="ij")
    ev = cs.evaluate(X, Y, z, p, q)
    zxx, zxy, zyy = second_derivatives(ev, r, s, cfg.separation_floor)
    res.zxx, res.zxy, res.zyy = zxx, zxy, zyy
    res.residual_alg = pde_residual(ev, zxx, zxy, zyy)
    hx, hy = res.h_x, res.h_y
    fxx = _second_diff(z, hx, 0)
    fyy = _second_diff(z, hy, 1)
    fxy = _first_diff(_first_diff(z, hy, 1), hx, 0)
    res.residual_fd = pde_residual(ev, fxx, fxy, fyy)


def reflect_initial(init: InitialData) -> InitialData:
    """Axis data for w(x', y) = z(-x', y): p and the roles of r, s flip."""
    d = init.derivs
    derivs = {"r": -d["s"], "s": -d["r"], "p": -d["p"], "q": d["q"], "z": d["z"]}
    return InitialData(init.grid, -init.s, -init.r, -init.p, init.q, init.z, derivs,
                       init.origin, z_yy=init.z_yy, p_y=-init.p_y)


def solve(cs: CoefficientSet, init: InitialData, cfg: SolverConfig, *,
          record_iterates=False, callback=None, raise_on_failure=True) -> SolveResult:
    """Iterate to convergence on [x_min, x_max] x [y_min, y_max].

    ``init`` must cover the window; use ``working_grid`` to size a halo.
    The x < 0 half is solved as a separate x >= 0 problem with reflected
    coefficients and stitched back. Raises NotConverged (carrying the
    result) unless ``raise_on_failure`` is false.
    """
    t0 = time.perf_counter()
    halves = []
    half_cfg = replace(cfg, x_min=0.0)
    grid, hist, conv, its = _run_half(cs, init, half_cfg, record_iterates, callback)
    halves.append((grid, hist, conv, its))
    w = _window(grid, cfg)

    xs = grid.xs
    fields = grid.values[:, :, w]
    clamped = grid.clamped[:, w]
    history, converged = hist, conv
    reflected = None
    if cfg.x_min < 0:
        neg_cfg = replace(cfg, x_min=0.0, x_max=-cfg.x_min)
        rcs = cs.reflected_x()
        g2, h2, c2, its2 = _run_half(rcs, reflect_initial(init), neg_cfg, record_iterates, None)
        reflected = SolveResult(g2.xs, g2.ys[w], g2.values[:, :, w], g2.clamped[:, w],
                                h2, c2, g2, iterates=its2)
        back = g2.values[:, :, w][:, ::-1]
        back = np.stack([-back[1], -back[0], -back[2], back[3], back[4]])
        xs = np.concatenate([-g2.xs[::-1], xs[1:]])
        fields = np.concatenate([back[:, :-1], fields], axis=1)
        clamped = np.concatenate([g2.clamped[::-1, w][:-1], clamped], axis=0)
        # combined history: elementwise max over the two halves
        n = max(len(hist), len(h2))
        pad = lambda h: list(h) + [0.0] * (n - len(h))
        history = [max(a, b) for a, b in zip(pad(hist), pad(h2))]
        converged = conv and c2

    res = SolveResult(xs, grid.ys[w], np.ascontiguousarray(fields), clamped, history,
                      converged, grid, iterates=its, reflected=reflected)
    if converged:
        reconstruct(cs, res, cfg)
    res.elapsed = time.perf_counter() - t0
    if not converged and raise_on_failure:
        raise NotConverged(history, res)
    return res


def outside_determinacy(res: SolveResult, slope_bound=1.0):
    """Window nodes whose backward cone of the given slope leaves [y_min, y_max]."""
    X, Y = np.meshgrid(res.xs, res.ys, indexing="ij")
    y0, y1 = res.ys[0], res.ys[-1]
    reach = slope_bound * np.abs(X)
    return (Y - reach < y0 - 1e-12) | (Y + reach > y1 + 1e-12)
