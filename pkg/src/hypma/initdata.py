"""Initial functions on the axis x = 0.

Two directions are supported: from the Cauchy data (z0, p0) the invariants
follow pointwise, and from prescribed invariants (r0, s0) the Cauchy data
follow by integrating a three-equation ODE system in y.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr as E
from .coeffs import SEPARATION_FLOOR, CoefficientSet
from .errors import ConfigError, FreeAxisError, SeparationError

AXIS_FIELDS = ("r", "s", "p", "q", "z")


@dataclass(frozen=True)
class YGrid:
    y_min: float
    y_max: float
    h: float

    def __post_init__(self):
        if not (self.h > 0 and self.y_max > self.y_min):
            raise ConfigError(f"bad y-grid [{self.y_min}, {self.y_max}] step {self.h}")
        n = (self.y_max - self.y_min) / self.h
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ConfigError(f"step {self.h} does not divide [{self.y_min}, {self.y_max}]")

    @property
    def n(self):
        return int(round((self.y_max - self.y_min) / self.h)) + 1

    @property
    def points(self):
        return self.y_min + self.h * np.arange(self.n)


@dataclass(frozen=True, eq=False)
class InitialData:
    """Samples of the five fields at x = 0 plus their y-derivatives.

    ``derivs`` maps each field name to the sampled y-derivative (exact where
    the data came from expressions).
    """

    grid: YGrid
    r: np.ndarray
    s: np.ndarray
    p: np.ndarray
    q: np.ndarray
    z: np.ndarray
    derivs: dict
    origin: str
    z_yy: np.ndarray = field(default=None)
    p_y: np.ndarray = field(default=None)
    exprs: dict = field(default=None)

    @property
    def y(self):
        return self.grid.points

    def fields(self):
        return np.stack([self.r, self.s, self.p, self.q, self.z])

    def at(self, y):
        """Linear interpolation of all five fields at arbitrary y.

        Returns (values[5, ...], clamped) where clamped marks queries outside
        the sampled range; those take the boundary sample.
        """
        y = np.asarray(y, dtype=float)
        t = (y - self.grid.y_min) / self.grid.h
        n = self.grid.n
        clamped = (t < -1e-9) | (t > n - 1 + 1e-9)
        t = np.clip(t, 0.0, n - 1)
        i = np.minimum(np.floor(t).astype(int), n - 2)
        w = t - i
        f = self.fields()
        vals = f[:, i] * (1.0 - w) + f[:, i + 1] * w
        return vals, clamped


def _axis_jet_expr(e, z0, p0, z0_y):
    """Substitute the axis jet (0, y, z0(y), p0(y), z0'(y)) into e."""
    return E.substitute(e, {"x": E.Const(0.0), "z": z0, "p": p0, "q": z0_y})


def _eval_y(e, y):
    out = E.compile_expr(e)({"y": y})
    return np.broadcast_to(np.asarray(out, dtype=float), np.shape(y)).copy()


def from_zp(cs: CoefficientSet, z0, p0, grid: YGrid, separation_floor=SEPARATION_FLOOR):
    z0 = E.as_expr(z0, ("y",))
    p0 = E.as_expr(p0, ("y",))
    z0_y = E.differentiate(z0, "y")
    z0_yy = E.differentiate(z0_y, "y")
    p0_y = E.differentiate(p0, "y")
    y = grid.points

    zv, pv, qv = _eval_y(z0, y), _eval_y(p0, y), _eval_y(z0_y, y)
    zyy, py = _eval_y(z0_yy, y), _eval_y(p0_y, y)
    ev = cs.evaluate(0.0 * y, y, zv, pv, qv)

    den = zyy + ev.B
    bad = np.abs(den) < separation_floor
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise FreeAxisError(float(y[i]), float(den[i]))
    r = (ev.C + ev.Dl - 2.0 * py) / (2.0 * den)
    s = (ev.C - ev.Dl - 2.0 * py) / (2.0 * den)

    # exact y-derivatives of r0, s0 through the substituted expressions
    disc = E.add(E.sub(E.mul(cs.C, cs.C), E.mul(E.Const(4.0), E.mul(cs.B, cs.D))),
                 E.mul(E.Const(4.0), cs.A))
    root = E.func("sqrt", disc)
    C_ax, B_ax, root_ax = (_axis_jet_expr(e, z0, p0, z0_y) for e in (cs.C, cs.B, root))
    two_den = E.mul(E.Const(2.0), E.add(z0_yy, B_ax))
    r_expr = E.div(E.sub(E.add(C_ax, root_ax), E.mul(E.Const(2.0), p0_y)), two_den)
    s_expr = E.div(E.sub(E.sub(C_ax, root_ax), E.mul(E.Const(2.0), p0_y)), two_den)
    derivs = {
        "r": _eval_y(E.differentiate(r_expr, "y"), y),
        "s": _eval_y(E.differentiate(s_expr, "y"), y),
        "p": py,
        "q": zyy,
        "z": qv,
    }
    return InitialData(grid, r, s, pv, qv, zv, derivs, "from_zp", z_yy=zyy, p_y=py,
                       exprs={"z0": z0, "p0": p0})


def _axis_rhs(cs, y, z, p, q, r0, s0, separation_floor):
    gap = r0 - s0
    if abs(gap) < separation_floor:
        raise SeparationError(abs(gap), (0.0, float(y)))
    ev = cs.evaluate(0.0, y, z, p, q)
    dp = -0.5 * ev.Dl * (r0 + s0) / gap + 0.5 * ev.C
    dq = ev.Dl / gap - ev.B
    return np.array([float(q), float(dp), float(dq)])


def from_rs(cs: CoefficientSet, r0, s0, anchor, grid: YGrid, anchor_y=None,
            separation_floor=SEPARATION_FLOOR):
    """Cauchy data from prescribed invariants.

    ``anchor`` is (z0, p0, q0) at ``anchor_y`` (default y_min). The ODE is
    integrated with classical RK4, one step per grid spacing, outward from
    the anchor in both directions.
    """
    r0 = E.as_expr(r0, ("y",))
    s0 = E.as_expr(s0, ("y",))
    fr, fs = E.compile_expr(r0), E.compile_expr(s0)
    rv = lambda t: float(fr({"y": t}))
    sv = lambda t: float(fs({"y": t}))
    y = grid.points
    n = grid.n
    if anchor_y is None:
        anchor_y = grid.y_min
    k0 = (anchor_y - grid.y_min) / grid.h
    if abs(k0 - round(k0)) > 1e-9 or not (0 <= round(k0) < n):
        raise ConfigError(f"anchor y = {anchor_y} is not a grid node")
    k0 = int(round(k0))

    state = np.empty((n, 3))
    state[k0] = np.asarray(anchor, dtype=float)

    def f(t, u):
        return _axis_rhs(cs, t, u[0], u[1], u[2], rv(t), sv(t), separation_floor)

    for direction in (1, -1):
        k = k0
        h = direction * grid.h
        while 0 <= k + direction < n:
            t, u = y[k], state[k]
            k1 = f(t, u)
            k2 = f(t + h / 2, u + h / 2 * k1)
            k3 = f(t + h / 2, u + h / 2 * k2)
            k4 = f(t + h, u + h * k3)
            state[k + direction] = u + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            k += direction

    zv, pv, qv = state[:, 0], state[:, 1], state[:, 2]
    r, s = _eval_y(r0, y), _eval_y(s0, y)
    rhs = np.array([f(t, u) for t, u in zip(y, state)])
    derivs = {
        "r": _eval_y(E.differentiate(r0, "y"), y),
        "s": _eval_y(E.differentiate(s0, "y"), y),
        "p": rhs[:, 1],
        "q": rhs[:, 2],
        "z": qv.copy(),
    }
    return InitialData(grid, r, s, pv, qv, zv, derivs, "from_rs", z_yy=rhs[:, 2], p_y=rhs[:, 1],
                       exprs={"r0": r0, "s0": s0})


def window_mask(init: InitialData, y_min, y_max):
    y = init.y
    tol = 1e-9 * init.grid.h
    return (y >= y_min - tol) & (y <= y_max + tol)


def check_axis(init: InitialData, cs: CoefficientSet, gap=None, gap_floor=None, y_range=None):
    """Sampled axis quantities and the verdicts that depend on them alone.

    ``y_range`` restricts the samples (e.g. to exclude a solver halo).
    """
    if y_range is not None:
        init = restrict(init, *y_range)
    gap_candidate = float(init.r.min() - init.s.max())
    sup_r = float(np.abs(init.r).max())
    sup_s = float(np.abs(init.s).max())
    sup_p = float(np.abs(init.p).max())
    sup_q = float(np.abs(init.q).max())
    if gap is None:
        gap = gap_candidate
    if gap_floor is None:
        gap_floor = gap
    margin = (gap - gap_floor) / 2.0
    ev = cs.evaluate(0.0 * init.y, init.y, init.z, init.p, init.q)
    identity = init.r - init.s - ev.Dl / (init.z_yy + ev.B)

    def verdict(ok):
        return "pass" if ok else "fail"

    return {
        "samples": int(init.grid.n),
        "h_y": init.grid.h,
        "gap_candidate": gap_candidate,
        "sup_abs_r0": sup_r,
        "sup_abs_s0": sup_s,
        "sup_abs_p0": sup_p,
        "sup_abs_q0": sup_q,
        "axis_identity_defect": float(np.abs(identity).max()),
        "verdicts": {
            "cauchy_data_bounded": verdict(sup_p <= 1.0 and sup_q <= 1.0),
            "initial_gap": verdict(gap > 0 and gap_candidate >= gap),
            "invariants_bounded": verdict(max(sup_r, sup_s) <= 1.0 - margin
                                          and sup_p <= 1.0 and sup_q <= 1.0),
            "gap_from_data": verdict(gap > 0 and gap_candidate >= gap),
        },
    }


def restrict(init: InitialData, y_min, y_max) -> InitialData:
    """The samples of ``init`` that lie in [y_min, y_max]."""
    m = window_mask(init, y_min, y_max)
    idx = np.flatnonzero(m)
    g = YGrid(float(init.y[idx[0]]), float(init.y[idx[-1]]), init.grid.h)
    pick = lambda a: None if a is None else a[idx]
    return InitialData(g, init.r[idx], init.s[idx], init.p[idx], init.q[idx], init.z[idx],
                       {k: v[idx] for k, v in init.derivs.items()}, init.origin,
                       z_yy=pick(init.z_yy), p_y=pick(init.p_y), exprs=init.exprs)
