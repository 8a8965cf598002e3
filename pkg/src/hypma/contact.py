"""Ampere contact transformation on first-order jet space.

The map (x, y, z, p, q) -> (-p, y, z - p x, x, q) preserves the contact form
dz - p dx - q dy, so it sends integral surfaces to integral surfaces. It can
send a graph (a classical solution) to a surface whose projection to the
(x, y)-plane is degenerate everywhere.

2-forms on a parametrized surface are represented by their single pullback
coefficient, i.e. a 2x2 Jacobian determinant in (u, v).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expr as E
from .errors import NonGraphicalImage

PARAMS = ("u", "v")
COMPONENTS = ("x", "y", "z", "p", "q")
CONTACT_TOL = 1e-9
RANK_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class IntegralSurface:
    """Parametrized surface (u, v) -> (x, y, z, p, q) over a box."""

    x: E.Expr
    y: E.Expr
    z: E.Expr
    p: E.Expr
    q: E.Expr
    u_range: tuple = (-1.0, 1.0)
    v_range: tuple = (-1.0, 1.0)

    @classmethod
    def from_strings(cls, comps, u_range=(-1.0, 1.0), v_range=(-1.0, 1.0)):
        return cls(*(E.as_expr(c, PARAMS) for c in comps), u_range=tuple(u_range),
                   v_range=tuple(v_range))

    def components(self):
        return tuple(getattr(self, c) for c in COMPONENTS)

    def strings(self):
        return [E.to_string(c) for c in self.components()]

    def partials(self, var):
        return tuple(E.differentiate(c, var) for c in self.components())

    def evaluate(self, u, v):
        env = {"u": np.asarray(u, dtype=float), "v": np.asarray(v, dtype=float)}
        shape = np.broadcast(env["u"], env["v"]).shape
        return np.stack([np.broadcast_to(np.asarray(E.compile_expr(c)(env), dtype=float), shape)
                         for c in self.components()])

    def jacobian(self, u, v):
        """(5, 2, N) array of partials d(component)/d(u, v)."""
        env = {"u": np.asarray(u, dtype=float), "v": np.asarray(v, dtype=float)}
        shape = np.broadcast(env["u"], env["v"]).shape
        cols = []
        for var in PARAMS:
            cols.append(np.stack([np.broadcast_to(np.asarray(E.compile_expr(d)(env), dtype=float), shape)
                                  for d in self.partials(var)]))
        return np.stack(cols, axis=1)

    def samples(self, n=100, seed=0):
        if not (self.u_range[1] > self.u_range[0] and self.v_range[1] > self.v_range[0]):
            raise ValueError("empty parameter box")
        rng = np.random.default_rng(seed)
        u = rng.uniform(*self.u_range, n)
        v = rng.uniform(*self.v_range, n)
        return u, v


def graph_surface(f, u_range=(-1.0, 1.0), v_range=(-1.0, 1.0)):
    """The 1-jet of z = f(x, y) parametrized by (u, v) = (x, y)."""
    f = E.as_expr(f, ("x", "y"))
    to_uv = {"x": E.Var("u"), "y": E.Var("v")}
    comps = (E.Var("u"), E.Var("v"), f, E.differentiate(f, "x"), E.differentiate(f, "y"))
    return IntegralSurface(*(E.simplify(E.substitute(c, to_uv)) for c in comps),
                           u_range=tuple(u_range), v_range=tuple(v_range))


def ampere_transform(surface: IntegralSurface) -> IntegralSurface:
    x, y, z, p, q = surface.components()
    comps = (E.neg(p), y, E.sub(z, E.mul(p, x)), x, q)
    return IntegralSurface(*(E.simplify(c) for c in comps),
                           u_range=surface.u_range, v_range=surface.v_range)


def contact_defects(surface: IntegralSurface, u, v):
    """Per sample, max over w = u, v of |z_w - p x_w - q y_w|."""
    _, _, _, p, q = surface.evaluate(u, v)
    J = surface.jacobian(u, v)
    return np.maximum(*(np.abs(J[2, w] - p * J[0, w] - q * J[1, w]) for w in range(2)))


def contact_defect(surface: IntegralSurface, u, v):
    """max over samples of the contact-form defect."""
    return float(np.max(contact_defects(surface, u, v)))


def projection_rank(surface: IntegralSurface, sample) -> int:
    """Numerical rank of d(x, y)/d(u, v) at one parameter point."""
    u, v = sample
    J = surface.jacobian(np.array([u]), np.array([v]))[:2, :, 0]
    sv = np.linalg.svd(J, compute_uv=False)
    scale = max(1.0, float(sv[0]))
    return int(np.sum(sv > RANK_TOL * scale))


def pullback(surface: IntegralSurface, pairs, u, v):
    """Coefficient of the pullback of sum of d(a) ^ d(b) over ``pairs``."""
    J = surface.jacobian(u, v)
    idx = {c: i for i, c in enumerate(COMPONENTS)}
    total = 0.0
    for a, b in pairs:
        A, B = J[idx[a]], J[idx[b]]
        total = total + A[0] * B[1] - A[1] * B[0]
    return total


WAVE_FORM = (("x", "q"), ("y", "p"))
MA_FORM = (("p", "q"), ("x", "y"))


def hessian_terms(f):
    f = E.as_expr(f, ("x", "y"))
    fx, fy = E.differentiate(f, "x"), E.differentiate(f, "y")
    return E.differentiate(fx, "x"), E.differentiate(fx, "y"), E.differentiate(fy, "y")


def _eval_xy(e, x, y):
    return np.broadcast_to(np.asarray(E.compile_expr(e)({"x": x, "y": y}), dtype=float), np.shape(x))


def pushed_hessian(image: IntegralSurface, u, v):
    """Hessian of the pushed function where the image projects regularly.

    With (X, Y) the projected coordinates and (P, Q) the image slopes,
    the Hessian is d(P, Q)/d(u, v) times the inverse of d(X, Y)/d(u, v).
    Returns (N, 2, 2).
    """
    J = image.jacobian(u, v)
    XY = np.moveaxis(J[:2], -1, 0)   # (N, 2, 2): rows X, Y
    PQ = np.moveaxis(J[3:5], -1, 0)  # rows P, Q
    return PQ @ np.linalg.inv(XY)


def wave_ma_correspondence(f, u_range=(-1.0, 1.0), v_range=(-1.0, 1.0), n=100, seed=0):
    """(residual of hess f + 1, residual of the pushed wave equation).

    The first value is the max over samples of |hess f + 1|. If f is not a
    solution (that residual above CONTACT_TOL) the second value is None.
    If the image of the graph is not a graph on the samples,
    NonGraphicalImage is raised; it carries the pulled-back wave-form
    residual, which is the coordinate-free form of the same equation.
    """
    fxx, fxy, fyy = hessian_terms(f)
    src = graph_surface(f, u_range, v_range)
    u, v = src.samples(n, seed)
    res_ma = float(np.max(np.abs(_eval_xy(fxx, u, v) * _eval_xy(fyy, u, v)
                                 - _eval_xy(fxy, u, v) ** 2 + 1.0)))
    if res_ma > CONTACT_TOL:
        return res_ma, None
    image = ampere_transform(src)
    ranks = [projection_rank(image, (a, b)) for a, b in zip(u, v)]
    if min(ranks) < 2:
        form = float(np.max(np.abs(pullback(image, WAVE_FORM, u, v))))
        raise NonGraphicalImage(min(ranks), res_ma, form)
    H = pushed_hessian(image, u, v)
    return res_ma, float(np.max(np.abs(H[:, 0, 0] - H[:, 1, 1])))


DEMO_SURFACES = {
    "product": ("u", "v", "u*v", "v", "u"),
    "zero_section": ("u", "v", "0", "0", "0"),
    "constant": ("1", "2", "3", "0", "0"),
}
