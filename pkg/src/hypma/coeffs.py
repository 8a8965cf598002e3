"""Coefficient algebra of the hyperbolic Monge-Ampere equation

    A + B z_xx + C z_xy + D z_yy + (z_xx z_yy - z_xy^2) = 0,

where A, B, C, D depend on the jet (x, y, z, p=z_x, q=z_y).

Everything here is pointwise algebra: the discriminant, the polynomial right
hand sides of the five transport equations for (r, s, p, q, z), an
independently transcribed alternative form of the (r, s) right-hand sides used
only as a test oracle, and the map from invariants back to second derivatives.
All functions accept numpy arrays and broadcast.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import SimpleNamespace

import numpy as np

from . import expr as E
from .errors import HyperbolicityError, SeparationError

HYPERBOLICITY_FLOOR = 1e-12
SEPARATION_FLOOR = 1e-10

# Index groups of the r/s equation coefficients: monomials without p, q and
# monomials carrying a factor p or q.
RS_GROUP = (0, 1, 2, 7, 8, 13)
PQ_GROUP = (3, 4, 5, 6, 9, 10, 11, 12)


class CoefficientSet:
    """The four coefficient expressions plus compiled first partials.

    Discriminant partials are obtained by implicit differentiation of
    disc^2 = C^2 - 4BD + 4A, never by differentiating a square root.
    """

    def __init__(self, A, B, C, D, hyperbolicity_floor=HYPERBOLICITY_FLOOR):
        self.A, self.B, self.C, self.D = (E.as_expr(c) for c in (A, B, C, D))
        self.hyperbolicity_floor = hyperbolicity_floor
        self.partials = {}
        for name in "ABCD":
            e = getattr(self, name)
            for v in E.JET_VARIABLES:
                self.partials[f"{name}_{v}"] = E.differentiate(e, v)
        self._f = {name: E.compile_expr(getattr(self, name)) for name in "ABCD"}
        self._df = {k: E.compile_expr(e) for k, e in self.partials.items()}

    def __repr__(self):
        parts = ", ".join(f"{n}={E.to_string(getattr(self, n))!r}" for n in "ABCD")
        return f"CoefficientSet({parts})"

    def strings(self):
        return {n: E.to_string(getattr(self, n)) for n in "ABCD"}

    def depends_on(self, names):
        used = set()
        for n in "ABCD":
            used |= E.free_variables(getattr(self, n))
        return bool(used & set(names))

    def evaluate(self, x, y, z, p, q):
        """Coefficients, discriminant and all first partials at jet points.

        Returns a namespace with A, B, C, D, disc2, Dl (the positive
        discriminant root) and attributes like ``B_x`` or ``Dl_q``.
        """
        env = {"x": x, "y": y, "z": z, "p": p, "q": q}
        with np.errstate(over="ignore", invalid="ignore"):
            ns = SimpleNamespace(**{n: f(env) for n, f in self._f.items()})
            for k, f in self._df.items():
                setattr(ns, k, f(env))
        A, B, C, D = ns.A, ns.B, ns.C, ns.D
        disc2 = C * C - 4.0 * B * D + 4.0 * A
        bad = np.asarray(disc2 <= self.hyperbolicity_floor)
        if bad.any():
            i = np.flatnonzero(np.broadcast_to(bad, np.broadcast(*env.values()).shape))[0] if bad.ndim else None
            loc = _location(env, i)
            val = float(np.asarray(disc2).reshape(-1)[i] if i is not None else disc2)
            raise HyperbolicityError(val, loc)
        Dl = np.sqrt(disc2)
        ns.disc2, ns.Dl = disc2, Dl
        for v in E.JET_VARIABLES:
            setattr(ns, f"Dl_{v}",
                    (C * getattr(ns, f"C_{v}") - 2.0 * getattr(ns, f"B_{v}") * D
                     - 2.0 * B * getattr(ns, f"D_{v}") + 2.0 * getattr(ns, f"A_{v}")) / Dl)
        return ns

    def reflected_x(self):
        """Coefficients of the equation for w(x', y) = z(-x', y).

        Used to solve on x <= 0 with the x >= 0 machinery: A, B, D keep their
        sign and C flips, all evaluated at (-x', y, z, -p', q).
        """
        m = {"x": E.neg(E.Var("x")), "p": E.neg(E.Var("p"))}
        return CoefficientSet(E.substitute(self.A, m), E.substitute(self.B, m),
                              E.neg(E.substitute(self.C, m)), E.substitute(self.D, m),
                              self.hyperbolicity_floor)

    def reflected_y(self):
        """Coefficients of the equation for w(x, y') = z(x, -y')."""
        m = {"y": E.neg(E.Var("y")), "q": E.neg(E.Var("q"))}
        return CoefficientSet(E.substitute(self.A, m), E.substitute(self.B, m),
                              E.neg(E.substitute(self.C, m)), E.substitute(self.D, m),
                              self.hyperbolicity_floor)


def _location(env, i):
    if i is None:
        return {k: float(v) for k, v in env.items()}
    out = {}
    for k, v in env.items():
        a = np.asarray(v)
        out[k] = float(a.reshape(-1)[i]) if a.ndim else float(a)
    return out


@dataclass(frozen=True)
class RiemannState:
    r: float
    s: float
    p: float
    q: float
    z: float


@dataclass(frozen=True)
class SystemCoefficients:
    """Coefficient tables of the five right-hand sides at one jet point.

    ``r_eq``/``s_eq`` hold the 14 monomial coefficients of the r and s
    equations, ``p_eq``/``q_eq`` the two coefficients of the linear p and q
    equations.
    """

    r_eq: np.ndarray
    s_eq: np.ndarray
    p_eq: np.ndarray
    q_eq: np.ndarray


def _pt(pt):
    return pt.x, pt.y, pt.z, pt.p, pt.q


def delta(cs: CoefficientSet, pt) -> float:
    """Positive discriminant root at a jet point."""
    return float(cs.evaluate(*_pt(pt)).Dl)


def tables(ev):
    """(r_eq, s_eq, p_eq, q_eq) as lists of arrays from an evaluated namespace."""
    B, C, D, Dl = ev.B, ev.C, ev.D, ev.Dl
    h = 0.5 / Dl  # 1/(2 Dl)
    Cz_p = ev.C_z + ev.Dl_z  # (C + Dl)_z
    Cz_m = ev.C_z - ev.Dl_z  # (C - Dl)_z
    Dz = ev.D_z / Dl
    Bz = ev.B_z / Dl

    Bx, By, Bp, Bq = ev.B_x, ev.B_y, ev.B_p, ev.B_q
    Cx, Cy, Cp, Cq = ev.C_x, ev.C_y, ev.C_p, ev.C_q
    Dx, Dy, Dp, Dq = ev.D_x, ev.D_y, ev.D_p, ev.D_q
    Lx, Ly, Lp, Lq = ev.Dl_x, ev.Dl_y, ev.Dl_p, ev.Dl_q

    # shared parts of the linear and quadratic coefficients
    lin = Cx + 2.0 * Dy + C * Dp - D * Cp - 2.0 * B * Dq + 0.5 * C * Cq + 0.5 * Dl * Lq
    quad = Cy + 2.0 * Bx + C * Bq - B * Cq - 2.0 * D * Bp + 0.5 * C * Cp + 0.5 * Dl * Lp

    r = [None] * 14
    s = [None] * 14
    r[0] = s[0] = Dq
    r[13] = s[13] = -Bp
    r[1] = h * (Lx + lin - D * Lp - 1.5 * Dl * Cq + 0.5 * C * Lq - Dl * Dp)
    r[2] = -h * (Lx + lin - D * Lp + 0.5 * Dl * Cq + 0.5 * C * Lq + Dl * Dp)
    r[7] = -h * (-Ly + quad + B * Lq - 0.5 * Dl * Cp - 0.5 * C * Lp - Dl * Bq)
    r[8] = h * (-Ly + quad + B * Lq + 1.5 * Dl * Cp - 0.5 * C * Lp + Dl * Bq)
    s[1] = -h * (-Lx + lin + D * Lp + 1.5 * Dl * Cq - 0.5 * C * Lq + Dl * Dp)
    s[2] = h * (-Lx + lin + D * Lp - 0.5 * Dl * Cq - 0.5 * C * Lq - Dl * Dp)
    s[7] = h * (Ly + quad - B * Lq + 0.5 * Dl * Cp + 0.5 * C * Lp + Dl * Bq)
    s[8] = -h * (Ly + quad - B * Lq - 1.5 * Dl * Cp + 0.5 * C * Lp - Dl * Bq)

    r[3], s[3] = h * Cz_p, -h * Cz_m
    r[4], s[4] = Dz, -Dz
    r[5], s[5] = -h * Cz_p, h * Cz_m
    r[6], s[6] = -Dz, Dz
    r[9], s[9] = -Bz, Bz
    r[10], s[10] = -h * Cz_m, h * Cz_p
    r[11], s[11] = Bz, -Bz
    r[12], s[12] = h * Cz_m, -h * Cz_p

    half = 0.5 * (C + Dl)
    p_eq = [-D, half]
    q_eq = [half, -B]
    return r, s, p_eq, q_eq


def system_coefficients(cs: CoefficientSet, pt) -> SystemCoefficients:
    r, s, pe, qe = tables(cs.evaluate(*_pt(pt)))
    f = lambda seq: np.array([float(v) for v in seq])
    return SystemCoefficients(f(r), f(s), f(pe), f(qe))


def rs_polynomial(c, r, s, p, q):
    """The 14-term polynomial shared by the r and s equations."""
    return (c[0] + c[1] * r + c[2] * s + c[3] * p * r + c[4] * q * r + c[5] * p * s
            + c[6] * q * s + c[7] * r * r + c[8] * r * s + c[9] * p * r * r
            + c[10] * q * r * r + c[11] * p * r * s + c[12] * q * r * s + c[13] * r * r * s)


def rhs_from_tables(tabs, r, s, p, q, z):
    r_eq, s_eq, p_eq, q_eq = tabs
    fr = rs_polynomial(r_eq, r, s, p, q)
    fs = rs_polynomial(s_eq, s, r, p, q)  # same polynomial with r and s swapped
    fp = p_eq[0] + p_eq[1] * s
    fq = q_eq[0] + q_eq[1] * r
    fz = p + q * r
    return fr, fs, fp, fq, fz


def rhs_arrays(cs, x, y, r, s, p, q, z):
    """Right-hand sides (f_r, f_s, f_p, f_q, f_z), vectorized."""
    ev = cs.evaluate(x, y, z, p, q)
    return rhs_from_tables(tables(ev), r, s, p, q, z)


def rhs(cs: CoefficientSet, pt, st: RiemannState):
    """Right-hand sides at one point; the jet (z, p, q) is taken from ``st``."""
    vals = rhs_arrays(cs, pt.x, pt.y, st.r, st.s, st.p, st.q, st.z)
    return tuple(float(v) for v in vals)


# ------------------------------------------------- alternative (oracle) form

def _alpha_beta(ev, p, q):
    B, C, D, Dl = ev.B, ev.C, ev.D, ev.Dl
    h = 0.5 / Dl
    a1 = h * (2 * ev.D_y + ev.C_x + 2 * ev.D_z * q + ev.C_z * p + C * ev.D_p - D * ev.C_p - 2 * B * ev.D_q)
    a2 = h * (ev.Dl_x + ev.Dl_z * p - D * ev.Dl_p)
    b1 = h * (2 * ev.B_x + ev.C_y + 2 * ev.B_z * p + ev.C_z * q + C * ev.B_q - B * ev.C_q - 2 * D * ev.B_p)
    b2 = h * (ev.Dl_y + ev.Dl_z * q - B * ev.Dl_q)
    return a1, a2, b1, b2


def ei_coefficients(ev, p, q):
    """Coefficient lists (E0..E5, I0..I5) of the invariant-form system."""
    C, Dl = ev.C, ev.Dl
    Cp, Cq, Lp, Lq, Dp, Bq = ev.C_p, ev.C_q, ev.Dl_p, ev.Dl_q, ev.D_p, ev.B_q
    a1, a2, b1, b2 = _alpha_beta(ev, p, q)
    k = 0.25 / Dl
    Ec = [None] * 6
    Ic = [None] * 6
    Ec[0] = Ic[0] = ev.D_q
    Ec[5] = Ic[5] = -ev.B_p
    Ec[1] = a1 + a2 + k * (C * Cq - 3 * Dl * Cq + C * Lq + Dl * Lq - 2 * Dl * Dp)
    Ec[2] = -a1 - a2 + k * (-C * Cq - Dl * Cq - C * Lq - Dl * Lq - 2 * Dl * Dp)
    Ec[3] = -b1 + b2 + k * (-C * Cp + Dl * Cp + C * Lp - Dl * Lp + 2 * Dl * Bq)
    Ec[4] = b1 - b2 + k * (C * Cp + 3 * Dl * Cp - C * Lp + Dl * Lp + 2 * Dl * Bq)
    Ic[1] = a1 - a2 + k * (C * Cq - Dl * Cq - C * Lq + Dl * Lq - 2 * Dl * Dp)
    Ic[2] = -a1 + a2 + k * (-C * Cq - 3 * Dl * Cq + C * Lq - Dl * Lq - 2 * Dl * Dp)
    Ic[3] = b1 + b2 + k * (C * Cp + Dl * Cp + C * Lp + Dl * Lp + 2 * Dl * Bq)
    Ic[4] = -b1 - b2 + k * (-C * Cp + 3 * Dl * Cp - C * Lp - Dl * Lp + 2 * Dl * Bq)
    return Ec, Ic


def rhs_ei_arrays(cs, x, y, r, s, p, q, z):
    ev = cs.evaluate(x, y, z, p, q)
    Ec, Ic = ei_coefficients(ev, p, q)
    u1, u2 = r, s
    fe = Ec[0] + Ec[1] * u1 + Ec[2] * u2 + Ec[3] * u1 * u1 + Ec[4] * u1 * u2 + Ec[5] * u1 * u1 * u2
    fi = Ic[0] + Ic[1] * u1 + Ic[2] * u2 + Ic[3] * u2 * u2 + Ic[4] * u1 * u2 + Ic[5] * u1 * u2 * u2
    return fe, fi


def rhs_ei_oracle(cs: CoefficientSet, pt, st: RiemannState):
    """(f_r, f_s) computed from the E/I coefficient form; test oracle only."""
    fe, fi = rhs_ei_arrays(cs, pt.x, pt.y, st.r, st.s, st.p, st.q, st.z)
    return float(fe), float(fi)


def gap_rate(ev, r, s, p, q):
    """Bracket G with (d/dx + s d/dy)(r - s) = (r - s) (G + s_y).

    Integrating G + s_y along an s-characteristic gives the exponential
    representation of r - s used by the a-posteriori separation check.
    """
    B, C, Dl = ev.B, ev.C, ev.Dl
    a1, a2, b1, b2 = _alpha_beta(ev, p, q)
    return (2 * a2 + (C * ev.Dl_q - Dl * ev.C_q) / (2 * Dl)
            + (r + s) * (b2 + 0.5 * ev.B_q + (C * ev.Dl_p + Dl * ev.C_p) / (4 * Dl))
            + (s - r) * (b1 + (C * ev.C_p + Dl * ev.Dl_p) / (4 * Dl))
            - ev.B_p * r * s)


# ------------------------------------------------------------ second derivs

def second_derivatives(ev, r, s, separation_floor=SEPARATION_FLOOR):
    """(z_xx, z_xy, z_yy) from the invariants, vectorized."""
    gap = r - s
    bad = np.abs(np.asarray(gap)) < separation_floor
    if np.any(bad):
        g = np.asarray(gap).reshape(-1)
        i = int(np.flatnonzero(np.asarray(bad).reshape(-1))[0])
        raise SeparationError(float(abs(g[i])), {"index": i})
    Dl = ev.Dl
    zyy = Dl / gap - ev.B
    zxy = 0.5 * Dl * (r + s) / (s - r) + 0.5 * ev.C
    zxx = Dl * r * s / gap - ev.D
    return zxx, zxy, zyy


def reconstruct_second_derivatives(cs: CoefficientSet, pt, st: RiemannState,
                                   separation_floor=SEPARATION_FLOOR):
    if abs(st.r - st.s) < separation_floor:
        raise SeparationError(abs(st.r - st.s), (pt.x, pt.y))
    ev = cs.evaluate(pt.x, pt.y, st.z, st.p, st.q)
    return tuple(float(v) for v in second_derivatives(ev, st.r, st.s, separation_floor))


def invariants_from_hessian(ev, zxy, zyy):
    """Characteristic slopes (r, s) from the mixed and yy second derivatives."""
    den = 2.0 * (zyy + ev.B)
    return (ev.C + ev.Dl - 2.0 * zxy) / den, (ev.C - ev.Dl - 2.0 * zxy) / den


def pde_residual(ev, zxx, zxy, zyy):
    return ev.A + ev.B * zxx + ev.C * zxy + ev.D * zyy + zxx * zyy - zxy * zxy
