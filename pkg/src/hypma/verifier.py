"""Sufficient-condition checks, bound functions and a-posteriori checks.

Suprema over jet space are estimated by seeded Latin-hypercube sampling of a
finite box, so every sampled supremum is a lower estimate of the true one.
Verdicts are "pass", "fail" or "unknown"; any evaluation error during
sampling gives "unknown", never "pass".

Condition sets:

* ``uniform_bounds``: Cauchy data bounded by 1 and invariant sup plus the
  weighted coefficient integrals at most 1.
* ``initial_gap``: inf r0 - sup s0 >= gap > 0.
* ``gap_preserved``: weighted coefficient integrals <= (gap - gap_floor)/2.
* ``coefficient_hypotheses``: six points on coefficients and data in terms
  of coef_bound, inv_disc_bound and an integrable envelope.
* ``initial_data_hypotheses``: nine points that imply the data part of the
  previous set from bounds on B, C and the second derivatives of the data.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.ndimage import maximum_filter1d
from scipy.stats import qmc

from . import expr as E
from .coeffs import (PQ_GROUP, RS_GROUP, CoefficientSet, gap_rate, rhs_arrays, tables)
from .errors import ConfigError, DomainError, HyperbolicityError, SeparationError
from .initdata import InitialData, check_axis, restrict
from .trace import FIELDS, integrate_along, sample, trace

PASS, FAIL, UNKNOWN = "pass", "fail", "unknown"
# absolute slack for float comparisons of quantities equal in exact arithmetic
CMP_TOL = 1e-12

CONDITION_SETS = ("uniform_bounds", "initial_gap", "gap_preserved",
                  "coefficient_hypotheses", "initial_data_hypotheses")


def verdict(ok):
    if ok is None:
        return UNKNOWN
    return PASS if ok else FAIL


def combine(verdicts):
    vs = list(verdicts)
    if FAIL in vs:
        return FAIL
    if UNKNOWN in vs:
        return UNKNOWN
    return PASS


def _le(a, b):
    return a <= b + CMP_TOL * max(1.0, abs(b))


@dataclass
class BoundsInput:
    """User-facing constants of the coefficient hypotheses.

    coef_bound bounds |B|, |C|, |D|, |disc|; inv_disc_bound bounds 1/disc;
    envelope is a nonnegative function of x that scales the allowed partial
    derivatives. In ``grid-estimated`` mode missing bounds are filled from
    samples. The ``*_tail`` fields are user-declared bounds for the parts of
    the improper integrals outside the sampled x-range.
    """

    coef_bound: float | None = None
    inv_disc_bound: float | None = None
    gap: float | None = None
    gap_floor: float | None = None
    envelope: str = "0"
    envelope_tail: float = 0.0
    rs_tail: float = 0.0
    pq_tail: float = 0.0
    mode: str = "user-supplied"

    def validate(self):
        if self.mode not in ("user-supplied", "grid-estimated"):
            raise ConfigError(f"unknown bounds mode {self.mode!r}")
        if self.mode == "user-supplied" and (self.coef_bound is None or self.inv_disc_bound is None):
            raise ConfigError("user-supplied bounds need coef_bound and inv_disc_bound")
        for name in ("coef_bound", "inv_disc_bound"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be positive")
        if self.gap is not None and self.gap_floor is not None:
            if not (0 < self.gap_floor <= self.gap and (self.gap - self.gap_floor) / 2 < 1):
                raise ConfigError("need 0 < gap_floor <= gap and (gap - gap_floor)/2 < 1")
        E.as_expr(self.envelope, ("x",))


@dataclass
class AxisConstants:
    """Constants of the initial-data hypotheses.

    second_deriv_bound bounds |z0''| and |p0'|, mixed_bound bounds |C|,
    B is required in [b_lower, b_upper], and disc_ratio_bound bounds
    |disc| / (2 b_lower).
    """

    second_deriv_bound: float
    mixed_bound: float
    b_lower: float
    b_upper: float
    disc_ratio_bound: float


@dataclass
class SampleBox:
    x: tuple
    y: tuple
    z: tuple
    p: tuple
    q: tuple

    def lhs(self, names, n, seed):
        lo = np.array([getattr(self, k)[0] for k in names], dtype=float)
        hi = np.array([getattr(self, k)[1] for k in names], dtype=float)
        if np.any(hi < lo):
            raise ConfigError("empty sample box")
        u = qmc.LatinHypercube(d=len(names), seed=seed).random(n)
        return {k: lo[i] + (hi[i] - lo[i]) * u[:, i] for i, k in enumerate(names)}


def default_box(init: InitialData, x_range, y_range, coef_bound=None):
    """Jet box that contains every iterate when the bound conditions hold."""
    x0, x1 = x_range
    xbar = max(abs(x0), abs(x1))
    lin = coef_bound if coef_bound is not None else 1.0
    w = restrict(init, *y_range)
    pq = 1.0 + 2.0 * lin * xbar
    zb = float(np.abs(w.z).max()) + 2.0 * xbar + 2.0 * lin * xbar ** 2
    return SampleBox((x0, x1), tuple(y_range), (-zb, zb), (-pq, pq), (-pq, pq))


def closed_form_constants(coef_bound, inv_disc_bound):
    M1, M2 = coef_bound, inv_disc_bound
    return {"rs_weight": max(M1, 0.5 * M2 * (4 * M1 + 9 * M1 ** 2)), "pq_weight": M1 * M2}


def damped_envelope(envelope_values, xs, coef_bound):
    return np.asarray(envelope_values) / (1.0 + 2.0 * coef_bound * np.abs(xs))


def axis_derived_constants(c: AxisConstants, inv_disc_bound):
    """Derived constants of the initial-data hypotheses; None where the
    lower bound on B does not exceed the second-derivative bound."""
    m1, m2, L1, L2, L3 = (c.second_deriv_bound, c.mixed_bound, c.b_lower, c.b_upper,
                          c.disc_ratio_bound)
    out = {"gap_lower": 1.0 / (2.0 * inv_disc_bound * L2)}
    if L1 - m1 > 0:
        out["invariant_excess"] = m1 / (L1 - m1) * (1 + L3 + m2 / (2 * L1)) + m2 / (2 * L1)
        out["gap_loss"] = m1 * (2 + L3) / (L1 - m1) + m2 / (2 * (L1 - m1))
    else:
        out["invariant_excess"] = None
        out["gap_loss"] = None
    return out


def trapezoid(f, xs):
    f = np.asarray(f, dtype=float)
    if len(xs) < 2:
        return 0.0
    return float(np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(xs)))


@dataclass
class AlphaTable:
    """Sampled coefficient envelopes per x-sample.

    rs_sup(x): sup of |r_eq[j]|, |s_eq[j]| over the monomials without p, q;
    pq_sup(x): the same over the monomials carrying p or q;
    linear_sup: sup of the p and q equation coefficients over the box.
    """

    xs: np.ndarray
    rs_sup: np.ndarray
    pq_sup: np.ndarray
    linear_sup: float
    samples: int
    status: str = PASS
    message: str = ""


def estimate_alphas(cs: CoefficientSet, box: SampleBox, xs, n_samples=512, seed=0) -> AlphaTable:
    xs = np.asarray(xs, dtype=float)
    rs = np.full(len(xs), np.nan)
    pq = np.full(len(xs), np.nan)
    lin = float("nan")
    try:
        with np.errstate(all="raise"):
            for i, x in enumerate(xs):
                pts = box.lhs(("y", "z", "p", "q"), n_samples, seed + i)
                ev = cs.evaluate(np.full(n_samples, x), pts["y"], pts["z"], pts["p"], pts["q"])
                r_eq, s_eq, _, _ = tables(ev)
                grab = lambda group: max(float(np.max(np.abs(np.broadcast_to(t[j], (n_samples,)))))
                                         for t in (r_eq, s_eq) for j in group)
                rs[i] = grab(RS_GROUP)
                pq[i] = grab(PQ_GROUP)
            pts = box.lhs(("x", "y", "z", "p", "q"), n_samples, seed + len(xs))
            ev = cs.evaluate(pts["x"], pts["y"], pts["z"], pts["p"], pts["q"])
            _, _, p_eq, q_eq = tables(ev)
            lin = max(float(np.max(np.abs(np.broadcast_to(v, (n_samples,)))))
                      for v in (*p_eq, *q_eq))
    except (HyperbolicityError, DomainError, FloatingPointError) as exc:
        return AlphaTable(xs, rs, pq, lin, n_samples, UNKNOWN, str(exc))
    status = PASS if np.all(np.isfinite(rs)) and np.all(np.isfinite(pq)) and math.isfinite(lin) else UNKNOWN
    return AlphaTable(xs, rs, pq, lin, n_samples, status)


def weighted_integrals(alphas: AlphaTable, bounds: BoundsInput):
    i_rs = trapezoid(alphas.rs_sup, alphas.xs) + bounds.rs_tail
    i_pq = trapezoid((1 + 2 * alphas.linear_sup * np.abs(alphas.xs)) * alphas.pq_sup, alphas.xs) + bounds.pq_tail
    return i_rs, i_pq


def check_bound_conditions(init: InitialData, bounds: BoundsInput, alphas: AlphaTable, y_range=None):
    """Verdicts of the uniform-bound, initial-gap and gap-preservation sets."""
    w = restrict(init, *y_range) if y_range is not None else init
    sup_inv = max(float(np.abs(w.r).max()), float(np.abs(w.s).max()))
    sup_p, sup_q = float(np.abs(w.p).max()), float(np.abs(w.q).max())
    gap_sampled = float(w.r.min() - w.s.max())
    gap = bounds.gap if bounds.gap is not None else gap_sampled
    floor_ = bounds.gap_floor if bounds.gap_floor is not None else gap
    known = alphas.status == PASS
    i_rs, i_pq = weighted_integrals(alphas, bounds)
    growth = 6 * i_rs + 8 * i_pq
    lhs1 = sup_inv + growth
    margin = (gap - floor_) / 2
    return {
        "uniform_bounds": {
            "verdict": verdict(_le(sup_p, 1) and _le(sup_q, 1) and _le(lhs1, 1) if known else None),
            "sup_abs_p0": sup_p, "sup_abs_q0": sup_q, "invariant_sup": sup_inv,
            "lhs": lhs1, "rhs": 1.0,
        },
        "initial_gap": {
            "verdict": verdict(gap > 0 and gap_sampled >= gap - CMP_TOL),
            "lhs": gap_sampled, "rhs": gap,
        },
        "gap_preserved": {
            "verdict": verdict(_le(growth, margin) and 0 < floor_ <= gap if known else None),
            "lhs": growth, "rhs": margin,
        },
    }


def _smoothness(exprs):
    """pass if no expression uses abs (the only non-smooth primitive)."""
    if any(E.contains_op(e, "abs") for e in exprs):
        return UNKNOWN
    return PASS


def check_coefficient_hypotheses(cs, init, bounds: BoundsInput, box: SampleBox, xs,
                                 n_samples=512, seed=0, y_range=None):
    M1, M2 = bounds.coef_bound, bounds.inv_disc_bound
    w = restrict(init, *y_range) if y_range is not None else init
    xs = np.asarray(xs, dtype=float)
    eta_f = E.compile_expr(E.as_expr(bounds.envelope, ("x",)))
    pts = {}
    out = {}
    try:
        eta_tab = np.broadcast_to(np.asarray(eta_f({"x": xs}), dtype=float), xs.shape)
    except DomainError as exc:
        eta_tab = np.full(xs.shape, np.nan)
        out["envelope_error"] = str(exc)
    consts = closed_form_constants(M1, M2)
    out["points"] = pts
    pts["1_coefficients_smooth"] = {"verdict": _smoothness([cs.A, cs.B, cs.C, cs.D])}
    pts["2_data_smooth"] = {"verdict": _smoothness(list((init.exprs or {}).values()))
                            if init.exprs else UNKNOWN}

    # point 3: sampled bounds on coefficients and their partials
    worst = {"value": 0.0, "inv_disc": 0.0, "deriv_excess": -np.inf, "z_deriv_excess": -np.inf}
    status = PASS
    try:
        with np.errstate(all="raise"):
            P = box.lhs(("x", "y", "z", "p", "q"), n_samples, seed)
            X = np.concatenate([P["x"], np.repeat(xs, 8)])
            extra = box.lhs(("y", "z", "p", "q"), 8 * len(xs), seed + 1)
            Y = np.concatenate([P["y"], extra["y"]])
            Z = np.concatenate([P["z"], extra["z"]])
            Pp = np.concatenate([P["p"], extra["p"]])
            Q = np.concatenate([P["q"], extra["q"]])
            ev = cs.evaluate(X, Y, Z, Pp, Q)
            eta = np.broadcast_to(np.asarray(eta_f({"x": X}), dtype=float), X.shape)
            eta_t = eta / (1 + 2 * M1 * np.abs(X))
            n = len(X)
            b = lambda v: np.broadcast_to(np.asarray(v, dtype=float), (n,))
            for a in ("B", "C", "D", "Dl"):
                worst["value"] = max(worst["value"], float(np.max(np.abs(b(getattr(ev, a))))))
                for om in ("x", "y", "p", "q"):
                    d = np.abs(b(getattr(ev, f"{a}_{om}")))
                    worst["deriv_excess"] = max(worst["deriv_excess"], float(np.max(d - M1 * eta)))
                d = np.abs(b(getattr(ev, f"{a}_z")))
                worst["z_deriv_excess"] = max(worst["z_deriv_excess"], float(np.max(d - M1 * eta_t)))
            worst["inv_disc"] = float(np.max(1.0 / b(ev.Dl)))
    except (HyperbolicityError, DomainError, FloatingPointError) as exc:
        status = UNKNOWN
        out["sampling_error"] = str(exc)
    if status == PASS:
        ok = (_le(worst["value"], M1) and _le(worst["inv_disc"], M2)
              and worst["deriv_excess"] <= CMP_TOL and worst["z_deriv_excess"] <= CMP_TOL)
        status = verdict(ok)
    pts["3_coefficient_bounds"] = {"verdict": status, "sup_abs_coef": worst["value"],
                                   "sup_inv_disc": worst["inv_disc"],
                                   "max_deriv_excess": worst["deriv_excess"],
                                   "max_z_deriv_excess": worst["z_deriv_excess"],
                                   "samples": int(n_samples + 8 * len(xs))}

    gap = bounds.gap if bounds.gap is not None else float(w.r.min() - w.s.max())
    floor_ = bounds.gap_floor if bounds.gap_floor is not None else gap
    margin = (gap - floor_) / 2
    eta_int = trapezoid(eta_tab, xs) + bounds.envelope_tail
    lhs4 = (6 * consts["rs_weight"] + 8 * consts["pq_weight"]) * eta_int
    pts["4_envelope_integral"] = {"verdict": verdict(_le(lhs4, margin) if np.isfinite(lhs4) else None),
                                  "lhs": lhs4, "rhs": margin, "envelope_integral": eta_int}
    sup_inv = max(float(np.abs(w.r).max()), float(np.abs(w.s).max()))
    sup_p, sup_q = float(np.abs(w.p).max()), float(np.abs(w.q).max())
    pts["5_data_bounds"] = {"verdict": verdict(_le(sup_inv, 1 - margin) and _le(sup_p, 1) and _le(sup_q, 1)),
                            "invariant_sup": sup_inv, "invariant_limit": 1 - margin,
                            "sup_abs_p0": sup_p, "sup_abs_q0": sup_q}
    gap_sampled = float(w.r.min() - w.s.max())
    pts["6_initial_gap"] = {"verdict": verdict(gap > 0 and gap_sampled >= gap - CMP_TOL),
                            "lhs": gap_sampled, "rhs": gap}
    out["verdict"] = combine(p["verdict"] for p in pts.values())
    out["constants"] = {**consts, "envelope_integral": eta_int}
    out["envelope_table"] = eta_tab
    out["damped_envelope_table"] = damped_envelope(eta_tab, xs, M1)
    return out


def check_initial_data_hypotheses(cs, init, bounds: BoundsInput, consts: AxisConstants, y_range=None):
    """Nine-point check; B, C and disc are evaluated on the axis jet."""
    w = restrict(init, *y_range) if y_range is not None else init
    m1, m2, L1, L2, L3 = (consts.second_deriv_bound, consts.mixed_bound, consts.b_lower,
                          consts.b_upper, consts.disc_ratio_bound)
    M2 = bounds.inv_disc_bound
    derived = axis_derived_constants(consts, M2)
    gap = bounds.gap if bounds.gap is not None else float(w.r.min() - w.s.max())
    floor_ = bounds.gap_floor if bounds.gap_floor is not None else gap
    margin = (gap - floor_) / 2
    pts = {}
    pts["1_data_smooth"] = {"verdict": _smoothness(list((w.exprs or {}).values())) if w.exprs else UNKNOWN}
    sup_q, sup_p = float(np.abs(w.q).max()), float(np.abs(w.p).max())
    pts["2_data_bounds"] = {"verdict": verdict(_le(sup_q, 1) and _le(sup_p, 1)),
                            "sup_abs_q0": sup_q, "sup_abs_p0": sup_p}
    sup_zyy, sup_py = float(np.abs(w.z_yy).max()), float(np.abs(w.p_y).max())
    pts["3_second_derivs"] = {"verdict": verdict(_le(sup_zyy, m1) and _le(sup_py, m1)),
                              "sup_abs_z0_yy": sup_zyy, "sup_abs_p0_y": sup_py}
    try:
        ev = cs.evaluate(0.0 * w.y, w.y, w.z, w.p, w.q)
        n = len(w.y)
        B = np.broadcast_to(np.asarray(ev.B, dtype=float), (n,))
        C = np.broadcast_to(np.asarray(ev.C, dtype=float), (n,))
        Dl = np.broadcast_to(np.asarray(ev.Dl, dtype=float), (n,))
        axis_ok = True
    except (HyperbolicityError, DomainError) as exc:
        axis_ok = False
        pts["axis_error"] = {"verdict": UNKNOWN, "message": str(exc)}
    if axis_ok:
        pts["4_b_range"] = {"verdict": verdict(0 < L1 and L1 - CMP_TOL <= B.min() and _le(B.max(), L2)),
                            "min_B": float(B.min()), "max_B": float(B.max())}
    pts["5_b_lower_exceeds_m1"] = {"verdict": verdict(L1 - m1 > 0), "lhs": L1 - m1}
    if axis_ok:
        pts["6_mixed_bound"] = {"verdict": verdict(_le(float(np.abs(C).max()), m2)),
                                "sup_abs_C": float(np.abs(C).max())}
        ratio = float(np.abs(Dl).max()) / (2 * L1)
        pts["7_disc_ratio"] = {"verdict": verdict(_le(ratio, L3)), "lhs": ratio}
    if derived["invariant_excess"] is None:
        pts["8_invariant_room"] = {"verdict": FAIL, "reason": "guard: b_lower <= second_deriv_bound"}
        pts["9_gap_room"] = {"verdict": FAIL, "reason": "guard: b_lower <= second_deriv_bound"}
    else:
        lhs8 = L3 + derived["invariant_excess"]
        pts["8_invariant_room"] = {"verdict": verdict(_le(lhs8, 1 - margin)), "lhs": lhs8,
                                   "rhs": 1 - margin}
        lhs9 = derived["gap_lower"] - derived["gap_loss"]
        pts["9_gap_room"] = {"verdict": verdict(lhs9 >= gap / 2 - CMP_TOL and gap > 0),
                             "lhs": lhs9, "rhs": gap / 2}
    return {"verdict": combine(p["verdict"] for p in pts.values()), "points": pts,
            "constants": derived}


def estimate_rate_constant(cs, box: SampleBox, n_samples=512, seed=0):
    """Sampled sup of |f| and of its partials in (r, s, p, q, z, x, y).

    r and s range over [-1, 1]. Partials are central differences. The
    result is an estimate, not a certified bound.
    """
    P = box.lhs(("x", "y", "z", "p", "q"), n_samples, seed)
    u = qmc.LatinHypercube(d=2, seed=seed + 7919).random(n_samples) * 2 - 1
    base = {"x": P["x"], "y": P["y"], "r": u[:, 0], "s": u[:, 1], "p": P["p"], "q": P["q"], "z": P["z"]}

    def f(env):
        out = rhs_arrays(cs, env["x"], env["y"], env["r"], env["s"], env["p"], env["q"], env["z"])
        return np.stack([np.broadcast_to(np.asarray(v, dtype=float), (n_samples,)) for v in out])

    best = float(np.max(np.abs(f(base))))
    for v in ("r", "s", "p", "q", "z", "x", "y"):
        h = 1e-6 * np.maximum(1.0, np.abs(base[v]))
        up = dict(base, **{v: base[v] + h})
        dn = dict(base, **{v: base[v] - h})
        d = (f(up) - f(dn)) / (2 * h)
        best = max(best, float(np.max(np.abs(d))))
    return best


def derivative_majorant(gap_floor, a, V0, xs, substeps=8):
    """Tables of the foot-point stretch bound, its companion V and their product.

    stretch(x) = (2/gap_floor) exp(2 a x / gap_floor); V solves
    V' = 5 a stretch^2 V + a stretch, V(0) = V0, by classical RK4.
    Values beyond double range become inf; see ``log_majorant``.
    """
    xs = np.asarray(xs, dtype=float)
    psi = lambda x: (2.0 / gap_floor) * np.exp(2.0 * a * x / gap_floor)
    rhs = lambda x, v: 5.0 * a * psi(x) ** 2 * v + a * psi(x)
    V = np.empty(len(xs))
    V[0] = V0
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(1, len(xs)):
            x, v = xs[i - 1], V[i - 1]
            h = (xs[i] - xs[i - 1]) / substeps
            for _ in range(substeps):
                if not np.isfinite(v):
                    break
                k1 = rhs(x, v)
                k2 = rhs(x + h / 2, v + h / 2 * k1)
                k3 = rhs(x + h / 2, v + h / 2 * k2)
                k4 = rhs(x + h, v + h * k3)
                v = v + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
                x = x + h
            V[i] = v if np.isfinite(v) else np.inf
        stretch = psi(xs)
        return stretch, V, stretch * V


def log_majorant(gap_floor, a, V0, xs, n_fine=4096):
    """Natural log of the slope majorant from the integrating-factor formula.

    With P = 5 a stretch^2 the exponent integral is closed-form,
    int_0^x P = (5/gap_floor)(exp(4 a x/gap_floor) - 1), so
    V = exp(int P) (V0 + int_0^x a stretch exp(-int P)). The remaining
    integral is a trapezoid sum on a fine grid. Independent of the RK4 route.
    """
    xs = np.asarray(xs, dtype=float)
    eps = gap_floor
    log_psi = lambda x: math.log(2.0 / eps) + 2.0 * a * x / eps
    int_P = lambda x: (5.0 / eps) * math.expm1(4.0 * a * x / eps) if a else 0.0
    out = np.empty(len(xs))
    for i, x in enumerate(xs):
        t = np.linspace(0.0, x, n_fine) if x > 0 else np.zeros(1)
        with np.errstate(over="ignore", under="ignore"):
            g = a * np.exp([log_psi(u) - int_P(u) for u in t])
        inner = V0 + trapezoid(g, t)
        out[i] = log_psi(x) + int_P(x) + (math.log(inner) if inner > 0 else -np.inf)
    return out


def initial_slope_sup(init: InitialData, y_range=None):
    """Max over the five fields of sup |d/dy field| on the axis."""
    w = restrict(init, *y_range) if y_range is not None else init
    return max(float(np.max(np.abs(w.derivs[k]))) for k in FIELDS)


def check_separation_identity(cs, result, n_nodes=200, seed=0, substeps=1):
    """Max relative defect of the exponential representation of r - s.

    For sampled window nodes the s-characteristic is traced back to the
    axis on the converged grid; the growth rate of r - s along it (the
    coefficient bracket plus s_y, with s_y from centered differences) is
    integrated and exp(integral) * (r - s)(foot) is compared with the
    directly computed r - s at the node.
    """
    grid = result.grid
    s_y = np.gradient(grid.field("s"), grid.h_y, axis=1, edge_order=2)
    s_y_grid = grid.replace(np.stack([s_y] * 5))
    j0 = int(round((result.ys[0] - grid.y_min) / grid.h_y))
    nx = grid.K + 1
    rng = np.random.default_rng(seed)
    nodes = [(k, j0 + j) for k in range(1, nx) for j in range(len(result.ys))]
    pick = rng.choice(len(nodes), size=min(n_nodes, len(nodes)), replace=False)
    defects = []
    for idx in np.sort(pick):
        k, j = nodes[idx]
        x, y = grid.xs[k], grid.ys[j]
        path = trace(grid, (x, y), "s", substeps=substeps)

        def rate(taus, ys, st):
            ev = cs.evaluate(taus, ys, st[4], st[2], st[3])
            sy, _ = sample(s_y_grid, taus, ys, 0)
            return gap_rate(ev, st[0], st[1], st[2], st[3]) + sy

        integral = integrate_along(grid, path, rate, 0.0, vectorized=True)
        foot_vals, _ = sample(grid, 0.0, path.foot)
        rhs = (foot_vals[0] - foot_vals[1]) * math.exp(integral)
        lhs = grid.values[0, k, j] - grid.values[1, k, j]
        defects.append(abs(lhs - rhs) / abs(lhs))
    return float(max(defects)), float(np.mean(defects)), len(defects)


def check_iterate_bounds(iterates, init: InitialData, linear_sup, gap_floor, y_range, slack):
    """Sweep every iterate against the uniform bounds and the preserved gap.

    Returns a list of dicts (one per iterate) with the largest excess of
    each bound; an excess <= slack counts as holding.
    """
    out = []
    z0 = np.abs(init.z)
    for n, g in enumerate(iterates):
        j0 = int(round((y_range[0] - g.y_min) / g.h_y))
        j1 = int(round((y_range[1] - g.y_min) / g.h_y)) + 1
        xs = g.xs
        r, s, p, q, z = (g.values[i][:, j0:j1] for i in range(5))
        zlim = np.empty_like(z)
        for k, x in enumerate(xs):
            half = int(math.floor(abs(x) / g.h_y + 1e-9))
            zlim[k] = maximum_filter1d(z0, size=2 * half + 1, mode="nearest")[j0:j1]
        X = np.abs(xs)[:, None]
        ex = {
            "invariants": float(max(np.abs(r).max(), np.abs(s).max()) - 1.0),
            "cauchy": float(np.max(np.maximum(np.abs(p), np.abs(q)) - (1 + 2 * linear_sup * X))),
            "value": float(np.max(np.abs(z) - (zlim + 2 * X + 2 * linear_sup * X ** 2))),
            "gap": float(gap_floor - (r.min() - s.max())),
        }
        out.append({"iterate": n, **ex, "holds": all(v <= slack for v in ex.values())})
    return out


@dataclass
class ConditionReport:
    constants: dict = field(default_factory=dict)
    conditions: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    sampling: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    requested: tuple = CONDITION_SETS

    def verdict(self, names=None):
        names = self.requested if names is None else names
        return combine(self.conditions[n]["verdict"] for n in names if n in self.conditions)

    def to_dict(self):
        def clean(v):
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            if isinstance(v, (list, tuple)):
                return [clean(x) for x in v]
            if isinstance(v, np.ndarray):
                return [clean(x) for x in v.tolist()]
            if isinstance(v, (np.floating, float)):
                f = float(v)
                return f if math.isfinite(f) else None
            if isinstance(v, np.integer):
                return int(v)
            return v
        return clean({"overall": self.verdict(), "requested": list(self.requested),
                      **{k: getattr(self, k) for k in ("constants", "conditions", "tables",
                                                        "sampling", "warnings")}})


def check_all(cs: CoefficientSet, init: InitialData, bounds: BoundsInput, *, x_range=(0.0, 1.0),
              y_range=None, axis_constants: AxisConstants | None = None, box: SampleBox | None = None,
              n_x=33, n_samples=512, seed=0, requested=CONDITION_SETS) -> ConditionReport:
    """Build the full condition report for one problem."""
    bounds.validate()
    if y_range is None:
        y_range = (init.grid.y_min, init.grid.y_max)
    rep = ConditionReport(requested=tuple(requested))
    xs = np.linspace(x_range[0], x_range[1], n_x)
    if box is None:
        box = default_box(init, x_range, y_range, bounds.coef_bound)
    rep.sampling = {"seed": seed, "samples_per_x": n_samples, "x_samples": n_x,
                    "box": asdict(box), "axis_samples": int(restrict(init, *y_range).grid.n),
                    "axis_step": init.grid.h, "note": "sampled suprema are lower estimates"}

    if bounds.mode == "grid-estimated":
        est = estimate_coefficient_bounds(cs, box, n_samples, seed)
        if bounds.coef_bound is None:
            bounds.coef_bound = est["coef_bound"]
        if bounds.inv_disc_bound is None:
            bounds.inv_disc_bound = est["inv_disc_bound"]
        rep.constants["estimated"] = est
    for name, tail in (("envelope_tail", bounds.envelope_tail), ("rs_tail", bounds.rs_tail),
                       ("pq_tail", bounds.pq_tail)):
        if tail == 0.0:
            rep.warnings.append(f"{name} is 0: integrals over the whole line use the sampled "
                                f"x-range {tuple(x_range)} only")
    axis = check_axis(init, cs, bounds.gap, bounds.gap_floor, y_range=y_range)
    rep.constants["axis"] = axis

    alphas = estimate_alphas(cs, box, xs, n_samples, seed)
    i_rs, i_pq = weighted_integrals(alphas, bounds)
    rep.constants.update({
        "invariant_sup": max(axis["sup_abs_r0"], axis["sup_abs_s0"]),
        "linear_sup": alphas.linear_sup,
        "rs_integral": i_rs,
        "pq_weighted_integral": i_pq,
        "alpha_status": alphas.status,
        **closed_form_constants(bounds.coef_bound, bounds.inv_disc_bound),
    })
    if alphas.message:
        rep.warnings.append(alphas.message)
    rep.conditions.update(check_bound_conditions(init, bounds, alphas, y_range))
    coef = check_coefficient_hypotheses(cs, init, bounds, box, xs, n_samples, seed, y_range)
    rep.tables.update({"x": xs, "rs_sup": alphas.rs_sup, "pq_sup": alphas.pq_sup,
                       "envelope": coef.pop("envelope_table"),
                       "damped_envelope": coef.pop("damped_envelope_table")})
    rep.conditions["coefficient_hypotheses"] = coef
    if axis_constants is not None:
        rep.conditions["initial_data_hypotheses"] = check_initial_data_hypotheses(
            cs, init, bounds, axis_constants, y_range)
    elif "initial_data_hypotheses" in requested:
        rep.conditions["initial_data_hypotheses"] = {"verdict": UNKNOWN,
                                                     "reason": "no initial-data constants given"}

    floor_ = bounds.gap_floor if bounds.gap_floor is not None else (
        bounds.gap if bounds.gap is not None else axis["gap_candidate"])
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            a = estimate_rate_constant(cs, box, n_samples, seed)
        V0 = initial_slope_sup(init, y_range)
        xpos = np.linspace(0.0, max(abs(x_range[0]), abs(x_range[1])), n_x)
        psi, V, Phi = derivative_majorant(floor_, a, V0, xpos)
        rep.constants.update({"rate_constant_estimate": a, "initial_slope_sup": V0,
                              "rate_constant_note": "sampled estimate, not certified"})
        rep.tables.update({"x_abs": xpos, "stretch": psi, "V": V, "slope_majorant": Phi,
                           "log_slope_majorant": log_majorant(floor_, a, V0, xpos)})
        if not np.all(np.isfinite(Phi)):
            rep.warnings.append("slope majorant exceeds double range; see log_slope_majorant")
    except (HyperbolicityError, DomainError, SeparationError, FloatingPointError) as exc:
        rep.warnings.append(f"majorant not computed: {exc}")
    return rep


def estimate_coefficient_bounds(cs, box: SampleBox, n_samples=512, seed=0):
    P = box.lhs(("x", "y", "z", "p", "q"), n_samples, seed)
    ev = cs.evaluate(P["x"], P["y"], P["z"], P["p"], P["q"])
    n = n_samples
    b = lambda v: np.broadcast_to(np.asarray(v, dtype=float), (n,))
    coef = max(float(np.max(np.abs(b(getattr(ev, a))))) for a in ("B", "C", "D", "Dl"))
    return {"coef_bound": coef, "inv_disc_bound": float(np.max(1.0 / b(ev.Dl)))}
