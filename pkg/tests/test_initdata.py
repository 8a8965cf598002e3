import numpy as np
import pytest

from hypma import expr as E
from hypma.coeffs import CoefficientSet
from hypma.errors import ConfigError, FreeAxisError, SeparationError
from hypma.initdata import YGrid, check_axis, from_rs, from_zp, restrict

GRID = YGrid(-1, 1, 1 / 128)


def test_grid_validation():
    assert GRID.n == 257 and GRID.points[-1] == 1.0
    with pytest.raises(ConfigError):
        YGrid(0, 1, 0.3)
    with pytest.raises(ConfigError):
        YGrid(1, 0, 0.1)


def test_constant_data(constant_axis):
    # (C +- disc - 2 p0') / (2 (z0'' + B)) = (+-1/2) / 1
    assert np.all(constant_axis.r == 0.5) and np.all(constant_axis.s == -0.5)
    assert np.all(constant_axis.q == 0) and np.all(constant_axis.p == 1)
    assert constant_axis.origin == "from_zp"


def test_quadratic_data(hess_cs):
    init = from_zp(hess_cs, "y^2/2", "y", GRID)
    assert np.all(init.r == 0) and np.all(init.s == -2)
    assert np.array_equal(init.q, GRID.points)


def test_characteristic_axis_is_rejected(constant_cs):
    # z0'' = y, so z0'' + B vanishes at y = -1/2
    with pytest.raises(FreeAxisError) as info:
        from_zp(constant_cs, "y^3/6", "0", GRID)
    assert info.value.y == -0.5


def test_constant_invariants_integrate_to_polynomials():
    cs = CoefficientSet("1/16", "1/2", "1/4", "-1/8")  # disc = 3/4
    init = from_rs(cs, "0.6", "-0.3", (0.2, -0.1, 0.05), GRID)
    y = GRID.points - GRID.y_min
    py = -(0.75 / 2) * 0.3 / 0.9 + 0.125
    qy = 0.75 / 0.9 - 0.5
    assert np.allclose(init.p, -0.1 + py * y, atol=1e-13)
    assert np.allclose(init.q, 0.05 + qy * y, atol=1e-13)
    assert np.allclose(init.z, 0.2 + 0.05 * y + qy * y ** 2 / 2, atol=1e-13)


def test_invariants_reproduce_constant_data(constant_cs, constant_axis):
    init = from_rs(constant_cs, "0.5", "-0.5", (1.0, 1.0, 0.0), GRID)
    assert np.allclose(init.p, 1) and np.allclose(init.q, 0) and np.allclose(init.z, 1)
    assert np.allclose(init.fields(), constant_axis.fields(), atol=1e-15)


def test_anchor_in_the_middle(constant_cs):
    init = from_rs(constant_cs, "0.5", "-0.5", (1.0, 1.0, 0.0), GRID, anchor_y=0.0)
    assert np.allclose(init.z, 1)
    with pytest.raises(ConfigError):
        from_rs(constant_cs, "0.5", "-0.5", (1.0, 1.0, 0.0), GRID, anchor_y=0.001)


def test_coinciding_invariants_rejected(constant_cs):
    with pytest.raises(SeparationError):
        from_rs(constant_cs, "0.2", "0.2", (0, 0, 0), GRID)


NONCONST = ("1/4", "1/2 + 0.1*sin(y)*z", "0.2*p", "0.1*q")
Z0, P0 = "sin(y)/3", "0.5 + 0.1*cos(y)"


def invariant_exprs(cs):
    """The axis invariants as expressions in y, built independently of from_zp."""
    z0, p0 = E.parse(Z0, ("y",)), E.parse(P0, ("y",))
    z1 = E.differentiate(z0, "y")
    jet = {"x": E.Const(0.0), "z": z0, "p": p0, "q": z1}
    sub = lambda e: E.substitute(e, jet)
    four = E.Const(4.0)
    disc = E.func("sqrt", E.add(E.sub(E.mul(cs.C, cs.C), E.mul(four, E.mul(cs.B, cs.D))),
                                E.mul(four, cs.A)))
    den = E.mul(E.Const(2.0), E.add(E.differentiate(z1, "y"), sub(cs.B)))
    top = E.sub(sub(cs.C), E.mul(E.Const(2.0), E.differentiate(p0, "y")))
    r0 = E.div(E.add(top, sub(disc)), den)
    s0 = E.div(E.sub(top, sub(disc)), den)
    return r0, s0, (E.evaluate(z0, {"y": -1.0}), E.evaluate(p0, {"y": -1.0}),
                    E.evaluate(z1, {"y": -1.0}))


@pytest.mark.parametrize("h", [1 / 32, 1 / 64])
def test_round_trip_through_invariants(h):
    cs = CoefficientSet(*NONCONST)
    grid = YGrid(-1, 1, h)
    a = from_zp(cs, Z0, P0, grid)
    r0, s0, anchor = invariant_exprs(cs)
    b = from_rs(cs, r0, s0, anchor, grid)
    assert np.allclose(a.r, b.r, atol=1e-13) and np.allclose(a.s, b.s, atol=1e-13)
    err = max(np.abs(a.z - b.z).max(), np.abs(a.p - b.p).max(), np.abs(a.q - b.q).max())
    assert err <= 5 * h ** 4


def test_round_trip_order_four():
    cs = CoefficientSet(*NONCONST)
    r0, s0, anchor = invariant_exprs(cs)
    errs = []
    for h in (1 / 8, 1 / 16):
        grid = YGrid(-1, 1, h)
        a, b = from_zp(cs, Z0, P0, grid), from_rs(cs, r0, s0, anchor, grid)
        errs.append(np.abs(a.q - b.q).max())
    assert errs[0] / errs[1] > 12


def test_identity_and_slope_consistency():
    cs = CoefficientSet(*NONCONST)
    a = from_zp(cs, Z0, P0, GRID)
    assert check_axis(a, cs)["axis_identity_defect"] <= 1e-9
    r0, s0, anchor = invariant_exprs(cs)
    b = from_rs(cs, r0, s0, anchor, GRID)
    zy = (b.z[2:] - b.z[:-2]) / (2 * GRID.h)
    assert np.abs(zy - b.q[1:-1]).max() <= 2 * GRID.h ** 2
    assert check_axis(b, cs)["axis_identity_defect"] <= 1e-9


def test_sign_structure_for_positive_b(constant_cs, constant_axis):
    cs = CoefficientSet("1/16", "1/2 + 0.0008*sin(y)", "0.0008*cos(y)", "0")
    init = from_zp(cs, "1 + 0.002*sin(y)", "1 - 0.002*(1 - cos(y))", GRID)
    for data in (constant_axis, init):
        assert np.all(data.r > 0) and np.all(data.s < 0)


def test_axis_report_constant_data(constant_cs, constant_axis):
    rep = check_axis(constant_axis, constant_cs, gap=0.25, gap_floor=0.25)
    assert rep["gap_candidate"] == 1.0
    assert rep["sup_abs_r0"] == 0.5 and rep["sup_abs_q0"] == 0.0
    assert set(rep["verdicts"].values()) == {"pass"}


def test_axis_report_quadratic_data(hess_cs):
    init = from_zp(hess_cs, "y^2/2", "y", GRID)
    rep = check_axis(init, hess_cs, gap=2.0)
    assert rep["gap_candidate"] == 2.0 and rep["sup_abs_s0"] == 2.0
    assert rep["verdicts"]["invariants_bounded"] == "fail"
    assert rep["verdicts"]["initial_gap"] == "pass"


def test_axis_report_overlapping_ranges(constant_cs):
    init = from_rs(constant_cs, "0.5 + 0.3*y", "0.3*y", (0, 0, 0), GRID)
    rep = check_axis(init, constant_cs, gap=0.1)
    assert rep["gap_candidate"] == pytest.approx(-0.1)
    assert rep["verdicts"]["initial_gap"] == "fail"


def test_interpolation_and_restriction(constant_cs):
    init = from_rs(constant_cs, "0.5", "-0.5", (0.0, 0.0, 0.0), GRID, anchor_y=0.0)
    vals, clamped = init.at(GRID.points[::7])
    assert np.array_equal(vals, init.fields()[:, ::7]) and not clamped.any()
    vals, clamped = init.at(np.array([-1.5, 1.5]))
    assert clamped.all() and np.array_equal(vals[:, 0], init.fields()[:, 0])
    w = restrict(init, -0.5, 0.5)
    assert w.grid.n == 129 and w.y[0] == -0.5 and w.derivs["q"].shape == (129,)
