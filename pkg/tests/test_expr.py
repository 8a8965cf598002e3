import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from hypma import expr as E
from hypma.errors import DomainError, ExpressionSyntaxError, UnknownIdentifier

CORPUS = [
    "x*y", "1/16", "-x^2", "2^3^2", "8/4/2", "2 - 3 - 4", "sin(x*q) + cos(y)/(1 + z^2)",
    "exp(-p) * ln(2 + q^2)", "sqrt(1 + x^2) - abs(y)", "tanh(x - y) * -z", "(x + y) * (x - y)",
    "x^-1", "1e-3 * p + 2.5", "-(x + 1)^2", "((x))", "x / (y / z)", "x - (y - z)", "x^(y^z)",
    "(x^y)^z", "-x * -y", "2 * -3",
]


def pt(**kw):
    base = dict(x=0.3, y=-0.7, z=1.1, p=0.4, q=-0.2)
    base.update(kw)
    return E.JetPoint(**base)


def test_parse_product():
    assert E.parse("x*y") == E.Binary("mul", E.Var("x"), E.Var("y"))


def test_parse_fraction_keeps_tree():
    assert E.parse("1/16") == E.Binary("div", E.Const(1.0), E.Const(16.0))


def test_unknown_identifier_named():
    with pytest.raises(UnknownIdentifier) as info:
        E.parse("c+1")
    assert info.value.name == "c"


@pytest.mark.parametrize("src", ["x+", "(x", "x y", "", "sin x", "x $ y", "1..2"])
def test_syntax_errors_carry_position(src):
    with pytest.raises(ExpressionSyntaxError) as info:
        E.parse(src)
    assert 0 <= info.value.position <= len(src)


@pytest.mark.parametrize("src,value", [
    ("-x^2", -4.0), ("-2^2", -4.0), ("2^3^2", 512.0), ("8/4/2", 1.0), ("2-3-4", -5.0),
    ("2*3+4*5", 26.0), ("(2+3)*4", 20.0), ("x*y", 6.0), ("2**3", 8.0), ("log(x)", math.log(2)),
])
def test_precedence_and_associativity(src, value):
    assert E.evaluate(E.parse(src), {"x": 2.0, "y": 3.0}) == pytest.approx(value, rel=1e-15)


def test_eval_examples():
    assert E.evaluate(E.parse("x*y"), E.JetPoint(2, 3)) == 6.0
    assert E.evaluate(E.parse("1/16"), pt()) == 0.0625


@pytest.mark.parametrize("src,kind", [
    ("1/(x-x)", "div-by-zero"), ("ln(x-x)", "log-nonpositive"), ("ln(-1-x^2)", "log-nonpositive"),
    ("(x-x)^(-1)", "0^negative"), ("sqrt(-1-x^2)", "sqrt-negative"),
])
def test_domain_errors(src, kind):
    with pytest.raises(DomainError) as info:
        E.evaluate(E.parse(src), pt())
    assert info.value.kind == kind


def test_jet_point_rejects_nonfinite():
    with pytest.raises(ValueError):
        E.JetPoint(float("nan"), 0.0)


def test_derivative_examples():
    assert E.differentiate(E.parse("x*y"), "x") == E.Var("y")
    assert E.differentiate(E.parse("1/2"), "q") == E.Const(0.0)
    d = E.differentiate(E.parse("sin(x*q)"), "q")
    assert E.to_string(d) == "cos(x * q) * x"


def central_difference(e, point, v):
    h = 1e-6 * max(1.0, abs(point[v]))
    up, dn = dict(point), dict(point)
    up[v] += h
    dn[v] -= h
    return (E.evaluate(e, up) - E.evaluate(e, dn)) / (2 * h)


def test_derivative_matches_difference_at_random_points(rng):
    e = E.parse("sin(x*q)")
    d = E.differentiate(e, "q")
    for _ in range(100):
        point = dict(zip("xyzpq", rng.uniform(-2, 2, 5)))
        exact = E.evaluate(d, point)
        assert abs(central_difference(e, point, "q") - exact) <= 1e-6 * max(1.0, abs(exact))


@pytest.mark.parametrize("src", CORPUS)
def test_print_parse_round_trip(src):
    e = E.parse(src)
    assert E.parse(E.to_string(e)) == e


@pytest.mark.parametrize("src", CORPUS)
def test_vectorized_matches_scalar(src, rng):
    e = E.parse(src)
    f = E.compile_expr(e)
    pts = {k: rng.uniform(0.5, 1.5, 20) for k in "xyzpq"}
    vec = f(pts)
    for i in range(20):
        assert E.evaluate(e, {k: v[i] for k, v in pts.items()}) == pytest.approx(
            float(np.broadcast_to(vec, (20,))[i]), rel=1e-14, abs=1e-300)


def test_free_variables_and_ops():
    e = E.parse("sin(x) + abs(q)")
    assert E.free_variables(e) == {"x", "q"}
    assert E.contains_op(e, "abs") and not E.contains_op(e, "ln")


def test_substitute_replaces_variables():
    e = E.substitute(E.parse("x*y + p"), {"x": E.parse("2"), "p": E.parse("y^2")})
    assert E.evaluate(e, {"y": 3.0}) == 15.0


def test_simplification_drops_trivial_terms():
    assert E.mul(E.Const(0.0), E.Var("x")) == E.Const(0.0)
    assert E.add(E.Var("x"), E.Const(0.0)) == E.Var("x")
    assert E.power(E.Var("x"), E.Const(1.0)) == E.Var("x")
    assert E.differentiate(E.parse("3*x + 2"), "x") == E.Const(3.0)


def test_expressions_are_immutable():
    e = E.parse("x")
    with pytest.raises(AttributeError):
        e.name = "y"


# ------------------------------------------------------------------ properties
# Random trees are built from guarded compositions so that every sampled
# point lies strictly inside the domain of each operation.

VARS = list(E.JET_VARIABLES)


def _leaf():
    return st.one_of(st.sampled_from(VARS).map(E.Var),
                     st.floats(-2, 2, allow_nan=False).map(lambda c: E.Const(round(c, 3))))


def _extend(children):
    un = st.tuples(st.sampled_from(["neg", "sin", "cos", "tanh", "exp_sin", "ln_pos", "sqrt_pos", "abs"]),
                   children)
    bi = st.tuples(st.sampled_from(["add", "sub", "mul", "div_pos", "sq", "cube"]), children, children)
    return st.one_of(un.map(_build_unary), bi.map(_build_binary))


def _pos(a):
    return E.Binary("add", E.Const(1.0), E.Binary("mul", a, a))


def _build_unary(t):
    op, a = t
    if op == "exp_sin":
        return E.Unary("exp", E.Unary("sin", a))
    if op == "ln_pos":
        return E.Unary("ln", _pos(a))
    if op == "sqrt_pos":
        return E.Unary("sqrt", _pos(a))
    return E.Unary(op, a)


def _build_binary(t):
    op, a, b = t
    if op == "div_pos":
        return E.Binary("div", a, _pos(b))
    if op == "sq":
        return E.Binary("pow", a, E.Const(2.0))
    if op == "cube":
        return E.Binary("pow", a, E.Const(3.0))
    return E.Binary(op, a, b)


def depth(e):
    if isinstance(e, (E.Const, E.Var)):
        return 1
    if isinstance(e, E.Unary):
        return 1 + depth(e.arg)
    return 1 + max(depth(e.left), depth(e.right))


trees = st.recursive(_leaf(), _extend, max_leaves=12).filter(lambda e: depth(e) <= 6)
points = st.tuples(*[st.floats(-1, 1, allow_nan=False) for _ in VARS]).map(lambda t: dict(zip(VARS, t)))


def _abs_args(e, out):
    if isinstance(e, E.Unary):
        if e.op == "abs":
            out.append(e.arg)
        _abs_args(e.arg, out)
    elif isinstance(e, E.Binary):
        _abs_args(e.left, out)
        _abs_args(e.right, out)
    return out


@given(trees, points, st.sampled_from(VARS))
def test_derivative_agrees_with_central_difference(e, point, v):
    try:
        value = E.evaluate(e, point)
    except DomainError:
        assume(False)
    assume(math.isfinite(value) and abs(value) < 1e3)
    # stay away from the kink of abs
    assume(all(abs(E.evaluate(a, point)) > 1e-3 for a in _abs_args(e, [])))
    exact = E.evaluate(E.differentiate(e, v), point)
    assume(math.isfinite(exact) and abs(exact) < 1e4)
    fd = central_difference(e, point, v)
    assert abs(fd - exact) <= 1e-6 * max(1.0, abs(exact))


@given(trees, trees, points, st.sampled_from(VARS))
def test_derivative_is_linear(a, b, point, v):
    try:
        lhs = E.evaluate(E.differentiate(E.Binary("add", a, b), v), point)
        rhs = E.evaluate(E.differentiate(a, v), point) + E.evaluate(E.differentiate(b, v), point)
    except DomainError:  # derivative of abs at its kink
        assume(False)
    assume(math.isfinite(lhs) and math.isfinite(rhs))
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


@given(trees)
def test_round_trip_on_random_trees(e):
    assert E.evaluate(E.parse(E.to_string(e)), dict.fromkeys(VARS, 0.37)) == pytest.approx(
        E.evaluate(e, dict.fromkeys(VARS, 0.37)), rel=1e-12, nan_ok=True)
    assert E.parse(E.to_string(E.parse(E.to_string(e)))) == E.parse(E.to_string(e))


@pytest.mark.parametrize("a,b", [("u*v", "v*u"), ("x + sin(y)", "sin(y) + x"),
                                 ("exp(a*b + c)", "exp(c + b*a)")])
def test_sub_cancels_commuted_operands(a, b):
    names = ("u", "v", "x", "y", "a", "b", "c")
    assert E.sub(E.parse(a, names), E.parse(b, names)) == E.Const(0.0)


def test_sub_keeps_noncommuting_operands():
    names = ("x", "y")
    out = E.sub(E.parse("x - y", names), E.parse("y - x", names))
    assert E.to_string(out) != "0"
