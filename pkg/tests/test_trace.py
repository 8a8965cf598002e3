import numpy as np
import pytest

from hypma.errors import OutOfDomain
from hypma.trace import FieldGrid, integrate_along, interpolate, sample, sweep, trace


def make_grid(h_x, h_y, fields, x_max=1.0, y_min=-2.0, y_max=2.0):
    """FieldGrid whose five fields are given as functions of (x, y)."""
    xs = np.arange(0, x_max + 1e-12, h_x)
    ys = y_min + h_y * np.arange(int(round((y_max - y_min) / h_y)) + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    vals = np.stack([np.broadcast_to(np.asarray(f(X, Y), dtype=float), X.shape) for f in fields])
    return FieldGrid(h_x, y_min, h_y, vals.copy(), np.zeros(X.shape, dtype=bool))


ZERO = lambda x, y: 0.0 * x


def test_node_values_are_exact():
    g = make_grid(0.1, 0.05, [lambda x, y: np.sin(3 * x + y)] + [ZERO] * 4, y_min=-1, y_max=1)
    for k, j in [(0, 0), (3, 17), (10, 40)]:
        assert interpolate(g, g.xs[k], g.ys[j], "r") == g.values[0, k, j]


def test_affine_fields_reproduced():
    g = make_grid(0.1, 0.05, [lambda x, y: 2 - 3 * x + 0.5 * y] + [ZERO] * 4, y_min=-1, y_max=1)
    rng = np.random.default_rng(1)
    x, y = rng.uniform(0, 1, 50), rng.uniform(-1, 1, 50)
    assert np.allclose(interpolate(g, x, y, "r"), 2 - 3 * x + 0.5 * y, atol=1e-14)


def test_quadratic_midpoint_error():
    h = 1 / 16
    g = make_grid(0.25, h, [lambda x, y: y ** 2] + [ZERO] * 4, y_min=-1, y_max=1)
    mid = g.ys[:-1] + h / 2
    err = np.abs(interpolate(g, 0.5, mid, "r") - mid ** 2)
    # (h^2 / 8) max |f''| with f'' = 2; attained exactly at every midpoint
    assert err.max() <= h ** 2 / 8 * 2 + 1e-15
    assert err.min() == pytest.approx(h ** 2 / 4, rel=1e-9)


def test_out_of_domain():
    g = make_grid(0.25, 0.25, [ZERO] * 5, y_min=-1, y_max=1)
    with pytest.raises(OutOfDomain):
        interpolate(g, 1.5, 0.0, "r")
    with pytest.raises(OutOfDomain):
        trace(g, (-0.1, 0.0), "s")
    vals, clamped = sample(g, 0.5, 3.0)
    assert clamped


def test_constant_slope_gives_straight_lines():
    c = -0.3
    g = make_grid(1 / 32, 1 / 32, [ZERO, lambda x, y: c + 0 * x] + [ZERO] * 3)
    path = trace(g, (0.75, 0.2), "s")
    assert np.allclose(path.ys, 0.2 - c * (0.75 - path.taus), atol=1e-14)
    assert path.ys[0] == 0.2 and path.taus[-1] == 0.0 and not path.clamped


def test_linear_slope_fourth_order():
    # slope = y: g(tau) = y exp(tau - x)
    errs = []
    for h in (1 / 8, 1 / 16):
        g = make_grid(h, 1 / 64, [ZERO, lambda x, y: y] + [ZERO] * 3)
        path = trace(g, (1.0, 0.5), "s")
        errs.append(abs(path.foot - 0.5 * np.exp(-1.0)))
    assert errs[1] < 1e-6 and errs[0] / errs[1] > 14


def test_substeps_refine_the_path():
    g = make_grid(1 / 8, 1 / 64, [ZERO, lambda x, y: y] + [ZERO] * 3)
    coarse = abs(trace(g, (1.0, 0.5), "s").foot - 0.5 * np.exp(-1))
    fine = abs(trace(g, (1.0, 0.5), "s", substeps=4).foot - 0.5 * np.exp(-1))
    assert fine < coarse / 100


def test_integrals_along_path():
    g = make_grid(1 / 16, 1 / 16, [ZERO, lambda x, y: 0.4 + 0 * x] + [ZERO] * 3)
    path = trace(g, (0.6875, 0.1), "s")
    assert integrate_along(g, path, lambda t, y, st: 0.0, init=2.5) == 2.5
    assert integrate_along(g, path, lambda t, y, st: 1.0, init=2.5) == pytest.approx(2.5 + 0.6875, abs=1e-12)


def test_height_along_vertical_characteristic():
    # exact fields of z = x*y + y^2/2: r = 0, s = -2, p = y, q = x + y
    g = make_grid(1 / 16, 1 / 16, [ZERO, lambda x, y: -2 + 0 * x, lambda x, y: y,
                                   lambda x, y: x + y, lambda x, y: x * y + y ** 2 / 2])
    x, y = 0.75, 0.3
    path = trace(g, (x, y), "r")
    assert np.all(path.ys == y)
    fz = lambda t, yy, st: st[2] + st[3] * st[0]
    z = integrate_along(g, path, fz, init=path.foot ** 2 / 2)
    assert z == pytest.approx(x * y + y ** 2 / 2, abs=1e-14)


def test_vectorized_integrand_matches_scalar():
    g = make_grid(1 / 16, 1 / 16, [lambda x, y: 0.2 * np.sin(y), lambda x, y: 0.3 * np.cos(x + y),
                                   lambda x, y: y, lambda x, y: x, ZERO])
    path = trace(g, (0.8125, 0.4), "s")
    f = lambda t, y, st: st[2] * st[3] + np.sin(t)
    assert integrate_along(g, path, f) == pytest.approx(integrate_along(g, path, f, vectorized=True), rel=1e-14)


def smooth_grid(h):
    return make_grid(h, h, [lambda x, y: 0.5 + 0.3 * np.sin(y) + 0.2 * x,
                            lambda x, y: -0.4 + 0.25 * np.cos(2 * y) * (1 + x),
                            lambda x, y: np.exp(-y * y), lambda x, y: x * y, lambda x, y: np.sin(x - y)])


@pytest.mark.parametrize("slope,substeps", [("r", 1), ("s", 1), ("s", 3)])
def test_batched_sweep_matches_single_paths(slope, substeps):
    """Two routes: the compiled batch kernel against trace + integrate_along."""
    g = smooth_grid(1 / 16)
    F = np.stack([np.sin(g.values[2] + g.values[4]), g.values[3] ** 2])
    Fg = g.replace(np.concatenate([F, np.zeros((3,) + F.shape[1:])]))
    rng = np.random.default_rng(7)
    levels = rng.integers(0, g.K + 1, 40)
    cols = rng.integers(0, g.J, 40)
    foot, acc, clamped = sweep(g, F, slope, levels, cols, substeps)
    for n in range(40):
        path = trace(g, (g.xs[levels[n]], g.ys[cols[n]]), slope, substeps)
        assert foot[n] == pytest.approx(path.foot, abs=1e-13)
        assert clamped[n] == path.clamped
        for m in range(2):
            want = integrate_along(Fg, path, lambda t, y, st, m=m: st[m])
            assert acc[m, n] == pytest.approx(want, abs=1e-13)


def all_feet(g, slope):
    K, J = g.K, g.J
    levels = np.repeat(np.arange(K + 1), J)
    cols = np.tile(np.arange(J), K + 1)
    foot, _, clamped = sweep(g, np.zeros((1, K + 1, J)), slope, levels, cols)
    return foot.reshape(K + 1, J), clamped.reshape(K + 1, J)


@pytest.mark.parametrize("h", [1 / 32, 1 / 64])
def test_foot_map_is_transported(h):
    # the foot point is constant along characteristics
    g = smooth_grid(h)
    F, _ = all_feet(g, "s")
    xi = g.values[1][1:-1, 1:-1]
    T = (F[2:, 1:-1] - F[:-2, 1:-1]) / (2 * h) + xi * (F[1:-1, 2:] - F[1:-1, :-2]) / (2 * h)
    inner = np.abs(g.ys[1:-1]) < 1
    assert np.abs(T[:, inner]).max() <= h ** 2 + h ** 2


def test_bounded_slopes_stay_inside_the_cone():
    g = make_grid(1 / 32, 1 / 32, [lambda x, y: 0.9 * np.sin(3 * y + x), lambda x, y: -0.95 * np.cos(y)]
                  + [ZERO] * 3, y_min=-1, y_max=1)
    X, Y = np.meshgrid(g.xs, g.ys, indexing="ij")
    cone = np.abs(Y) + X <= 1 + 1e-12
    for slope in ("r", "s"):
        _, clamped = all_feet(g, slope)
        assert not clamped[cone].any()
    _, clamped = all_feet(g, "s")
    assert clamped[~cone].any()


def test_grids_are_read_only():
    g = smooth_grid(1 / 4)
    with pytest.raises(ValueError):
        g.values[0, 0, 0] = 1.0
