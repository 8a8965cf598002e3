"""Shared generators and tolerances for the test suite."""

import numpy as np

from hypma.coeffs import CoefficientSet
from hypma.errors import HyperbolicityError
from hypma.initdata import YGrid

TEMPLATES = (
    "{0} + {1}*sin(x + {2}*p) + {3}*z*q",
    "{0} + {1}*cos(y*z) + {2}*p^2",
    "{0} + {1}*x*q + {2}*exp(-p^2)*y",
    "{0} + {1}*tanh(q + z) + {2}*x*y",
)


def random_coefficient_set(rng):
    """Coefficients depending on all five jet variables with seeded constants."""
    exprs = []
    for t in TEMPLATES:
        c = rng.uniform(-1, 1, 4).round(6)
        exprs.append(t.format(*c))
    return CoefficientSet(*exprs)


def random_cases(n, seed=0, min_disc=0.1):
    """n tuples (cs, point, state) with disc >= min_disc at the point."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        cs = random_coefficient_set(rng)
        x, y, z, p, q, r, s = rng.uniform(-1, 1, 7)
        try:
            ev = cs.evaluate(x, y, z, p, q)
        except HyperbolicityError:
            continue
        if ev.Dl < min_disc:
            continue
        out.append((cs, (x, y, z, p, q), (r, s)))
    return out


# nonpolynomial manufactured solution of hess z + A = 0 with B = C = D = 0
WAVY_Z = "x*y + y^2/2 + 0.1*sin(x)*cos(y)"
WAVY_Z0, WAVY_P0 = "y^2/2", "y + 0.1*cos(y)"
WAVY_A = "(1 - 0.1*cos(x)*sin(y))^2 + 0.1*sin(x)*cos(y)*(1 - 0.1*sin(x)*cos(y))"


def wavy_exact(x, y):
    """(z, z_x, z_y) of WAVY_Z."""
    z = x * y + y ** 2 / 2 + 0.1 * np.sin(x) * np.cos(y)
    return z, y + 0.1 * np.cos(x) * np.cos(y), x + y - 0.1 * np.sin(x) * np.sin(y)


def setup_problem(coeffs, z0, p0, cfg):
    """Coefficients and axis data on a working grid with an automatic halo."""
    from hypma.initdata import from_zp
    from hypma.solver import working_grid

    cs = CoefficientSet(*coeffs)
    first = from_zp(cs, z0, p0, YGrid(cfg.y_min, cfg.y_max, cfg.h_y))
    slope = max(np.abs(first.r).max(), np.abs(first.s).max())
    return cs, from_zp(cs, z0, p0, working_grid(cfg, slope))
