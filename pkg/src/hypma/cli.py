"""Command-line entry point: check, solve, transform and bundled demos.

Exit codes: 0 success, 1 bad config, 2 a condition failed, 3 a condition is
unknown, 4 no convergence, 5 a node left the admissible set.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import config as C
from .coeffs import CoefficientSet
from .contact import (WAVE_FORM, IntegralSurface, ampere_transform, contact_defects,
                      graph_surface, projection_rank, pullback, wave_ma_correspondence)
from .errors import (ConfigError, DomainError, FreeAxisError, HyperbolicityError,
                     NonGraphicalImage, SeparationError)
from .initdata import YGrid, from_rs, from_zp
from .solver import reconstruct, solve, working_grid
from .verifier import FAIL, PASS, UNKNOWN, BoundsInput, SampleBox, check_all

EXIT_OK, EXIT_CONFIG, EXIT_FAIL, EXIT_UNKNOWN, EXIT_NOT_CONVERGED, EXIT_NODE = range(6)

SOLUTION_HEADER = "x,y,r,s,p,q,z,z_xx,z_xy,z_yy,residual_fd,clamped"
SURFACE_HEADER = "u,v,x,y,z,p,q"
RANKS_HEADER = "u,v,rank_in,rank_out,contact_defect_in,contact_defect_out,wave_form_residual"

log = logging.getLogger("hypma")


def _g(v):
    return format(float(v) + 0.0, ".17g")  # + 0.0 folds -0 into 0


def _write_csv(path, header, rows, int_cols=()):
    """rows: 2-D array; columns in ``int_cols`` are written as integers."""
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(str(int(v)) if i in int_cols else _g(v)
                              for i, v in enumerate(row)) + "\n")


def _write_json(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, allow_nan=False, default=_json_default)
        fh.write("\n")


def _json_default(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(f"not serializable: {type(v)}")


def _finite(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


class Run:
    """Shared state of one command: config, output directory, meta record."""

    def __init__(self, cfg: C.RunConfig, command):
        self.cfg = cfg
        self.out = Path(cfg.outputs.directory)
        self.out.mkdir(parents=True, exist_ok=True)
        self.meta = {"command": command, "config": cfg.to_dict(),
                     "flags": {"threads": cfg.grid.threads, "seed": cfg.seed,
                               "out": str(self.out)},
                     "environment": {"package_version": __version__,
                                     "python": platform.python_version(),
                                     "numpy": np.__version__},
                     "timing": {}}
        self.t0 = time.perf_counter()

    def wants(self, fmt):
        return fmt in self.cfg.outputs.formats

    def fail_at(self, exc):
        self.meta["failure"] = {"type": type(exc).__name__, "message": str(exc),
                                "location": getattr(exc, "location", None)}
        if isinstance(exc, FreeAxisError):
            self.meta["failure"]["location"] = [0.0, exc.y]

    def close(self, code):
        self.meta["exit_code"] = code
        self.meta["timing"]["total_seconds"] = time.perf_counter() - self.t0
        if self.wants("json"):
            _write_json(self.out / "meta.json", self.meta)
        return code


def build_problem(cfg: C.RunConfig):
    """Coefficients, axis data on the working grid, and the y-window."""
    pr, g = cfg.problem, cfg.grid
    cs = CoefficientSet(pr.A, pr.B, pr.C, pr.D, hyperbolicity_floor=g.hyperbolicity_floor)

    def sample(grid):
        if pr.variant == "zp":
            return from_zp(cs, pr.z0, pr.p0, grid, g.separation_floor)
        return from_rs(cs, pr.r0, pr.s0, pr.anchor, grid, pr.anchor_y, g.separation_floor)

    window = YGrid(g.y_min, g.y_max, g.h_y)
    if pr.variant == "rs" and pr.anchor_y is not None and not g.y_min <= pr.anchor_y <= g.y_max:
        raise ConfigError("anchor_y must lie in [y_min, y_max]")
    first = sample(window)
    slope = max(float(np.abs(first.r).max()), float(np.abs(first.s).max()))
    init = sample(working_grid(g, slope))
    return cs, init, (g.y_min, g.y_max)


def cmd_check(cfg: C.RunConfig) -> int:
    run = Run(cfg, "check")
    if cfg.problem is None:
        raise ConfigError("check needs a [problem] table")
    try:
        cs, init, y_range = build_problem(cfg)
    except (HyperbolicityError, SeparationError, FreeAxisError, DomainError) as exc:
        run.fail_at(exc)
        log.error("axis data: %s", exc)
        return run.close(EXIT_NODE)
    bounds = cfg.bounds if cfg.bounds is not None else BoundsInput(mode="grid-estimated")
    box = None
    if cfg.sampling.box is not None:
        box = SampleBox(**{k: tuple(v) for k, v in cfg.sampling.box.items()})
    rep = check_all(cs, init, bounds, x_range=(cfg.grid.x_min, cfg.grid.x_max), y_range=y_range,
                    axis_constants=cfg.axis_constants, box=box, n_x=cfg.sampling.n_x,
                    n_samples=cfg.sampling.n_samples, seed=cfg.seed, requested=cfg.requested)
    data = rep.to_dict()
    data["axis_sample"] = _axis_sample(cs, init, y_range)
    overall = rep.verdict()
    run.meta["verdict"] = overall
    run.meta["timing"]["check_seconds"] = time.perf_counter() - run.t0
    if run.wants("json"):
        _write_json(run.out / "report.json", data)
    for name in rep.requested:
        v = rep.conditions.get(name, {}).get("verdict", UNKNOWN)
        print(f"{name}: {v}")
    print(f"overall: {overall}")
    code = {PASS: EXIT_OK, FAIL: EXIT_FAIL, UNKNOWN: EXIT_UNKNOWN}[overall]
    return run.close(code)


def _axis_sample(cs, init, y_range):
    """Axis values at the window node closest to its centre."""
    y = init.y
    j = int(np.argmin(np.abs(y - 0.5 * (y_range[0] + y_range[1]))))
    ev = cs.evaluate(0.0, y[j], init.z[j], init.p[j], init.q[j])
    return {"y": float(y[j]), "disc": float(ev.Dl), "r0": float(init.r[j]),
            "s0": float(init.s[j]), "p0": float(init.p[j]), "q0": float(init.q[j]),
            "z0": float(init.z[j])}


def cmd_solve(cfg: C.RunConfig) -> int:
    run = Run(cfg, "solve")
    if cfg.problem is None:
        raise ConfigError("solve needs a [problem] table")
    try:
        cs, init, _ = build_problem(cfg)
        res = solve(cs, init, cfg.grid, raise_on_failure=False,
                    callback=lambda n, R, _: log.info("iteration %d  R = %.3e", n, R))
    except (HyperbolicityError, SeparationError, FreeAxisError, DomainError) as exc:
        run.fail_at(exc)
        log.error("node failure: %s", exc)
        print(f"node failure: {exc}")
        return run.close(EXIT_NODE)
    if not res.converged:
        try:
            reconstruct(cs, res, cfg.grid)
        except (HyperbolicityError, SeparationError, DomainError):
            pass
    run.meta["timing"]["solve_seconds"] = res.elapsed
    run.meta.update({"converged": res.converged, "iterations": res.iterations,
                     "final_R": _finite(res.history[-1]) if res.history else None,
                     "clamped_nodes": int(res.clamped.sum()),
                     "grid_shape": [len(res.xs), len(res.ys)]})
    if run.wants("csv"):
        _write_solution(run.out / "solution.csv", res)
        _write_csv(run.out / "convergence.csv", "iteration,R_n",
                   [(n + 1, R) for n, R in enumerate(res.history)], int_cols=(0,))
    status = "converged" if res.converged else "not converged"
    print(f"{status} after {res.iterations} iterations; last R = {res.history[-1]:.3e}")
    return run.close(EXIT_OK if res.converged else EXIT_NOT_CONVERGED)


def _write_solution(path, res):
    nx, ny = len(res.xs), len(res.ys)
    X, Y = np.meshgrid(res.xs, res.ys, indexing="ij")
    nan = np.full((nx, ny), np.nan)
    pick = lambda a: nan if a is None else a
    cols = [X, Y, *res.fields, pick(res.zxx), pick(res.zxy), pick(res.zyy),
            pick(res.residual_fd), res.clamped.astype(float)]
    rows = np.stack([c.reshape(-1) for c in cols], axis=1)
    _write_csv(path, SOLUTION_HEADER, rows, int_cols=(11,))


def cmd_transform(cfg: C.RunConfig) -> int:
    run = Run(cfg, "transform")
    tr = cfg.transform
    if tr is None:
        raise ConfigError("transform needs a [transform] table")
    if tr.surface is not None:
        src = IntegralSurface.from_strings(tr.surface, tr.u_range, tr.v_range)
    else:
        src = graph_surface(tr.function, tr.u_range, tr.v_range)
    try:
        u, v = src.samples(tr.samples, cfg.seed)
        img = ampere_transform(src)
        vin, vout = src.evaluate(u, v), img.evaluate(u, v)
        ranks_in = [projection_rank(src, (a, b)) for a, b in zip(u, v)]
        ranks_out = [projection_rank(img, (a, b)) for a, b in zip(u, v)]
        d_in, d_out = contact_defects(src, u, v), contact_defects(img, u, v)
        wave = np.abs(pullback(img, WAVE_FORM, u, v)) * np.ones_like(u)
    except DomainError as exc:
        run.fail_at(exc)
        print(f"surface evaluation failed: {exc}")
        return run.close(EXIT_NODE)
    summary = {"image": img.strings(), "min_rank_in": min(ranks_in), "min_rank_out": min(ranks_out),
               "max_rank_out": max(ranks_out), "contact_defect_in": float(d_in.max()),
               "contact_defect_out": float(d_out.max()), "wave_form_residual": float(wave.max())}
    if tr.function is not None:
        try:
            ma, wv = wave_ma_correspondence(tr.function, tr.u_range, tr.v_range, tr.samples, cfg.seed)
            summary["correspondence"] = {"residual_ma": ma, "residual_wave": wv, "graphical": True}
        except NonGraphicalImage as exc:
            summary["correspondence"] = {"residual_ma": exc.residual_ma, "residual_wave": None,
                                         "graphical": False, "min_rank": exc.min_rank,
                                         "residual_wave_form": exc.residual_wave_form}
    run.meta["transform"] = summary
    if run.wants("csv"):
        _write_csv(run.out / "surface_in.csv", SURFACE_HEADER, np.column_stack([u, v, *vin]))
        _write_csv(run.out / "surface_out.csv", SURFACE_HEADER, np.column_stack([u, v, *vout]))
        _write_csv(run.out / "ranks.csv", RANKS_HEADER,
                   np.column_stack([u, v, ranks_in, ranks_out, d_in, d_out, wave]), int_cols=(2, 3))
    print(f"image: {', '.join(summary['image'])}")
    print(f"projection rank of image: {summary['min_rank_out']}..{summary['max_rank_out']}; "
          f"contact defect {summary['contact_defect_out']:.2e}; "
          f"wave-form residual {summary['wave_form_residual']:.2e}")
    return run.close(EXIT_OK)


def cmd_demo(cfg: C.RunConfig) -> int:
    if cfg.transform is not None and cfg.problem is None:
        return cmd_transform(cfg)
    base = Path(cfg.outputs.directory)
    codes = []
    for name, fn in (("check", cmd_check), ("solve", cmd_solve)):
        sub = cfg.with_overrides(out=base / name)
        print(f"[{name}]")
        codes.append(fn(sub))
    return max(codes)


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory (overrides outputs.directory)")
    common.add_argument("--threads", type=int, help="worker threads for the solver sweep")
    common.add_argument("--seed", type=_u64, help="seed for sampling")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="hypma", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("check", "verify the existence hypotheses"),
                           ("solve", "run successive approximations"),
                           ("transform", "apply the Ampere transformation to a surface")):
        sp = sub.add_parser(name, parents=[common], help=helptext)
        sp.add_argument("--config", required=True, help="TOML run configuration")
    sp = sub.add_parser("demo", parents=[common], help="run a bundled configuration")
    sp.add_argument("name", choices=C.BUNDLED)
    return p


def _u64(text):
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


COMMANDS = {"check": cmd_check, "solve": cmd_solve, "transform": cmd_transform, "demo": cmd_demo}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "demo":
            cfg = C.load(C.bundled_path(args.name))
            out = args.out if args.out is not None else str(Path("out") / args.name)
        else:
            cfg = C.load(args.config)
            out = args.out
        cfg = cfg.with_overrides(out=out, threads=args.threads, seed=args.seed)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
