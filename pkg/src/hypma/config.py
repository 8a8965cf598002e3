"""Run configuration: a TOML document with a fixed schema.

Top-level tables: ``problem`` (coefficients and one initial-data variant),
``grid`` (solver settings), ``bounds``, ``axis_constants``, ``sampling``,
``transform`` and ``outputs``; plus scalar ``name`` and ``seed``. Unknown keys
anywhere are rejected.
"""

from __future__ import annotations

import sys
from dataclasses import MISSING, asdict, dataclass, field, fields, replace
from pathlib import Path

from . import expr as E
from .errors import ConfigError, ExpressionSyntaxError, UnknownIdentifier
from .solver import SolverConfig
from .verifier import CONDITION_SETS, AxisConstants, BoundsInput

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

FORMATS = ("csv", "json")


@dataclass
class ProblemSpec:
    A: str
    B: str
    C: str
    D: str
    z0: str | None = None
    p0: str | None = None
    r0: str | None = None
    s0: str | None = None
    anchor: list | None = None  # (z, p, q) at anchor_y
    anchor_y: float | None = None

    @property
    def variant(self):
        return "zp" if self.z0 is not None else "rs"

    def validate(self):
        zp = [self.z0, self.p0]
        rs = [self.r0, self.s0, self.anchor]
        has_zp = any(v is not None for v in zp)
        has_rs = any(v is not None for v in rs)
        if has_zp == has_rs:
            raise ConfigError("problem needs exactly one of {z0, p0} or {r0, s0, anchor}")
        if has_zp and None in zp:
            raise ConfigError("initial data variant {z0, p0} is incomplete")
        if has_rs and None in rs:
            raise ConfigError("initial data variant {r0, s0, anchor} is incomplete")
        if has_rs and len(self.anchor) != 3:
            raise ConfigError("anchor must be [z, p, q]")
        if has_zp and self.anchor_y is not None:
            raise ConfigError("anchor_y only applies to the {r0, s0, anchor} variant")
        for k in "ABCD":
            _parse(getattr(self, k), E.JET_VARIABLES, f"problem.{k}")
        for k in ("z0", "p0", "r0", "s0"):
            if getattr(self, k) is not None:
                _parse(getattr(self, k), ("y",), f"problem.{k}")


@dataclass
class SamplingSpec:
    n_x: int = 33
    n_samples: int = 512
    box: dict | None = None  # optional {x,y,z,p,q: [lo, hi]}

    def validate(self):
        if self.n_x < 2 or self.n_samples < 1:
            raise ConfigError("sampling needs n_x >= 2 and n_samples >= 1")
        if self.box is not None:
            if set(self.box) != {"x", "y", "z", "p", "q"}:
                raise ConfigError("sampling.box needs exactly x, y, z, p, q")
            for k, v in self.box.items():
                if len(v) != 2 or not v[0] <= v[1]:
                    raise ConfigError(f"sampling.box.{k} must be [lo, hi] with lo <= hi")


@dataclass
class TransformSpec:
    surface: list | None = None  # five expressions in (u, v)
    function: str | None = None  # z = f(x, y) for the wave correspondence
    u_range: list = field(default_factory=lambda: [-1.0, 1.0])
    v_range: list = field(default_factory=lambda: [-1.0, 1.0])
    samples: int = 100

    def validate(self):
        if (self.surface is None) == (self.function is None):
            raise ConfigError("transform needs exactly one of surface or function")
        if self.surface is not None:
            if len(self.surface) != 5:
                raise ConfigError("transform.surface needs five expressions")
            for s in self.surface:
                _parse(s, ("u", "v"), "transform.surface")
        if self.function is not None:
            _parse(self.function, ("x", "y"), "transform.function")
        for name in ("u_range", "v_range"):
            lo, hi = getattr(self, name)
            if not hi > lo:
                raise ConfigError(f"transform.{name} is empty")
        if self.samples < 1:
            raise ConfigError("transform.samples must be >= 1")


@dataclass
class OutputSpec:
    directory: str = "out"
    formats: list = field(default_factory=lambda: list(FORMATS))

    def validate(self):
        bad = set(self.formats) - set(FORMATS)
        if bad:
            raise ConfigError(f"unknown output formats {sorted(bad)}")


@dataclass
class RunConfig:
    name: str = "run"
    seed: int = 0
    problem: ProblemSpec | None = None
    grid: SolverConfig = field(default_factory=SolverConfig)
    bounds: BoundsInput | None = None
    requested: list = field(default_factory=lambda: list(CONDITION_SETS))
    axis_constants: AxisConstants | None = None
    sampling: SamplingSpec = field(default_factory=SamplingSpec)
    transform: TransformSpec | None = None
    outputs: OutputSpec = field(default_factory=OutputSpec)

    def validate(self):
        if self.problem is None and self.transform is None:
            raise ConfigError("config needs a [problem] or a [transform] table")
        if self.problem is not None:
            self.problem.validate()
        if self.bounds is not None:
            self.bounds.validate()
        bad = set(self.requested) - set(CONDITION_SETS)
        if bad:
            raise ConfigError(f"unknown condition sets {sorted(bad)}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        self.sampling.validate()
        if self.transform is not None:
            self.transform.validate()
        self.outputs.validate()
        return self

    def to_dict(self):
        """Plain-data form; ``from_dict`` of it gives an equal config."""
        out = {"name": self.name, "seed": self.seed, "requested": list(self.requested)}
        for key in ("problem", "grid", "bounds", "axis_constants", "sampling", "transform",
                    "outputs"):
            v = getattr(self, key)
            if v is not None:
                out[key] = {k: x for k, x in asdict(v).items() if x is not None}
        return out

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        allowed = {f.name for f in fields(cls)}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
        kw = {}
        for key in ("name", "seed", "requested"):
            if key in data:
                kw[key] = data[key]
        tables = {"problem": ProblemSpec, "grid": SolverConfig, "bounds": BoundsInput,
                  "axis_constants": AxisConstants, "sampling": SamplingSpec,
                  "transform": TransformSpec, "outputs": OutputSpec}
        for key, typ in tables.items():
            if key in data:
                kw[key] = _build(typ, data[key], key)
        try:
            cfg = cls(**kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        return cfg.validate()

    def with_overrides(self, out=None, threads=None, seed=None):
        cfg = self
        if out is not None:
            cfg = replace(cfg, outputs=replace(cfg.outputs, directory=str(out)))
        if threads is not None:
            cfg = replace(cfg, grid=replace(cfg.grid, threads=int(threads)))
        if seed is not None:
            cfg = replace(cfg, seed=int(seed))
        return cfg.validate()


def _build(typ, table, where):
    if not isinstance(table, dict):
        raise ConfigError(f"[{where}] must be a table")
    allowed = {f.name for f in fields(typ)}
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in [{where}]: {sorted(unknown)}")
    missing = [f.name for f in fields(typ)
               if f.default is MISSING and f.default_factory is MISSING and f.name not in table]
    if missing:
        raise ConfigError(f"missing keys in [{where}]: {missing}")
    try:
        return typ(**table)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}]: {exc}") from None


def _parse(source, variables, where):
    if not isinstance(source, str):
        raise ConfigError(f"{where} must be an expression string")
    try:
        return E.parse(source, variables)
    except (ExpressionSyntaxError, UnknownIdentifier) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def load(path) -> RunConfig:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return RunConfig.from_dict(data)


BUNDLED = ("example7_1", "example7_2", "example7_3", "manufactured", "ampere")


def bundled_path(name) -> Path:
    if name not in BUNDLED:
        raise ConfigError(f"unknown demo {name!r}; choose from {', '.join(BUNDLED)}")
    return Path(__file__).parent / "configs" / f"{name}.cfg"
