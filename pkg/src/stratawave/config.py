"""Run configuration: INI-style files, profile expressions, defaults.

Background configurations are плain key-value text (configparser syntax)
with three sections::

    [fluid]
    c = 1.0
    g = 9.81
    d_plus = 0.5
    d_minus = 0.5

    [density]           ; either inline expressions in y ...
    lower = 1.02
    upper = 1.0 - 0.01*exp(y/0.1)

    [shear]             ; ... or a two-column sample file per profile
    file = shear.dat

    [numerics]          ; optional, defaults materialized on write-back
    epsilon = 0.05
    nq = 161
    ...

Inline expressions use a small arithmetic grammar over the variable ``y``
(+ - * / ** parentheses, numeric literals, pi/e, and the functions exp,
log, sqrt, sin, cos, tan, sinh, cosh, tanh, abs).  They are compiled via
the ast module with a strict whitelist: nothing else evaluates.
"""
from __future__ import annotations

import ast
import configparser
import operator
from dataclasses import dataclass, field as dc_field, fields as dc_fields
from pathlib import Path
from typing import Callable, Dict, Optional

import numpy as np

from .background import BackgroundError, FluidParameters, StratifiedBackground, build_background
from .profiles import PiecewiseProfile


class ConfigError(ValueError):
    pass


_BIN_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
            ast.Div: operator.truediv, ast.Pow: operator.pow, ast.Mod: operator.mod}
_UNARY_OPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_FUNCS = {name: getattr(np, name) for name in
          ("exp", "log", "sqrt", "sin", "cos", "tan", "sinh", "cosh", "tanh", "abs")}
_FUNCS["abs"] = np.abs
_CONSTS = {"pi": np.pi, "e": np.e}


def compile_expression(text: str, variable: str = "y") -> Callable:
    """Compile an arithmetic expression into a vectorized function of one variable."""

    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc}") from exc

    def ev(node, x):
        if isinstance(node, ast.Expression):
            return ev(node.body, x)
        if isinstance(node, ast.Constant):
            if isinstance(node.value, (int, float)):
                return float(node.value)
            raise ConfigError(f"non-numeric constant {node.value!r}")
        if isinstance(node, ast.Name):
            if node.id == variable:
                return x
            if node.id in _CONSTS:
                return _CONSTS[node.id]
            raise ConfigError(f"unknown name {node.id!r} in expression")
        if isinstance(node, ast.BinOp) and type(node.op) in _BIN_OPS:
            return _BIN_OPS[type(node.op)](ev(node.left, x), ev(node.right, x))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY_OPS:
            return _UNARY_OPS[type(node.op)](ev(node.operand, x))
        if isinstance(node, ast.Call):
            if (isinstance(node.func, ast.Name) and node.func.id in _FUNCS
                    and not node.keywords and len(node.args) == 1):
                return _FUNCS[node.func.id](ev(node.args[0], x))
            raise ConfigError("only single-argument whitelisted functions are allowed")
        raise ConfigError(f"disallowed syntax in expression: {ast.dump(node)}")

    def f(x):
        out = ev(tree, np.asarray(x, dtype=float))
        return np.broadcast_to(out, np.shape(x)).astype(float) if np.isscalar(out) or np.ndim(out) == 0 else out

    f.expression = text.strip()
    return f


@dataclass
class NumericControls:
    """Materialized numerical defaults for every subcommand."""

    nq: int = 161
    np_minus: int = 65
    np_plus: int = 65
    L: float = 0.0              # 0 means: from the seed decay rate
    epsilon: float = 0.05
    newton_tol: float = 1e-10
    spectrum_count: int = 5
    ds0: float = 2e-3
    ds_min: float = 1e-8
    ds_max: float = 5e-2
    max_steps: int = 400
    stop_min_hp: float = 0.05
    stop_sup_hp: float = 20.0
    seed_orientation: str = "elevation"
    seed: int = 0               # RNG seed for randomized utilities
    jobs: int = 1

    def validate(self):
        if min(self.nq, self.np_minus, self.np_plus) < 8:
            raise ConfigError("grid sizes must be >= 8")
        for name in ("newton_tol", "epsilon", "ds0", "ds_min", "ds_max",
                     "stop_min_hp", "stop_sup_hp"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.L < 0:
            raise ConfigError("L must be positive (or 0 for automatic)")
        if self.seed_orientation not in ("elevation", "depression"):
            raise ConfigError("seed_orientation must be elevation or depression")


@dataclass
class RunConfig:
    """Everything a run needs: fluid, profiles, numerics, output."""

    fluid: FluidParameters
    density: PiecewiseProfile
    shear: PiecewiseProfile
    numerics: NumericControls
    out_dir: Path
    source_path: Optional[Path] = None
    raw: Dict = dc_field(default_factory=dict)

    def build_background(self) -> StratifiedBackground:
        return build_background(self.fluid, self.density, self.shear)


def _profile_from_section(sec, fluid: FluidParameters, base_dir: Path,
                          name: str) -> PiecewiseProfile:
    domain = (-fluid.d, 0.0)
    bp = -fluid.d_plus
    if "file" in sec:
        path = base_dir / sec["file"]
        data = np.loadtxt(path, delimiter=None)
        if data.ndim != 2 or data.shape[1] < 2:
            raise ConfigError(f"{path}: expected two columns (y, value)")
        return PiecewiseProfile.from_samples(bp, data[:, 0], data[:, 1], domain=domain)
    missing = [k for k in ("lower", "upper") if k not in sec]
    if missing:
        raise ConfigError(f"[{name}] needs 'lower' and 'upper' expressions "
                          f"(or 'file'); missing {missing}")
    return PiecewiseProfile(bp, compile_expression(sec["lower"]),
                            compile_expression(sec["upper"]), domain=domain)


def load_config(path, out_dir: Optional[str] = None,
                overrides: Optional[Dict[str, str]] = None) -> RunConfig:
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    for section in ("fluid", "density", "shear"):
        if section not in parser:
            raise ConfigError(f"config is missing the [{section}] section")
    try:
        fl = parser["fluid"]
        fluid = FluidParameters(c=fl.getfloat("c"), g=fl.getfloat("g"),
                                d_plus=fl.getfloat("d_plus"),
                                d_minus=fl.getfloat("d_minus"))
    except (BackgroundError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad [fluid] section: {exc}") from exc

    density = _profile_from_section(parser["density"], fluid, path.parent, "density")
    shear = _profile_from_section(parser["shear"], fluid, path.parent, "shear")

    num = NumericControls()
    if "numerics" in parser:
        for f in dc_fields(NumericControls):
            if f.name in parser["numerics"]:
                raw = parser["numerics"][f.name]
                try:
                    cur = getattr(num, f.name)
                    setattr(num, f.name, raw if isinstance(cur, str) else type(cur)(raw))
                except ValueError as exc:
                    raise ConfigError(f"numerics.{f.name}: {exc}") from exc
    if overrides:
        for key, val in overrides.items():
            if not hasattr(num, key):
                raise ConfigError(f"unknown numeric override {key!r}")
            cur = getattr(num, key)
            setattr(num, key, type(cur)(val))
    num.validate()

    out = Path(out_dir) if out_dir else Path(parser.get("output", "directory",
                                                        fallback="out"))
    raw = {s: dict(parser[s]) for s in parser.sections()}
    return RunConfig(fluid=fluid, density=density, shear=shear, numerics=num,
                     out_dir=out, source_path=path, raw=raw)


def effective_config_text(cfg: RunConfig, background_hash: str) -> str:
    """Echo of the run with all defaults materialized (written next to outputs)."""
    lines = [f"# effective configuration (background {background_hash})",
             f"# source: {cfg.source_path}", "", "[fluid]"]
    for name in ("c", "g", "d_plus", "d_minus"):
        lines.append(f"{name} = {getattr(cfg.fluid, name):.17g}")
    for section in ("density", "shear"):
        lines.append("")
        lines.append(f"[{section}]")
        for key, val in cfg.raw.get(section, {}).items():
            lines.append(f"{key} = {val}")
    lines.append("")
    lines.append("[numerics]")
    for f in dc_fields(NumericControls):
        lines.append(f"{f.name} = {getattr(cfg.numerics, f.name)}")
    lines.append("")
    return "\n".join(lines)
