"""Run configuration: INI files with a fixed schema.

Example::

    [layer]
    a = 1.5707963267948966
    eps = 0.1, 0.05

    [surface]
    name = gaussian_bump
    width = 1.0

    [grid]
    half_width = 10
    h = 0.1

Sections ``[surface]`` and ``[potential]`` take ``name`` plus the keyword
parameters of the named factory; every other key must appear in
:data:`SCHEMA`.  Unknown sections or keys are errors.
"""

import configparser
import inspect
import math
from dataclasses import dataclass, field

from .potentials import POTENTIALS
from .surfaces import SURFACES


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


def _float(s):
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("not finite")
    return v


def _float_list(s):
    vals = [_float(t) for t in s.replace(";", ",").split(",") if t.strip()]
    if not vals:
        raise ValueError("empty list")
    return vals


def _bool(s):
    t = s.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("not a boolean")


# section -> key -> (parser, default)
SCHEMA = {
    "layer": {"a": (_float, math.pi / 2), "eps": (_float_list, [0.1, 0.05])},
    "grid": {"half_width": (_float, 10.0), "h": (_float, 0.1)},
    "planar": {"lambda": (_float_list, [0.04, 0.02, 0.01]), "direct": (_bool, False),
               "direct_L": (_float, 40.0), "direct_h": (_float_list, [0.2, 0.1]),
               "modes": (int, 8)},
    "solver": {"modes": (int, 64), "tol": (_float, 1e-12), "bracket": (_bool, False),
               "bracket_eps": (_float, 0.0), "bracket_h": (_float, 0.2),
               "bracket_modes": (int, 8)},
    "output": {"dir": (str, "out")},
}


@dataclass
class RunConfig:
    """Validated configuration of one CLI run."""

    a: float = math.pi / 2
    eps: list = field(default_factory=lambda: [0.1, 0.05])
    half_width: float = 10.0
    h: float = 0.1
    surface: str = None
    surface_params: dict = field(default_factory=dict)
    potential: str = None
    potential_params: dict = field(default_factory=dict)
    lam: list = field(default_factory=lambda: [0.04, 0.02, 0.01])
    direct: bool = False
    direct_L: float = 40.0
    direct_h: list = field(default_factory=lambda: [0.2, 0.1])
    coupled_modes: int = 8
    modes: int = 64
    tol: float = 1e-12
    bracket: bool = False
    bracket_eps: float = 0.0
    bracket_h: float = 0.2
    bracket_modes: int = 8
    out: str = "out"

    def validate(self):
        if not self.a > 0:
            raise ConfigError(f"layer.a must be > 0 (got {self.a})")
        if any(not e >= 0 for e in self.eps):
            raise ConfigError("layer.eps values must be >= 0")
        if not (self.half_width > 0 and self.h > 0):
            raise ConfigError("grid.half_width and grid.h must be > 0")
        if self.half_width / self.h < 4:
            raise ConfigError("grid must have at least 9 nodes per side")
        if abs(self.half_width / self.h - round(self.half_width / self.h)) > 1e-9 * self.half_width / self.h:
            raise ConfigError("grid.half_width / grid.h must be an integer")
        if any(not l > 0 for l in self.lam):
            raise ConfigError("planar.lambda values must be > 0")
        if self.modes < 2 or self.coupled_modes < 1 or self.bracket_modes < 1:
            raise ConfigError("solver.modes must be >= 2, planar.modes and solver.bracket_modes >= 1")
        if self.coupled_modes > self.modes or self.bracket_modes > self.modes:
            raise ConfigError("planar.modes and solver.bracket_modes cannot exceed solver.modes")
        if not self.tol > 0:
            raise ConfigError("solver.tol must be > 0")
        if not self.direct_L > 0 or any(not x > 0 for x in self.direct_h):
            raise ConfigError("planar.direct_L and planar.direct_h must be > 0")
        if self.surface is not None:
            _check_params(SURFACES, self.surface, self.surface_params, "surface", skip=0)
        if self.potential is not None:
            _check_params(POTENTIALS, self.potential, self.potential_params, "potential", skip=1)
        return self

    def to_ini(self):
        """Resolved configuration as INI text; loading it reproduces this run."""
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        fl = lambda xs: ", ".join(repr(float(x)) for x in xs)
        cp["layer"] = {"a": repr(self.a), "eps": fl(self.eps)}
        cp["grid"] = {"half_width": repr(self.half_width), "h": repr(self.h)}
        if self.surface is not None:
            cp["surface"] = {"name": self.surface,
                             **{k: repr(float(v)) for k, v in sorted(self.surface_params.items())}}
        if self.potential is not None:
            cp["potential"] = {"name": self.potential,
                               **{k: repr(float(v)) for k, v in sorted(self.potential_params.items())}}
        cp["planar"] = {"lambda": fl(self.lam), "direct": str(self.direct).lower(),
                        "direct_L": repr(self.direct_L), "direct_h": fl(self.direct_h),
                        "modes": str(self.coupled_modes)}
        cp["solver"] = {"modes": str(self.modes), "tol": repr(self.tol),
                        "bracket": str(self.bracket).lower(), "bracket_eps": repr(self.bracket_eps),
                        "bracket_h": repr(self.bracket_h), "bracket_modes": str(self.bracket_modes)}
        cp["output"] = {"dir": self.out}
        lines = []
        for sec in cp.sections():
            lines.append(f"[{sec}]")
            lines.extend(f"{k} = {v}" for k, v in cp[sec].items())
            lines.append("")
        return "\n".join(lines)


_FIELD_OF = {("layer", "a"): "a", ("layer", "eps"): "eps", ("grid", "half_width"): "half_width",
             ("grid", "h"): "h", ("planar", "lambda"): "lam", ("planar", "direct"): "direct",
             ("planar", "direct_L"): "direct_L", ("planar", "direct_h"): "direct_h",
             ("planar", "modes"): "coupled_modes", ("solver", "modes"): "modes",
             ("solver", "tol"): "tol", ("solver", "bracket"): "bracket",
             ("solver", "bracket_eps"): "bracket_eps", ("solver", "bracket_h"): "bracket_h",
             ("solver", "bracket_modes"): "bracket_modes", ("output", "dir"): "out"}


def _check_params(registry, name, params, section, skip):
    if name not in registry:
        raise ConfigError(f"unknown {section} {name!r}; known: {', '.join(sorted(registry))}")
    sig = inspect.signature(registry[name])
    allowed = list(sig.parameters)[skip:]
    for k in params:
        if k not in allowed:
            raise ConfigError(f"unknown {section} parameter {k!r} for {name}; "
                              f"allowed: {', '.join(allowed)}")


def parse_config(text):
    """Parse and validate INI text into a :class:`RunConfig`."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    cfg = RunConfig()
    for sec in cp.sections():
        if sec in ("surface", "potential"):
            items = dict(cp[sec])
            if "name" not in items:
                raise ConfigError(f"[{sec}] needs a name")
            name = items.pop("name").strip()
            try:
                params = {k: _float(v) for k, v in items.items()}
            except ValueError:
                raise ConfigError(f"[{sec}] parameters must be finite numbers") from None
            setattr(cfg, sec, name)
            setattr(cfg, sec + "_params", params)
            continue
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        for key, raw in cp[sec].items():
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]")
            parser = SCHEMA[sec][key][0]
            try:
                value = parser(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {sec}.{key}: {raw!r} ({exc})") from None
            setattr(cfg, _FIELD_OF[(sec, key)], value)
    return cfg.validate()


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)
