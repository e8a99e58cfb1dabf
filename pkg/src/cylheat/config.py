"""Run configuration: flat ``key = value`` files, presets and validation.

Example::

    # heat transfer versus distance
    scenario = cylinder
    material = pec
    R = 1e-8, 1e-7, 1e-6
    h = 1e-7
    d = geom(1e-7, 1e-1, 25)
    T1 = 300
    material.sic.gamma = 8.93e11

List values are comma separated; ``geom(a, b, n)`` and ``lin(a, b, n)``
expand to logarithmic and linear grids.  Keys ``material.<name>.<field>``
override constants of the built-in material models.
"""

import dataclasses
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .materials import GOLD, PEC, SIC, VACUUM, Drude, Lorentz
from .quadrature import QuadratureSpec

AXES = ("R", "h", "d")
FORMATS = ("csv", "json")
BASE_MATERIALS = {"pec": PEC, "sic": SIC, "gold": GOLD, "vacuum": VACUUM}


class ConfigError(ValueError):
    """Invalid configuration, with the offending key and source line."""

    def __init__(self, message, key=None, line=None, source=None):
        where = []
        if source is not None:
            where.append(str(source))
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        prefix = ": ".join([", ".join(where)]) + ": " if where else ""
        super().__init__(prefix + message)
        self.key = key
        self.line = line


# parameter sets of the published figures
PRESETS = {
    "fig2": {"command": "ht-vs-d", "scenario": "cylinder", "material": "pec",
             "R": "1e-8, 1e-7, 1e-6, 1e-5, 1e-4", "h": "1e-7", "d": "geom(1e-7, 1e-1, 25)",
             "T1": "300"},
    "fig3": {"command": "ht-vs-r", "scenario": "cylinder", "material": "pec",
             "R": "geom(1e-10, 1e-3, 71)", "h": "1e-7", "d": "1e-5, 1e-4, 1e-3, 1e-2, 1e-1",
             "T1": "300"},
    "fig3h": {"command": "ht-vs-h", "scenario": "cylinder", "material": "pec",
              "R": "1e-7", "h": "geom(1e-9, 1e-3, 61)", "d": "1e-3", "T1": "300"},
    "fig4": {"command": "ht-vs-d", "scenario": "cylinder", "material": "gold",
             "R": "1e-8, 1e-7, 1e-6", "h": "1e-7", "d": "geom(1e-7, 1e-1, 25)", "T1": "300"},
    "fig4inset": {"command": "gold-decay", "scenario": "cylinder", "material": "gold",
                  "R": "geom(1e-7, 1e-6, 5)", "h": "1e-7", "d": "1e-6", "T1": "300"},
    "s1": {"command": "trace", "sweep": "d", "scenario": "cylinder", "material": "pec",
           "R": "1e-8, 1e-7, 1e-6, 1e-5, 1e-4", "h": "1e-7", "d": "geom(1e-8, 1e-1, 29)"},
    "s2": {"command": "trace", "sweep": "d", "scenario": "cylinder", "material": "pec",
           "R": "1e-8, 1e-7, 1e-6, 1e-5, 1e-4", "h": "1e-7", "d": "geom(1e-8, 1e-1, 57)"},
    "s3": {"command": "trace", "sweep": "R", "scenario": "cylinder", "material": "pec",
           "R": "geom(1e-9, 1e-4, 21)", "h": "1e-7", "d": "1e-7, 1e-6, 1e-5, 1e-3"},
    "s4": {"command": "trace", "sweep": "h", "scenario": "cylinder", "material": "pec",
           "R": "1e-8, 1e-6", "h": "geom(1e-7, 1e-4, 13)", "d": "1e-7, 1e-6, 1e-5, 1e-3"},
    "s5": {"command": "ht-vs-d", "scenario": "cylinder", "material": "pec",
           "R": "1e-8, 1e-7, 1e-6, 1e-5, 1e-4", "h": "1e-7", "d": "geom(1e-7, 1e-1, 25)",
           "T1": "300"},
    "s6": {"command": "ratio", "scenario": "cylinder", "material": "pec",
           "R": "1e-8, 1e-7, 1e-6", "h": "geom(1e-8, 1.2e-6, 15)", "d": "1e-3",
           "T1": "300"},
}


@dataclass
class RunConfig:
    """Validated settings of one CLI invocation."""

    scenario: str = "cylinder"
    material: str = "pec"
    particle: str = "sic"
    R: list = field(default_factory=lambda: [1e-7])
    h: list = field(default_factory=lambda: [1e-7])
    d: list = field(default_factory=lambda: [1e-3])
    T1: float = 300.0
    R2: float | None = None
    sweep: str | None = None
    rel_tol: float = 1e-6
    tail_tol: float = 1e-12
    nmax: int = 512
    max_panels: int = 10**6
    budget_seconds: float | None = None
    workers: int = 1
    dmin: float | None = None
    dmax: float | None = None
    output: str | None = None
    format: str = "csv"
    plot: str | None = None
    overrides: dict = field(default_factory=dict)

    def quadrature_spec(self):
        return QuadratureSpec(rel_tol=self.rel_tol, evanescent_tail_tol=self.tail_tol,
                              n_max_cap=self.nmax, max_panels=self.max_panels)

    def materials(self):
        """Material registry with the ``material.<name>.<field>`` overrides applied.

        A new name needs a complete parameter set (all four Lorentz fields, or
        ``omega_p`` and optionally ``omega_tau`` for Drude).
        """
        reg = dict(BASE_MATERIALS)
        groups = {}
        for (name, attr), value in self.overrides.items():
            groups.setdefault(name, {})[attr] = value
        for name, fields_ in sorted(groups.items()):
            key = f"material.{name}.{sorted(fields_)[0]}"
            base = reg.get(name)
            try:
                if base is None:
                    if set(fields_) <= {"omega_p", "omega_tau"}:
                        reg[name] = Drude(**{"omega_tau": 0.0, **fields_}, name=name)
                    else:
                        reg[name] = Lorentz(**fields_, name=name)
                elif isinstance(base, (Lorentz, Drude)):
                    reg[name] = dataclasses.replace(base, **fields_)
                else:
                    raise ConfigError(f"material {name!r} has no adjustable constants", key=key)
            except TypeError:
                raise ConfigError(f"incomplete or unknown constants for material {name!r}",
                                  key=key) from None
            except ValueError as exc:
                if isinstance(exc, ConfigError):
                    raise
                raise ConfigError(str(exc), key=key) from None
        return reg

    def echo(self):
        out = dataclasses.asdict(self)
        out["overrides"] = {f"material.{n}.{a}": v for (n, a), v in sorted(self.overrides.items())}
        return out


# ---------------------------------------------------------------------------
# value parsing

_GRID = re.compile(r"^(geom|lin)\(\s*([^,]+),\s*([^,]+),\s*(\d+)\s*\)$")


def parse_list(text):
    """Parse ``"a, b, c"`` or ``geom(a, b, n)`` / ``lin(a, b, n)`` to floats."""
    text = str(text).strip()
    m = _GRID.match(text)
    if m:
        kind, a, b, n = m.groups()
        a, b, n = float(a), float(b), int(n)
        if n < 1:
            raise ValueError("grid needs at least one point")
        grid = np.geomspace(a, b, n) if kind == "geom" else np.linspace(a, b, n)
        return [float(x) for x in grid]
    vals = [float(v) for v in text.split(",") if v.strip()]
    if not vals:
        raise ValueError("empty list")
    return vals


def _positive_float(v):
    x = float(v)
    if not (x > 0 and math.isfinite(x)):
        raise ValueError("must be a positive number")
    return x


def _choice(options):
    def conv(v):
        v = str(v).strip().lower()
        if v not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return v
    return conv


def _axis(v):
    v = str(v).strip()
    v = {"r": "R"}.get(v, v)
    if v not in AXES:
        raise ValueError(f"must be one of {', '.join(AXES)}")
    return v


def _opt_str(v):
    v = str(v).strip()
    return v or None


_KEYS = {
    "scenario": _choice(("cylinder", "plate", "vacuum")),
    "material": _choice(tuple(BASE_MATERIALS)),
    "R": parse_list,
    "h": parse_list,
    "d": parse_list,
    "T1": _positive_float,
    "R2": _positive_float,
    "sweep": _axis,
    "rel_tol": _positive_float,
    "tail_tol": _positive_float,
    "nmax": int,
    "max_panels": int,
    "budget_seconds": float,
    "workers": int,
    "dmin": _positive_float,
    "dmax": _positive_float,
    "output": _opt_str,
    "format": _choice(FORMATS),
    "plot": _opt_str,
}
ALIASES = {"r": "R", "t1": "T1", "r2": "R2"}


def read_config_text(text, source=None):
    """Parse the flat key-value format into ``{key: (raw_value, line)}``."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno, source=source)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError("missing key", line=lineno, source=source)
        out[key] = (value, lineno)
    return out


def build_config(entries, source=None, materials_known=None):
    """Validate ``{key: (raw, line)}`` entries into a :class:`RunConfig`."""
    cfg = RunConfig()
    extra_materials = set()
    named = []
    for key, (raw, line) in entries.items():
        if key.startswith("material."):
            parts = key.split(".")
            if len(parts) != 3:
                raise ConfigError("material overrides look like material.<name>.<field>",
                                  key=key, line=line, source=source)
            try:
                cfg.overrides[(parts[1], parts[2])] = float(raw)
            except ValueError:
                raise ConfigError("must be a number", key=key, line=line, source=source) from None
            extra_materials.add(parts[1])
            continue
        if key == "command":
            continue
        name = ALIASES.get(key, key)
        if name == "material" or name == "particle":
            # checked after the loop: overrides may define the name later on
            named.append((name, key, line))
            setattr(cfg, name, str(raw).strip().lower())
            continue
        conv = _KEYS.get(name)
        if conv is None:
            raise ConfigError("unknown key", key=key, line=line, source=source)
        try:
            setattr(cfg, name, conv(raw))
        except ValueError as exc:
            raise ConfigError(str(exc), key=key, line=line, source=source) from None
    allowed = set(BASE_MATERIALS) | extra_materials | set(materials_known or ())
    for name, key, line in named:
        v = getattr(cfg, name)
        if v not in allowed:
            raise ConfigError(f"unknown material {v!r}", key=key, line=line, source=source)
    validate(cfg, source)
    return cfg


def validate(cfg, source=None):
    for ax in AXES:
        vals = getattr(cfg, ax)
        if any(not (v >= 0 and math.isfinite(v)) for v in vals):
            raise ConfigError("values must be finite and non-negative", key=ax, source=source)
        if any(b <= a for a, b in zip(vals[:-1], vals[1:])):
            raise ConfigError("list must be strictly increasing", key=ax, source=source)
    if any(v <= 0 for v in cfg.h):
        raise ConfigError("h must be positive", key="h", source=source)
    if any(v <= 0 for v in cfg.d):
        raise ConfigError("d must be positive", key="d", source=source)
    if cfg.scenario == "cylinder" and any(v <= 0 for v in cfg.R):
        raise ConfigError("cylinder radii must be positive", key="R", source=source)
    if cfg.nmax < 1:
        raise ConfigError("must be at least 1", key="nmax", source=source)
    if cfg.max_panels < 16:
        raise ConfigError("must be at least 16", key="max_panels", source=source)
    if cfg.workers < 1:
        raise ConfigError("must be at least 1", key="workers", source=source)
    if cfg.dmin is not None and cfg.dmax is not None and cfg.dmin > cfg.dmax:
        raise ConfigError("dmin exceeds dmax", key="dmin", source=source)
    try:
        cfg.quadrature_spec()
    except ValueError as exc:
        raise ConfigError(str(exc), source=source) from None
    mats = cfg.materials()
    if cfg.material not in mats:
        raise ConfigError(f"unknown material {cfg.material!r}", key="material", source=source)
    if cfg.particle not in mats or not isinstance(mats[cfg.particle], (Lorentz, Drude)):
        raise ConfigError("particles must be a Lorentz or Drude material", key="particle",
                          source=source)
    return cfg


def sweep_axis(cfg, default):
    """The single axis swept by a command; the other lists label curve families."""
    return cfg.sweep or default
