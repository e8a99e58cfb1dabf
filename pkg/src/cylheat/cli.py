"""Command-line front end.

Every subcommand sweeps one geometric axis (the other axes may list several
values, which label curve families) and writes a table as CSV or JSON.  Floats
are written with 17 significant digits so tables re-read bit-exactly.
Numerically exact columns are expensive; they are computed while the
``--budget-seconds`` allowance lasts and written as empty cells (CSV) or
``null`` (JSON) otherwise, with the reason in the ``status`` column.
"""

import argparse
import csv
import io
import json
import math
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict

import numpy as np

from . import __version__, analytic, transfer
from .config import (
    PRESETS,
    ConfigError,
    build_config,
    read_config_text,
    sweep_axis,
)
from .constants import C
from .cylinder_gf import trace_ggdag
from .errors import ConvergenceError, RegimeError
from .geometry_gf import Geometry, decompose_plate, plate_trace_farfield, vacuum_trace
from .materials import Particle, PerfectConductor, Vacuum

COMMANDS = ("ht-vs-d", "ht-vs-r", "ht-vs-h", "trace", "spectrum", "ratio", "gold-decay", "zoom")
DEFAULT_SWEEP = {"ht-vs-d": "d", "ht-vs-r": "R", "ht-vs-h": "h", "trace": "d", "spectrum": "d",
                 "ratio": "h", "gold-decay": "R", "zoom": "d"}
# exact columns of the heat-transfer sweeps are opt-in; the rest default to no limit
DEFAULT_BUDGET = {"ht-vs-d": 0.0, "ht-vs-r": 0.0, "ht-vs-h": 0.0}


class Budget:
    """Wall-clock allowance for expensive cells, shared across workers."""

    def __init__(self, seconds):
        self.seconds = math.inf if seconds is None else float(seconds)
        self.start = time.perf_counter()
        self.last_cost = 0.0
        self._lock = threading.Lock()

    def allows(self):
        with self._lock:
            if self.seconds <= 0:
                return False
            spent = time.perf_counter() - self.start
            return spent + self.last_cost <= self.seconds

    def record(self, cost):
        with self._lock:
            self.last_cost = max(self.last_cost, cost)


def _guarded(budget, fn):
    """Run an expensive cell; returns ``(value, status)``."""
    if not budget.allows():
        return None, "skipped:budget"
    t0 = time.perf_counter()
    try:
        val = fn()
        status = "ok"
    except ConvergenceError as exc:
        val, status = None, f"failed:convergence ({exc})"
    except RegimeError as exc:
        val, status = None, f"failed:range ({exc})"
    budget.record(time.perf_counter() - t0)
    return val, status


# ---------------------------------------------------------------------------
# context shared by the commands


class Context:
    def __init__(self, cfg, command):
        self.cfg = cfg
        self.command = command
        self.mats = cfg.materials()
        self.scatterer = self.mats[cfg.material]
        self.particle = Particle(self.mats[cfg.particle])
        self.particles = (self.particle, self.particle)
        self.spec = cfg.quadrature_spec()
        self.omega0 = analytic.peak_frequency(self.particles)
        self.lambda0 = 2 * np.pi * C / self.omega0
        self.k0 = self.omega0 / C
        budget = cfg.budget_seconds
        if budget is None:
            budget = DEFAULT_BUDGET.get(command)
        self.budget = Budget(budget)
        self.scenario = cfg.scenario
        if isinstance(self.scatterer, Vacuum):
            self.scenario = "vacuum"

    def geometry(self, R, h, d):
        return Geometry(0.0 if self.scenario != "cylinder" else R, h, d)

    def cells(self):
        """Geometry tuples in output order: families first, sweep axis last."""
        ax = sweep_axis(self.cfg, DEFAULT_SWEEP[self.command])
        lists = {"R": self.cfg.R, "h": self.cfg.h, "d": self.cfg.d}
        if self.scenario != "cylinder":
            lists["R"] = [0.0]
        fam = [a for a in ("R", "h", "d") if a != ax]
        out = []
        for v0 in lists[fam[0]]:
            for v1 in lists[fam[1]]:
                for vs in lists[ax]:
                    g = {fam[0]: v0, fam[1]: v1, ax: vs}
                    if ax == "d" or "d" in fam:
                        d = g["d"]
                        if self.cfg.dmin is not None and d < self.cfg.dmin:
                            continue
                        if self.cfg.dmax is not None and d > self.cfg.dmax:
                            continue
                    out.append((g["R"], g["h"], g["d"]))
        return ax, fam, out

    def pmap(self, fn, items):
        if self.cfg.workers > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=self.cfg.workers) as ex:
                return list(ex.map(fn, items))
        return [fn(x) for x in items]


def _approx(ctx, g):
    return analytic.ht_approx_peak(ctx.cfg.T1, g, ctx.particles, scenario=ctx.scenario)


def _resolved(ctx, g):
    return analytic.ht_approx_integral(ctx.cfg.T1, g, ctx.particles, ctx.scenario)


def _exact_ht(ctx, g, scatterer=None):
    scat = ctx.scatterer if scatterer is None else scatterer
    return _guarded(ctx.budget, lambda: transfer.heat_transfer_exact(
        ctx.cfg.T1, g, scat, ctx.particles, ctx.spec, scenario=ctx.scenario).h_per_vol)


def _regime(ctx, R, h, d):
    if ctx.scenario != "cylinder":
        return ctx.scenario
    return analytic.classify_regime(ctx.lambda0, R, h, d).tag


# ---------------------------------------------------------------------------
# commands; each returns (columns, rows, plot spec)


def cmd_ht_vs_d(ctx):
    ax, fam, cells = ctx.cells()
    approx_ok = ctx.scenario != "cylinder" or isinstance(ctx.scatterer, PerfectConductor)

    def row(c):
        R, h, d = c
        g = ctx.geometry(R, h, d)
        H6 = _approx(ctx, g) if approx_ok else None
        H5 = _resolved(ctx, g) if approx_ok else None
        Hv = transfer.vacuum_ht_approx(ctx.cfg.T1, d, ctx.particles)
        Hx, status = _exact_ht(ctx, g)
        resc = analytic.rescaled_ht(H6, R, h, ctx.lambda0) if (H6 is not None and R > 0) else None
        x = ctx.lambda0 * d / R**2 if R > 0 else None
        return {"scenario": ctx.scenario, "material": ctx.cfg.material, "R_m": R, "h_m": h,
                "d_m": d, "H_exact_per_V1V2_W_m6": Hx, "H_per_V1V2_W_m6": H6,
                "H_resolved_per_V1V2_W_m6": H5, "H_vacuum_approx_per_V1V2_W_m6": Hv,
                "H_rescaled_m": resc, "lambda0_d_over_R2": x,
                "regime": _regime(ctx, R, h, d), "status": status}

    rows = ctx.pmap(row, cells)
    return rows, {"x": "d_m", "y": ["H_per_V1V2_W_m6", "H_exact_per_V1V2_W_m6"],
                  "family": ["R_m", "h_m"]}


def cmd_ht_vs_r(ctx):
    ax, fam, cells = ctx.cells()
    rmax = {}
    for (R, h, d) in cells:
        key = (h, d)
        if key not in rmax and ctx.scenario == "cylinder":
            try:
                rmax[key] = analytic.r_max(ctx.omega0, h, d)
            except RegimeError:
                rmax[key] = None

    def row(c):
        R, h, d = c
        g = ctx.geometry(R, h, d)
        H6 = _approx(ctx, g)
        Hv = transfer.vacuum_ht_approx(ctx.cfg.T1, d, ctx.particles)
        Hp = analytic.ht_approx_peak(ctx.cfg.T1, Geometry(0.0, h, d), ctx.particles, "plate")
        Hx, status = _exact_ht(ctx, g)
        return {"scenario": ctx.scenario, "material": ctx.cfg.material, "R_m": R, "h_m": h,
                "d_m": d, "H_exact_per_V1V2_W_m6": Hx, "H_per_V1V2_W_m6": H6,
                "H_vacuum_approx_per_V1V2_W_m6": Hv, "H_plate_approx_per_V1V2_W_m6": Hp,
                "R_max_m": rmax.get((h, d)), "regime": _regime(ctx, R, h, d), "status": status}

    rows = ctx.pmap(row, cells)
    return rows, {"x": "R_m", "y": ["H_per_V1V2_W_m6"], "family": ["d_m", "h_m"]}


def cmd_ht_vs_h(ctx):
    rows, _ = cmd_ht_vs_r(ctx)
    return rows, {"x": "h_m", "y": ["H_per_V1V2_W_m6"], "family": ["R_m", "d_m"]}


def cmd_trace(ctx):
    ax, fam, cells = ctx.cells()
    k = ctx.k0

    def row(c):
        R, h, d = c
        g = ctx.geometry(R, h, d)

        def exact():
            if ctx.scenario == "cylinder":
                return trace_ggdag(k, g, ctx.scatterer, ctx.spec)
            if ctx.scenario == "plate":
                return decompose_plate(k, h, d)
            return None

        t, status = (None, "ok") if ctx.scenario == "vacuum" else _guarded(ctx.budget, exact)
        out = {"scenario": ctx.scenario, "material": ctx.cfg.material, "k_rad_m": k,
               "R_m": R, "h_m": h, "d_m": d,
               "trace_exact_m2": None if t is None else t.total,
               "trace_vac_m2": vacuum_trace(k, d),
               "trace_scat_m2": None if t is None else t.scat,
               "trace_cross_m2": None if t is None else t.cross,
               "trace_approx_m2": analytic.trace_approx(k, R, h, d) if R > 0 else None,
               "trace_plate_m2": decompose_plate(k, h, d).total,
               "trace_plate_farfield_m2": plate_trace_farfield(k, h, d),
               "near_field": bool(d <= ctx.lambda0),
               "regime": _regime(ctx, R, h, d), "status": status}
        if ctx.scenario == "vacuum":
            out["trace_exact_m2"] = out["trace_vac_m2"]
        return out

    rows = ctx.pmap(row, cells)
    x = {"R": "R_m", "h": "h_m", "d": "d_m"}[ax]
    return rows, {"x": x, "y": ["trace_exact_m2", "trace_approx_m2"],
                  "family": [{"R": "R_m", "h": "h_m", "d": "d_m"}[a] for a in fam]}


def cmd_spectrum(ctx):
    R, h, d = ctx.cfg.R[0], ctx.cfg.h[0], ctx.cfg.d[0]
    if ctx.scenario != "cylinder":
        R = 0.0
    g = ctx.geometry(R, h, d)
    omegas = np.linspace(0.95 * ctx.omega0, 1.05 * ctx.omega0, 41)
    W = transfer.ht_weight(ctx.cfg.T1, ctx.particles)

    def row(w):
        w = float(w)
        approx = float(analytic.ht_integrand_approx(w, ctx.cfg.T1, g, ctx.particles, ctx.scenario))

        def exact():
            k = w / C
            if ctx.scenario == "cylinder":
                tr = trace_ggdag(k, g, ctx.scatterer, ctx.spec).total
            elif ctx.scenario == "plate":
                tr = decompose_plate(k, h, d).total
            else:
                tr = vacuum_trace(k, d)
            return float(W(w) * tr)

        ex, status = _guarded(ctx.budget, exact)
        return {"scenario": ctx.scenario, "R_m": R, "h_m": h, "d_m": d, "omega_rad_s": w,
                "integrand_exact_W_s_m6": ex, "integrand_approx_W_s_m6": approx,
                "status": status}

    rows = ctx.pmap(row, list(omegas))
    return rows, {"x": "omega_rad_s", "y": ["integrand_approx_W_s_m6", "integrand_exact_W_s_m6"],
                  "family": [], "loglog": False}


def cmd_ratio(ctx):
    d = ctx.cfg.d[0]
    T1 = ctx.cfg.T1
    rows = []
    cases = []
    if ctx.scenario == "cylinder":
        cases += [("cylinder", R) for R in ctx.cfg.R]
    cases += [("plate", 0.0), ("vacuum", 0.0)]
    items = [(sc, R, h) for sc, R in cases for h in ctx.cfg.h]

    def row(item):
        sc, R, h = item
        R2 = 0.1 * h if sc != "vacuum" else (ctx.cfg.R2 or 2e-7)
        g = Geometry(R, h, d)
        scat = ctx.scatterer if sc == "cylinder" else (
            ctx.mats["pec"] if sc == "plate" else ctx.mats["vacuum"])
        val, status = _guarded(ctx.budget, lambda: transfer.transfer_emission_ratio(
            T1, g, scat, ctx.particles, R2, ctx.spec, scenario=sc))
        return {"scenario": sc, "R_m": R, "h_m": h, "d_m": d, "R2_m": R2,
                "H_over_H_total": val, "status": status}

    rows = ctx.pmap(row, items)
    return rows, {"x": "h_m", "y": ["H_over_H_total"], "family": ["scenario", "R_m"]}


def cmd_gold_decay(ctx):
    h = ctx.cfg.h[0]
    gold = ctx.scatterer if not isinstance(ctx.scatterer, PerfectConductor) else ctx.mats["gold"]

    def row(R):
        val, status = _guarded(ctx.budget, lambda: transfer.gold_decay_length(
            R, h, ctx.cfg.T1, ctx.particles, ctx.spec, gold=gold)[0])
        return {"R_m": R, "h_m": h, "l_Au_m": val,
                "l_Au_over_R": None if val is None else val / R, "status": status}

    rows = [row(R) for R in ctx.cfg.R]
    return rows, {"x": "R_m", "y": ["l_Au_m"], "family": []}


def cmd_zoom(ctx):
    ax, fam, cells = ctx.cells()

    def row(c):
        R, h, d = c
        g = ctx.geometry(R, h, d)
        H = _approx(ctx, g)
        try:
            deq, status = transfer.equivalent_vacuum_distance(H, ctx.cfg.T1, ctx.particles), "ok"
        except RegimeError as exc:
            deq, status = None, f"failed:range ({exc})"
        z = analytic.d_zoom(ctx.lambda0, R, h)
        nf = None if deq is None else analytic.nearfield_equivalence_condition(ctx.lambda0, R, h, deq)
        return {"R_m": R, "h_m": h, "d_m": d, "H_per_V1V2_W_m6": H,
                "d_equivalent_vacuum_m": deq, "d_zoom_m": z.d_zoom, "d_zoom_valid": z.valid,
                "nearfield_condition": nf, "status": status}

    rows = ctx.pmap(row, cells)
    return rows, {"x": "d_m", "y": ["d_equivalent_vacuum_m"], "family": ["R_m", "h_m"]}


HANDLERS = {"ht-vs-d": cmd_ht_vs_d, "ht-vs-r": cmd_ht_vs_r, "ht-vs-h": cmd_ht_vs_h,
            "trace": cmd_trace, "spectrum": cmd_spectrum, "ratio": cmd_ratio,
            "gold-decay": cmd_gold_decay, "zoom": cmd_zoom}


# ---------------------------------------------------------------------------
# output


def format_value(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def to_csv(rows):
    buf = io.StringIO()
    if not rows:
        return ""
    cols = list(rows[0])
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([format_value(r.get(c)) for c in cols])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def to_json(rows, metadata):
    out = {"metadata": metadata,
           "rows": [{k: _jsonable(v) for k, v in r.items()} for r in rows]}
    return json.dumps(out, indent=1, default=_jsonable) + "\n"


def write_plot(path, rows, plot):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4.5))
    fam = plot.get("family", [])
    groups = {}
    for r in rows:
        groups.setdefault(tuple(r.get(f) for f in fam), []).append(r)
    for key, rs in groups.items():
        for ycol in plot["y"]:
            pts = [(r[plot["x"]], r.get(ycol)) for r in rs]
            pts = [(x, y) for x, y in pts if y is not None and x is not None and y > 0]
            if not pts:
                continue
            xs, ys = zip(*pts)
            label = ", ".join(f"{f}={k}" for f, k in zip(fam, key))
            style = "o" if "exact" in ycol else "-"
            ax.plot(xs, ys, style, label=f"{ycol} {label}".strip(), ms=3)
    if plot.get("loglog", True):
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel(plot["x"])
    ax.legend(fontsize=6)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# ---------------------------------------------------------------------------
# argument handling


def build_parser():
    p = argparse.ArgumentParser(prog="cylheat",
                                description="Heat transfer between dipoles near a cylinder.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="flat key = value configuration file")
        sp.add_argument("--preset", choices=sorted(PRESETS))
        sp.add_argument("--scenario", choices=("cylinder", "plate", "vacuum"))
        sp.add_argument("--material")
        sp.add_argument("--particle")
        sp.add_argument("--R", dest="R", help="radii (list or geom(a, b, n))")
        sp.add_argument("--h", dest="h", help="heights above the surface")
        sp.add_argument("--d", dest="d", help="axial separations")
        sp.add_argument("--T1", type=float)
        sp.add_argument("--R2", type=float)
        sp.add_argument("--sweep", help="swept axis (R, h or d)")
        sp.add_argument("--rel-tol", type=float)
        sp.add_argument("--tail-tol", type=float)
        sp.add_argument("--nmax", type=int)
        sp.add_argument("--max-panels", type=int)
        sp.add_argument("--budget-seconds", type=float)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--dmin", type=float)
        sp.add_argument("--dmax", type=float)
        sp.add_argument("--format", choices=("csv", "json"))
        sp.add_argument("-o", "--output")
        sp.add_argument("--plot", help="write an SVG plot to this path")
    return p


_FLAG_KEYS = ("scenario", "material", "particle", "R", "h", "d", "T1", "R2", "sweep", "rel_tol",
              "tail_tol", "nmax", "max_panels", "budget_seconds", "workers", "dmin", "dmax",
              "format", "output", "plot")


def config_from_args(args):
    """Merge preset, config file and flags (in increasing precedence)."""
    entries = {}
    source = None
    if args.preset:
        preset = PRESETS[args.preset]
        entries.update({k: (v, None) for k, v in preset.items()})
    if args.config:
        source = args.config
        with open(args.config, encoding="utf-8") as fh:
            entries.update(read_config_text(fh.read(), source))
    for key in _FLAG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            entries[key] = (str(v), None)
    return build_config(entries, source)


def run(command, cfg):
    """Execute a command; returns ``(rows, metadata, plot)``."""
    ctx = Context(cfg, command)
    rows, plot = HANDLERS[command](ctx)
    meta = {"command": command, "version": __version__, "config": cfg.echo(),
            "tolerances": asdict(ctx.spec), "omega0_rad_s": ctx.omega0,
            "lambda0_m": ctx.lambda0}
    return rows, meta, plot


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.preset and PRESETS[args.preset].get("command") not in (None, args.command):
        print(f"note: preset {args.preset} was made for '{PRESETS[args.preset]['command']}'",
              file=sys.stderr)
    rows, meta, plot = run(args.command, cfg)
    text = to_json(rows, meta) if cfg.format == "json" else to_csv(rows)
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if cfg.plot:
        write_plot(cfg.plot, rows, plot)
    return 0


if __name__ == "__main__":
    sys.exit(main())
