"""Heat transfer and emitted power as frequency integrals of the Green's function.

``H/(V1 V2) = 32 pi hbar/c^4 (3/4pi)^2 int dw w^5 n(w) Im chi_1 Im chi_2 Tr(G G^dagger)``

``H_total/V1 = 8 hbar/c^2 (3/4pi) int dw w^3 n(w) Im chi_1 Tr Im G``

with ``n(w) = 1/(exp(hbar w/kB T1) - 1)`` and ``chi`` the Clausius-Mossotti
factor.  The particle factor is sharply peaked at the particle resonance while
the geometric factor (the trace) is smooth in ``w``.  The integrals are
therefore done by product integration: on panels in ``ln w`` the trace is
replaced by its Chebyshev-Lobatto interpolant and the interpolation weights
``int W(w) l_j(ln w) dw`` are computed with adaptive Gauss-Kronrod.  Only a
few dozen (expensive) trace evaluations are needed per integral.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import analytic
from .constants import C, HBAR, K_B
from .cylinder_gf import trace_ggdag, trace_im_g_onepoint
from .errors import RegimeError
from .geometry_gf import (
    Geometry,
    decompose_plate,
    plate_trace_im_onepoint,
    vacuum_trace,
)
from .materials import GOLD, PEC, PerfectConductor, Vacuum, susceptibility_cm
from .quadrature import QuadratureSpec, integrate_adaptive, integrate_semi_infinite

OMEGA_MIN = 1e12
OMEGA_MAX = 2e15
_NODES = 16
_MAX_PANELS = 64


@dataclass
class TransferResult:
    """Heat transfer per particle volume product (W m^-6).

    ``decomposition`` holds the vacuum, scattering and cross contributions,
    which add up to ``h_per_vol``; ``spectrum`` lists ``(omega, integrand)``
    at the frequencies where the trace was evaluated.
    """

    h_per_vol: float
    decomposition: dict
    spectrum: list = field(default_factory=list, repr=False)
    diagnostics: dict = field(default_factory=dict, repr=False)


def _scenario(geom_R, scatterer, scenario):
    if scenario is None:
        if isinstance(scatterer, Vacuum) or scatterer is None or geom_R == 0:
            return "vacuum"
        return "cylinder"
    if scenario not in analytic.SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}")
    if scenario == "plate" and not isinstance(scatterer, PerfectConductor):
        raise ValueError("only a perfectly conducting plate is supported")
    return scenario


def _planck(omega, T1):
    a = HBAR * np.asarray(omega, dtype=float) / (K_B * T1)
    with np.errstate(over="ignore"):
        return 1.0 / np.expm1(a)


def _window_panels(particles):
    m = particles[0].material
    try:
        w0 = analytic.peak_frequency(particles)
    except RegimeError:
        w0 = None
    if w0 is None or not OMEGA_MIN < w0 / 1.3 < w0 * 1.3 < OMEGA_MAX:
        edges = np.geomspace(OMEGA_MIN, OMEGA_MAX, 4)
    else:
        edges = np.array([OMEGA_MIN, w0 / 1.3, w0 * 1.3, OMEGA_MAX])
    return np.log(edges), w0, m


# ---------------------------------------------------------------------------
# product integration


_T = -np.cos(np.pi * np.arange(_NODES + 1) / _NODES)        # ascending Lobatto nodes
_BW = np.array([(-1.0) ** j for j in range(_NODES + 1)])
_BW[0] *= 0.5
_BW[-1] *= 0.5
_T8 = _T[::2]
_BW8 = np.array([(-1.0) ** j for j in range(_NODES // 2 + 1)])
_BW8[0] *= 0.5
_BW8[-1] *= 0.5


def _lagrange(t, nodes, bw):
    """Barycentric Lagrange basis ``l_j(t)``, shape ``(t.size, nodes.size)``."""
    diff = t[:, None] - nodes[None, :]
    exact = diff == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        q = bw[None, :] / diff
        out = q / q.sum(axis=1, keepdims=True)
    hit = exact.any(axis=1)
    if np.any(hit):
        out[hit] = exact[hit].astype(float)
    return out


def _panel_weights(weight, ua, ub, points, tol):
    """``int W(w) l_j(ln w) dw`` over ``[e^ua, e^ub]`` for 17 and 9 nodes."""
    mid, hw = 0.5 * (ua + ub), 0.5 * (ub - ua)

    def f(w):
        t = (np.log(w) - mid) / hw
        wv = weight(w)[:, None]
        return np.concatenate([wv * _lagrange(t, _T, _BW), wv * _lagrange(t, _T8, _BW8)], axis=1)

    a, b = math.exp(ua), math.exp(ub)
    res = integrate_adaptive(f, a, b, QuadratureSpec(rel_tol=tol, abs_tol=1e-300), points=points)
    v = np.real(res.value)
    return v[: _NODES + 1], v[_NODES + 1 :], res.converged


def _map(fn, xs, workers):
    if workers and workers > 1 and len(xs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, xs))
    return [fn(x) for x in xs]


def product_integrate(weight, geom_fn, u_edges, rel_tol, points=(), workers=None):
    """``int W(w) g(w) dw`` for a peaked weight ``W`` and a smooth vector ``g``.

    Parameters
    ----------
    weight : callable
        Vectorized scalar weight ``W(w)``.
    geom_fn : callable
        ``g(w)`` for a scalar frequency, returning a 1-D array (component 0 is
        the quantity whose accuracy controls the refinement).
    u_edges : array_like
        Initial panel edges in ``ln w``.

    Returns
    -------
    value : ndarray
    nodes : list of (w, g(w))
    info : dict
    """
    cache = {}

    def g_at(us):
        new = [u for u in us if u not in cache]
        vals = _map(lambda u: np.atleast_1d(np.asarray(geom_fn(math.exp(u)), dtype=float)), new, workers)
        cache.update(zip(new, vals))
        return np.array([cache[u] for u in us])

    def panel(ua, ub):
        mid, hw = 0.5 * (ua + ub), 0.5 * (ub - ua)
        us = [float(mid + hw * t) for t in _T]
        us[0], us[-1] = ua, ub
        G = g_at(us)
        w16, w8, ok = _panel_weights(weight, ua, ub, points, rel_tol * 1e-3)
        i16 = w16 @ G
        i8 = w8 @ G[::2]
        return i16, float(np.max(np.abs(i16 - i8))), ok

    panels = [(float(a), float(b)) for a, b in zip(u_edges[:-1], u_edges[1:])]
    results = {p: panel(*p) for p in panels}
    converged = True
    while True:
        total = sum(results[p][0] for p in panels)
        err = sum(results[p][1] for p in panels)
        target = rel_tol * abs(total[0])
        if err <= target:
            break
        if len(panels) >= _MAX_PANELS:
            converged = False
            break
        worst = max(panels, key=lambda p: results[p][1])
        a, b = worst
        m = 0.5 * (a + b)
        i = panels.index(worst)
        panels[i : i + 1] = [(a, m), (m, b)]
        del results[worst]
        results[(a, m)] = panel(a, m)
        results[(m, b)] = panel(m, b)
    converged = converged and all(results[p][2] for p in panels)
    nodes = [(math.exp(u), cache[u]) for u in sorted(cache)]
    info = {"panels": len(panels), "error_estimate": err, "converged": converged,
            "trace_evaluations": len(cache)}
    return total, nodes, info


# ---------------------------------------------------------------------------
# heat transfer


def ht_weight(T1, particles):
    """``32 pi hbar/c^4 (3/4pi)^2 w^5 n(w) Im chi_1 Im chi_2`` as a function of ``w``."""
    m1, m2 = particles[0].material, particles[1].material
    pref = 32 * np.pi * HBAR / C**4 * (3 / (4 * np.pi)) ** 2

    def W(w):
        w = np.asarray(w, dtype=float)
        return (pref * w**5 * _planck(w, T1) * np.imag(susceptibility_cm(m1, w))
                * np.imag(susceptibility_cm(m2, w)))

    return W


def _trace_fn(geom, scatterer, scenario, spec):
    """Return ``w -> [total, vac, scat, cross]`` of ``Tr(G G^dagger)``."""
    if scenario == "vacuum":
        return lambda w: np.array([vacuum_trace(w / C, geom.d), vacuum_trace(w / C, geom.d), 0.0, 0.0])
    if scenario == "plate":
        def plate(w):
            t = decompose_plate(w / C, geom.h, geom.d)
            return np.array([t.total, t.vac, t.scat, t.cross])
        return plate

    def cyl(w):
        t = trace_ggdag(w / C, geom, scatterer, spec)
        return np.array([t.total, t.vac, t.scat, t.cross])

    return cyl


def _tail_fraction(W, geom, scenario, total):
    """Share of the approximate integrand outside the frequency window."""
    def f(w):
        w = np.maximum(np.asarray(w, dtype=float), 1e-300)
        return W(w) * analytic.geometric_braces(w, geom, scenario) / (8 * np.pi**2)

    spec = QuadratureSpec(rel_tol=1e-6, abs_tol=1e-300)
    lo = integrate_adaptive(f, 1.0, OMEGA_MIN, spec, points=np.geomspace(10, 1e11, 11)).value
    hi = integrate_semi_infinite(f, OMEGA_MAX, spec, scale=OMEGA_MAX).value
    return float(abs(lo) + abs(hi)) / abs(total)


def heat_transfer_exact(T1, geom, scatterer, particles, spec=None, scenario=None, workers=None):
    """Heat transfer from particle 1 to particle 2, per ``V1 V2`` (W m^-6).

    Parameters
    ----------
    T1 : float
        Temperature of particle 1 (K); everything else is at zero temperature.
    geom : Geometry
    scatterer : material model
        Cylinder material (``PEC``, a Lorentz/Drude model), or ``VACUUM``.
    particles : (Particle, Particle)
    spec : QuadratureSpec, optional
        Controls both the Green's-function and the frequency integrals.
    scenario : {"cylinder", "plate", "vacuum"}, optional
        Defaults to ``"cylinder"`` for ``R > 0`` and a non-vacuum scatterer.
    workers : int, optional
        Evaluate trace nodes on a thread pool.

    Returns
    -------
    TransferResult
    """
    if T1 <= 0:
        raise ValueError("T1 must be positive")
    if geom.d <= 0:
        raise ValueError("heat transfer needs d > 0")
    spec = spec or QuadratureSpec()
    scenario = _scenario(geom.R, scatterer, scenario)
    W = ht_weight(T1, particles)
    u_edges, w0, _ = _window_panels(particles)
    pts = analytic.spectral_points([p.material for p in particles])
    value, nodes, info = product_integrate(W, _trace_fn(geom, scatterer, scenario, spec),
                                           u_edges, spec.rel_tol, pts, workers)
    total, vac, scat, cross = (float(v) for v in value)
    tail = _tail_fraction(W, geom, scenario, total)
    info["tail_fraction"] = tail
    info["tail_ok"] = tail < spec.rel_tol
    info["scenario"] = scenario
    info["omega0"] = w0
    spectrum = [(w, float(W(w) * g[0])) for w, g in nodes]
    return TransferResult(h_per_vol=total,
                          decomposition={"vac": vac, "scat": scat, "cross": cross},
                          spectrum=spectrum, diagnostics=info)


# ---------------------------------------------------------------------------
# emission


def _im_trace_fn(R, h, scatterer, scenario, spec):
    if scenario == "vacuum":
        return lambda w: w / (2 * np.pi * C)
    if scenario == "plate":
        return lambda w: plate_trace_im_onepoint(w / C, h)
    return lambda w: trace_im_g_onepoint(w / C, R, h, scatterer, spec)


def emission_weight(T1, particle):
    pref = 8 * HBAR / C**2 * (3 / (4 * np.pi))
    m = particle.material

    def W(w):
        w = np.asarray(w, dtype=float)
        return pref * w**3 * _planck(w, T1) * np.imag(susceptibility_cm(m, w))

    return W


def total_emission(T1, R, h, scatterer, particle1, spec=None, scenario=None,
                   factorized=False, workers=None):
    """Power emitted by particle 1 per ``V1`` (W m^-3).

    ``factorized=True`` pulls ``Tr Im G`` out of the integral at the particle
    resonance ``omega_0``.
    """
    if T1 <= 0:
        raise ValueError("T1 must be positive")
    spec = spec or QuadratureSpec()
    scenario = _scenario(R, scatterer, scenario)
    fn = _im_trace_fn(R, h, scatterer, scenario, spec)
    W = emission_weight(T1, particle1)
    pair = (particle1, particle1)
    pts = analytic.spectral_points([particle1.material])
    if factorized:
        w0 = analytic.peak_frequency(pair)
        return float(fn(w0)) * emission_material_integral(T1, particle1) * (
            8 * HBAR / C**2 * (3 / (4 * np.pi)))
    u_edges, _, _ = _window_panels(pair)
    value, _, _ = product_integrate(W, fn, u_edges, spec.rel_tol, pts, workers)
    return float(value[0])


def emission_material_integral(T1, particle):
    """``int_0^inf w^3 n(w) Im chi dw``."""
    m = particle.material

    def f(w):
        w = np.maximum(np.asarray(w, dtype=float), 1e-300)
        return w**3 * _planck(w, T1) * np.imag(susceptibility_cm(m, w))

    res = integrate_semi_infinite(f, 0.0, QuadratureSpec(rel_tol=1e-10, abs_tol=1e-300),
                                  scale=K_B * T1 / HBAR, points=analytic.spectral_points([m]))
    return float(res.value)


def transfer_emission_ratio(T1, geom, scatterer, particles, R2, spec=None, scenario=None):
    """``H / H_total`` with both integrals factorized at ``omega_0``.

    Only the far-field ``1/d^2`` and the waveguide (or plate image) terms of
    the heat transfer are kept; ``Tr Im G(omega_0)`` is computed numerically.
    The result scales as ``R2^3``.
    """
    if R2 <= 0:
        raise ValueError("R2 must be positive")
    spec = spec or QuadratureSpec()
    scenario = _scenario(geom.R, scatterer, scenario)
    w0 = analytic.peak_frequency(particles)
    d, h, R = geom.d, geom.h, geom.R
    braces = 1.0 / d**2
    if scenario == "cylinder":
        braces += 8 * np.pi**2 * analytic._log_term(w0 / C, R, h, d)
    elif scenario == "plate":
        braces += 1.0 / (d * d + 4 * h * h)
    trim = float(_im_trace_fn(R, h, scatterer, scenario, spec)(w0))
    m1, m2 = particles[0].material, particles[1].material
    M5 = analytic.material_integral(T1, (m1, m2)) / (3 / (4 * np.pi)) ** 2
    M3 = emission_material_integral(T1, particles[0])
    return R2**3 / (2 * np.pi * C**2) * braces / trim * M5 / M3


# ---------------------------------------------------------------------------
# derived length scales


def vacuum_ht_approx(T1, d, particles):
    """Approximate vacuum heat transfer per ``V1 V2`` at separation ``d``."""
    return analytic.ht_approx_peak(T1, Geometry(0.0, 1.0, d), particles, scenario="vacuum")


def equivalent_vacuum_distance(h_value, T1, particles, d_lo=1e-10, d_hi=1e10):
    """Separation at which isolated particles exchange ``h_value`` (W m^-6).

    Solves ``H_vac(d) = h_value`` by bisection in ``ln d`` (the vacuum curve
    is strictly decreasing) to 1e-6 relative accuracy in ``d``.
    """
    if h_value <= 0:
        raise ValueError("h_value must be positive")

    def f(lnd):
        return math.log(vacuum_ht_approx(T1, math.exp(lnd), particles)) - math.log(h_value)

    a, b = math.log(d_lo), math.log(d_hi)
    fa, fb = f(a), f(b)
    if fa < 0 or fb > 0:
        raise RegimeError(
            f"no vacuum separation in [{d_lo:g}, {d_hi:g}] m gives H = {h_value:g} W/m^6")
    root = optimize.bisect(f, a, b, xtol=1e-6)
    return math.exp(root)


def gold_decay_length(R, h, T1, particles, spec=None, d_lo=1e-6, d_hi=1.0,
                      per_decade=4, gold=GOLD, workers=None, rtol=1e-3):
    """Distance at which a gold cylinder's heat transfer is ``1/e`` of the PEC one.

    The ratio ``H_Au/H_PEC`` is scanned on a logarithmic grid of ``d``
    (``per_decade`` points per decade) to bracket the crossing, which is then
    refined by bisection in ``ln d``.

    Returns
    -------
    length : float
    info : dict
        Scanned grid and ratios.
    """
    spec = spec or QuadratureSpec()
    target = math.exp(-1.0)

    def ratio(d):
        g = Geometry(R, h, d)
        au = heat_transfer_exact(T1, g, gold, particles, spec, workers=workers).h_per_vol
        pec = heat_transfer_exact(T1, g, PEC, particles, spec, workers=workers).h_per_vol
        return au / pec

    n = int(round(per_decade * math.log10(d_hi / d_lo))) + 1
    grid = np.geomspace(d_lo, d_hi, n)
    scanned = []
    prev = None
    for d in grid:
        r = ratio(float(d))
        scanned.append((float(d), r))
        if r < target:
            if prev is None:
                raise RegimeError(f"ratio already below 1/e at d = {d:g} m")
            a, b = math.log(prev), math.log(float(d))
            root = optimize.bisect(lambda x: ratio(math.exp(x)) - target, a, b,
                                   xtol=rtol)
            return math.exp(root), {"scan": scanned}
        prev = float(d)
    raise RegimeError(
        f"gold/PEC ratio does not fall below 1/e in [{d_lo:g}, {d_hi:g}] m; last {scanned[-1]}")
