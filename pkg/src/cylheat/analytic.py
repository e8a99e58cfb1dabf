"""Closed-form logarithmic approximation of the trace and the heat transfer.

The approximate trace is the vacuum term plus a waveguide term that decays
only logarithmically with the separation,

``Tr(G G^dagger) ~ 1/(8 pi^2 d^2) [1 + 1/(kd)^2 + 3/(kd)^4]
                   + 1 / (4 pi^2 k^2 (R+h)^4 ln^2[1 + sqrt(2) sqrt(d^2+4h^2)/(k R^2)])``

Heat-transfer results are per particle volume product ``H/(V1 V2)`` in
W m^-6, with the sphere polarizability written as ``alpha = (3V/4pi) chi``.
"""

import threading
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .constants import C, HBAR, K_B
from .errors import RegimeError
from .geometry_gf import Geometry
from .materials import Lorentz, resonance_frequency, susceptibility_cm
from .quadrature import QuadratureSpec, integrate_semi_infinite

SCENARIOS = ("cylinder", "plate", "vacuum")
# reading of "much larger than" in the regime conditions
FACTOR = 10.0


# ---------------------------------------------------------------------------
# trace


def _log_term(k, R, h, d):
    arg = np.sqrt(2.0) * np.sqrt(d * d + 4 * h * h) / (k * R * R)
    return 1.0 / (4 * np.pi**2 * k**2 * (R + h) ** 4 * np.log1p(arg) ** 2)


def trace_approx(k, R, h, d):
    """Logarithmic approximation of ``Tr(G G^dagger)`` (m^-2).

    Parameters
    ----------
    k : float
        Wavenumber ``omega/c`` (rad/m).
    R, h, d : float
        Cylinder radius, particle height above the surface and axial
        separation (m), all positive.
    """
    if min(k, R, h, d) <= 0:
        raise ValueError("k, R, h and d must be positive")
    x = k * d
    vac = (1 + 1 / x**2 + 3 / x**4) / (8 * np.pi**2 * d**2)
    return vac + _log_term(k, R, h, d)


def geometric_braces(omega, geom, scenario=None):
    """The curly-bracket geometric factor of the approximate heat transfer.

    ``1/d^2 [1 + c^2/(w d)^2 + 3 c^4/(w d)^4] + 2 c^2/(w^2 (R+h)^4 ln^2[...])``,
    i.e. ``8 pi^2`` times the approximate trace.  ``scenario`` selects the
    second term: ``"cylinder"`` (default when ``R > 0``), ``"plate"``
    (``1/(d^2 + 4h^2)``, the large-``R`` limit) or ``"vacuum"`` (dropped).
    """
    omega = np.asarray(omega, dtype=float)
    scenario = scenario or ("cylinder" if geom.R > 0 else "vacuum")
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}")
    d, h, R = geom.d, geom.h, geom.R
    if d <= 0:
        raise ValueError("d must be positive")
    x = omega * d / C
    out = (1 + 1 / x**2 + 3 / x**4) / d**2
    if scenario == "cylinder":
        if R <= 0:
            raise ValueError("cylinder scenario needs R > 0")
        k = omega / C
        out = out + 8 * np.pi**2 * _log_term(k, R, h, d)
    elif scenario == "plate":
        out = out + 1.0 / (d * d + 4 * h * h)
    return out


# ---------------------------------------------------------------------------
# heat transfer


def planck_weight(omega, T1):
    """``omega^5 / (exp(hbar omega / kB T) - 1)`` without overflow."""
    omega = np.asarray(omega, dtype=float)
    a = HBAR * omega / (K_B * T1)
    with np.errstate(over="ignore"):
        return omega**5 / np.expm1(a)


def _prefactor():
    return 4 * HBAR / (np.pi * C**4) * (3 / (4 * np.pi)) ** 2


def _im_chi(material, omega):
    return np.imag(susceptibility_cm(material, omega))


def ht_integrand_approx(omega, T1, geom, particles, scenario=None):
    """Spectral density of the approximate heat transfer, per ``V1 V2``.

    The integrand of ``H/(V1 V2)`` over ``omega``, with the geometric factor
    evaluated at each frequency.  ``scenario="vacuum"`` removes the
    logarithmic term.
    """
    omega = np.asarray(omega, dtype=float)
    p1, p2 = particles
    val = (_prefactor() * planck_weight(omega, T1) * _im_chi(p1.material, omega)
           * _im_chi(p2.material, omega) * geometric_braces(omega, geom, scenario))
    return val[()] if val.ndim == 0 else val


def _peak_points(materials):
    pts = []
    for m in materials:
        if isinstance(m, Lorentz):
            w0 = resonance_frequency(m)
            pts += [w0 + s * f * m.gamma for f in (0.5, 2, 8, 32, 128) for s in (-1, 1)]
            pts += [w0, m.omega_to, m.omega_lo]
    return sorted(p for p in pts if p > 0)


def spectral_points(materials):
    """Break points that resolve the particle resonances in frequency integrals."""
    return _peak_points(materials)


_cache = {}
_cache_lock = threading.Lock()


def material_integral(T1, materials, spec=None):
    """``(3/4pi)^2 int_0^inf omega^5 n(omega) Im chi_1 Im chi_2 d omega``.

    ``materials`` is a pair of particle materials.  Results are memoized per
    ``(T1, materials)``; the computation runs at most once per key.
    """
    m1, m2 = materials
    spec = spec or QuadratureSpec(rel_tol=1e-10, abs_tol=1e-300)
    key = (float(T1), m1, m2, spec.rel_tol)
    with _cache_lock:
        if key not in _cache:
            def f(w):
                w = np.maximum(w, 1e-300)
                return planck_weight(w, T1) * _im_chi(m1, w) * _im_chi(m2, w)

            res = integrate_semi_infinite(f, 0.0, spec, scale=K_B * T1 / HBAR,
                                          points=_peak_points([m1, m2]))
            if not res.converged:
                raise RegimeError("material frequency integral did not converge")
            _cache[key] = (3 / (4 * np.pi)) ** 2 * float(res.value)
        return _cache[key]


def peak_frequency(particles):
    """Resonance frequency ``omega_0`` of particle 1 (Lorentz material)."""
    m = particles[0].material
    if not isinstance(m, Lorentz):
        raise RegimeError("the peak-frequency formula needs resonant (Lorentz) particles")
    return resonance_frequency(m)


def ht_approx_peak(T1, geom, particles, scenario=None, omega0=None):
    """Heat transfer per ``V1 V2`` with the trace pulled out at ``omega_0``.

    ``4 hbar/(pi c^4) {braces at omega_0} (3/4pi)^2 int omega^5 n Im chi_1 Im chi_2``
    in W m^-6.
    """
    w0 = peak_frequency(particles) if omega0 is None else omega0
    M = material_integral(T1, (particles[0].material, particles[1].material))
    return 4 * HBAR / (np.pi * C**4) * float(geometric_braces(w0, geom, scenario)) * M


def ht_approx_integral(T1, geom, particles, scenario=None, rel_tol=1e-9):
    """Heat transfer per ``V1 V2`` with the geometric factor kept inside the
    frequency integral (the integral of :func:`ht_integrand_approx`)."""
    mats = [particles[0].material, particles[1].material]
    spec = QuadratureSpec(rel_tol=rel_tol, abs_tol=1e-300)

    def f(w):
        w = np.maximum(w, 1e-300)
        return ht_integrand_approx(w, T1, geom, particles, scenario)

    res = integrate_semi_infinite(f, 0.0, spec, scale=K_B * T1 / HBAR, points=_peak_points(mats))
    if not res.converged:
        raise RegimeError("frequency integral of the approximate heat transfer did not converge")
    return float(res.value)


def log_to_vacuum_ratio(omega0, R, h, d):
    """Ratio of the logarithmic to the vacuum term of the geometric factor."""
    g = Geometry(R, h, d)
    vac = float(geometric_braces(omega0, g, "vacuum"))
    return float(geometric_braces(omega0, g, "cylinder")) / vac - 1.0


def rescaled_ht(H, R, h, lambda0):
    """``H (R+h)^4 / lambda_0^2``, the collapse variable for large ``d``."""
    return H * (R + h) ** 4 / lambda0**2


def r_max(omega0, h, d, r_lo=1e-12, r_hi=1e-3):
    """Radius maximizing the approximate heat transfer at fixed ``h`` and ``d``.

    Only the geometric factor depends on ``R``.  A logarithmic scan brackets
    the maximum and a golden-section search refines it (in ``ln R``).
    """
    def neg(lr):
        return -float(geometric_braces(omega0, Geometry(np.exp(lr), h, d), "cylinder"))

    grid = np.linspace(np.log(r_lo), np.log(r_hi), 241)
    vals = np.array([neg(g) for g in grid])
    i = int(np.argmin(vals))
    if i == 0 or i == grid.size - 1:
        raise RegimeError("no interior maximum of the heat transfer in the scanned radii")
    res = optimize.minimize_scalar(neg, bracket=(grid[i - 1], grid[i], grid[i + 1]),
                                   method="golden", options={"xtol": 1e-8})
    return float(np.exp(res.x))


# ---------------------------------------------------------------------------
# length scales and regimes


@dataclass(frozen=True)
class ZoomResult:
    d_zoom: float
    valid: bool


def d_zoom(lambda0, R, h):
    """``[lambda_0^2 (R+h)^4]^(1/6)``, valid when it is well below ``lambda_0``.

    Returns a :class:`ZoomResult`; ``valid`` is false when
    ``d_zoom > lambda_0 / 10``.
    """
    if lambda0 <= 0 or R < 0 or h < 0:
        raise ValueError("need lambda0 > 0, R >= 0, h >= 0")
    dz = (lambda0**2 * (R + h) ** 4) ** (1.0 / 6.0)
    return ZoomResult(d_zoom=dz, valid=bool(dz <= lambda0 / FACTOR))


@dataclass(frozen=True)
class Regime:
    """Far-field regime of the trace and its characteristic scales (m)."""

    tag: str
    d_c: float
    R_c: float
    d_p: float
    R_p: float


def _log_arg(lam, R, h, d):
    return lam * np.sqrt(d * d + 4 * h * h) / (np.sqrt(2) * np.pi * R * R)


def classify_regime(lam, R, h, d):
    """Classify ``(R, h, d)`` at wavelength ``lam``.

    Returns a :class:`Regime` with ``tag`` one of ``"VacuumCase"``,
    ``"CylinderCase"``, ``"PlateCase"``, ``"Crossover"`` (checked in that
    order).  "Much larger" is read as a factor 10.  For ``h <= lam/10`` the
    cylinder and plate cases use the thresholds ``d >= d_c`` and ``d <= d_p``;
    otherwise the full logarithmic inequalities are evaluated.
    """
    if min(lam, R, h, d) <= 0:
        raise ValueError("lam, R, h and d must be positive")
    d_c = 160 * R**2 / lam
    R_c = np.sqrt(lam * d) / (4 * np.sqrt(10))
    d_p = 2 * R**2 / (5 * lam)
    R_p = np.sqrt(10) / 2 * np.sqrt(lam * d)
    X = _log_arg(lam, R, h, d)
    L = np.log1p(X)
    r = R + h
    thin = h <= lam / FACTOR

    if L >= FACTOR * lam * d / (np.sqrt(2) * np.pi * r**2):
        tag = "VacuumCase"
    elif (d >= d_c) if thin else (FACTOR * L <= lam * d / (2 * np.pi * r**2)):
        tag = "CylinderCase"
    elif R >= FACTOR * h and ((d <= d_p) if thin
                             else (X <= 4 / (FACTOR * np.sqrt(2) * np.pi))):
        # full reading: ln(1+X) ~ X with the same margin as lam d <= 0.4 R^2
        tag = "PlateCase"
    else:
        tag = "Crossover"
    return Regime(tag=tag, d_c=float(d_c), R_c=float(R_c), d_p=float(d_p), R_p=float(R_p))


def nearfield_equivalence_condition(lam, R, h, d_nf):
    """True when ``lam^2 (R+h)^4 <= d_nf^6 / 10``.

    Under this condition the far-field trace next to the cylinder can match
    or exceed the vacuum near-field trace at separation ``d_nf``.
    """
    return bool(lam**2 * (R + h) ** 4 <= d_nf**6 / FACTOR)
