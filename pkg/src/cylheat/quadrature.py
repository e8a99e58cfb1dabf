"""One-dimensional integration engines.

* :func:`integrate_adaptive` -- globally adaptive Gauss-Kronrod (7/15) with
  batched panel evaluation; integrands are called on whole arrays of nodes and
  may be vector valued.
* :func:`integrate_semi_infinite` -- the same engine after the map
  ``x = a + s t / (1 - t)``.
* :func:`integrate_oscillatory` -- adaptive Filon quadrature for
  ``int f(x) cos(w x) dx`` / ``sin``: the envelope is interpolated per panel by
  a degree-16 polynomial (Chebyshev-Lobatto nodes, Legendre basis) and the
  trigonometric factor is integrated exactly against it, so the panel count
  follows the envelope and not the number of oscillations.
* :func:`evanescent_cutoff` -- upper limit of the ``kz`` integrals.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from numpy.polynomial import legendre
from scipy import special

from .errors import PoisonedIntegrandError


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and caps shared by all integrals and multipole sums.

    Attributes
    ----------
    rel_tol, abs_tol : float
        Requested accuracy, ``err <= max(rel_tol |I|, abs_tol)``.
    max_panels : int
        Panel budget of a single adaptive integral.
    evanescent_tail_tol : float
        Relative size of the discarded ``kz > kz_max`` tail.
    n_max_cap : int
        Highest multipole order of the cylinder sums.
    """

    rel_tol: float = 1e-6
    abs_tol: float = 1e-30
    max_panels: int = 10**6
    evanescent_tail_tol: float = 1e-12
    n_max_cap: int = 512

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0 and self.evanescent_tail_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_panels < 16:
            raise ValueError("max_panels must be at least 16")
        if self.n_max_cap < 1:
            raise ValueError("n_max_cap must be at least 1")

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass
class IntegralResult:
    value: object
    error_estimate: float
    panels_used: int
    converged: bool
    extra: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Gauss-Kronrod 7/15 (QUADPACK abscissae and weights)

_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

GK_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])           # 15 nodes, ascending
GK_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
_G_W15 = np.zeros(15)
_G_W15[[1, 3, 5]] = _WG[:3]
_G_W15[[9, 11, 13]] = _WG[2::-1]
_G_W15[7] = _WG[3]
GAUSS_WEIGHTS_ON_GK = _G_W15


def _inf_norm(v):
    a = np.abs(v)
    return a if a.ndim == 1 else a.max(axis=tuple(range(1, a.ndim)))


def _check_finite(vals, x):
    if not np.all(np.isfinite(vals)):
        bad = ~np.isfinite(vals)
        if bad.ndim > 1:
            bad = bad.reshape(bad.shape[0], -1).any(axis=1)
        raise PoisonedIntegrandError(float(np.asarray(x).ravel()[np.argmax(bad)]))


def _gk_panels(f, lo, hi):
    """Kronrod estimates and error estimates for the panels ``[lo, hi]``."""
    c = 0.5 * (lo + hi)
    hw = 0.5 * (hi - lo)
    x = c[:, None] + hw[:, None] * GK_NODES[None, :]
    vals = np.asarray(f(x.ravel()))
    _check_finite(vals, x.ravel())
    vals = vals.reshape(x.shape + vals.shape[1:])
    wk = (GK_WEIGHTS[None, :] * hw[:, None])
    wg = (GAUSS_WEIGHTS_ON_GK[None, :] * hw[:, None])
    ik = np.einsum("pj,pj...->p...", wk, vals)
    ig = np.einsum("pj,pj...->p...", wg, vals)
    diff = np.abs(ik - ig)
    # QUADPACK-style sharpening of the raw Kronrod-Gauss difference
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = ik / (2 * hw.reshape((-1,) + (1,) * (ik.ndim - 1)))
    mean = np.where(hw.reshape((-1,) + (1,) * (ik.ndim - 1)) > 0, mean, 0.0)
    resasc = np.einsum("pj,pj...->p...", wk, np.abs(vals - mean[:, None]))
    with np.errstate(invalid="ignore", divide="ignore"):
        fac = np.where(resasc > 0, np.minimum(1.0, (200.0 * diff / resasc) ** 1.5), 1.0)
    err = np.where(resasc > 0, resasc * fac, diff)
    err = np.maximum(err, 50 * np.finfo(float).eps * np.abs(ik))
    return ik, _inf_norm(err) if err.ndim > 1 else err


def _adaptive_driver(panel_rule, edges, spec, tol_rel=None, tol_abs=None):
    """Generic batched bisection driver around a per-panel rule."""
    rel = spec.rel_tol if tol_rel is None else tol_rel
    absol = spec.abs_tol if tol_abs is None else tol_abs
    lo = np.asarray(edges[:-1], dtype=float)
    hi = np.asarray(edges[1:], dtype=float)
    val, err = panel_rule(lo, hi)
    npanels = lo.size
    frozen = np.zeros(lo.size, dtype=bool)
    while True:
        total = val.sum(axis=0)
        err_total = float(err.sum())
        target = max(rel * float(np.max(np.abs(total))), absol)
        if err_total <= target:
            return IntegralResult(total, err_total, npanels, True)
        if npanels >= spec.max_panels:
            return IntegralResult(total, err_total, npanels, False)
        order = np.argsort(-np.where(frozen, -1.0, err), kind="stable")
        csum = np.cumsum(err[order])
        need = err_total - 0.5 * target
        nsplit = int(np.searchsorted(csum, need) + 1)
        nsplit = max(1, min(nsplit, order.size, spec.max_panels - npanels))
        pick = order[:nsplit]
        pick = pick[~frozen[pick]]
        if pick.size == 0:
            return IntegralResult(total, err_total, npanels, False)
        mid = 0.5 * (lo[pick] + hi[pick])
        nlo = np.concatenate([lo[pick], mid])
        nhi = np.concatenate([mid, hi[pick]])
        nval, nerr = panel_rule(nlo, nhi)
        keep = np.ones(lo.size, dtype=bool)
        keep[pick] = False
        lo = np.concatenate([lo[keep], nlo])
        hi = np.concatenate([hi[keep], nhi])
        val = np.concatenate([val[keep], nval])
        err = np.concatenate([err[keep], nerr])
        scale = np.maximum(np.abs(lo), np.abs(hi))
        frozen = (hi - lo) <= 64 * np.finfo(float).eps * scale
        # keep the reduction order independent of the refinement history
        idx = np.argsort(lo, kind="stable")
        lo, hi, val, err, frozen = lo[idx], hi[idx], val[idx], err[idx], frozen[idx]
        npanels = lo.size


def integrate_adaptive(f, a, b, spec=None, points=(), rel_tol=None, abs_tol=None):
    """Adaptive Gauss-Kronrod quadrature of ``f`` over ``[a, b]``.

    Parameters
    ----------
    f : callable
        Vectorized integrand, ``f(x)`` with ``x`` of shape ``(m,)`` returning
        shape ``(m,)`` or ``(m, p)`` (real or complex).
    a, b : float
        Finite limits, ``a < b``.
    spec : QuadratureSpec, optional
    points : sequence of float
        Interior break points.
    rel_tol, abs_tol : float, optional
        Override the tolerances of ``spec``.

    Returns
    -------
    IntegralResult
    """
    spec = spec or QuadratureSpec()
    if not a < b:
        raise ValueError("integrate_adaptive needs a < b")
    pts = sorted({float(p) for p in points if a < p < b})
    edges = np.array([a, *pts, b], dtype=float)
    return _adaptive_driver(lambda lo, hi: _gk_panels(f, lo, hi), edges, spec, rel_tol, abs_tol)


def integrate_semi_infinite(f, a, spec=None, scale=1.0, points=(), rel_tol=None, abs_tol=None):
    """Integrate ``f`` over ``[a, inf)`` through ``x = a + s t/(1 - t)``."""
    spec = spec or QuadratureSpec()
    s = float(scale)

    def g(t):
        x = a + s * t / (1.0 - t)
        return (np.asarray(f(x)).T * (s / (1.0 - t) ** 2)).T

    tp = [(p - a) / (p - a + s) for p in points if p > a]
    return integrate_adaptive(g, 0.0, 1.0, spec, points=tp, rel_tol=rel_tol, abs_tol=abs_tol)


# ---------------------------------------------------------------------------
# Filon quadrature on Chebyshev-Lobatto panels

def _cl_nodes(m):
    return -np.cos(np.pi * np.arange(m + 1) / m)


_T16 = _cl_nodes(16)
_T8 = _T16[::2]
_INV16 = np.linalg.inv(legendre.legvander(_T16, 16))
_INV8 = np.linalg.inv(legendre.legvander(_T8, 8))
_IPOW = 1j ** np.arange(17)


def _filon_weights(lo, hi, phi, kind):
    """Per-node weights of the degree-16 and degree-8 Filon rules.

    Returns arrays of shape ``(npanels, 17)`` and ``(npanels, 9)``.
    """
    c = 0.5 * (lo + hi)
    hw = 0.5 * (hi - lo)
    arg = phi * hw
    ls = np.arange(17)
    jl = special.spherical_jn(ls[None, :], arg[:, None])
    phase = np.exp(1j * phi * c)[:, None] * _IPOW[None, :]
    if kind == "cos":
        tw = phase.real
    elif kind == "sin":
        tw = phase.imag
    elif kind == "none":
        tw = np.ones_like(phase.real)
        jl = special.spherical_jn(ls[None, :], np.zeros_like(arg)[:, None])
    else:
        raise ValueError(f"unknown oscillation kind {kind!r}")
    mom = 2.0 * hw[:, None] * jl * tw           # int P_l(t) w(x(t)) dx
    w16 = mom @ _INV16                          # node weights
    w8 = mom[:, :9] @ _INV8
    return w16, w8


def _normalize_kind(kind):
    if isinstance(kind, str):
        return kind
    return tuple(kind)


def integrate_oscillatory(envelope, phase_rate, kind, a, b, spec=None, points=(),
                          rel_tol=None, abs_tol=None):
    """Filon-type quadrature of ``int_a^b envelope(x) w(phase_rate x) dx``.

    Parameters
    ----------
    envelope : callable
        Vectorized smooth function, returning ``(m,)`` or ``(m, p)``.
    phase_rate : float
        Oscillation rate ``w >= 0``.
    kind : {"cos", "sin", "none"} or sequence of them
        Trigonometric factor; a sequence gives one kind per component of a
        vector-valued envelope.
    a, b : float
    spec : QuadratureSpec, optional
    points : sequence of float
        Break points the panel grid must contain.

    Notes
    -----
    When ``phase_rate (b - a) < 2 pi`` there is less than one oscillation
    and the product is handed to :func:`integrate_adaptive`.
    """
    spec = spec or QuadratureSpec()
    if not a < b:
        raise ValueError("integrate_oscillatory needs a < b")
    if phase_rate < 0:
        raise ValueError("phase_rate must be non-negative")
    kind = _normalize_kind(kind)
    kinds = (kind,) if isinstance(kind, str) else kind
    for kd in kinds:
        if kd not in ("cos", "sin", "none"):
            raise ValueError(f"unknown oscillation kind {kd!r}")
    phi = float(phase_rate)

    if phi * (b - a) < 2 * np.pi:
        def prod(x):
            v = np.asarray(envelope(x))
            if isinstance(kind, str):
                return v * _trig(kind, phi * x)
            fac = np.stack([_trig(kd, phi * x) for kd in kind], axis=-1)
            return v * fac

        res = integrate_adaptive(prod, a, b, spec, points=points, rel_tol=rel_tol, abs_tol=abs_tol)
        res.extra["method"] = "gauss-kronrod"
        return res

    def rule(lo, hi):
        c = 0.5 * (lo + hi)
        hw = 0.5 * (hi - lo)
        x = c[:, None] + hw[:, None] * _T16[None, :]
        vals = np.asarray(envelope(x.ravel()))
        _check_finite(vals, x.ravel())
        vals = vals.reshape(x.shape + vals.shape[1:])
        if isinstance(kind, str):
            w16, w8 = _filon_weights(lo, hi, phi, kind)
            i16 = np.einsum("pj,pj...->p...", w16, vals)
            i8 = np.einsum("pj,pj...->p...", w8, vals[:, ::2])
        else:
            cols16, cols8 = [], []
            cache = {}
            for j, kd in enumerate(kind):
                if kd not in cache:
                    cache[kd] = _filon_weights(lo, hi, phi, kd)
                w16, w8 = cache[kd]
                cols16.append(np.einsum("pj,pj->p", w16, vals[..., j]))
                cols8.append(np.einsum("pj,pj->p", w8, vals[:, ::2, j]))
            i16 = np.stack(cols16, axis=-1)
            i8 = np.stack(cols8, axis=-1)
        err = np.abs(i16 - i8)
        if err.ndim > 1:
            err = err.max(axis=1)
        return i16, err

    pts = sorted({float(p) for p in points if a < p < b})
    edges = np.array([a, *pts, b], dtype=float)
    res = _adaptive_driver(rule, edges, spec, rel_tol, abs_tol)
    res.extra["method"] = "filon"
    return res


def _trig(kind, arg):
    if kind == "cos":
        return np.cos(arg)
    if kind == "sin":
        return np.sin(arg)
    return np.ones_like(arg)


def evanescent_cutoff(k, h, spec=None, margin=1.0):
    """Upper ``kz`` limit for integrands decaying like ``exp(-2 kappa h)``.

    ``kappa_max = margin * ln(1/tail_tol) / (2 h)`` and
    ``kz_max = sqrt(k^2 + kappa_max^2)``.  With ``margin = 1`` this is the bare
    truncation point of a pure exponential envelope.
    """
    spec = spec or QuadratureSpec()
    if k <= 0 or h <= 0:
        raise ValueError("k and h must be positive")
    tol = spec.evanescent_tail_tol
    kappa = margin * max(np.log(1.0 / tol), 0.0) / (2.0 * h)
    return float(np.sqrt(k * k + kappa * kappa))
