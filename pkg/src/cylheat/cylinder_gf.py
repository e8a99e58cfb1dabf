"""Scattering Green's function of an infinite cylinder for two points at the
same radius ``r = R + h`` and azimuth, separated by ``d`` along the axis.

Each tensor entry is a multipole sum of ``kz`` integrals,

``G_T,ij = i/(2 pi) int_0^inf dkz sum_n' f^(ij)_n(kz) w_ij(kz d)``

with ``w = cos`` for the diagonal and ``sin`` for the (1,3) entry, and the
``n = 0`` term weighted by 1/2.  The multipole sum is taken inside the
integral (pointwise in ``kz``) and truncated adaptively per node.

Numerical points that need care:

* ``kz = k`` (``q = 0``).  For a perfect conductor the ``n = 0`` entry
  ``G_11`` behaves like ``1/(x ln x)`` with ``x = |kz - k|/k``; only the sum of
  the two sides is integrable.  A window ``x < x0`` is integrated with both
  sides paired and ``x = exp(-1/u)``; the part ``x < x_min`` is added in
  closed form from the small-argument expansion.
* For ``n >= 1`` the individual polarization terms grow like ``1/q^2``
  (perfect conductor) or ``1/q^4`` (dielectric) and cancel.  The combinations
  used below are rearranged algebraically so that no large terms cancel.
* Bessel and Hankel values are carried as logarithms along the order ladder,
  so very high orders and large imaginary arguments do not overflow.
"""

import threading
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import specfun
from .constants import C, EULER_GAMMA
from .errors import BesselRangeError, ConvergenceError, SingularityError
from .geometry_gf import Geometry, decompose, vacuum_gf_axial
from .materials import PerfectConductor, Vacuum, permittivity
from .quadrature import (
    QuadratureSpec,
    evanescent_cutoff,
    integrate_adaptive,
    integrate_oscillatory,
)

TAIL_MARGIN = 1.15
X_MIN = 1e-200
KINDS = ("cos", "cos", "cos", "sin")
_CHUNK_ELEMS = 3_000_000


@dataclass(frozen=True)
class TMatrixBlock:
    t_mm: complex
    t_nn: complex
    t_mn: complex


def _q_of(k, kz):
    """``q = sqrt(k^2 - kz^2)`` on the outgoing branch (``+i|q|`` for kz > k)."""
    kz = np.asarray(kz, dtype=float)
    prod = (k - kz) * (k + kz)
    return np.where(prod >= 0, np.sqrt(np.abs(prod)) + 0j, 1j * np.sqrt(np.abs(prod)))


# ---------------------------------------------------------------------------
# T-matrix elements (pointwise reference implementation)


def tmatrix_pec(n, k, kz, R):
    """T-matrix of a perfectly conducting cylinder for order ``n`` and ``kz``."""
    if R <= 0:
        raise ValueError("R must be positive")
    q = complex(_q_of(k, kz))
    if q == 0:
        raise SingularityError("q = 0 (kz = k) is a singular point of the T-matrix")
    z = q * R
    nmax = max(abs(n) + 2, specfun.N_MAX_DEFAULT)
    j = specfun.bessel_j(n, z, nmax)
    h = specfun.hankel1(n, z, nmax)
    dj = specfun.cyl_derivative("J", n, z, nmax)
    dh = specfun.cyl_derivative("H1", n, z, nmax)
    return TMatrixBlock(t_mm=complex(-dj / dh), t_nn=complex(-j / h), t_mn=0j)


def _j_logderiv(n, z):
    """``J_n'(z) / (z J_n(z))`` from exponentially scaled values (no overflow)."""
    jn = special.jve(n, z)
    if n == 0:
        ratio = -special.jve(1, z) / jn
    else:
        ratio = special.jve(n - 1, z) / jn - n / z
    if not np.isfinite(ratio):
        raise BesselRangeError(f"J_{n}'/J_{n} not representable at z = {z}")
    return ratio / z


def tmatrix_dielectric(n, k, kz, R, eps):
    """T-matrix of a homogeneous dielectric cylinder of permittivity ``eps``."""
    if R <= 0:
        raise ValueError("R must be positive")
    if eps == 0:
        raise ValueError("eps must be non-zero")
    eps = complex(eps)
    q = complex(_q_of(k, kz))
    if q == 0:
        raise SingularityError("q = 0 (kz = k) is a singular point of the T-matrix")
    qe = np.sqrt(eps * k * k - kz * kz + 0j)
    se = np.sqrt(eps)
    z, ze = q * R, qe * R
    nmax = max(abs(n) + 2, specfun.N_MAX_DEFAULT)
    J = lambda m, x: specfun.bessel_j(m, x, nmax)
    H = lambda m, x: specfun.hankel1(m, x, nmax)
    dJ = lambda m, x: specfun.cyl_derivative("J", m, x, nmax)
    dH = lambda m, x: specfun.cyl_derivative("H1", m, x, nmax)
    a = _j_logderiv(abs(n), ze)
    hh = dH(n, z) / (z * H(n, z))
    jj = dJ(n, z) / (z * J(n, z))
    d1, d2 = a - hh / eps, a - hh
    d3, d4 = a - jj / eps, a - jj
    K = n * kz / (se * k * R**2) * (1 / qe**2 - 1 / q**2)
    den = d1 * d2 - K * K
    if den == 0:
        raise SingularityError("resonance pole of the dielectric T-matrix")
    jh = J(n, z) / H(n, z)
    t_mm = -jh * (d1 * d4 - K * K) / den
    t_nn = -jh * (d2 * d3 - K * K) / den
    t_mn = 2j / (np.pi * se * (z * H(n, z)) ** 2) * K / den
    return TMatrixBlock(complex(t_mm), complex(t_nn), complex(t_mn))


# ---------------------------------------------------------------------------
# multipole-summed kz envelope


@dataclass(frozen=True)
class KzIntegrandContext:
    """Everything the ``kz`` envelope depends on besides ``kz`` itself."""

    k: float
    R: float
    r: float
    material: object
    eps: complex | None = None

    def __post_init__(self):
        if not (self.r > self.R > 0):
            raise ValueError("need r > R > 0")


def _ratio_down(L, n):
    """``f_{n-1}/f_n`` from a log ladder, with ``f_{-1} = -f_1``."""
    out = np.empty((n.size, L.shape[1]), dtype=complex)
    out[1:] = np.exp(L[n[1:] - 1] - L[n[1:]])
    out[0] = -np.exp(L[1] - L[0])
    return out


def _series_terms(ctx, kz, q, N):
    """Multipole terms ``n = 0..N`` of the four envelopes at nodes ``(kz, q)``.

    Returns an array of shape ``(N + 1, m, 4)`` holding, for entries
    (11, 22, 33, 13), the summands including the ``i/(2 pi)`` prefactor and
    the weight 1/2 of ``n = 0``.
    """
    k, R, r = ctx.k, ctx.R, ctx.r
    z = q * R
    zo = q * r
    n = np.arange(N + 1)
    nn = n[:, None].astype(float)
    LHo = specfun.log_hankel1_ladder(zo, max(N, 1))[: N + 1]
    LHi = specfun.log_hankel1_ladder(z, max(N, 1))[: N + 1]
    LJi = specfun.log_bessel_j_ladder(z, N + 1)
    go = _ratio_down(LHo, n)                          # H_{n-1}/H_n at qr
    gH = _ratio_down(LHi, n) / z                      # H_{n-1}/(z H_n) at qR
    fJ = np.exp(LJi[1 : N + 2] - LJi[: N + 1]) / z    # J_{n+1}/(z J_n) at qR
    with np.errstate(under="ignore"):
        S = np.exp(2 * LHo + LJi[: N + 1] - LHi)      # H_n(qr)^2 J_n(qR)/H_n(qR)
    c = kz / k
    s = (q / k) ** 2
    cc = c * c
    qck = q * c / k

    ho_tnn = np.empty_like(S)      # Ho^2 T_nn
    ho_tmm = np.empty_like(S)      # Ho^2 T_mm
    ho_c = np.zeros_like(S)        # Ho^2 (T_mm - 2c T_mn + c^2 T_nn)
    ho_e = np.empty_like(S)        # Ho^2 (T_mn - c T_nn)
    ho_f = np.empty_like(S)        # Ho^2 (T_mm - c T_mn)

    if isinstance(ctx.material, PerfectConductor):
        dH = z * gH - nn / z
        dJ = nn / z - z * fJ
        ho_tnn[:] = -S
        ho_tmm[:] = -S * dJ / dH
        ho_c[:] = -S * (s * nn / z - z * fJ + cc * z * gH) / dH
        ho_e[:] = c * S
        ho_f[:] = ho_tmm
        g2p = go**2                                   # factors multiplying T_nn, T_mm
        gqp = qck * go
        sfac = s
        t11_3 = cc * g2p * ho_tnn
        t22_3 = g2p * ho_tmm
        t33 = sfac * ho_tnn
        t13_2 = gqp * ho_tnn
    else:
        eps = ctx.eps
        qe = np.sqrt(eps * k * k - kz * kz + 0j)
        ze = qe * R
        LJe = specfun.log_bessel_j_ladder(ze, N + 1)
        fJe = np.exp(LJe[1 : N + 2] - LJe[: N + 1]) / ze
        Pe = nn / ze**2
        a = Pe - fJe
        ie = 1.0 / eps
        al1, al2 = a - gH * ie, a - gH
        al3, al4 = a + fJ * ie, a + fJ
        beta = gH + fJ
        t11_3 = np.empty_like(S)
        t22_3 = np.empty_like(S)
        t33 = np.empty_like(S)
        t13_2 = np.empty_like(S)

        # n = 0: no polarization mixing
        tnn0 = -S[0] * al3[0] / al1[0]
        tmm0 = -S[0] * al4[0] / al2[0]
        ho_tnn[0], ho_tmm[0] = tnn0, tmm0
        ho_e[0] = -c * tnn0
        ho_f[0] = tmm0
        t11_3[0] = cc * go[0] ** 2 * tnn0
        t22_3[0] = go[0] ** 2 * tmm0
        t33[0] = s * tnn0
        t13_2[0] = qck * go[0] * tnn0

        if N >= 1:
            m = slice(1, None)
            nm = nn[m]
            ip = z**2 / nm                            # 1/P with P = n/(qR)^2
            sP = nm / (k * R) ** 2                    # s P, exactly
            PeP = (z / ze) ** 2                       # P_eps / P
            Pm, a_, b_ = Pe[m], a[m], beta[m]
            a1, a2, a3, a4 = al1[m], al2[m], al3[m], al4[m]
            Dh = sP * ie + a1 + a2 * ie + 2 * cc * Pm * ie + (a1 * a2 - cc * Pm**2 * ie) * ip
            if np.any(Dh == 0):
                raise SingularityError("resonance pole of the dielectric T-matrix")
            B = (-(sP**2) * ie + sP * (-a_ * (1 - ie) + (b_ - 2 * cc * Pm) * ie)
                 + a1 * a4 + cc * a2 * a3 + 2 * cc * ie * b_ * Pm
                 - cc * (1 + cc) * ie * Pm**2)
            Eh = (c * ie * sP + c * (a_ * (1 - ie) - 2 * s * Pm * ie)
                  + (c * ie * b_ * Pm + c * a2 * a3 - c * cc * ie * Pm**2) * ip)
            Fh = (-sP * ie - a_ * (1 - ie) + s * b_ * ie
                  + (a1 * a4 + cc * ie * Pm * (b_ - Pm)) * ip)
            NN = (a2 * ip + 1) * (a3 * ip - ie) - cc * ie * (PeP - 1) ** 2
            NM = (a1 * ip + ie) * (a4 * ip - 1) - cc * ie * (PeP - 1) ** 2
            Sm = S[m]
            P = nm / z**2
            ho_c[m] = -Sm * B * ip / Dh
            ho_e[m] = Sm * Eh / Dh
            ho_f[m] = -Sm * Fh / Dh
            t11_3[m] = -Sm * cc * (go[m] ** 2 * P) * NN / Dh
            t22_3[m] = -Sm * (go[m] ** 2 * P) * NM / Dh
            t33[m] = -Sm * sP * NN / Dh
            t13_2[m] = -Sm * qck * (go[m] * P) * NN / Dh

    nzo = nn / zo
    out = np.empty((N + 1, q.size, 4), dtype=complex)
    out[..., 0] = nzo**2 * ho_c + 2 * nzo * c * go * ho_e + t11_3
    out[..., 1] = nzo**2 * ho_c - 2 * nzo * go * ho_f + t22_3
    out[..., 2] = t33
    out[..., 3] = (nn / (k * r)) * ho_e + t13_2
    out[0] *= 0.5
    out *= 1j / (2 * np.pi)
    return out


class CylinderEnvelope:
    """Multipole-summed ``kz`` envelope of the four tensor entries.

    Call with arrays ``kz`` and ``q`` (``q`` supplied separately so that
    points arbitrarily close to ``kz = k`` keep full relative accuracy).
    Values are memoized per node, so repeated integrations at the same
    ``(k, R, h, material)`` (e.g. a sweep over ``d``) reuse them.
    """

    def __init__(self, ctx, spec):
        self.ctx = ctx
        self.spec = spec
        self.n_cap = spec.n_max_cap
        self.tail_tol = spec.rel_tol / 10
        self.worst_tail = 0.0
        self.n_used = 0
        self._cache = {}
        self._lock = threading.Lock()

    def _n_estimate(self, q):
        ctx = self.ctx
        decay = 2 * np.log(ctx.r / ctx.R)
        extra = np.ceil(np.log(10.0 / self.spec.rel_tol) / decay)
        n0 = np.ceil(np.abs(q) * ctx.r) + extra + 4
        return np.minimum(n0, self.n_cap).astype(int)

    def _evaluate(self, kz, q):
        m = kz.size
        out = np.empty((m, 4), dtype=complex)
        n0 = self._n_estimate(q)
        nb = np.minimum(2 ** np.ceil(np.log2(np.maximum(n0, 8))).astype(int), self.n_cap)
        todo = np.arange(m)
        while todo.size:
            again = []
            for N in np.unique(nb[todo]):
                idx = todo[nb[todo] == N]
                step = max(1, _CHUNK_ELEMS // (N + 2))
                for s0 in range(0, idx.size, step):
                    sub = idx[s0 : s0 + step]
                    terms = _series_terms(self.ctx, kz[sub], q[sub], int(N))
                    tot = terms.sum(axis=0)
                    scale = np.abs(tot).max(axis=1)
                    last = np.abs(terms[-2:]).max(axis=(0, 2)) if N >= 1 else np.abs(terms[-1]).max(axis=1)
                    with np.errstate(invalid="ignore", divide="ignore"):
                        ratio = np.where(scale > 0, last / scale, 0.0)
                    ok = (ratio <= self.tail_tol) | (N >= self.n_cap)
                    out[sub] = tot
                    self.n_used = max(self.n_used, int(N))
                    if np.any(~ok):
                        bad = sub[~ok]
                        nb[bad] = np.minimum(2 * N, self.n_cap)
                        again.append(bad)
                    capped = (N >= self.n_cap) & (ratio > self.tail_tol)
                    if np.any(capped):
                        self.worst_tail = max(self.worst_tail, float(ratio[capped].max()))
            todo = np.concatenate(again) if again else np.array([], dtype=int)
        return out

    def __call__(self, kz, q):
        kz = np.asarray(kz, dtype=float)
        q = np.asarray(q, dtype=complex)
        keys = list(zip(kz.tolist(), q.real.tolist(), q.imag.tolist()))
        with self._lock:
            miss = [i for i, key in enumerate(keys) if key not in self._cache]
            if miss:
                mi = np.array(miss)
                vals = self._evaluate(kz[mi], q[mi])
                for j, i in enumerate(miss):
                    self._cache[keys[i]] = vals[j]
            return np.array([self._cache[key] for key in keys]).reshape(kz.size, 4)


def _context(k, R, h, material):
    eps = None
    if not isinstance(material, (PerfectConductor, Vacuum)):
        eps = complex(permittivity(material, k * C))
    return KzIntegrandContext(k=k, R=R, r=R + h, material=material, eps=eps)


def _pec_remainder(k, R, r, d, x_min):
    """Closed-form ``G_11`` contribution of ``|kz - k| < k x_min`` (perfect conductor)."""
    beta = 2j / np.pi
    lam = np.log(k * R / 2) + EULER_GAMMA + 0.5 * np.log(2 * x_min)
    return (-1j / (4 * np.pi) * np.cos(k * d) * 4 / (np.pi**2 * k * r**2)
            / beta * np.log(beta * lam / (1 + beta * lam)))


def _trig_rows(kz, d):
    ph = kz * d
    return np.stack([np.cos(ph), np.cos(ph), np.cos(ph), np.sin(ph)], axis=-1)


def gt_integrate(k, R, h, d, material, spec=None, envelope=None, margin=TAIL_MARGIN,
                 x_min=X_MIN, strict=True):
    """Entries ``(G11, G22, G33, G13)`` of the scattering Green's function.

    ``d`` may be negative (only ``G13`` changes sign).  Returns the entries
    and a diagnostics dictionary.
    """
    spec = spec or QuadratureSpec()
    if isinstance(material, Vacuum) or R == 0:
        return np.zeros(4, dtype=complex), {"trivial": True}
    if R < 0 or h <= 0 or k <= 0:
        raise ValueError("need R > 0, h > 0, k > 0")
    env = envelope or CylinderEnvelope(_context(k, R, h, material), spec)
    r = R + h
    ad = abs(d)
    sgn = np.array([1, 1, 1, np.sign(d) if d != 0 else 0.0])
    kz_max = evanescent_cutoff(k, h, spec, margin=margin)
    x0 = 0.5
    if ad > 0:
        x0 = min(x0, 1.0 / (k * ad))
    x0 = min(x0, (kz_max - k) / k)
    diag = {"kz_max": kz_max, "x0": x0, "results": []}

    # paired window around kz = k, x = exp(-1/u)
    u_lo, u_hi = 1.0 / np.log(1.0 / x_min), 1.0 / np.log(1.0 / x0)

    def window(u):
        x = np.exp(-1.0 / u)
        jac = k * x / u**2
        kzl, kzr = k * (1 - x), k * (1 + x)
        ql = k * np.sqrt(x * (2 - x)) + 0j
        qr = 1j * k * np.sqrt(x * (2 + x))
        vals = env(np.concatenate([kzl, kzr]), np.concatenate([ql, qr]))
        m = u.size
        wl, wr = _trig_rows(kzl, ad), _trig_rows(kzr, ad)
        return jac[:, None] * (vals[:m] * wl + vals[m:] * wr)

    res_w = integrate_adaptive(window, u_lo, u_hi, spec)
    diag["results"].append(("window", res_w))
    total = np.array(res_w.value, dtype=complex)

    def regular(kz):
        return env(kz, _q_of(k, kz))

    # propagating side, with break points accumulating toward kz = k
    a_hi = k * (1 - x0)
    pts = [k * (1 - x0 * 2.0**j) for j in range(1, 60) if x0 * 2.0**j < 0.5]
    res_l = integrate_oscillatory(regular, ad, KINDS, 0.0, a_hi, spec, points=pts)
    diag["results"].append(("propagating", res_l))
    total = total + res_l.value

    b_lo = k * (1 + x0)
    if kz_max > b_lo:
        kap = [f / h for f in (0.05, 0.25, 1.0, 4.0)]
        pts = [k * (1 + x0 * 2.0**j) for j in range(1, 60) if x0 * 2.0**j < 0.5]
        pts += [np.hypot(k, kp) for kp in kap]
        res_r = integrate_oscillatory(regular, ad, KINDS, b_lo, kz_max, spec, points=pts)
        diag["results"].append(("evanescent", res_r))
        total = total + res_r.value

    if isinstance(material, PerfectConductor):
        total[0] += _pec_remainder(k, R, r, ad, x_min)

    total = total * sgn
    diag["n_used"] = env.n_used
    diag["worst_tail"] = env.worst_tail
    converged = all(res.converged for _, res in diag["results"]) and env.worst_tail == 0.0
    diag["converged"] = converged
    if strict and not converged:
        raise ConvergenceError(
            "cylinder Green's function did not converge within the panel/multipole caps "
            f"(n_max_cap={spec.n_max_cap}, worst tail ratio {env.worst_tail:.3g})",
            partial=_assemble(total),
        )
    return total, diag


def _assemble(e):
    g11, g22, g33, g13 = e
    return np.array([[g11, 0, g13], [0, g22, 0], [-g13, 0, g33]], dtype=complex)


def gt_elements(k, geom, material, spec=None, envelope=None, strict=True):
    """Scattering part ``G_T`` of the cylinder Green's function (3x3, basis r, phi, z)."""
    if geom.R <= 0 and not isinstance(material, Vacuum):
        raise ValueError("gt_elements needs a cylinder (R > 0)")
    e, _ = gt_integrate(k, geom.R, geom.h, geom.d, material, spec, envelope, strict=strict)
    return _assemble(e)


def trace_ggdag(k, geom, material, spec=None, envelope=None, strict=True):
    """``Tr(G G^dagger)`` split into vacuum, scattering and cross parts."""
    if geom.d <= 0:
        raise ValueError("trace_ggdag needs d > 0")
    G0 = vacuum_gf_axial(k, geom.d)
    if isinstance(material, Vacuum) or geom.R == 0:
        GT = np.zeros((3, 3), dtype=complex)
        out = decompose(G0, GT)
        out.diagnostics = {"trivial": True}
        return out
    e, diag = gt_integrate(k, geom.R, geom.h, geom.d, material, spec, envelope, strict=strict)
    out = decompose(G0, _assemble(e))
    out.diagnostics = diag
    return out


def trace_ggdag_sweep(k, R, h, ds, material, spec=None):
    """:func:`trace_ggdag` over several separations, sharing envelope values."""
    spec = spec or QuadratureSpec()
    env = None
    if R > 0 and not isinstance(material, Vacuum):
        env = CylinderEnvelope(_context(k, R, h, material), spec)
    return [trace_ggdag(k, Geometry(R, h, d), material, spec, envelope=env) for d in ds]


def trace_im_g_onepoint(k, R, h, material, spec=None):
    """``Tr Im G(r, r)`` at distance ``h`` from the cylinder surface.

    The free-space part contributes ``k/(2 pi)``.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    base = k / (2 * np.pi)
    if R == 0 or isinstance(material, Vacuum):
        return base
    e, _ = gt_integrate(k, R, h, 0.0, material, spec)
    return base + float(np.imag(e[0] + e[1] + e[2]))
