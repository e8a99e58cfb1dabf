"""Cylindrical Bessel and Hankel functions of integer order and complex argument.

Point values are backed by the AMOS routines in :mod:`scipy.special` (scaled
variants, so that large imaginary arguments neither overflow nor underflow).
For the multipole sums of the cylinder Green's function we additionally need
whole order ladders ``n = 0..N`` at arguments where the individual values
overflow double precision (``H_n(z)`` for ``n >> |z|``) or underflow
(``J_n(z)``).  Those are returned as complex logarithms built from
three-term-recurrence ratios:

* ``H_n`` by forward recurrence (dominant solution, stable),
* ``J_n`` by backward (Miller-type) recurrence started some orders above the
  top of the ladder and anchored at the order of largest ``|J_n|``.
"""

import numpy as np
from scipy import special

from .errors import BesselRangeError, SingularityError

N_MAX_DEFAULT = 512
MAX_ABS_ARG = 1.0e5
_J_EXTRA = 64


def _check_order(n, n_max):
    n = np.asarray(n)
    if not np.issubdtype(n.dtype, np.integer):
        if np.any(n != np.round(n)):
            raise BesselRangeError("only integer orders are supported")
        n = n.astype(np.int64)
    if np.any(np.abs(n) > n_max):
        raise BesselRangeError(f"order {np.max(np.abs(n))} exceeds n_max = {n_max}")
    return n


def _check_arg(z):
    z = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(z)):
        raise BesselRangeError("non-finite argument")
    if np.any(np.abs(z) > MAX_ABS_ARG):
        raise BesselRangeError(f"|z| exceeds the supported bound {MAX_ABS_ARG:g}")
    return z


def _finite(value, what):
    if not np.all(np.isfinite(value)):
        raise BesselRangeError(f"{what} is not representable in double precision")
    return value[()] if isinstance(value, np.ndarray) and value.ndim == 0 else value


def bessel_j(n, z, n_max=N_MAX_DEFAULT):
    """Bessel function of the first kind ``J_n(z)``.

    Negative orders use ``J_{-n} = (-1)^n J_n``.
    """
    n = _check_order(n, n_max)
    z = _check_arg(z)
    sign = np.where((n < 0) & (np.abs(n) % 2 == 1), -1.0, 1.0)
    with np.errstate(invalid="ignore", over="ignore"):   # overflow is reported below
        value = sign * special.jv(np.abs(n), z)
    return _finite(value, "J_n(z)")


def hankel1(n, z, n_max=N_MAX_DEFAULT):
    """Hankel function of the first kind ``H_n^(1)(z) = J_n(z) + i Y_n(z)``.

    Raises
    ------
    SingularityError
        If ``z == 0``.
    """
    n = _check_order(n, n_max)
    z = _check_arg(z)
    if np.any(z == 0):
        raise SingularityError("H_n^(1) is singular at z = 0")
    sign = np.where((n < 0) & (np.abs(n) % 2 == 1), -1.0, 1.0)
    value = sign * special.hankel1(np.abs(n), z)
    return _finite(value, "H_n^(1)(z)")


def cyl_derivative(kind, n, z, n_max=N_MAX_DEFAULT):
    """Derivative ``f_n'(z)`` for ``kind`` in ``{"J", "H1"}``.

    Uses ``f_n' = f_{n-1} - (n/z) f_n`` and ``f_0' = -f_1``.
    """
    if kind == "J":
        f = bessel_j
    elif kind == "H1":
        f = hankel1
    else:
        raise ValueError(f"unknown function family {kind!r}")
    n = _check_order(n, n_max - 1)
    z = _check_arg(z)
    if kind == "H1" and np.any(z == 0):
        raise SingularityError("H_n^(1)' is singular at z = 0")
    if np.all(n == 0):
        return -f(1, z, n_max)
    if np.any(n == 0):
        nn, zz = np.broadcast_arrays(n, z)
        out = np.empty(nn.shape, dtype=complex)
        zero = nn == 0
        out[zero] = -f(1, zz[zero], n_max)
        out[~zero] = cyl_derivative(kind, nn[~zero], zz[~zero], n_max)
        return out
    if kind == "J" and np.any(z == 0):
        # J_n'(0) = 1/2 for n = +-1, else 0
        nn, zz = np.broadcast_arrays(n, z)
        out = np.zeros(nn.shape, dtype=complex)
        at0 = zz == 0
        out[at0 & (nn == 1)] = 0.5
        out[at0 & (nn == -1)] = -0.5
        rest = ~at0
        if np.any(rest):
            out[rest] = cyl_derivative(kind, nn[rest], zz[rest], n_max)
        return out[()] if out.ndim == 0 else out
    return f(n - 1, z, n_max) - n / z * f(n, z, n_max)


# ---------------------------------------------------------------------------
# order ladders in log form


def log_hankel1_ladder(z, nmax):
    """Complex logarithms ``log H_n^(1)(z)`` for ``n = 0..nmax``.

    Parameters
    ----------
    z : array_like of complex, shape (m,)
        Arguments with ``Im z >= 0`` and ``z != 0``.
    nmax : int
        Highest order (at least 1).

    Returns
    -------
    ndarray, shape (nmax + 1, m)
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(z == 0):
        raise SingularityError("H_n^(1) ladder requested at z = 0")
    nmax = max(int(nmax), 1)
    h0 = special.hankel1e(0, z)
    h1 = special.hankel1e(1, z)
    out = np.empty((nmax + 1, z.size), dtype=complex)
    out[0] = np.log(h0) + 1j * z
    rho = h1 / h0
    logs = np.empty((nmax, z.size), dtype=complex)
    logs[0] = np.log(rho)
    for m in range(1, nmax):
        rho = 2.0 * m / z - 1.0 / rho
        logs[m] = np.log(rho)
    out[1:] = out[0] + np.cumsum(logs, axis=0)
    return out


def log_bessel_j_ladder(z, nmax):
    """Complex logarithms ``log J_n(z)`` for ``n = 0..nmax``.

    Exact zeros of ``J_n`` (real ``z`` only) map to a large negative real
    part instead of ``-inf`` so that ratios stay finite.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    nmax = max(int(nmax), 1)
    m = z.size
    scale = np.abs(z.imag)
    # start a few dozen orders above nmax so that an approximate seed ratio
    # is damped away by the (stable) backward recurrence
    top = nmax + 1 + _J_EXTRA
    with np.errstate(all="ignore"):
        jt = special.jve(top, z)
        jt1 = special.jve(top - 1, z)
        rho = jt / jt1
    bad = ~np.isfinite(rho) | (jt1 == 0) | (jt == 0)
    # underflow: uniform (Debye-type) estimate of J_{n+1}/J_n
    debye = z / (top + np.sqrt(top * top - z * z + 0j))
    rho = np.where(bad, debye, rho)
    ratios = np.empty((nmax + 1, m), dtype=complex)  # ratios[k] = J_k / J_{k-1}
    ratios[0] = 1.0
    with np.errstate(all="ignore"):
        for k in range(top - 1, 0, -1):
            # rho holds J_{k+1}/J_k; J_k/J_{k-1} = 1 / (2k/z - J_{k+1}/J_k)
            rho = 1.0 / (2.0 * k / z - rho)
            if k <= nmax:
                ratios[k] = rho
        tiny = np.abs(ratios) < 1e-300
        ratios[tiny] = 1e-300
        logs = np.log(ratios)
        logs[0] = 0.0
    cum = np.cumsum(logs, axis=0)  # cum[n] = log(J_n / J_0) formally

    # anchor at the candidate order with the largest |J_n|: n ~ |z| for real
    # arguments (no zeros there), n = 0 or 1 when the argument is far off axis
    na = np.clip(np.ceil(np.abs(z)).astype(np.int64), 1, nmax)
    cand = np.stack([np.zeros_like(na), np.ones_like(na), na - 1, na])
    vals = special.jve(cand, z[None, :])
    pick = np.argmax(np.abs(vals), axis=0)
    cols = np.arange(m)
    anchor = cand[pick, cols]
    aval = vals[pick, cols]
    with np.errstate(divide="ignore"):
        log_anchor = np.log(aval) + scale
    out = log_anchor + cum - cum[anchor, cols]
    # all candidates underflowed; cannot happen for |z| within the ladder range
    dead = ~np.isfinite(log_anchor)
    if np.any(dead):
        out[:, dead] = -745.0 + 0j
    return out


def log_derivative_ratio(logf, z):
    """``f_n'(z) / f_n(z)`` for ``n = 0..N`` from a log ladder of ``f``.

    Orders ``n >= 1`` use ``f_{n-1}/f_n - n/z``; order 0 uses ``-f_1/f_0``.
    """
    nmax = logf.shape[0] - 1
    n = np.arange(nmax + 1)[:, None]
    out = np.empty_like(logf)
    with np.errstate(over="ignore"):
        out[1:] = np.exp(logf[:-1] - logf[1:]) - n[1:] / z
        out[0] = -np.exp(logf[1] - logf[0])
    return out
