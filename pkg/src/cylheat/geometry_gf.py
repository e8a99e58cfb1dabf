"""Free-space dyadic Green's function and the perfectly conducting plate.

Tensors are 3x3 complex arrays in the local basis ``(r, phi, z)`` at the
particle positions.  For the plate, ``r`` is the outward normal (the metal
fills the half-space on the ``-r`` side) and the two particles sit at height
``h`` above it, separated by ``d`` along ``z``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import SingularityError

PLATE_REFLECTION = np.diag([1.0, -1.0, -1.0])


@dataclass(frozen=True)
class Geometry:
    """Cylinder radius ``R`` (0: no cylinder), particle height ``h`` above the
    surface and axial particle separation ``d``, all in meters."""

    R: float
    h: float
    d: float

    def __post_init__(self):
        if self.R < 0 or self.h <= 0 or self.d < 0:
            raise ValueError("need R >= 0, h > 0, d >= 0")

    @property
    def r(self):
        return self.R + self.h


@dataclass
class TraceDecomposition:
    """``Tr(G G^dagger) = vac + scat + cross`` with ``cross = 2 Re Tr(G0 GT^dagger)``."""

    total: float
    vac: float
    scat: float
    cross: float
    gt: np.ndarray = field(default=None, repr=False)
    diagnostics: dict = field(default_factory=dict, repr=False)


def decompose(G0, GT):
    vac = trace_gg(G0)
    scat = trace_gg(GT)
    cross = 2 * float(np.real(np.trace(G0 @ GT.conj().T)))
    return TraceDecomposition(total=vac + scat + cross, vac=vac, scat=scat, cross=cross, gt=GT)


def free_gf(k, s):
    """Free-space dyadic ``G0(s)`` for a separation vector ``s`` (``s != 0``).

    ``G0 = e^{iks}/(4 pi s) [(1 + i/ks - 1/ks^2) I + (-1 - 3i/ks + 3/ks^2) ss]``
    """
    s = np.asarray(s, dtype=float)
    L = float(np.linalg.norm(s))
    if L == 0:
        raise SingularityError("free Green's function at coincident points")
    x = k * L
    u = s / L
    pref = np.exp(1j * x) / (4 * np.pi * L)
    a = 1 + 1j / x - 1 / x**2
    b = -1 - 3j / x + 3 / x**2
    return pref * (a * np.eye(3) + b * np.outer(u, u))


def vacuum_gf_axial(k, d):
    """Free-space dyadic for a separation ``d`` along the ``z`` axis.

    Returns a diagonal tensor with equal transverse entries.
    """
    if k <= 0:
        raise ValueError("k must be positive")
    if d <= 0:
        raise SingularityError("coincident points: use the one-point Im G instead")
    x = k * d
    pref = np.exp(1j * x) / (4 * np.pi * d)
    gt = pref * (1 + 1j / x - 1 / x**2)
    gl = pref * (-2j / x + 2 / x**2)
    return np.diag([gt, gt, gl]).astype(complex)


def trace_gg(G):
    """``Tr(G G^dagger)``, the squared Frobenius norm."""
    return float(np.sum(np.abs(G) ** 2))


def vacuum_trace(k, d):
    """Closed form ``Tr(G0 G0^dagger) = (1 + 1/x^2 + 3/x^4) / (8 pi^2 d^2)``, ``x = kd``."""
    if k <= 0 or d <= 0:
        raise ValueError("k and d must be positive")
    x = k * d
    return (1 + 1 / x**2 + 3 / x**4) / (8 * np.pi**2 * d**2)


def plate_image_gf(k, h, d):
    """Scattered part of the plate Green's function (image dipole)."""
    if h <= 0:
        raise ValueError("h must be positive")
    return free_gf(k, [2 * h, 0.0, -d]) @ PLATE_REFLECTION


def plate_gf(k, h, d):
    """Full Green's function above a perfectly conducting plate."""
    if k <= 0 or h <= 0 or d <= 0:
        raise ValueError("k, h and d must be positive")
    return vacuum_gf_axial(k, d) + plate_image_gf(k, h, d)


def plate_trace(k, h, d):
    return trace_gg(plate_gf(k, h, d))


def decompose_plate(k, h, d):
    """Plate trace split into vacuum, image and cross contributions."""
    if k <= 0 or h <= 0 or d <= 0:
        raise ValueError("k, h and d must be positive")
    return decompose(vacuum_gf_axial(k, d), plate_image_gf(k, h, d))


def plate_trace_farfield(k, h, d):
    """Far-field plate trace ``1/(8 pi^2 d^2) + 1/(8 pi^2 (d^2 + 4 h^2))``."""
    return 1 / (8 * np.pi**2 * d**2) + 1 / (8 * np.pi**2 * (d**2 + 4 * h**2))


def plate_trace_im_onepoint(k, h):
    """``Tr Im G(r, r)`` at height ``h`` above the plate."""
    return k / (2 * np.pi) + float(np.trace(plate_image_gf(k, h, 0.0)).imag)
