"""Dielectric response models and the Clausius-Mossotti factor of small spheres."""

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import NoFinitePermittivityError, RegimeError


@dataclass(frozen=True)
class PerfectConductor:
    """Ideal metal; has no finite permittivity."""

    name: str = "pec"


@dataclass(frozen=True)
class Vacuum:
    name: str = "vacuum"


@dataclass(frozen=True)
class Lorentz:
    """Single-oscillator (LO/TO) polar crystal model.

    ``eps(w) = eps_inf (w^2 - w_LO^2 + i w gamma) / (w^2 - w_TO^2 + i w gamma)``
    """

    eps_inf: float
    omega_lo: float
    omega_to: float
    gamma: float
    name: str = "lorentz"

    def __post_init__(self):
        if not (self.omega_lo > self.omega_to > 0):
            raise ValueError("Lorentz model needs omega_lo > omega_to > 0")
        if not self.gamma > 0:
            raise ValueError("Lorentz model needs gamma > 0")
        if not self.eps_inf >= 1:
            raise ValueError("Lorentz model needs eps_inf >= 1")


@dataclass(frozen=True)
class Drude:
    """Free-electron metal, ``eps(w) = 1 - w_p^2 / (w (w + i w_tau))``."""

    omega_p: float
    omega_tau: float
    name: str = "drude"

    def __post_init__(self):
        if not self.omega_p > 0:
            raise ValueError("Drude model needs omega_p > 0")
        if not self.omega_tau >= 0:
            raise ValueError("Drude model needs omega_tau >= 0")


@dataclass(frozen=True)
class Particle:
    """Small spherical dipole particle.

    Only the material enters per-volume results; the radius is carried for the
    few quantities (emission ratio) that genuinely depend on it.
    """

    material: object
    radius: float | None = None

    def __post_init__(self):
        if isinstance(self.material, PerfectConductor):
            raise ValueError("dipole particles must be dielectric, not perfect conductors")


SIC = Lorentz(eps_inf=6.7, omega_lo=1.82e14, omega_to=1.48e14, gamma=8.93e11, name="sic")
GOLD = Drude(omega_p=1.37e16, omega_tau=4.06e13, name="gold")
PEC = PerfectConductor()
VACUUM = Vacuum()


def permittivity(m, omega):
    """Relative permittivity of ``m`` at angular frequency ``omega`` (rad/s)."""
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise ValueError("omega must be positive")
    if isinstance(m, PerfectConductor):
        raise NoFinitePermittivityError("a perfect conductor has no finite permittivity")
    if isinstance(m, Vacuum):
        eps = np.ones_like(w, dtype=complex)
    elif isinstance(m, Lorentz):
        num = w * w - m.omega_lo**2 + 1j * w * m.gamma
        den = w * w - m.omega_to**2 + 1j * w * m.gamma
        eps = m.eps_inf * num / den
    elif isinstance(m, Drude):
        eps = 1.0 - m.omega_p**2 / (w * (w + 1j * m.omega_tau))
    else:
        raise TypeError(f"unknown material model {m!r}")
    return eps[()] if eps.ndim == 0 else eps


def susceptibility_cm(m, omega):
    """Clausius-Mossotti factor ``(eps - 1) / (eps + 2)``.

    The dipole polarizability of a sphere of radius ``a`` is ``a**3`` times this.
    """
    eps = permittivity(m, omega)
    return (eps - 1.0) / (eps + 2.0)


def resonance_frequency(m, rtol=1e-6):
    """Frequency maximizing ``(Im chi)^2`` for a resonant (Lorentz) model.

    A logarithmic scan between ``w_TO/2`` and ``2 w_LO`` (augmented by the
    lossless estimate where ``Re eps = -2``) brackets the peak, which is then
    refined by golden-section search.
    """
    if not isinstance(m, Lorentz):
        raise RegimeError("resonance_frequency needs a Lorentz (resonant) model")

    def neg(w):
        return -np.imag(susceptibility_cm(m, w)) ** 2

    w_est = np.sqrt((m.eps_inf * m.omega_lo**2 + 2 * m.omega_to**2) / (m.eps_inf + 2))
    grid = np.geomspace(0.5 * m.omega_to, 2.0 * m.omega_lo, 4001)
    # dense local sampling around the lossless estimate for very sharp peaks
    width = max(m.gamma, 1e-12 * w_est)
    local = w_est + width * np.linspace(-50, 50, 2001)
    grid = np.unique(np.concatenate([grid, local[local > 0]]))
    vals = neg(grid)
    i = int(np.clip(np.argmin(vals), 1, grid.size - 2))
    a, b, c = grid[i - 1], grid[i], grid[i + 1]
    res = optimize.minimize_scalar(neg, bracket=(a, b, c), method="golden",
                                   options={"xtol": rtol * 0.1})
    return float(res.x)
