"""Radiative heat transfer between point dipoles near an infinite cylinder.

The package evaluates the fluctuational-electrodynamics heat transfer between
two small particles placed next to an infinitely long cylinder (perfect
conductor or dielectric), next to a perfectly conducting plate, or in vacuum.
It provides both the numerically exact Green's-function route and the
logarithmic closed-form approximation.
"""

__version__ = "0.1.0"

from .errors import (
    BesselRangeError,
    ConvergenceError,
    NoFinitePermittivityError,
    PoisonedIntegrandError,
    RegimeError,
    SingularityError,
)
from .materials import (
    GOLD,
    SIC,
    VACUUM,
    PEC,
    Drude,
    Lorentz,
    Particle,
    PerfectConductor,
    Vacuum,
    permittivity,
    resonance_frequency,
    susceptibility_cm,
)
from .quadrature import QuadratureSpec, IntegralResult
from .geometry_gf import (
    Geometry,
    TraceDecomposition,
    plate_gf,
    plate_trace_farfield,
    vacuum_gf_axial,
    vacuum_trace,
)
from .cylinder_gf import gt_elements, trace_ggdag, trace_im_g_onepoint
from .analytic import (
    Regime,
    classify_regime,
    d_zoom,
    ht_approx_peak,
    ht_integrand_approx,
    nearfield_equivalence_condition,
    trace_approx,
)
from .transfer import (
    TransferResult,
    equivalent_vacuum_distance,
    gold_decay_length,
    heat_transfer_exact,
    total_emission,
    transfer_emission_ratio,
)

__all__ = [
    "BesselRangeError",
    "ConvergenceError",
    "NoFinitePermittivityError",
    "PoisonedIntegrandError",
    "RegimeError",
    "SingularityError",
    "GOLD",
    "SIC",
    "VACUUM",
    "PEC",
    "Drude",
    "Lorentz",
    "Particle",
    "PerfectConductor",
    "Vacuum",
    "permittivity",
    "resonance_frequency",
    "susceptibility_cm",
    "QuadratureSpec",
    "IntegralResult",
    "Geometry",
    "vacuum_gf_axial",
    "vacuum_trace",
    "plate_gf",
    "plate_trace_farfield",
    "gt_elements",
    "trace_ggdag",
    "trace_im_g_onepoint",
    "TraceDecomposition",
    "Regime",
    "classify_regime",
    "d_zoom",
    "ht_approx_peak",
    "ht_integrand_approx",
    "nearfield_equivalence_condition",
    "trace_approx",
    "TransferResult",
    "equivalent_vacuum_distance",
    "gold_decay_length",
    "heat_transfer_exact",
    "total_emission",
    "transfer_emission_ratio",
]
