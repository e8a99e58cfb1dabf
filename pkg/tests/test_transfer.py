import math

import numpy as np
import pytest

from cylheat import analytic as an
from cylheat.constants import C, HBAR, K_B
from cylheat.errors import RegimeError
from cylheat.geometry_gf import Geometry
from cylheat.materials import GOLD, PEC, SIC, VACUUM, Particle, resonance_frequency, susceptibility_cm
from cylheat.quadrature import QuadratureSpec, integrate_semi_infinite
from cylheat.transfer import (
    emission_material_integral,
    equivalent_vacuum_distance,
    gold_decay_length,
    heat_transfer_exact,
    total_emission,
    transfer_emission_ratio,
    vacuum_ht_approx,
)

P = (Particle(SIC), Particle(SIC))
W0 = resonance_frequency(SIC)
LAM = 2 * np.pi * C / W0


def _vacuum_reference(T1, d):
    """Independent plain semi-infinite integral with the closed-form trace."""
    pref = 32 * np.pi * HBAR / C**4 * (3 / (4 * np.pi)) ** 2

    def f(w):
        w = np.maximum(np.asarray(w, float), 1e-300)
        k = w / C
        x = k * d
        tr = (1 + 1 / x**2 + 3 / x**4) / (8 * np.pi**2 * d**2)
        n = 1 / np.expm1(np.minimum(700, HBAR * w / (K_B * T1)))
        return pref * w**5 * n * np.imag(susceptibility_cm(SIC, w)) ** 2 * tr

    spec = QuadratureSpec(rel_tol=1e-10, abs_tol=1e-300)
    return integrate_semi_infinite(f, 0.0, spec, scale=K_B * T1 / HBAR,
                                   points=an.spectral_points([SIC])).value


def test_vacuum_exact():
    g = Geometry(0.0, 1e-7, 1e-6)
    r = heat_transfer_exact(300, g, VACUUM, P)
    assert r.h_per_vol == pytest.approx(_vacuum_reference(300, 1e-6), rel=1e-6)
    assert r.diagnostics["converged"] and r.diagnostics["tail_ok"]
    approx = an.ht_approx_peak(300, g, P, "vacuum")
    assert abs(r.h_per_vol / approx - 1) < 0.05


def test_per_volume_normalization():
    g = Geometry(0.0, 1e-7, 1e-6)
    a = heat_transfer_exact(300, g, VACUUM, P).h_per_vol
    b = heat_transfer_exact(300, g, VACUUM, (Particle(SIC, 2e-8), Particle(SIC, 2e-8))).h_per_vol
    assert a == b


def test_pec_log_ratio():
    R = h = 1e-7
    H3 = heat_transfer_exact(300, Geometry(R, h, 1e-3), PEC, P, workers=4).h_per_vol
    H4 = heat_transfer_exact(300, Geometry(R, h, 1e-4), PEC, P, workers=4).h_per_vol
    pred = (an.ht_approx_peak(300, Geometry(R, h, 1e-3), P)
            / an.ht_approx_peak(300, Geometry(R, h, 1e-4), P))
    assert abs((H3 / H4) / pred - 1) < 0.10


@pytest.mark.parametrize("scatterer,R", [(PEC, 1e-7), (PEC, 1e-8), ("plate", 0.0)])
def test_decomposition_additivity(scatterer, R):
    if scatterer == "plate":
        r = heat_transfer_exact(300, Geometry(1e-7, 1e-7, 1e-5), PEC, P, scenario="plate")
    else:
        r = heat_transfer_exact(300, Geometry(R, 1e-7, 1e-5), scatterer, P, workers=4)
    s = sum(r.decomposition.values())
    assert abs(s - r.h_per_vol) <= 1e-10 * abs(r.h_per_vol)
    assert r.h_per_vol > 0


def test_spectrum_peak():
    r = heat_transfer_exact(300, Geometry(1e-7, 1e-7, 1e-3), PEC, P, workers=4)
    w, s = np.array(r.spectrum).T
    # the spectrum nodes are too sparse to locate the maximum; refine with the
    # trace interpolated from the nodes, which is smooth across the line
    order = np.argsort(w)
    w, s = w[order], s[order]
    from cylheat.transfer import ht_weight
    W = ht_weight(300, P)
    tr = s / W(w)
    fine = np.linspace(0.99 * W0, 1.01 * W0, 20001)
    spec_f = W(fine) * np.exp(np.interp(np.log(fine), np.log(w), np.log(tr)))
    assert abs(fine[np.argmax(spec_f)] / W0 - 1) < 0.005


def test_gold_beats_pec_small_r():
    g = Geometry(1e-8, 1e-7, 1e-6)
    au = heat_transfer_exact(300, g, GOLD, P, workers=4).h_per_vol
    pec = heat_transfer_exact(300, g, PEC, P, workers=4).h_per_vol
    assert au > pec


def test_vacuum_far_field_monotone():
    ds = np.geomspace(LAM, 1.0, 60)
    H = [vacuum_ht_approx(300, d, P) for d in ds]
    assert np.all(np.diff(H) < 0)


def test_errors():
    with pytest.raises(ValueError):
        heat_transfer_exact(0, Geometry(0, 1e-7, 1e-6), VACUUM, P)
    with pytest.raises(ValueError):
        heat_transfer_exact(300, Geometry(0, 1e-7, 0.0), VACUUM, P)
    with pytest.raises(ValueError):
        transfer_emission_ratio(300, Geometry(1e-8, 1e-7, 1e-3), PEC, P, 0.0)


# ---------------------------------------------------------------------------
# emission


def test_isolated_emission():
    H = total_emission(300, 0.0, 1e-7, VACUUM, P[0])
    ref = 8 * HBAR / C**2 * (3 / (4 * np.pi))
    spec = QuadratureSpec(rel_tol=1e-10, abs_tol=1e-300)

    def f(w):
        w = np.maximum(np.asarray(w, float), 1e-300)
        return w**3 / np.expm1(np.minimum(700, HBAR * w / (K_B * 300))) * np.imag(susceptibility_cm(SIC, w)) * w / (2 * np.pi * C)

    ref *= integrate_semi_infinite(f, 0.0, spec, scale=K_B * 300 / HBAR,
                                   points=an.spectral_points([SIC])).value
    assert H == pytest.approx(ref, rel=1e-6)


def test_cylinder_enhances_emission():
    iso = total_emission(300, 0.0, 1e-7, VACUUM, P[0])
    cyl = total_emission(300, 1e-7, 1e-7, PEC, P[0], workers=4)
    assert cyl > iso


@pytest.mark.parametrize("scatterer,R", [(VACUUM, 0.0), (PEC, 1e-7), (PEC, 1e-8)])
def test_factorized_emission(scatterer, R):
    full = total_emission(300, R, 1e-7, scatterer, P[0], workers=4)
    fac = total_emission(300, R, 1e-7, scatterer, P[0], factorized=True)
    assert abs(fac / full - 1) < 0.05


def test_emission_material_integral_positive():
    assert emission_material_integral(300, P[0]) > 0


def test_ratio_scaling_and_vacuum():
    g = Geometry(1e-8, 1e-7, 1e-3)
    a = transfer_emission_ratio(300, g, PEC, P, 1e-8)
    b = transfer_emission_ratio(300, g, PEC, P, 2e-8)
    assert b / a == pytest.approx(8.0, rel=1e-12)
    hs = np.geomspace(1e-8, 1e-6, 9)
    cyl = max(transfer_emission_ratio(300, Geometry(1e-8, h, 1e-3), PEC, P, 0.1 * h) for h in hs)
    plate = max(transfer_emission_ratio(300, Geometry(1e-8, h, 1e-3), PEC, P, 0.1 * h,
                                        scenario="plate") for h in hs)
    vac = transfer_emission_ratio(300, Geometry(0.0, 1e-7, 1e-3), VACUUM, P, 2e-7)
    assert vac < 1e-2 * cyl
    assert plate < 1e-2 * cyl


# ---------------------------------------------------------------------------
# derived distances


def test_equivalent_distance_inverse():
    h = vacuum_ht_approx(300, 1e-5, P)
    assert equivalent_vacuum_distance(h, 300, P) == pytest.approx(1e-5, rel=1e-5)


def test_minsk_goettingen():
    H = an.ht_approx_peak(300, Geometry(1e-7, 1e-7, 1.2e6), P)
    d = equivalent_vacuum_distance(H, 300, P)
    assert abs(d / 1.5e-6 - 1) <= 0.25


def test_equivalent_vs_dzoom():
    R = h = 1e-7
    d_far = 1e-1
    H = an.ht_approx_peak(300, Geometry(R, h, d_far), P)
    d = equivalent_vacuum_distance(H, 300, P)
    z = an.d_zoom(LAM, R, h).d_zoom
    # equating the near-field vacuum trace 3/(8 pi^2 k^4 d^6) with the log
    # term gives d = d_zoom (3 L^2 / 8 pi^2)^(1/6)
    L = math.log1p(math.sqrt(2) * math.sqrt(d_far**2 + 4 * h * h) / ((2 * math.pi / LAM) * R * R))
    pred = z * (3 * L**2 / (8 * math.pi**2)) ** (1 / 6)
    assert 0.5 < d / pred < 2
    assert 0.5 < d / z < 2


def test_equivalent_distance_range():
    with pytest.raises(RegimeError):
        equivalent_vacuum_distance(1e60, 300, P)
    with pytest.raises(ValueError):
        equivalent_vacuum_distance(-1.0, 300, P)


@pytest.mark.extended
def test_gold_decay_increasing():
    l1, _ = gold_decay_length(1e-7, 1e-7, 300, P, workers=8)
    l2, _ = gold_decay_length(1e-6, 1e-7, 300, P, workers=8)
    assert l2 > l1
