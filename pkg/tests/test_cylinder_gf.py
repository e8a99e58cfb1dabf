import itertools

import mpmath as mp
import numpy as np
import pytest

from cylheat import cylinder_gf as cg
from cylheat import specfun
from cylheat.constants import EULER_GAMMA
from cylheat.errors import SingularityError
from cylheat.geometry_gf import Geometry, decompose, vacuum_gf_axial, vacuum_trace
from cylheat.materials import PEC, SIC, VACUUM, Drude, resonance_frequency
from cylheat.quadrature import QuadratureSpec

K0 = resonance_frequency(SIC) / 299792458.0
# stand-in material; the permittivity is injected through the context
_BIG = Drude(omega_p=1.0, omega_tau=1.0)


def _eps_envelope(eps, R, h, k=K0, spec=None):
    ctx = cg.KzIntegrandContext(k=k, R=R, r=R + h, material=_BIG, eps=eps)
    return cg.CylinderEnvelope(ctx, spec or QuadratureSpec())


# ---------------------------------------------------------------------------
# T-matrix


def test_pec_unimodular():
    k, R = 1e6, 1e-7
    worst = 0.0
    for n in range(0, 30):
        for kz in np.linspace(0, 0.999 * k, 25):
            t = cg.tmatrix_pec(n, k, kz, R)
            worst = max(worst, abs(abs(1 + 2 * t.t_nn) - 1), abs(abs(1 + 2 * t.t_mm) - 1))
            assert t.t_mn == 0
    assert worst <= 1e-10


def test_pec_unimodular_independent_oracle():
    # 1 - 2J/H = -conj(H)/H with H = J + iY from mpmath series
    k, R = 1.0, 3.0
    for n, kz in ((0, 0.2), (3, 0.5), (7, 0.9)):
        z = np.sqrt(k * k - kz * kz) * R
        Hm = mp.besselj(n, z) + 1j * mp.bessely(n, z)
        ref = complex(-mp.conj(Hm) / Hm)
        assert abs(1 + 2 * cg.tmatrix_pec(n, k, kz, R).t_nn - ref) < 1e-12


def test_pec_small_argument_n0():
    k, R = 1.0, 1.0
    for delta in (1e-6, 1e-10, 1e-16):
        kz = k * (1 - delta)
        qR = np.sqrt((k - kz) * (k + kz)) * R
        t = cg.tmatrix_pec(0, k, kz, R).t_nn
        ref = -1 / (1 + 2j / np.pi * (np.log(qR / 2) + EULER_GAMMA))
        assert abs(t / ref - 1) < qR**2 * abs(np.log(qR)) + 1e-12
        # decays only logarithmically
        assert 0.5 / abs(np.log(qR)) < abs(t) < 2 / abs(np.log(qR))


def test_pec_imaginary_q():
    # -J_0(ix)/H_0(ix) = -(i pi/2) I_0(x)/K_0(x): purely imaginary, Im t < 0
    k, R = 1.0, 1.0
    for kz in (1.001, 1.5, 4.0, 30.0):
        t = cg.tmatrix_pec(0, k, kz, R).t_nn
        x = np.sqrt(kz * kz - k * k) * R
        ref = complex(-mp.besseli(0, x) / (2 / (1j * mp.pi) * mp.besselk(0, x)))
        assert abs(t - ref) < 1e-12 * abs(ref)
        assert abs(t.real) <= 1e-14 * abs(t)
        assert t.imag < 0


def test_singular_node():
    with pytest.raises(SingularityError):
        cg.tmatrix_pec(0, 1.0, 1.0, 1.0)
    with pytest.raises(SingularityError):
        cg.tmatrix_dielectric(1, 1.0, 1.0, 1.0, 4.0)


def test_dielectric_trivial_cases():
    k, R = 1e6, 1e-7
    for n in range(4):
        for kz in (0.3e6, 2e6):
            t = cg.tmatrix_dielectric(n, k, kz, R, 1.0)
            assert max(abs(t.t_mm), abs(t.t_nn), abs(t.t_mn)) < 1e-13
    t = cg.tmatrix_dielectric(0, k, 0.4e6, R, 7.0 + 0.3j)
    assert t.t_mn == 0
    # n = 0 reduces to the single-polarization ratios
    q = np.sqrt(k * k - 0.4e6**2)
    qe = np.sqrt((7.0 + 0.3j) * k * k - 0.4e6**2)
    J, H = specfun.bessel_j, specfun.hankel1
    a = -J(1, qe * R) / (qe * R * J(0, qe * R))
    ref_nn = -J(0, q * R) / H(0, q * R) * (
        (a + J(1, q * R) / (q * R * J(0, q * R)) / (7.0 + 0.3j))
        / (a + H(1, q * R) / (q * R * H(0, q * R)) / (7.0 + 0.3j)))
    assert abs(t.t_nn / ref_nn - 1) < 1e-12


def test_dielectric_lossless_unimodular():
    k, R, eps = 1e6, 2e-7, 9.0
    for n in (0, 1, 4):
        for kz in (0.1e6, 0.7e6):
            t = cg.tmatrix_dielectric(n, k, kz, R, eps)
            S = np.eye(2) + 2 * np.array([[t.t_mm, t.t_mn], [t.t_mn, t.t_nn]])
            if n == 0:
                assert abs(abs(1 + 2 * t.t_nn) - 1) < 1e-10
                assert abs(abs(1 + 2 * t.t_mm) - 1) < 1e-10
            # the 2x2 polarization-coupled scattering matrix is unitary
            assert np.allclose(S.conj().T @ S, np.eye(2), atol=1e-10)


def _kq(qR, frac, R=1.0):
    # k and kz with sqrt(k^2 - kz^2) R = qR and kz = frac k
    k = qR / (R * np.sqrt(1 - frac**2))
    return k, frac * k


def test_dielectric_pec_limit_tmatrix():
    eps = 1e8 * (1 + 1j)
    for qR in np.geomspace(0.1, 10, 25):
        for frac in (0.0, 0.5, 0.9):
            k, kz = _kq(qR, frac)
            d = cg.tmatrix_dielectric(0, k, kz, 1.0, eps).t_nn
            p = cg.tmatrix_pec(0, k, kz, 1.0).t_nn
            # relative to the scattering amplitude 1 + 2t (|1 + 2t| = 1); t itself
            # vanishes at the zeros of J_0(qR), so compare it only away from them
            assert abs((1 + 2 * d) / (1 + 2 * p) - 1) < 1e-3
            if abs(p) > 0.15:
                assert abs(d / p - 1) < 1e-3


def _tnn_mp(n, k, kz, R, eps):
    J, H = mp.besselj, mp.hankel1
    dJ = lambda m, z: (J(m - 1, z) - J(m + 1, z)) / 2
    dH = lambda m, z: (H(m - 1, z) - H(m + 1, z)) / 2
    q, se, qe = mp.sqrt(k**2 - kz**2), mp.sqrt(eps), mp.sqrt(eps * k**2 - kz**2)
    a = dJ(n, qe * R) / (qe * R * J(n, qe * R))
    hH = dH(n, q * R) / (q * R * H(n, q * R))
    jJ = dJ(n, q * R) / (q * R * J(n, q * R))
    D1, D2, D3 = a - hH / eps, a - hH, a - jJ / eps
    K = n * kz / (se * k * R**2) * (1 / qe**2 - 1 / q**2)
    return -J(n, q * R) / H(n, q * R) * (D2 * D3 - K**2) / (D1 * D2 - K**2)


@pytest.mark.parametrize("n,qR,frac", [(1, 0.1, 0.0), (8, 0.1, 0.9), (3, 10.0, 0.9)])
def test_dielectric_higher_orders(n, qR, frac):
    # higher orders carry a finite-conductivity correction ~ |eps|^-1/2; the
    # evaluation itself agrees with a high-precision one
    k, kz = _kq(qR, frac)
    p = cg.tmatrix_pec(n, k, kz, 1.0).t_nn
    dev = []
    for E in (1e8, 1e10, 1e12):
        t = cg.tmatrix_dielectric(n, k, kz, 1.0, E * (1 + 1j)).t_nn
        with mp.workdps(50):
            ref = complex(_tnn_mp(n, mp.mpf(k), mp.mpf(kz), 1, mp.mpc(E, E)))
        assert abs(t / ref - 1) < 1e-12
        dev.append(abs(t / p - 1))
    assert 9 < dev[0] / dev[1] < 11 and 9 < dev[1] / dev[2] < 11


# ---------------------------------------------------------------------------
# multipole terms against a direct high-precision evaluation


def _naive_terms(n, k, kz, q, R, r, eps):
    J = mp.besselj
    H = mp.hankel1
    dJ = lambda m, z: (J(m - 1, z) - J(m + 1, z)) / 2
    dH = lambda m, z: (H(m - 1, z) - H(m + 1, z)) / 2
    if eps is None:
        Tmm = -dJ(n, q * R) / dH(n, q * R)
        Tnn = -J(n, q * R) / H(n, q * R)
        Tmn = 0
    else:
        se = mp.sqrt(eps)
        qe = mp.sqrt(eps * k**2 - kz**2)
        a = dJ(n, qe * R) / (qe * R * J(n, qe * R))
        hH = dH(n, q * R) / (q * R * H(n, q * R))
        jJ = dJ(n, q * R) / (q * R * J(n, q * R))
        D1, D2, D3, D4 = a - hH / eps, a - hH, a - jJ / eps, a - jJ
        K = n * kz / (se * k * R**2) * (1 / qe**2 - 1 / q**2)
        D = D1 * D2 - K**2
        JH = J(n, q * R) / H(n, q * R)
        Tmm = -JH * (D1 * D4 - K**2) / D
        Tnn = -JH * (D2 * D3 - K**2) / D
        Tmn = 2j / (mp.pi * se * (q * R * H(n, q * R)) ** 2) * K / D
    zo = q * r
    Ho, dHo, c = H(n, zo), dH(n, zo), kz / k
    g11 = (n / zo) ** 2 * Ho**2 * Tmm + 2 * c * (n / zo) * Ho * dHo * Tmn + c**2 * dHo**2 * Tnn
    g22 = dHo**2 * Tmm + 2 * c * (n / zo) * Ho * dHo * Tmn + c**2 * (n / zo) ** 2 * Ho**2 * Tnn
    g33 = (q / k) ** 2 * Ho**2 * Tnn
    g13 = (q / k) * Ho * ((n / zo) * Ho * Tmn + c * dHo * Tnn)
    f = mp.mpc(0, 1) / (2 * mp.pi) * (mp.mpf(1) / 2 if n == 0 else 1)
    return [complex(f * g) for g in (g11, g22, g33, g13)]


@pytest.mark.parametrize("eps", [None, 10 + 0.5j, -5800 + 1350j, 1e8 * (1 + 1j)])
def test_series_terms_oracle(eps):
    k, R, r = 5.8e5, 1e-7, 2e-7
    ctx = cg.KzIntegrandContext(k=k, R=R, r=r, material=PEC if eps is None else _BIG, eps=eps)
    worst = 0.0
    with mp.workdps(120):
        for side, x in ((-1, 0.3), (-1, 1e-5), (-1, 1e-12), (1, 1e-8), (1, 0.5), (1, 60.0)):
            xm = mp.mpf(x)
            kz = k * (1 + side * x)
            if side < 0:
                qm, qn = k * mp.sqrt(xm * (2 - xm)), k * np.sqrt(x * (2 - x)) + 0j
            else:
                qm, qn = 1j * k * mp.sqrt(xm * (2 + xm)), 1j * k * np.sqrt(x * (2 + x))
            T = cg._series_terms(ctx, np.array([kz]), np.array([qn]), 5)[:, 0, :]
            for n in range(6):
                ref = _naive_terms(n, mp.mpf(k), k * (1 + side * xm), qm, mp.mpf(R), mp.mpf(r),
                                   None if eps is None else mp.mpc(eps))
                sc = max(abs(v) for v in ref)
                worst = max(worst, max(abs(T[n, j] - ref[j]) for j in range(4)) / sc)
    assert worst < 1e-9


# ---------------------------------------------------------------------------
# Green's function and trace


def test_structure_and_d0():
    G = cg.gt_elements(K0, Geometry(1e-7, 1e-7, 0.0), PEC)
    assert G[0, 2] == 0 and G[2, 0] == 0
    G = cg.gt_elements(K0, Geometry(1e-7, 1e-7, 3e-6), PEC)
    for i, j in ((0, 1), (1, 0), (1, 2), (2, 1)):
        assert G[i, j] == 0
    assert G[2, 0] == -G[0, 2]
    assert G[0, 2] != 0


def test_parity_in_d():
    e_plus, _ = cg.gt_integrate(K0, 1e-7, 1e-7, 2e-6, PEC)
    e_minus, _ = cg.gt_integrate(K0, 1e-7, 1e-7, -2e-6, PEC)
    assert np.allclose(e_plus[:3], e_minus[:3], rtol=1e-14, atol=0)
    assert e_plus[3] == pytest.approx(-e_minus[3], rel=1e-14)


def test_vacuum_material():
    t = cg.trace_ggdag(K0, Geometry(1e-7, 1e-7, 1e-5), VACUUM)
    assert t.scat == 0 and t.cross == 0
    assert t.total == pytest.approx(vacuum_trace(K0, 1e-5), rel=1e-15)


def test_decomposition_and_positivity():
    for R, h, d in itertools.product((1e-8, 1e-6), (1e-7, 1e-5), (1e-7, 1e-5, 1e-3)):
        t = cg.trace_ggdag(K0, Geometry(R, h, d), PEC)
        assert t.total > 0
        assert t.total == pytest.approx(t.vac + t.scat + t.cross, rel=1e-14)
        assert t.vac == pytest.approx(vacuum_trace(K0, d), rel=1e-12)
        ref = decompose(vacuum_gf_axial(K0, d), t.gt)
        assert ref.total == pytest.approx(t.total, rel=1e-14)


def test_approximation_in_cylinder_regime():
    from cylheat.analytic import trace_approx

    t = cg.trace_ggdag(K0, Geometry(1e-7, 1e-7, 1e-5), PEC).total
    assert abs(t / trace_approx(K0, 1e-7, 1e-7, 1e-5) - 1) < 0.25
    t = cg.trace_ggdag(K0, Geometry(1e-7, 1e-7, 1e-3), PEC).total
    assert abs(t / trace_approx(K0, 1e-7, 1e-7, 1e-3) - 1) < 0.15


def test_cutoff_and_multipole_doubling():
    spec = QuadratureSpec()
    spec2 = spec.with_(n_max_cap=2 * spec.n_max_cap)
    worst = 0.0
    for R, h, d in itertools.product((1e-8, 1e-7, 1e-6), (1e-7, 1e-6, 1e-5), (1e-6, 1e-5, 1e-4)):
        a = cg.trace_ggdag(K0, Geometry(R, h, d), PEC, spec).total
        e, diag = cg.gt_integrate(K0, R, h, d, PEC, spec2, margin=2 * cg.TAIL_MARGIN)
        assert diag["converged"]
        b = decompose(vacuum_gf_axial(K0, d), cg._assemble(e)).total
        worst = max(worst, abs(b / a - 1))
    assert worst < spec.rel_tol


def test_tolerance_halving():
    for R, h, d in ((1e-8, 1e-7, 1e-4), (1e-6, 1e-7, 1e-6)):
        a = cg.trace_ggdag(K0, Geometry(R, h, d), PEC, QuadratureSpec(rel_tol=1e-6)).total
        b = cg.trace_ggdag(K0, Geometry(R, h, d), PEC, QuadratureSpec(rel_tol=5e-7)).total
        assert abs(a / b - 1) < 1e-6


def test_window_floor_insensitive():
    # moving the analytic remainder boundary changes nothing at the tolerance level
    e1, _ = cg.gt_integrate(K0, 1e-7, 1e-7, 1e-5, PEC, x_min=cg.X_MIN)
    e2, _ = cg.gt_integrate(K0, 1e-7, 1e-7, 1e-5, PEC, x_min=1e-100)
    assert np.allclose(e1, e2, rtol=1e-7, atol=0)


def test_sweep_matches_pointwise():
    ds = [1e-6, 1e-5, 1e-4]
    sw = cg.trace_ggdag_sweep(K0, 1e-7, 1e-7, ds, PEC)
    for d, t in zip(ds, sw):
        ref = cg.trace_ggdag(K0, Geometry(1e-7, 1e-7, d), PEC).total
        assert t.total == pytest.approx(ref, rel=1e-9)


SPOTS = [(1e-8, 1e-7, 1e-6), (1e-7, 1e-7, 1e-5), (1e-6, 1e-7, 1e-4), (1e-7, 1e-6, 1e-6),
         (1e-6, 1e-6, 1e-5)]


@pytest.mark.parametrize("R,h,d", SPOTS)
def test_dielectric_pec_limit_trace(R, h, d):
    p = cg.trace_ggdag(K0, Geometry(R, h, d), PEC).total
    env = _eps_envelope(1e8 * (1 + 1j), R, h)
    e = cg.trace_ggdag(K0, Geometry(R, h, d), _BIG, envelope=env).total
    assert abs(e / p - 1) <= 1e-2


@pytest.mark.parametrize("R,h,d", [(1e-8, 1e-7, 1e-4), (1e-7, 1e-6, 1e-4)])
def test_dielectric_deviation_scales_as_inverse_sqrt_eps(R, h, d):
    # thin wires far apart: the finite-conductivity correction is ~ |eps|^-1/2
    p = cg.trace_ggdag(K0, Geometry(R, h, d), PEC).total
    dev = []
    for E in (1e8, 1e10, 1e12):
        env = _eps_envelope(E * (1 + 1j), R, h)
        dev.append(cg.trace_ggdag(K0, Geometry(R, h, d), _BIG, envelope=env).total / p - 1)
    assert 8.5 < dev[0] / dev[1] < 11.5
    assert 9.5 < dev[1] / dev[2] < 10.5


def test_dielectric_sic_cylinder_runs():
    t = cg.trace_ggdag(K0, Geometry(1e-7, 1e-7, 1e-5), SIC)
    assert t.total > 0 and np.isfinite(t.total)


def test_onepoint_im():
    base = K0 / (2 * np.pi)
    assert cg.trace_im_g_onepoint(K0, 1e-7, 1e-7, VACUUM) == base
    assert cg.trace_im_g_onepoint(K0, 0.0, 1e-7, PEC) == base
    far = cg.trace_im_g_onepoint(K0, 1e-7, 1e-2, PEC)
    assert abs(far / base - 1) < 0.01
    assert cg.trace_im_g_onepoint(K0, 1e-7, 1e-7, PEC) > base
