import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridsim.noise import (
    CantileverConfig,
    MetalFilmConfig,
    NoiseScenario,
    RateBudget,
    SkinDepthWarning,
    bias_height_noise,
    dephasing_rate_background,
    dephasing_rate_surface,
    g_eff_coupling,
    heating_rate_bias,
    heating_rate_surface,
    ladder_matrix_element_sq,
    max_thermal_occupation,
    min_detectable_force,
    rabi_from_drive,
    rate_budget,
    rate_sweep,
    s_b_parallel,
    s_b_perp,
    skin_depth,
    spin_flip_rate,
    spin_precession_force,
    write_rate_csv,
    zero_point_amplitude,
)
from hybridsim.physcore import MU_B, RB87
from hybridsim.trap import atom_zero_point
from hybridsim.zeeman import AUX, UP, HyperfineState
from oracles import spin_matrices

FILM = MetalFilmConfig()
D = 375e-9
WL = 2 * np.pi * 1.1e6
WT = 2 * np.pi * 124e3

# Values from hand arithmetic with CODATA 2018 constants typed in directly
S_PAR_375 = 1.2124211768856703e-22
DEPH_SURF_375 = 0.01865376337907149
SPINFLIP_22_21_375 = 0.14913248261046091
HEAT_SURF_375 = 0.000124331065187379
Z_QM = 1.6614595987564414e-13
M_EFF = 2.76372e-16


def test_cantilever_mass_and_zero_point():
    c = CantileverConfig()
    assert c.m_eff == pytest.approx(M_EFF, rel=1e-12)
    assert zero_point_amplitude(c) == pytest.approx(Z_QM, rel=1e-8)
    assert zero_point_amplitude(c) == pytest.approx(1.7e-13, rel=0.05)
    assert c.kappa / (2 * np.pi) == pytest.approx(1.8, rel=0.02)
    heavy = CantileverConfig(si_density=4 * 2330, magnet_density=4 * 8900)
    assert zero_point_amplitude(heavy) == pytest.approx(zero_point_amplitude(c) / 2, rel=1e-12)
    fast = CantileverConfig(omega_c=1e15)
    assert zero_point_amplitude(fast) < 1e-16


def test_min_detectable_force():
    c = CantileverConfig(T=10e-3, Q=1e5)
    F = min_detectable_force(c, 4.0)
    assert F == pytest.approx(1.9584206461696118e-19, rel=1e-8)
    assert F == pytest.approx(1.9e-19, rel=0.1)
    assert min_detectable_force(c, 16.0) == pytest.approx(2 * F, rel=1e-12)
    assert min_detectable_force(CantileverConfig(T=0.0), 4.0) == 0.0
    with pytest.raises(ValueError):
        min_detectable_force(c, 0.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-3, 1e3))
def test_force_noise_density_is_white(b):
    c = CantileverConfig(T=10e-3, Q=1e5)
    assert min_detectable_force(c, b) / np.sqrt(b) == pytest.approx(min_detectable_force(c, 1.0), rel=1e-12)


def test_spin_precession_force():
    assert spin_precession_force(0.0) == 0.0
    assert spin_precession_force(5.8e4) == pytest.approx(1.9e-19, rel=0.02)
    assert spin_precession_force(2 * 5.8e4) == pytest.approx(2 * spin_precession_force(5.8e4), rel=1e-15)
    with pytest.raises(ValueError):
        spin_precession_force(-1.0)


def test_max_thermal_occupation():
    n = max_thermal_occupation(2 * np.pi * 10, 1e5, 2 * np.pi * 1e6)
    assert n == pytest.approx(0.5, rel=1e-12)
    assert max_thermal_occupation(2 * np.pi * 10, 2e5, 2 * np.pi * 1e6) == pytest.approx(4 * n)
    assert max_thermal_occupation(2 * np.pi * 10, 1e5, 2 * np.pi * 2e6) == pytest.approx(n / 4)


def test_rabi_and_coupling_consistency():
    G = 1.09e4
    z = zero_point_amplitude(CantileverConfig())
    assert rabi_from_drive(0.0, G) == 0.0
    assert rabi_from_drive(z, G) / (2 * np.pi) == pytest.approx(g_eff_coupling(G, z), rel=1e-14)
    assert rabi_from_drive(100 * z, G) == pytest.approx(100 * rabi_from_drive(z, G), rel=1e-14)
    with pytest.raises(ValueError):
        rabi_from_drive(-1e-9, G)


def test_g_eff_back_solved_gradient():
    assert g_eff_coupling(1.09e4, 1.66e-13) == pytest.approx(12.7, rel=0.05)
    assert g_eff_coupling(1.09e4, 1.66e-13) == pytest.approx(12.662402801423475, rel=1e-8)
    assert g_eff_coupling(0.0, 1.66e-13) == 0.0


def test_field_noise_spectra():
    assert s_b_parallel(FILM, D) == pytest.approx(S_PAR_375, rel=1e-8)
    assert s_b_perp(FILM, D) == pytest.approx(2 * S_PAR_375, rel=1e-8)
    assert s_b_parallel(MetalFilmConfig(conductivity_sigma=0.0), D) == 0.0
    d = 100 * FILM.thickness_h
    assert s_b_parallel(FILM, 2 * d) / s_b_parallel(FILM, d) == pytest.approx(0.25, rel=0.01)
    dbl = MetalFilmConfig(conductivity_sigma=2 * FILM.conductivity_sigma)
    assert s_b_perp(dbl, D) == pytest.approx(2 * s_b_perp(FILM, D), rel=1e-14)
    with pytest.raises(ValueError):
        s_b_parallel(FILM, 0.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-8, 1e-5), st.floats(1e5, 1e8), st.floats(1e-9, 1e-7), st.floats(0.0, 400.0))
def test_perp_is_twice_parallel(d, sigma, h, T):
    f = MetalFilmConfig(sigma, h, T)
    assert s_b_perp(f, d) == 2 * s_b_parallel(f, d)


def test_length_scaling_of_field_noise():
    f10 = MetalFilmConfig(FILM.conductivity_sigma, 10 * FILM.thickness_h, FILM.T)
    ratio = s_b_parallel(f10, 10 * D) / s_b_parallel(FILM, D)
    assert ratio == pytest.approx(0.1, rel=1e-12)  # h / (d (d + h)) scales as 1/L


def test_background_dephasing():
    r = dephasing_rate_background(0.1e-9, MU_B / 2)
    assert r == pytest.approx(0.7, rel=0.05)
    assert dephasing_rate_background(0.0) == 0.0
    assert dephasing_rate_background(0.2e-9, MU_B) == pytest.approx(4 * r, rel=1e-14)


def test_surface_dephasing():
    r = dephasing_rate_surface(FILM, D)
    assert r == pytest.approx(DEPH_SURF_375, rel=1e-8)
    assert r < 1.0
    assert dephasing_rate_surface(MetalFilmConfig(conductivity_sigma=0.0), D) == 0.0
    assert dephasing_rate_surface(FILM, D, MU_B) == pytest.approx(4 * r, rel=1e-14)


def test_ladder_elements_against_matrix_oracle():
    for F in (1, 2):
        Fx, Fy, _ = spin_matrices(F)
        ms = list(range(F, -F - 1, -1))
        for i, mi in enumerate(ms):
            total = 0.0
            for j, mf in enumerate(ms):
                ref = abs(Fx[j, i]) ** 2 + abs(Fy[j, i]) ** 2
                got = ladder_matrix_element_sq(HyperfineState(F, mi), HyperfineState(F, mf))
                assert got == pytest.approx(ref, abs=1e-14)
                total += abs(Fx[j, i]) ** 2
            # sum rule: sum_m' |<m'|F_x|m>|^2 = <m|F_x^2|m>
            assert total == pytest.approx((Fx @ Fx)[i, i], rel=1e-14)


def test_spin_flip_rate():
    r = spin_flip_rate(AUX, UP, FILM, D, WL)
    assert r == pytest.approx(SPINFLIP_22_21_375, rel=1e-8)
    assert spin_flip_rate(UP, UP, FILM, D, WL) == 0.0
    assert spin_flip_rate(AUX, HyperfineState(2, 0), FILM, D, WL) == 0.0
    assert spin_flip_rate(AUX, HyperfineState(1, 1), FILM, D, WL) == 0.0
    s20 = HyperfineState(2, 0)
    ratio = spin_flip_rate(AUX, UP, FILM, D, WL) / spin_flip_rate(s20, UP, FILM, D, WL)
    # |<2,1|F_-|2,2>|^2 / |<2,1|F_+|2,0>|^2 = 4 / 6
    assert ratio == pytest.approx(4 / 6, rel=1e-14)


def test_spin_flip_below_coupling_at_operating_point():
    b = rate_budget(D)
    assert spin_flip_rate(AUX, UP, FILM, D, WL) < b.g_eff_Hz
    assert b.gamma_spinflip_Hz < b.g_eff_Hz


def test_skin_depth_guard():
    assert skin_depth(FILM, WL) == pytest.approx(np.sqrt(2 / (4e-7 * np.pi * FILM.conductivity_sigma * WL)), rel=1e-8)
    assert skin_depth(FILM, WL) > 100 * FILM.thickness_h
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        spin_flip_rate(AUX, UP, FILM, D, WL)
    thick = MetalFilmConfig(thickness_h=50e-6)
    with pytest.warns(SkinDepthWarning):
        spin_flip_rate(AUX, UP, thick, 100e-6, WL)


def test_surface_heating():
    a = atom_zero_point(WT)
    mu = RB87.g_F(2) * MU_B
    r = heating_rate_surface(D, WT, FILM, a, mu)
    assert r == pytest.approx(HEAT_SURF_375, rel=1e-8)
    assert heating_rate_surface(D, WT, FILM, 0.0, mu) == 0.0
    assert heating_rate_surface(D, WT, FILM, 3 * a, mu) == pytest.approx(9 * r, rel=1e-14)


def test_bias_heating():
    S_h = bias_height_noise(0.1e-9, 1.09e4, WT, 160e-6, 12.5)
    assert S_h == pytest.approx(1.0402616377597715e-26, rel=1e-8)
    r = heating_rate_bias(S_h, WT)
    assert 1 / 3 <= r <= 3
    assert r == pytest.approx(0.5357669218893302, rel=1e-8)
    assert heating_rate_bias(0.0, WT) == 0.0
    assert heating_rate_bias(S_h, 2 * WT) == pytest.approx(8 * r, rel=1e-14)


def test_rate_budget_validation():
    with pytest.raises(ValueError):
        RateBudget(D, 1.0, -0.1, 0, 0, 0, 0, 0, 0)


def test_single_point_sweep_equals_direct_calls():
    sc = NoiseScenario()
    (b,) = rate_sweep([D], sc)
    z = zero_point_amplitude(sc.cantilever)
    assert b.gamma_dephase_surface_Hz == dephasing_rate_surface(FILM, D)
    assert b.gamma_dephase_bias_Hz == dephasing_rate_background(0.1e-9)
    s22, s20 = HyperfineState(2, 2), HyperfineState(2, 0)
    assert b.gamma_spinflip_Hz == pytest.approx(spin_flip_rate(UP, s22, FILM, D, WL) + spin_flip_rate(UP, s20, FILM, D, WL), rel=1e-14)
    mu = RB87.g_F(2) * MU_B
    assert b.gamma_heat_surface_Hz == pytest.approx(heating_rate_surface(D, WT, FILM, atom_zero_point(WT), mu), rel=1e-14)
    assert b.gamma_vac_Hz == 0.05
    assert b.g_eff_Hz == pytest.approx(g_eff_coupling(8212.46, z), rel=1e-4)
    assert b.kappa_Hz == pytest.approx(1.8333333, rel=1e-6)


def test_heating_amplitude_switch():
    a = rate_budget(D, NoiseScenario(heating_amplitude="a_qm"))
    z = rate_budget(D, NoiseScenario(heating_amplitude="z_qm"))
    ratio = z.gamma_heat_surface_Hz / a.gamma_heat_surface_Hz
    assert ratio == pytest.approx((Z_QM / atom_zero_point(WT)) ** 2, rel=1e-6)


@pytest.fixture(scope="module")
def sweep():
    return rate_sweep(np.linspace(100e-9, 600e-9, 26))


def test_sweep_surface_rates_decrease(sweep):
    for k in range(3):
        vals = [b.surface_rates[k] for b in sweep]
        assert np.all(np.diff(vals) < 0)
    assert np.all(np.diff([b.g_eff_Hz for b in sweep]) < 0)


def test_sweep_ratio_peak(sweep):
    d = np.array([b.d for b in sweep])
    best = d[np.argmax([b.ratio for b in sweep])]
    assert 250e-9 <= best <= 500e-9
    for b in sweep:
        assert b.ratio_with_kappa < b.ratio


def test_sweep_rejects_bad_grids():
    with pytest.raises(ValueError):
        rate_sweep([])
    with pytest.raises(ValueError):
        rate_sweep([2e-7, 1e-7])
    with pytest.raises(ValueError):
        rate_sweep([-1e-7, 1e-7])


def test_parallel_sweep_matches_serial():
    d = np.linspace(200e-9, 500e-9, 4)
    assert rate_sweep(d, workers=1) == rate_sweep(d, workers=3)


def test_rate_csv(tmp_path, sweep):
    p = tmp_path / "r.csv"
    with open(p, "w", newline="") as fh:
        write_rate_csv(fh, sweep)
    lines = p.read_text().splitlines()
    assert lines[0].split(",")[:2] == ["d_nm", "g_eff_Hz"]
    assert len(lines) == 27
