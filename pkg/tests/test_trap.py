import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridsim.magnetostatics import default_assembly
from hybridsim.physcore import G_GRAV, H, HBAR, MU_B, RB87
from hybridsim.trap import (
    LatticeConfig,
    PotentialCurve,
    SurfaceConfig,
    TrapError,
    TrapModel,
    atom_zero_point,
    barrier_toward_surface,
    casimir_polder,
    find_trap_minimum,
    optical_potential,
    recoil_energy,
    retarded_c4,
    sinusoidal_trap_frequency,
    total_potential,
    trap_frequency,
    zeeman_potential,
)
from hybridsim.zeeman import AUX, UP, HyperfineState

LAT = LatticeConfig()
SURF = SurfaceConfig()
M = RB87.mass
S20 = HyperfineState(2, 0)


@pytest.fixture(scope="module")
def assembly():
    return default_assembly()


def lattice_only(state=UP):
    return TrapModel(state, None, LAT, SURF, cp=False, gravity=False, magnetic=False)


def test_recoil_and_depth_arithmetic():
    h, m, lam = 6.62607015e-34, 1.443160648e-25, 1.5e-6
    Er = h**2 / (2 * m * lam**2)
    assert recoil_energy(LAT) == pytest.approx(Er, rel=1e-12)
    assert Er / h == pytest.approx(1.0203e3, rel=1e-3)
    U0 = -optical_potential(375e-9, LAT)
    assert U0 / H == pytest.approx(510.15e3, rel=1e-4)


def test_optical_periodicity_and_minimum():
    z = np.linspace(100e-9, 2e-6, 97)
    U = optical_potential(z, LAT)
    assert np.allclose(optical_potential(z + LAT.lambda_eff / 2, LAT), U, rtol=1e-12, atol=1e-12 * np.max(np.abs(U)))
    assert optical_potential(375e-9, LAT) == pytest.approx(-500 * recoil_energy(LAT), rel=1e-14)


def test_lambda_laser_convention_changes_depth():
    lat = LatticeConfig(recoil_convention="lambda_laser", recoil_wavelength=780e-9)
    assert recoil_energy(lat) / recoil_energy(LAT) == pytest.approx((1.5e-6 / 780e-9) ** 2)
    with pytest.raises(ValueError):
        LatticeConfig(recoil_convention="lambda_laser")


def test_casimir_polder():
    assert casimir_polder(2e-7, SURF) / casimir_polder(1e-7, SURF) == pytest.approx(1 / 16, rel=1e-14)
    assert -1e-40 < casimir_polder(1.0, SURF) < 0
    with pytest.raises(ValueError):
        casimir_polder(0.0, SURF)
    # default coefficient: 3 hbar c alpha / (32 pi^2 eps0)
    assert retarded_c4() == pytest.approx(1.7844e-55, rel=1e-3)
    assert abs(casimir_polder(375e-9, SURF)) / (500 * recoil_energy(LAT)) < 0.2


def test_zeeman_potential():
    B = np.array([0.0, 160e-6, 0.0])
    gF = RB87.g_F(2)
    assert zeeman_potential(AUX, B) == pytest.approx(2 * gF * MU_B * 160e-6, rel=1e-2)
    assert zeeman_potential(AUX, B) / H == pytest.approx(2.24e6, rel=1e-2)
    assert zeeman_potential(UP, B) < zeeman_potential(AUX, B)
    # m_F = 0: quadratic only
    e1 = zeeman_potential(S20, np.array([0, 1e-6, 0]))
    e2 = zeeman_potential(S20, np.array([0, 2e-6, 0]))
    assert e2 / e1 == pytest.approx(4, rel=1e-3)


def test_terms_toggle_and_sum(assembly):
    m = TrapModel(UP, assembly, LAT, SURF)
    z = np.linspace(100e-9, 1.2e-6, 50)
    c = m.components(z)
    assert np.array_equal(m(z), c["optical"] + c["casimir_polder"] + c["gravity"] + c["zeeman"])
    g = m.without("optical", "cp", "magnetic")
    Ug = g(z)
    assert np.allclose(np.diff(Ug, 2), 0, atol=1e-12 * np.max(np.abs(Ug)))
    assert Ug[1] - Ug[0] == pytest.approx(-M * G_GRAV * (z[1] - z[0]), rel=1e-9)
    assert np.array_equal(total_potential(UP, z, assembly, LAT, SURF), m(z))


def test_pure_lattice_minimum_and_frequency():
    m = lattice_only()
    z0 = find_trap_minimum(m)
    assert abs(z0 - 375e-9) < 1e-11
    w = trap_frequency(m, z0)
    assert w == pytest.approx(sinusoidal_trap_frequency(LAT), rel=1e-6)
    assert w / (2 * np.pi) == pytest.approx(45.6e3, rel=2e-3)
    deep = TrapModel(UP, None, LatticeConfig(depth_Er=1000), SURF, cp=False, gravity=False, magnetic=False)
    assert trap_frequency(deep, find_trap_minimum(deep)) / w == pytest.approx(np.sqrt(2), rel=1e-6)


def test_harmonic_trap_frequency():
    k = 3.7e-12
    U = lambda z: 0.5 * k * (np.asarray(z) - 4e-7) ** 2
    assert trap_frequency(U, 4e-7) == pytest.approx(np.sqrt(k / M), rel=1e-8)
    with pytest.raises(TrapError):
        trap_frequency(lambda z: -U(z), 4e-7)


def test_gravity_only_has_no_minimum():
    g = TrapModel(UP, None, LAT, SURF, optical=False, cp=False, magnetic=False)
    with pytest.raises(TrapError):
        find_trap_minimum(g, (100e-9, 700e-9))


@pytest.mark.parametrize("state,z_expected", [(AUX, 367.09e-9), (UP, 366.55e-9), (S20, 365.94e-9)])
def test_full_potential_minimum(assembly, state, z_expected):
    m = TrapModel(state, assembly, LAT, SURF)
    z0 = find_trap_minimum(m)
    assert abs(z0 - 375e-9) < 30e-9
    assert z0 == pytest.approx(z_expected, abs=0.05e-9)
    # stationary and convex
    h = 1e-10
    dU = (m(z0 + h) - m(z0 - h)) / (2 * h)
    assert abs(dU) < 1e-25
    assert trap_frequency(m, z0) > 0


def test_barriers(assembly):
    bare = lattice_only()
    assert barrier_toward_surface(bare, find_trap_minimum(bare)) == pytest.approx(500 * recoil_energy(LAT), rel=1e-6)
    with_cp = TrapModel(UP, None, LAT, SURF, gravity=False, magnetic=False)
    assert barrier_toward_surface(with_cp, find_trap_minimum(with_cp)) < 500 * recoil_energy(LAT)
    for s in (AUX, UP):
        full = TrapModel(s, assembly, LAT, SURF)
        nomag = full.without("magnetic")
        b_full = barrier_toward_surface(full, find_trap_minimum(full))
        b_nomag = barrier_toward_surface(nomag, find_trap_minimum(nomag))
        assert b_full > b_nomag
    up = TrapModel(UP, assembly, LAT, SURF)
    assert barrier_toward_surface(up, find_trap_minimum(up)) / H == pytest.approx(229.41e3, rel=1e-3)


def test_magnetic_wall_repulsive_toward_surface(assembly):
    # strictly rising toward the surface below the second B_x zero crossing
    z = np.linspace(60e-9, 280e-9, 200)
    c = TrapModel(UP, assembly, LAT, SURF).components(z)
    assert np.all(np.diff(c["zeeman"]) < 0)
    assert np.all(np.diff(c["casimir_polder"]) > 0)
    # between that crossing and the trap only a sub-kHz ripple remains
    zr = np.linspace(280e-9, 380e-9, 101)
    ripple = TrapModel(UP, assembly, LAT, SURF).components(zr)["zeeman"] / H
    assert np.ptp(ripple) < 1e3


def test_atom_zero_point():
    hbar, m = 1.054571817e-34, 1.443160648e-25
    w = 2 * np.pi * 124e3
    assert atom_zero_point(w) == pytest.approx(np.sqrt(hbar / (2 * m * w)), rel=1e-9)
    assert atom_zero_point(w) == pytest.approx(2.16553e-8, rel=1e-5)
    assert atom_zero_point(4 * w) == pytest.approx(atom_zero_point(w) / 2, rel=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.floats(1e3, 1e7), st.floats(1.5, 100.0))
def test_atom_zero_point_monotone(w, factor):
    assert atom_zero_point(w * factor) < atom_zero_point(w)


def test_potential_curve_csv(tmp_path, assembly):
    z = np.linspace(100e-9, 1.2e-6, 23)
    curve = PotentialCurve.from_model(TrapModel(UP, assembly, LAT, SURF), z)
    p = tmp_path / "c.csv"
    with open(p, "w", newline="") as fh:
        curve.write_csv(fh)
    lines = p.read_text().splitlines()
    assert lines[0] == "z_m,U_over_h_Hz"
    assert len(lines) == 24
    with pytest.raises(ValueError):
        PotentialCurve(np.array([2e-7, 1e-7]), np.zeros(2), UP)
