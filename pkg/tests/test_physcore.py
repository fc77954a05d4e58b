import numpy as np
import pytest
from hypothesis import given, strategies as st

from hybridsim.physcore import HBAR, H, MU_B, RB87, angular_to_hz, energy_to_freq, freq_to_energy, hz_to_angular


def test_constants_are_codata():
    assert H == pytest.approx(6.62607015e-34, rel=0, abs=0)
    assert MU_B == pytest.approx(9.2740100783e-24, rel=1e-9)
    assert HBAR == pytest.approx(H / (2 * np.pi), rel=1e-15)


def test_rb87_g_factors():
    # Lande g_F with the nuclear term: close to +-1/2 for the two manifolds
    assert RB87.g_F(2) == pytest.approx(0.49983642645, rel=1e-10)
    assert RB87.g_F(1) == pytest.approx(-2.00233113 / 4 - 0.0009951414 * 5 / 4, rel=1e-12)
    assert RB87.with_g_I(0.0).g_F(2) == pytest.approx(RB87.g_J / 4, rel=1e-12)


def test_hyperfine_splitting_value():
    assert RB87.hyperfine_splitting == pytest.approx(6.834682610904290e9, rel=1e-15)


@given(st.floats(min_value=1e-6, max_value=1e12), st.sampled_from([1.0, -1.0]))
def test_unit_conversions_round_trip(mag, sign):
    f = sign * mag
    assert energy_to_freq(freq_to_energy(f)) == pytest.approx(f, rel=1e-12)
    assert angular_to_hz(hz_to_angular(f)) == pytest.approx(f, rel=1e-12)
