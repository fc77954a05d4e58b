"""SI constants, 87Rb ground-state data and the few unit conversions used everywhere.

All internal computation is SI with angular frequencies in rad/s. Values quoted
at module boundaries as "Hz" are ordinary frequencies (omega / 2 pi).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np
from scipy import constants as _c

__all__ = [
    "PhysicalConstants",
    "AtomSpecies",
    "CONST",
    "RB87",
    "H",
    "HBAR",
    "K_B",
    "MU_B",
    "MU_0",
    "G_GRAV",
    "freq_to_energy",
    "energy_to_freq",
    "hz_to_angular",
    "angular_to_hz",
]


@dataclass(frozen=True)
class PhysicalConstants:
    h: float = _c.h
    hbar: float = _c.hbar
    k_B: float = _c.k
    mu_B: float = _c.physical_constants["Bohr magneton"][0]
    mu_0: float = _c.mu_0
    g_grav: float = _c.g
    c: float = _c.c
    epsilon_0: float = _c.epsilon_0


CONST = PhysicalConstants()

H = CONST.h
HBAR = CONST.hbar
K_B = CONST.k_B
MU_B = CONST.mu_B
MU_0 = CONST.mu_0
G_GRAV = CONST.g_grav


def _hyperfine_g_factor(F: float, I: float, J: float, g_J: float, g_I: float) -> float:
    # Sign convention: Zeeman energy = +g_F * m_F * mu_B * B, so g_J > 0 and
    # g_I < 0 for 87Rb (weak-field seekers are the F=2, m_F > 0 states).
    ff, ii, jj = F * (F + 1), I * (I + 1), J * (J + 1)
    return g_J * (ff - ii + jj) / (2 * ff) + g_I * (ff + ii - jj) / (2 * ff)


@dataclass(frozen=True)
class AtomSpecies:
    """Ground-state (J = 1/2) alkali data needed for Breit-Rabi and trap physics."""

    name: str
    mass: float  # kg
    nuclear_spin: float
    hyperfine_splitting: float  # Hz, E(F=I+1/2) - E(F=I-1/2) at B = 0
    g_J: float
    g_I: float
    g_S: float = 2.00231930436256
    static_polarizability: float = 0.0  # C m^2 / V
    g_F_of_F: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.g_F_of_F:
            I = self.nuclear_spin
            table = {
                int(F): _hyperfine_g_factor(F, I, 0.5, self.g_J, self.g_I)
                for F in (I - 0.5, I + 0.5)
            }
            object.__setattr__(self, "g_F_of_F", MappingProxyType(table))

    def g_F(self, F: int) -> float:
        return self.g_F_of_F[F]

    @property
    def F_values(self) -> tuple[int, int]:
        I = self.nuclear_spin
        return int(I - 0.5), int(I + 0.5)

    def with_g_I(self, g_I: float) -> "AtomSpecies":
        """Copy with a different nuclear g-factor (0 gives the simplified g_F = +-1/2 model)."""
        return AtomSpecies(
            name=self.name,
            mass=self.mass,
            nuclear_spin=self.nuclear_spin,
            hyperfine_splitting=self.hyperfine_splitting,
            g_J=self.g_J,
            g_I=g_I,
            g_S=self.g_S,
            static_polarizability=self.static_polarizability,
        )


# D. A. Steck, "Rubidium 87 D Line Data" (rev. 2.2.1).
RB87 = AtomSpecies(
    name="87Rb",
    mass=1.443160648e-25,
    nuclear_spin=1.5,
    hyperfine_splitting=6.834682610904290e9,
    g_J=2.00233113,
    g_I=-0.0009951414,
    static_polarizability=0.0794 * H * 1e-4,  # h * 0.0794 Hz/(V/cm)^2
)


def freq_to_energy(f):
    """h * f. Works elementwise on arrays."""
    return H * np.asarray(f, dtype=float) if np.ndim(f) else H * float(f)


def energy_to_freq(E):
    return np.asarray(E, dtype=float) / H if np.ndim(E) else float(E) / H


def hz_to_angular(f):
    return 2 * np.pi * f


def angular_to_hz(w):
    return w / (2 * np.pi)
