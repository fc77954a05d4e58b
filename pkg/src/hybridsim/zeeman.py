"""87Rb ground-state hyperfine/Zeeman energies from the Breit-Rabi formula.

Energies are referenced to the zero-field centroid of the ground manifold, so
E(F=2) = +3/8 h*nu_hfs and E(F=1) = -5/8 h*nu_hfs at B = 0. The quantization
axis is the local field direction; states are field-following |F, m_F> labels.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from scipy.optimize import brentq

from .physcore import H, MU_B, RB87, AtomSpecies

__all__ = [
    "HyperfineState",
    "AUX",
    "UP",
    "DOWN",
    "parse_state",
    "all_states",
    "breit_rabi_energy",
    "transition_frequency",
    "field_for_resonance",
    "write_level_diagram",
]

_ALIASES = {"aux": (2, 2), "up": (2, 1), "down": (1, -1)}


@dataclass(frozen=True)
class HyperfineState:
    F: int
    m_F: int
    label: Optional[str] = None

    def __post_init__(self):
        if self.F not in (1, 2):
            raise ValueError(f"87Rb ground state has F in {{1, 2}}, got F={self.F}")
        if abs(self.m_F) > self.F:
            raise ValueError(f"|m_F| must not exceed F, got F={self.F}, m_F={self.m_F}")
        if self.label is not None and _ALIASES.get(self.label) != (self.F, self.m_F):
            raise ValueError(f"label {self.label!r} does not name |{self.F},{self.m_F}>")

    def __eq__(self, other):
        if not isinstance(other, HyperfineState):
            return NotImplemented
        return (self.F, self.m_F) == (other.F, other.m_F)

    def __hash__(self):
        return hash((self.F, self.m_F))

    @property
    def name(self) -> str:
        return self.label or f"{self.F},{self.m_F}"

    def __str__(self):
        return f"|{self.F},{self.m_F}>"


AUX = HyperfineState(2, 2, "aux")
UP = HyperfineState(2, 1, "up")
DOWN = HyperfineState(1, -1, "down")


def parse_state(text: str) -> HyperfineState:
    """Accept 'aux' / 'up' / 'down' or 'F,mF' (e.g. '2,1')."""
    t = text.strip().lower()
    if t in _ALIASES:
        F, m = _ALIASES[t]
        return HyperfineState(F, m, t)
    try:
        F, m = (int(p) for p in t.replace("|", "").replace(">", "").split(","))
    except ValueError:
        raise ValueError(f"cannot parse hyperfine state {text!r}") from None
    return HyperfineState(F, m)


def all_states() -> list[HyperfineState]:
    return [HyperfineState(F, m) for F in (1, 2) for m in range(-F, F + 1)]


def breit_rabi_energy(s: HyperfineState, B, atom: AtomSpecies = RB87):
    """Energy (J) of |F, m_F> in a field of magnitude B (T). B may be an array."""
    B = np.asarray(B, dtype=float)
    if np.any(B < 0):
        raise ValueError("field magnitude must be non-negative")
    I = atom.nuclear_spin
    dE = H * atom.hyperfine_splitting
    m = s.m_F
    upper = s.F == int(I + 0.5)
    offset = -dE / (2 * (2 * I + 1)) + atom.g_I * MU_B * m * B
    if abs(m) == I + 0.5:
        # stretched states: the square root is a perfect square, take the linear branch
        E = dE * I / (2 * I + 1) + np.sign(m) * (atom.g_J / 2 + I * atom.g_I) * MU_B * B
    else:
        x = (atom.g_J - atom.g_I) * MU_B * B / dE
        root = np.sqrt(1 + 4 * m * x / (2 * I + 1) + x * x)
        E = offset + (dE / 2 if upper else -dE / 2) * root
    return float(E) if E.ndim == 0 else E


def transition_frequency(s1: HyperfineState, s2: HyperfineState, B, atom: AtomSpecies = RB87):
    """|E(s1) - E(s2)| / h in Hz."""
    if s1 == s2:
        raise ValueError("transition needs two distinct states")
    return np.abs(breit_rabi_energy(s1, B, atom) - breit_rabi_energy(s2, B, atom)) / H


def field_for_resonance(
    s1: HyperfineState,
    s2: HyperfineState,
    target: float,
    bracket: tuple[float, float],
    atom: AtomSpecies = RB87,
) -> float:
    """Field magnitude (T) at which the s1<->s2 transition sits at `target` Hz."""
    lo, hi = bracket
    if lo < 0 or hi <= lo:
        raise ValueError(f"invalid field bracket {bracket}")

    def residual(B):
        return transition_frequency(s1, s2, B, atom) - target

    r_lo, r_hi = residual(lo), residual(hi)
    if r_lo == 0:
        return lo
    if r_hi == 0:
        return hi
    if np.sign(r_lo) == np.sign(r_hi):
        raise ValueError(
            f"target {target} Hz not bracketed: f({lo})={r_lo + target:.6g}, f({hi})={r_hi + target:.6g}"
        )
    # 1e-3 Hz over ~7e9 Hz/T slopes needs ~1e-13 T; ask for better
    return brentq(residual, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=500)


def write_level_diagram(path, B_values: Iterable[float], atom: AtomSpecies = RB87) -> None:
    """CSV of all eight level energies (in Hz) versus field."""
    states = all_states()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["B_T"] + [f"E_{s.F}_{s.m_F}_Hz" for s in states])
        for B in B_values:
            w.writerow([repr(float(B))] + [repr(breit_rabi_energy(s, B, atom) / H) for s in states])
