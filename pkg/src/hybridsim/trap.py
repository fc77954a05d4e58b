"""Vertical cut through a lattice site: optical lattice + Casimir-Polder + gravity + Zeeman.

z is the distance from the membrane surface (atoms at z > 0, magnets at z < 0).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Callable, Literal, Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .magnetostatics import MagnetAssembly, assembly_field
from .physcore import CONST, G_GRAV, H, HBAR, RB87, AtomSpecies
from .zeeman import HyperfineState, breit_rabi_energy

__all__ = [
    "LatticeConfig",
    "SurfaceConfig",
    "TrapModel",
    "PotentialCurve",
    "TrapError",
    "recoil_energy",
    "retarded_c4",
    "optical_potential",
    "casimir_polder",
    "zeeman_potential",
    "total_potential",
    "find_trap_minimum",
    "trap_frequency",
    "barrier_toward_surface",
    "atom_zero_point",
    "sinusoidal_trap_frequency",
]


class TrapError(RuntimeError):
    """No trap minimum / non-positive curvature where one was required."""


def retarded_c4(atom: AtomSpecies = RB87) -> float:
    """Retarded Casimir-Polder coefficient (J m^4) for an atom above a perfect conductor."""
    return 3 * CONST.hbar * CONST.c * atom.static_polarizability / (32 * np.pi**2 * CONST.epsilon_0)


@dataclass(frozen=True)
class LatticeConfig:
    lambda_eff: float = 1.5e-6  # lattice period is lambda_eff / 2
    depth_Er: float = 500.0
    antinode_offset: float = 375e-9  # position of the first intensity maximum (trap site)
    recoil_convention: Literal["lambda_eff", "lambda_laser"] = "lambda_eff"
    recoil_wavelength: Optional[float] = None  # used with recoil_convention="lambda_laser"

    def __post_init__(self):
        if self.lambda_eff <= 0 or self.depth_Er <= 0:
            raise ValueError("lambda_eff and depth_Er must be positive")
        if self.recoil_convention == "lambda_laser" and not self.recoil_wavelength:
            raise ValueError("recoil_convention='lambda_laser' needs recoil_wavelength")
        if self.recoil_convention not in ("lambda_eff", "lambda_laser"):
            raise ValueError(f"unknown recoil convention {self.recoil_convention!r}")


@dataclass(frozen=True)
class SurfaceConfig:
    cp_coefficient_C4: float = field(default_factory=retarded_c4)
    membrane_thickness: float = 150e-9
    temperature: float = 300.0

    def __post_init__(self):
        if self.cp_coefficient_C4 <= 0:
            raise ValueError("C4 must be positive")


def recoil_energy(cfg: LatticeConfig, atom: AtomSpecies = RB87) -> float:
    lam = cfg.lambda_eff if cfg.recoil_convention == "lambda_eff" else cfg.recoil_wavelength
    return H**2 / (2 * atom.mass * lam**2)


def optical_potential(z, cfg: LatticeConfig, atom: AtomSpecies = RB87):
    U0 = cfg.depth_Er * recoil_energy(cfg, atom)
    k = 2 * np.pi / cfg.lambda_eff
    # -U0 sin^2(k (z - d) + pi/2): deepest point at z = d
    return -U0 * np.cos(k * (np.asarray(z, dtype=float) - cfg.antinode_offset)) ** 2


def casimir_polder(z, cfg: SurfaceConfig):
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise ValueError("Casimir-Polder potential needs z > 0")
    return -cfg.cp_coefficient_C4 / z**4


def zeeman_potential(s: HyperfineState, B, atom: AtomSpecies = RB87):
    """Breit-Rabi energy at |B| relative to the same state's zero-field energy. B has shape (..., 3)."""
    Bmag = np.linalg.norm(np.asarray(B, dtype=float), axis=-1)
    return breit_rabi_energy(s, Bmag, atom) - breit_rabi_energy(s, 0.0, atom)


def sinusoidal_trap_frequency(cfg: LatticeConfig, atom: AtomSpecies = RB87) -> float:
    """Harmonic frequency (rad/s) at the bottom of a bare lattice well."""
    U0 = cfg.depth_Er * recoil_energy(cfg, atom)
    return 2 * np.pi / cfg.lambda_eff * np.sqrt(2 * U0 / atom.mass)


@dataclass(frozen=True)
class TrapModel:
    """Potential energy along the vertical line through (x, y) for one hyperfine state.

    Each term can be switched off; the total is exactly the sum of the enabled ones.
    """

    state: HyperfineState
    assembly: Optional[MagnetAssembly] = None
    lattice: LatticeConfig = LatticeConfig()
    surface: SurfaceConfig = SurfaceConfig()
    atom: AtomSpecies = RB87
    xy: tuple[float, float] = (0.0, 0.0)
    optical: bool = True
    cp: bool = True
    gravity: bool = True
    magnetic: bool = True
    gravity_sign: float = -1.0  # +z points down, away from the chip

    def components(self, z) -> dict[str, np.ndarray]:
        z = np.asarray(z, dtype=float)
        zeros = np.zeros_like(z)
        out = {
            "optical": optical_potential(z, self.lattice, self.atom) if self.optical else zeros,
            "casimir_polder": casimir_polder(z, self.surface) if self.cp else zeros,
            "gravity": self.gravity_sign * self.atom.mass * G_GRAV * z if self.gravity else zeros,
        }
        if self.magnetic and self.assembly is not None:
            pts = np.stack(np.broadcast_arrays(self.xy[0], self.xy[1], z), axis=-1)
            out["zeeman"] = zeeman_potential(self.state, assembly_field(self.assembly, pts), self.atom)
        else:
            out["zeeman"] = zeros
        return out

    def __call__(self, z):
        c = self.components(z)
        U = c["optical"] + c["casimir_polder"] + c["gravity"] + c["zeeman"]
        return float(U) if np.ndim(U) == 0 else U

    def without(self, *terms: str) -> "TrapModel":
        return replace(self, **{t: False for t in terms})

    def default_bracket(self) -> tuple[float, float]:
        d, lam = self.lattice.antinode_offset, self.lattice.lambda_eff
        return (max(d - lam / 6, 1e-9), d + lam / 6)


def total_potential(s, z, assembly, lattice, surface, **terms) -> np.ndarray:
    return TrapModel(s, assembly, lattice, surface, **terms)(z)


Potential = Callable[[np.ndarray], np.ndarray]


def _derivative(U: Potential, z: float, h: float) -> float:
    return (-U(z + 2 * h) + 8 * U(z + h) - 8 * U(z - h) + U(z - 2 * h)) / (12 * h)


def _second_derivative(U: Potential, z: float, h: float) -> float:
    return (-U(z + 2 * h) + 16 * U(z + h) - 30 * U(z) + 16 * U(z - h) - U(z - 2 * h)) / (12 * h * h)


def find_trap_minimum(U: Potential, bracket: Optional[tuple[float, float]] = None, n_grid: int = 2001) -> float:
    """Position (m) of the single local minimum of U inside `bracket`.

    A grid scan locates the well, then the zero of a 5-point derivative is
    polished with Brent's method to ~1e-14 m.
    """
    if bracket is None:
        bracket = U.default_bracket()
    lo, hi = bracket
    if not hi > lo:
        raise ValueError(f"bad bracket {bracket}")
    z = np.linspace(lo, hi, n_grid)
    u = np.asarray(U(z), dtype=float)
    interior = np.flatnonzero((u[1:-1] < u[:-2]) & (u[1:-1] <= u[2:])) + 1
    if interior.size == 0:
        raise TrapError(f"no local minimum of the potential in [{lo:.4g}, {hi:.4g}] m")
    if interior.size > 1:
        raise TrapError(f"{interior.size} local minima in bracket; narrow it")
    i = interior[0]
    a, b = z[i - 1], z[i + 1]
    step = min(1e-10, (b - a) / 100)

    def dU(x):
        return _derivative(U, x, step)

    fa, fb = dU(a), dU(b)
    if not (fa < 0 < fb):
        res = minimize_scalar(U, bounds=(a, b), method="bounded", options={"xatol": 1e-14})
        return float(res.x)
    return float(brentq(dU, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))


def trap_frequency(U: Potential, z_min: float, mass: float = RB87.mass, h: float = 1e-9) -> float:
    """omega_t = sqrt(U''(z_min)/m) with a Richardson-checked 5-point second derivative."""
    d1 = _second_derivative(U, z_min, h)
    d2 = _second_derivative(U, z_min, h / 2)
    curv = (16 * d2 - d1) / 15
    if not np.isfinite(curv) or curv <= 0:
        raise TrapError(f"curvature {curv:.3g} J/m^2 at z={z_min:.4g} m is not positive")
    if abs(d1 - d2) > 1e-4 * abs(curv):
        raise TrapError("second derivative not converged; potential too rough for step size")
    return float(np.sqrt(curv / mass))


def barrier_toward_surface(U: Potential, z_min: float, z_floor: float = 1e-10, n_grid: int = 4001) -> float:
    """Height (J) of the highest point between the surface and z_min, above U(z_min); 0 if none."""
    # geometric spacing resolves the steep near-surface terms
    z = np.geomspace(z_floor, z_min, n_grid)
    u = np.asarray(U(z), dtype=float)
    i = int(np.argmax(u))
    Umax = u[i]
    if 0 < i < n_grid - 1:
        res = minimize_scalar(lambda x: -U(x), bounds=(z[i - 1], z[i + 1]), method="bounded",
                              options={"xatol": 1e-13})
        Umax = max(Umax, -res.fun)
    return float(max(0.0, Umax - U(z_min)))


def atom_zero_point(omega_t: float, mass: float = RB87.mass) -> float:
    """Ground-state rms position spread sqrt(hbar / (2 m omega_t))."""
    if omega_t <= 0:
        raise ValueError("trap frequency must be positive")
    return float(np.sqrt(HBAR / (2 * mass * omega_t)))


@dataclass
class PotentialCurve:
    z_grid: np.ndarray
    U: np.ndarray
    state: HyperfineState
    components: dict = field(default_factory=dict)

    def __post_init__(self):
        self.z_grid = np.asarray(self.z_grid, dtype=float)
        self.U = np.asarray(self.U, dtype=float)
        if self.z_grid.shape != self.U.shape:
            raise ValueError("z grid and potential have different lengths")
        if np.any(self.z_grid <= 0) or np.any(np.diff(self.z_grid) <= 0):
            raise ValueError("z grid must be positive and strictly increasing")

    @classmethod
    def from_model(cls, model: TrapModel, z_grid: Sequence[float]) -> "PotentialCurve":
        z = np.asarray(z_grid, dtype=float)
        comps = model.components(z)
        total = comps["optical"] + comps["casimir_polder"] + comps["gravity"] + comps["zeeman"]
        return cls(z, total, model.state, comps)

    def rows(self):
        for z, u in zip(self.z_grid, self.U):
            yield z, u / H

    def write_csv(self, fh) -> None:
        w = csv.writer(fh)
        w.writerow(["z_m", "U_over_h_Hz"])
        for z, f in self.rows():
            w.writerow([repr(float(z)), repr(float(f))])
