"""Cantilever sensitivity and the atomic decoherence / loss budget near the chip.

Every rate leaves this module as an ordinary frequency in Hz (angular rate / 2 pi),
the same axis convention as the rate-versus-distance figure it reproduces.
"""
from __future__ import annotations

import csv
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Literal, Optional, Sequence

import numpy as np

from .magnetostatics import ChipGeometry, assembly_field, default_assembly, tip_gradient_Gm, trap_point
from .physcore import HBAR, K_B, MU_0, MU_B, RB87
from .trap import atom_zero_point
from .zeeman import UP, HyperfineState

__all__ = [
    "CantileverConfig",
    "MetalFilmConfig",
    "RateBudget",
    "NoiseScenario",
    "SkinDepthWarning",
    "zero_point_amplitude",
    "min_detectable_force",
    "spin_precession_force",
    "max_thermal_occupation",
    "rabi_from_drive",
    "s_b_parallel",
    "s_b_perp",
    "skin_depth",
    "ladder_matrix_element_sq",
    "dephasing_rate_background",
    "dephasing_rate_surface",
    "spin_flip_rate",
    "heating_rate_surface",
    "heating_rate_bias",
    "bias_height_noise",
    "g_eff_coupling",
    "rate_budget",
    "rate_sweep",
    "write_rate_csv",
]

TWO_PI = 2 * np.pi


class SkinDepthWarning(UserWarning):
    """Thin-film noise formulas used where the skin depth is not much larger than the film."""


@dataclass(frozen=True)
class CantileverConfig:
    length: float = 8e-6
    width: float = 0.2e-6
    thickness: float = 0.1e-6
    si_density: float = 2330.0
    magnet_size: tuple[float, float, float] = (700e-9, 200e-9, 150e-9)
    magnet_density: float = 8900.0  # Co / Ni class thin-film magnet
    spring_k: float = 0.012
    omega_c: float = TWO_PI * 1.1e6
    Q: float = 3e5
    T: float = 0.0

    def __post_init__(self):
        if self.m_eff <= 0 or self.kappa <= 0:
            raise ValueError("cantilever needs positive effective mass, frequency and Q")

    @property
    def m_c(self) -> float:
        return self.si_density * self.length * self.width * self.thickness

    @property
    def m_mag(self) -> float:
        return self.magnet_density * float(np.prod(self.magnet_size))

    @property
    def m_eff(self) -> float:
        return 0.24 * self.m_c + self.m_mag

    @property
    def kappa(self) -> float:
        """Dissipation rate omega_c / 2Q in rad/s."""
        return self.omega_c / (2 * self.Q)

    @property
    def n_thermal(self) -> float:
        if self.T <= 0:
            return 0.0
        return float(1.0 / np.expm1(HBAR * self.omega_c / (K_B * self.T)))


@dataclass(frozen=True)
class MetalFilmConfig:
    conductivity_sigma: float = 1 / 10.6e-8  # Pt, S/m
    thickness_h: float = 30e-9
    T: float = 300.0

    def __post_init__(self):
        if self.conductivity_sigma < 0 or self.thickness_h <= 0 or self.T < 0:
            raise ValueError("film conductivity/temperature must be >= 0 and thickness > 0")


def zero_point_amplitude(c: CantileverConfig) -> float:
    return float(np.sqrt(HBAR / (2 * c.m_eff * c.omega_c)))


def min_detectable_force(c: CantileverConfig, bandwidth_b: float) -> float:
    """Thermal force noise floor sqrt(4 k k_B T b / (omega_c Q)) in N."""
    if bandwidth_b <= 0:
        raise ValueError("bandwidth must be positive")
    return float(np.sqrt(4 * c.spring_k * K_B * c.T * bandwidth_b / (c.omega_c * c.Q)))


def spin_precession_force(G_m: float, g_F: float = 0.5) -> float:
    if G_m < 0:
        raise ValueError("gradient magnitude must be non-negative")
    return float(g_F * MU_B * G_m / np.sqrt(2))


def max_thermal_occupation(Omega_0: float, Q: float, omega_c: float) -> float:
    """Largest mean phonon number that still lets the spin force beat thermal noise in 2Q/omega_c."""
    return float((Omega_0 * Q / (np.sqrt(2) * omega_c)) ** 2)


def rabi_from_drive(delta_z: float, G_m: float, g_F: float = 0.5) -> float:
    """Atomic Rabi frequency (rad/s) from a driven tip amplitude delta_z."""
    if delta_z < 0:
        raise ValueError("drive amplitude must be non-negative")
    return g_F * G_m * MU_B * delta_z / HBAR


def g_eff_coupling(G_m: float, z_qm: float, g_F: float = 0.5) -> float:
    """Single-phonon coupling in Hz."""
    return g_F * G_m * z_qm * MU_B / HBAR / TWO_PI


def skin_depth(f: MetalFilmConfig, omega: float) -> float:
    if f.conductivity_sigma == 0 or omega == 0:
        return np.inf
    return float(np.sqrt(2 / (MU_0 * f.conductivity_sigma * omega)))


def s_b_parallel(f: MetalFilmConfig, d):
    """Low-frequency longitudinal field noise (T^2/Hz) at distance d below a thin film."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance to the film must be positive")
    h = f.thickness_h
    S = MU_0**2 / (32 * np.pi) * K_B * f.T * f.conductivity_sigma * h / (d * (d + h))
    return float(S) if S.ndim == 0 else S


def s_b_perp(f: MetalFilmConfig, d):
    return 2 * s_b_parallel(f, d)


def dephasing_rate_background(dB_parallel: float, dmu_parallel: float = MU_B / 2) -> float:
    return dmu_parallel * dB_parallel / HBAR / TWO_PI


def dephasing_rate_surface(f: MetalFilmConfig, d, dmu_parallel: float = MU_B / 2):
    return dmu_parallel**2 * s_b_parallel(f, d) / (2 * HBAR**2) / TWO_PI


def ladder_matrix_element_sq(i: HyperfineState, f: HyperfineState) -> float:
    """sum over the two transverse axes of |<f|F_a|i>|^2 (a = x, y); zero unless Delta m = +-1 in one F."""
    if i.F != f.F or abs(i.m_F - f.m_F) != 1:
        return 0.0
    m = min(i.m_F, f.m_F)
    ladder_sq = i.F * (i.F + 1) - m * (m + 1)  # |<F, m+1|F_+|F, m>|^2
    # |<f|F_x|i>|^2 = |<f|F_y|i>|^2 = ladder_sq / 4
    return ladder_sq / 2


def spin_flip_rate(
    i: HyperfineState,
    f: HyperfineState,
    film: MetalFilmConfig,
    d,
    omega_L: float,
    atom=RB87,
):
    """Zeeman spin-flip rate i -> f (Hz) driven by transverse thermal field noise.

    The electron-spin matrix element g_S <f|S_a|i> is evaluated inside the F
    manifold as g_F <f|F_a|i>; both transverse field components see S_B_perp.
    """
    me = ladder_matrix_element_sq(i, f)
    if me == 0.0:
        return 0.0 * np.asarray(d, dtype=float) if np.ndim(d) else 0.0
    delta = skin_depth(film, omega_L)
    if not delta > 10 * film.thickness_h:
        warnings.warn(
            f"skin depth {delta:.3g} m is not >> film thickness {film.thickness_h:.3g} m",
            SkinDepthWarning,
            stacklevel=2,
        )
    mu = atom.g_F(i.F) * MU_B
    return (mu / HBAR) ** 2 * me * s_b_perp(film, d) / TWO_PI


def heating_rate_surface(d, omega_t: float, film: MetalFilmConfig, amplitude: float, mu_parallel: float):
    """Ground -> first excited trap level heating (Hz) from near-field noise.

    `amplitude` is the zero-point spread that multiplies the field-noise
    gradient: the atomic a_qm by default (see NoiseScenario.heating_amplitude).
    """
    d = np.asarray(d, dtype=float)
    G = (mu_parallel / HBAR) ** 2 * (amplitude / d) ** 2 * s_b_parallel(film, d) / TWO_PI
    return float(G) if np.ndim(G) == 0 else G


def heating_rate_bias(S_h: float, omega_t: float, mass: float = RB87.mass) -> float:
    """Heating (Hz) from trap-height noise with spectral density S_h (m^2/Hz)."""
    return mass * omega_t**3 / (2 * HBAR) * S_h / TWO_PI


def bias_height_noise(
    dB: float,
    G_m: float,
    omega_t: float,
    B_total: float,
    bandwidth: float,
    dmu: float = MU_B / 2,
    mass: float = RB87.mass,
) -> float:
    """Trap-height spectral density S_h (m^2/Hz) caused by bias-field noise.

    A bias change dB tilts the local field by dB/|B|; against a transverse
    gradient G_m this is a force dmu G_m dB / |B|, which a harmonic well of
    frequency omega_t turns into a displacement. The dB rms level is spread
    white over `bandwidth`.
    """
    dz_per_tesla = dmu * G_m / (mass * omega_t**2 * B_total)
    return dz_per_tesla**2 * dB**2 / bandwidth


@dataclass(frozen=True)
class RateBudget:
    d: float
    g_eff_Hz: float
    gamma_spinflip_Hz: float
    gamma_dephase_surface_Hz: float
    gamma_dephase_bias_Hz: float
    gamma_heat_surface_Hz: float
    gamma_heat_bias_Hz: float
    gamma_vac_Hz: float
    kappa_Hz: float

    def __post_init__(self):
        for fl in fields(self):
            if fl.name != "d" and getattr(self, fl.name) < 0:
                raise ValueError(f"{fl.name} is negative")

    @property
    def surface_rates(self) -> tuple[float, float, float]:
        return (self.gamma_spinflip_Hz, self.gamma_dephase_surface_Hz, self.gamma_heat_surface_Hz)

    @property
    def loss_sum_Hz(self) -> float:
        """Surface-induced rates plus background loss: the mechanisms plotted against d."""
        return sum(self.surface_rates) + self.gamma_vac_Hz

    @property
    def ratio(self) -> float:
        return self.g_eff_Hz / self.loss_sum_Hz

    @property
    def ratio_with_kappa(self) -> float:
        return self.g_eff_Hz / (self.loss_sum_Hz + self.kappa_Hz)


@dataclass(frozen=True)
class NoiseScenario:
    geometry: ChipGeometry = ChipGeometry()
    cantilever: CantileverConfig = CantileverConfig()
    film: MetalFilmConfig = MetalFilmConfig()
    state: HyperfineState = UP
    gamma_vac_Hz: float = 0.05
    trap_frequency: float = TWO_PI * 124e3  # rad/s
    omega_L: float = TWO_PI * 1.1e6
    dB_bias: float = 0.1e-9
    bias_noise_bandwidth: float = 1 / 80e-3  # inverse gate time
    dmu_parallel: float = MU_B / 2
    mu_parallel: Optional[float] = None  # default g_F m_F mu_B of `state`
    heating_amplitude: Literal["a_qm", "z_qm"] = "a_qm"
    resolve_bias: bool = True  # re-null B_x at every d

    @property
    def mu_par(self) -> float:
        if self.mu_parallel is not None:
            return self.mu_parallel
        return abs(RB87.g_F(self.state.F) * self.state.m_F) * MU_B


def _spinflip_out(s: HyperfineState, film, d, omega_L) -> float:
    total = 0.0
    for m in (s.m_F - 1, s.m_F + 1):
        if abs(m) <= s.F:
            total = total + spin_flip_rate(s, HyperfineState(s.F, m), film, d, omega_L)
    return total


def rate_budget(d: float, sc: NoiseScenario = NoiseScenario()) -> RateBudget:
    p = trap_point(d, 0, sc.geometry)
    # without re-nulling, the bias stays at the value solved for the 375 nm operating point
    assembly = default_assembly(d if sc.resolve_bias else 375e-9, sc.geometry)
    G_m = tip_gradient_Gm(assembly, p)
    z_qm = zero_point_amplitude(sc.cantilever)
    a_qm = atom_zero_point(sc.trap_frequency)
    amp = a_qm if sc.heating_amplitude == "a_qm" else z_qm
    Bmag = float(np.linalg.norm(assembly_field(assembly, p)))
    S_h = bias_height_noise(sc.dB_bias, G_m, sc.trap_frequency, Bmag, sc.bias_noise_bandwidth, sc.dmu_parallel)
    return RateBudget(
        d=d,
        g_eff_Hz=g_eff_coupling(G_m, z_qm),
        gamma_spinflip_Hz=float(_spinflip_out(sc.state, sc.film, d, sc.omega_L)),
        gamma_dephase_surface_Hz=float(dephasing_rate_surface(sc.film, d, sc.dmu_parallel)),
        gamma_dephase_bias_Hz=dephasing_rate_background(sc.dB_bias, sc.dmu_parallel),
        gamma_heat_surface_Hz=float(heating_rate_surface(d, sc.trap_frequency, sc.film, amp, sc.mu_par)),
        gamma_heat_bias_Hz=heating_rate_bias(S_h, sc.trap_frequency),
        gamma_vac_Hz=sc.gamma_vac_Hz,
        kappa_Hz=sc.cantilever.kappa / TWO_PI,
    )


def rate_sweep(d_range: Sequence[float], sc: NoiseScenario = NoiseScenario(), workers: int = 1) -> list[RateBudget]:
    d = np.asarray(d_range, dtype=float)
    if d.size == 0 or np.any(d <= 0) or np.any(np.diff(d) <= 0):
        raise ValueError("distances must be positive and strictly increasing")
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(lambda x: rate_budget(float(x), sc), d))
    return [rate_budget(float(x), sc) for x in d]


RATE_COLUMNS = [
    ("d_nm", "nm"),
    ("g_eff_Hz", "Hz"),
    ("gamma_spinflip_Hz", "Hz"),
    ("gamma_dephase_surface_Hz", "Hz"),
    ("gamma_heat_surface_Hz", "Hz"),
    ("gamma_dephase_bias_Hz", "Hz"),
    ("gamma_heat_bias_Hz", "Hz"),
    ("gamma_vac_Hz", "Hz"),
    ("kappa_Hz", "Hz"),
    ("ratio", "1"),
    ("ratio_with_kappa", "1"),
]


def rate_rows(budgets: Sequence[RateBudget]):
    for b in budgets:
        row = asdict(b)
        row["d_nm"] = b.d * 1e9
        row["ratio"] = b.ratio
        row["ratio_with_kappa"] = b.ratio_with_kappa
        yield [row[name] for name, _ in RATE_COLUMNS]


def write_rate_csv(fh, budgets: Sequence[RateBudget]) -> None:
    w = csv.writer(fh)
    w.writerow([name for name, _ in RATE_COLUMNS])
    for row in rate_rows(budgets):
        w.writerow([repr(float(x)) for x in row])
