"""Pulse schedules for the phonon-controlled CNOT and the two-cantilever entangling sequence."""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np

from .dynamics import (
    HilbertSpace,
    LindbladTerm,
    build_drive_hamiltonian,
    build_jc_hamiltonian,
    build_space,
    check_state,
    evolve,
    fidelity,
    partial_trace,
    to_density,
)
from .magnetostatics import MagnetAssembly, assembly_field, tip_gradient_Gm
from .zeeman import AUX, DOWN, UP, HyperfineState, parse_state

LEVELS = (DOWN, UP, AUX)
JC_PAIR = (UP, AUX)  # (lower, upper): |up, 1> <-> |aux, 0>
DRIVE_PAIR = (DOWN, UP)


@dataclass(frozen=True)
class PulseSegment:
    duration: float
    kind: Literal["jc", "drive", "idle"]
    label: str = ""
    pair: tuple[str, str] = ("", "")
    mode: int = 0
    g: float = 0.0  # rad/s
    detuning: float = 0.0  # rad/s
    Omega: float = 0.0  # rad/s
    phi: float = 0.0

    def __post_init__(self):
        if not self.duration >= 0:
            raise ValueError("segment duration must be non-negative")
        if self.kind not in ("jc", "drive", "idle"):
            raise ValueError(f"unknown segment kind {self.kind!r}")
        object.__setattr__(self, "pair", tuple(self.pair))

    def hamiltonian(self, space: HilbertSpace):
        if self.kind == "idle":
            return 0 * space.identity()
        pair = tuple(parse_state(s) for s in self.pair)
        if self.kind == "jc":
            return build_jc_hamiltonian(space, pair, self.mode, self.g, self.detuning)
        return build_drive_hamiltonian(space, pair, self.Omega, self.phi)


@dataclass(frozen=True)
class PulseSchedule:
    segments: tuple[PulseSegment, ...]
    lattice_moves: tuple[tuple[int, int], ...] = ()  # (after segment index, newly coupled mode)

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "lattice_moves", tuple(tuple(m) for m in self.lattice_moves))
        for idx, mode in self.lattice_moves:
            if not 0 <= idx < len(self.segments) or mode < 0:
                raise ValueError(f"invalid lattice move ({idx}, {mode})")

    @property
    def total_duration(self) -> float:
        return float(sum(s.duration for s in self.segments))

    @property
    def n_modes(self) -> int:
        return 1 + max([s.mode for s in self.segments] + [m for _, m in self.lattice_moves] + [0])

    def compile(self, space: HilbertSpace):
        return [(s.duration, s.hamiltonian(space)) for s in self.segments]

    def to_json(self) -> str:
        return json.dumps({"segments": [asdict(s) for s in self.segments], "lattice_moves": self.lattice_moves})

    @classmethod
    def from_json(cls, text: str) -> "PulseSchedule":
        d = json.loads(text)
        return cls(tuple(PulseSegment(**s) for s in d["segments"]), tuple(tuple(m) for m in d["lattice_moves"]))


def _names(pair):
    return tuple(s.name for s in pair)


def cnot_schedule(g_eff: float, Omega_drive: float) -> PulseSchedule:
    """pi/2 drive, JC 2pi pulse on |up,1> <-> |aux,0>, inverse pi/2 drive. Rates in rad/s."""
    if g_eff <= 0 or Omega_drive <= 0:
        raise ValueError("g_eff and Omega must be positive")
    t_drive = np.pi / (2 * Omega_drive)
    return PulseSchedule(
        (
            PulseSegment(t_drive, "drive", "pi/2", _names(DRIVE_PAIR), Omega=Omega_drive, phi=np.pi / 2),
            PulseSegment(np.pi / g_eff, "jc", "2pi jc", _names(JC_PAIR), mode=0, g=g_eff),
            PulseSegment(t_drive, "drive", "-pi/2", _names(DRIVE_PAIR), Omega=Omega_drive, phi=-np.pi / 2),
        )
    )


def drive_for_gate_time(g_eff: float, t_gate: float) -> float:
    """Drive Rabi frequency that makes the CNOT last exactly t_gate."""
    rest = t_gate - np.pi / g_eff
    if rest <= 0:
        raise ValueError("gate time shorter than the JC 2pi pulse")
    return np.pi / rest


def entangle_schedule(g1: float, g2: float, t1: Optional[float] = None, t2: Optional[float] = None) -> PulseSchedule:
    """JC pi/2 pulse with mode 0, lattice move, JC pi pulse with mode 1."""
    t1 = np.pi / (4 * g1) if t1 is None else t1
    t2 = np.pi / (2 * g2) if t2 is None else t2
    return PulseSchedule(
        (
            PulseSegment(t1, "jc", "pi/2 jc mode0", _names(JC_PAIR), mode=0, g=g1),
            PulseSegment(t2, "jc", "pi jc mode1", _names(JC_PAIR), mode=1, g=g2),
        ),
        lattice_moves=((0, 1),),
    )


@dataclass(frozen=True)
class LindbladConfig:
    """Dissipation for protocol runs; all rates are GKSL coefficients in 1/s."""

    kappa: tuple[float, ...] = ()  # per mode energy decay rate
    n_th: tuple[float, ...] = ()  # per mode bath occupation
    gamma_dephase: float = 0.0  # D[sigma_z] on {aux, up}
    gamma_down: float = 0.0  # D[sigma-] aux -> up
    gamma_up: float = 0.0  # D[sigma+] up -> aux

    @classmethod
    def lossless(cls) -> "LindbladConfig":
        return cls()

    def terms(self, space: HilbertSpace) -> list[LindbladTerm]:
        out = []
        for k in range(space.n_modes):
            kap = self.kappa[k] if k < len(self.kappa) else 0.0
            nth = self.n_th[k] if k < len(self.n_th) else 0.0
            a = space.annihilation(k)
            if kap > 0:
                out.append(LindbladTerm(a, kap * (nth + 1)))
                if nth > 0:
                    out.append(LindbladTerm(a.T.tocsr(), kap * nth))
        lower, upper = JC_PAIR
        if self.gamma_dephase > 0:
            out.append(LindbladTerm(space.projector(upper) - space.projector(lower), self.gamma_dephase))
        if self.gamma_down > 0:
            out.append(LindbladTerm(space.transition(lower, upper), self.gamma_down))
        if self.gamma_up > 0:
            out.append(LindbladTerm(space.transition(upper, lower), self.gamma_up))
        return out


@dataclass
class GateResult:
    truth_table: dict
    fidelities: dict
    mean_fidelity: float
    gate_time: float
    hygiene: dict = field(default_factory=dict)

    def report(self) -> str:
        lines = [f"gate_time_s = {self.gate_time!r}", f"mean_fidelity = {self.mean_fidelity!r}"]
        lines.append("input,target,fidelity")
        for k, f in self.fidelities.items():
            lines.append(f"{k},{CNOT_TARGET_LABELS[k]},{f!r}")
        return "\n".join(lines) + "\n"


CNOT_INPUTS = {
    "down,0": (DOWN, 0),
    "down,1": (DOWN, 1),
    "up,0": (UP, 0),
    "up,1": (UP, 1),
}
# phonon 0: identity on the spin; phonon 1: spin flip with a -1 sign
CNOT_TARGETS = {
    "down,0": (1, DOWN, 0),
    "down,1": (-1, UP, 1),
    "up,0": (1, UP, 0),
    "up,1": (-1, DOWN, 1),
}
CNOT_TARGET_LABELS = {k: f"{'-' if s < 0 else '+'}{lvl.name},{n}" for k, (s, lvl, n) in CNOT_TARGETS.items()}


def cnot_target(space: HilbertSpace, key: str) -> np.ndarray:
    sign, lvl, n = CNOT_TARGETS[key]
    return sign * space.ket(lvl, n, *([0] * (space.n_modes - 1)))


def _run_one(state, compiled, terms, labels):
    return evolve(state, compiled, terms, labels=labels)


def _hygiene(states) -> dict:
    worst = {"trace_error": 0.0, "hermiticity": 0.0, "min_eig": 0.0}
    for st in states:
        info = check_state(st)
        worst["trace_error"] = max(worst["trace_error"], info["trace_error"])
        worst["hermiticity"] = max(worst["hermiticity"], info["hermiticity"])
        worst["min_eig"] = min(worst["min_eig"], info["min_eig"])
    return worst


def _parallel_map(fn, items, workers):
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def run_cnot(
    schedule: PulseSchedule,
    lindblad: LindbladConfig = LindbladConfig(),
    n_max: int = 3,
    workers: int = 1,
    inputs: Optional[dict] = None,
) -> GateResult:
    space = build_space(LEVELS, [n_max] * schedule.n_modes)
    compiled = schedule.compile(space)
    terms = lindblad.terms(space)
    labels = [s.label for s in schedule.segments]
    keys = list(CNOT_INPUTS)
    kets = {k: space.ket(lvl, n, *([0] * (space.n_modes - 1))) for k, (lvl, n) in CNOT_INPUTS.items()}
    trajs = _parallel_map(lambda k: _run_one(kets[k], compiled, terms, labels), keys, workers)
    table, fids, states = {}, {}, []
    for k, tr in zip(keys, trajs):
        table[k] = tr.final
        fids[k] = fidelity(tr.final, cnot_target(space, k))
        states.extend(tr.states)
    return GateResult(table, fids, float(np.mean(list(fids.values()))), schedule.total_duration, _hygiene(states))


def bell_fidelity(rho_two_mode: np.ndarray, n_max: int) -> float:
    """Fidelity with (|01> + e^{i theta}|10>)/sqrt2, maximized over theta in closed form."""
    d = n_max + 1
    i01, i10 = 0 * d + 1, 1 * d + 0
    r = rho_two_mode
    return float(0.5 * np.real(r[i01, i01] + r[i10, i10]) + abs(r[i01, i10]))


def concurrence(rho_two_mode: np.ndarray, n_max: int) -> float:
    """Wootters concurrence of the renormalized {0,1} x {0,1} phonon block."""
    d = n_max + 1
    idx = [0, 1, d, d + 1]
    r = rho_two_mode[np.ix_(idx, idx)]
    tr = np.real(np.trace(r))
    if tr <= 0:
        return 0.0
    r = r / tr
    yy = np.fliplr(np.diag([-1.0, 1.0, 1.0, -1.0]))
    rt = yy @ r.conj() @ yy
    ev = np.sqrt(np.clip(np.sort(np.real(np.linalg.eigvals(r @ rt)))[::-1], 0, None))
    return float(max(0.0, ev[0] - ev[1] - ev[2] - ev[3]))


@dataclass
class EntangleResult:
    reduced_state: np.ndarray
    bell_fidelity: float
    concurrence: float
    atom_purity: float
    atom_up_population: float
    total_time: float
    hygiene: dict = field(default_factory=dict)

    def report(self) -> str:
        lines = [
            f"total_time_s = {self.total_time!r}",
            f"bell_fidelity = {self.bell_fidelity!r}",
            f"concurrence = {self.concurrence!r}",
            f"atom_purity = {self.atom_purity!r}",
            f"atom_up_population = {self.atom_up_population!r}",
            "row,col,re,im",
        ]
        r = self.reduced_state
        for i in range(r.shape[0]):
            for j in range(r.shape[1]):
                if abs(r[i, j]) > 1e-12:
                    lines.append(f"{i},{j},{r[i, j].real!r},{r[i, j].imag!r}")
        return "\n".join(lines) + "\n"


def run_entangle(schedule: PulseSchedule, lindblad: LindbladConfig = LindbladConfig(), n_max: int = 3) -> EntangleResult:
    n_modes = max(2, schedule.n_modes)
    space = build_space(LEVELS, [n_max] * n_modes)
    psi0 = space.ket(AUX, *([0] * n_modes))
    tr = evolve(psi0, schedule.compile(space), lindblad.terms(space), labels=[s.label for s in schedule.segments])
    rho = to_density(tr.final)
    dims = space.dims
    phon = partial_trace(rho, dims, [1, 2])
    atom = partial_trace(rho, dims, [0])
    hyg = _hygiene([to_density(s) for s in tr.states])
    return EntangleResult(
        reduced_state=phon,
        bell_fidelity=bell_fidelity(phon, n_max),
        concurrence=concurrence(phon, n_max),
        atom_purity=float(np.real(np.trace(atom @ atom))),
        atom_up_population=float(np.real(atom[space.level_index(UP), space.level_index(UP)])),
        total_time=schedule.total_duration,
        hygiene=hyg,
    )


def crosstalk_ratio(assembly: MagnetAssembly, site_pitch: float, d: float = 375e-9, site_x: float = 0.0) -> float:
    """G_m of the site-0 tip seen by an atom one pitch away, relative to its on-site value.

    Both values use the quantization axis of the on-site atom, so only the
    geometric fall-off of the tip gradient enters.
    """
    if site_pitch <= 0:
        raise ValueError("pitch must be positive")
    p0 = np.array([site_x, 0.0, d])
    tips = assembly.mobile
    if not tips:
        raise ValueError("assembly has no cantilever tip")
    tip = min(tips, key=lambda m: abs(m.center[0] - site_x))
    B0 = assembly_field(assembly, p0)
    q = B0 / np.linalg.norm(B0)
    g0 = tip_gradient_Gm(assembly, p0, tip=tip, quantization_axis=q)
    g1 = tip_gradient_Gm(assembly, p0 + np.array([site_pitch, 0.0, 0.0]), tip=tip, quantization_axis=q)
    return g1 / g0
