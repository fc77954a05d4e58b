"""Composite atom + phonon Hilbert space, JC / drive Hamiltonians and GKSL evolution.

Conventions used throughout:
  * Hamiltonians are stored as H/hbar, i.e. in rad/s.
  * States are plain complex ndarrays: 1-D for a pure ket, 2-D for a density matrix.
  * Basis ordering is atom level slowest, then mode 0, mode 1, ... (kron order).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.linalg import sqrtm
from scipy.optimize import brentq

from .zeeman import HyperfineState

RTOL = 1e-11  # one decade below 1e-10 so long runs still conserve norm to 1e-9
ATOL = 1e-13


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class HilbertSpace:
    levels: tuple[HyperfineState, ...]
    cutoffs: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        object.__setattr__(self, "cutoffs", tuple(int(n) for n in self.cutoffs))
        if len(self.levels) < 2:
            raise ValueError("need at least two atomic levels")
        if len(self.cutoffs) == 0:
            raise ValueError("need at least one phonon mode")
        if any(n < 3 for n in self.cutoffs):
            raise ValueError("Fock cutoffs must be >= 3")
        if len(set(self.levels)) != len(self.levels):
            raise ValueError("duplicate atomic level")

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def n_modes(self) -> int:
        return len(self.cutoffs)

    @property
    def dims(self) -> tuple[int, ...]:
        """Subsystem dimensions: (atom, mode0, mode1, ...)."""
        return (self.n_levels,) + tuple(n + 1 for n in self.cutoffs)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def level_index(self, s: HyperfineState) -> int:
        try:
            return self.levels.index(s)
        except ValueError:
            raise ValueError(f"level {s} not in space") from None

    def _check_mode(self, mode: int) -> None:
        if not 0 <= mode < self.n_modes:
            raise ValueError(f"mode {mode} out of range")

    def _embed(self, atom_op, mode_ops: dict[int, sp.spmatrix]) -> sp.csr_matrix:
        out = sp.csr_matrix(atom_op) if atom_op is not None else sp.identity(self.n_levels, format="csr")
        for k, n in enumerate(self.cutoffs):
            op = mode_ops.get(k, sp.identity(n + 1, format="csr"))
            out = sp.kron(out, op, format="csr")
        return out

    def annihilation(self, mode: int) -> sp.csr_matrix:
        self._check_mode(mode)
        n = self.cutoffs[mode]
        a = sp.diags(np.sqrt(np.arange(1, n + 1, dtype=float)), 1, shape=(n + 1, n + 1), format="csr")
        return self._embed(None, {mode: a})

    def number(self, mode: int) -> sp.csr_matrix:
        a = self.annihilation(mode)
        return (a.T @ a).tocsr()

    def transition(self, to: HyperfineState, frm: HyperfineState) -> sp.csr_matrix:
        """|to><frm| on the atom, identity on the phonons."""
        op = sp.csr_matrix(([1.0], ([self.level_index(to)], [self.level_index(frm)])), shape=(self.n_levels,) * 2)
        return self._embed(op, {})

    def projector(self, s: HyperfineState) -> sp.csr_matrix:
        return self.transition(s, s)

    def index(self, level: HyperfineState, *fock: int) -> int:
        if len(fock) != self.n_modes:
            raise ValueError("one Fock number per mode required")
        return int(np.ravel_multi_index((self.level_index(level),) + tuple(fock), self.dims))

    def ket(self, level: HyperfineState, *fock: int) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index(level, *fock)] = 1.0
        return v

    def identity(self) -> sp.csr_matrix:
        return sp.identity(self.dim, format="csr", dtype=complex)


def build_space(levels: Sequence[HyperfineState], cutoffs: Sequence[int]) -> HilbertSpace:
    return HilbertSpace(tuple(levels), tuple(cutoffs))


def build_jc_hamiltonian(space: HilbertSpace, pair, mode: int, g: float, detuning: float = 0.0) -> sp.csr_matrix:
    """Rotating-frame JC Hamiltonian / hbar: Delta |u><u| + g (S+ a + S- a+), S+ = |u><l|."""
    lower, upper = pair
    Sp = space.transition(upper, lower)
    a = space.annihilation(mode)
    H = g * (Sp @ a + (Sp @ a).conj().T) + detuning * space.projector(upper)
    return sp.csr_matrix(H, dtype=complex)


def build_jc_lab_hamiltonian(
    space: HilbertSpace,
    pair,
    mode: int,
    g: float,
    omega_c: float,
    omega_a: float,
    counter_rotating: bool = False,
) -> sp.csr_matrix:
    """Lab-frame JC Hamiltonian / hbar with the free energies written out explicitly.

    omega_c (n + 1/2) + omega_a |u><u| + g (S+ a + S- a+), optionally plus the
    counter-rotating g (S+ a+ + S- a). Only for short validation runs.
    """
    lower, upper = pair
    n = space.number(mode)
    H = build_jc_hamiltonian(space, pair, mode, g) + omega_c * (n + 0.5 * space.identity()) + omega_a * space.projector(upper)
    if counter_rotating:
        Spad = space.transition(upper, lower) @ space.annihilation(mode).T
        H = H + g * (Spad + Spad.conj().T)
    return sp.csr_matrix(H, dtype=complex)


def build_drive_hamiltonian(space: HilbertSpace, pair, Omega: float, phi: float) -> sp.csr_matrix:
    """(Omega/2) [e^{-i phi} |down><up| + e^{i phi} |up><down|] with pair = (down, up)."""
    down, up = pair
    X = np.exp(-1j * phi) * space.transition(down, up)
    H = 0.5 * Omega * (X + X.conj().T)
    return sp.csr_matrix(H, dtype=complex)


@dataclass(frozen=True)
class LindbladTerm:
    operator: sp.spmatrix
    rate: float  # GKSL coefficient in 1/s

    def __post_init__(self):
        if not self.rate >= 0:
            raise ValueError("Lindblad rate must be non-negative")


def _dense(op) -> np.ndarray:
    return op.toarray() if sp.issparse(op) else np.asarray(op)


def lindblad_rhs(rho: np.ndarray, H, terms: Sequence[LindbladTerm] = ()) -> np.ndarray:
    rho = np.asarray(rho)
    Hd = _dense(H)
    if rho.ndim != 2 or rho.shape != Hd.shape:
        raise ValueError(f"dimension mismatch: rho {rho.shape}, H {Hd.shape}")
    out = -1j * (Hd @ rho - rho @ Hd)
    for t in terms:
        L = _dense(t.operator)
        if L.shape != rho.shape:
            raise ValueError("Lindblad operator dimension mismatch")
        LdL = L.conj().T @ L
        out += t.rate * (L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL))
    return out


class _MasterEquation:
    """Precomputed generator for one piecewise-constant segment."""

    def __init__(self, H, terms: Sequence[LindbladTerm], dim: int):
        use_sparse = dim > 256
        conv = (lambda m: sp.csr_matrix(m, dtype=complex)) if use_sparse else (lambda m: _dense(m).astype(complex))
        Heff = conv(H)
        self.jumps = []
        for t in terms:
            if t.rate == 0:
                continue
            L = conv(t.operator)
            Heff = Heff - 0.5j * t.rate * (L.conj().T @ L)
            self.jumps.append((t.rate, L, L.conj().T))
        self.Heff = Heff
        self.Heff_dag = Heff.conj().T
        self.dim = dim

    def __call__(self, _t, y):
        rho = y.reshape(self.dim, self.dim)
        out = -1j * (self.Heff @ rho) + 1j * (self.Heff_dag.T @ rho.T).T
        for rate, L, Ld in self.jumps:
            out = out + rate * (L @ (Ld.T @ rho.T).T)
        return np.asarray(out).ravel()


class _Schrodinger:
    def __init__(self, H):
        self.H = sp.csr_matrix(H, dtype=complex)

    def __call__(self, _t, y):
        return -1j * (self.H @ y)


@dataclass
class Trajectory:
    times: np.ndarray
    states: list
    labels: list = field(default_factory=list)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def to_density(state: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        return np.outer(state, state.conj())
    return state


def evolve(
    state: np.ndarray,
    segments: Sequence[tuple[float, object]],
    terms: Sequence[LindbladTerm] = (),
    samples_per_segment: int = 0,
    labels: Optional[Sequence[str]] = None,
) -> Trajectory:
    """Integrate through piecewise-constant segments [(duration, H/hbar), ...].

    Pure states stay pure (Schrodinger equation) when no dissipator has a
    non-zero rate; otherwise the state is promoted to a density matrix.
    Samples are returned at every segment boundary plus `samples_per_segment`
    evenly spaced interior points.
    """
    state = np.asarray(state, dtype=complex)
    dim = state.shape[0]
    lossy = any(t.rate > 0 for t in terms)
    if lossy:
        state = to_density(state)
    t0 = 0.0
    times, states, out_labels = [0.0], [state.copy()], ["start"]
    for k, (duration, H) in enumerate(segments):
        if duration < 0:
            raise ValueError("segment durations must be non-negative")
        if H.shape != (dim, dim):
            raise ValueError("Hamiltonian dimension does not match the state")
        label = labels[k] if labels is not None else f"segment{k}"
        if duration == 0:
            times.append(t0)
            states.append(state.copy())
            out_labels.append(label)
            continue
        if state.ndim == 2:
            fun = _MasterEquation(H, terms, dim)
        else:
            fun = _Schrodinger(H)
        t_eval = np.linspace(0.0, duration, samples_per_segment + 2)[1:]
        sol = solve_ivp(fun, (0.0, duration), state.ravel(), method="DOP853", rtol=RTOL, atol=ATOL, t_eval=t_eval)
        if not sol.success:
            raise IntegrationError(f"integration failed in {label} after t={sol.t[-1] if sol.t.size else 0}: {sol.message}")
        for j, tj in enumerate(sol.t):
            times.append(t0 + tj)
            states.append(sol.y[:, j].reshape(state.shape))
            out_labels.append(label)
        state = states[-1]
        t0 += duration
    return Trajectory(np.asarray(times), states, out_labels)


def expectation(op, state: np.ndarray) -> float:
    O = _dense(op)
    if state.ndim == 1:
        return float(np.real(np.vdot(state, O @ state)))
    return float(np.real(np.trace(O @ state)))


def purity(state: np.ndarray) -> float:
    if state.ndim == 1:
        return float(np.real(np.vdot(state, state)) ** 2)
    return float(np.real(np.vdot(state, state)))


def fidelity(rho: np.ndarray, target: np.ndarray) -> float:
    """<psi|rho|psi> for a pure target, Uhlmann (tr sqrt(sqrt(r) s sqrt(r)))^2 otherwise."""
    rho = np.asarray(rho, dtype=complex)
    target = np.asarray(target, dtype=complex)
    if rho.shape[0] != target.shape[0]:
        raise ValueError("dimension mismatch")
    if target.ndim == 1 and rho.ndim == 1:
        return float(abs(np.vdot(target, rho)) ** 2)
    if target.ndim == 1:
        return float(np.real(np.vdot(target, rho @ target)))
    if rho.ndim == 1:
        return float(np.real(np.vdot(rho, target @ rho)))
    s = sqrtm(rho)
    val = np.real(np.trace(sqrtm(s @ target @ s))) ** 2
    return float(min(max(val, 0.0), 1.0))


def partial_trace(state: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Reduced density matrix over the subsystems listed in `keep` (in that order)."""
    dims = list(dims)
    keep = list(keep)
    n = len(dims)
    if not keep or len(set(keep)) != len(keep) or any(not 0 <= k < n for k in keep):
        raise ValueError(f"bad subsystem indices {keep} for {n} subsystems")
    rho = to_density(state)
    if rho.shape[0] != int(np.prod(dims)):
        raise ValueError("dims do not match the state")
    t = rho.reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    row = "".join(chr(97 + i) for i in range(n))
    col = "".join(chr(97 + i) if i in traced else chr(65 + i) for i in range(n))
    out = "".join(chr(97 + k) for k in keep) + "".join(chr(65 + k) for k in keep)
    red = np.einsum(f"{row}{col}->{out}", t)
    d = int(np.prod([dims[k] for k in keep]))
    return red.reshape(d, d)


def thermal_populations(n_bar: float, n_max: int) -> np.ndarray:
    """Boltzmann weights q^n on 0..n_max, with q chosen so the truncated mean is exactly n_bar."""
    if n_bar < 0:
        raise ValueError("n_bar must be non-negative")
    if n_bar == 0:
        p = np.zeros(n_max + 1)
        p[0] = 1.0
        return p
    if n_bar >= n_max / 2:
        raise ValueError("n_bar too large for this Fock cutoff")
    n = np.arange(n_max + 1)

    def weights(x):
        w = np.exp(n * x)
        return w / w.sum()

    # x = ln q; the truncated mean is monotone in x and equals n_max/2 at x = 0
    x = brentq(lambda x: weights(x) @ n - n_bar, -200.0, 0.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return weights(x)


def thermal_state(space: HilbertSpace, mode: int, n_bar: float) -> np.ndarray:
    """Diagonal thermal density matrix of one mode (dimension cutoff + 1)."""
    space._check_mode(mode)
    return np.diag(thermal_populations(n_bar, space.cutoffs[mode])).astype(complex)


def check_state(state: np.ndarray, tol_trace: float = 1e-8, tol_herm: float = 1e-10, tol_eig: float = 1e-9) -> dict:
    """Hygiene numbers for a state; raises ValueError if any bound is violated."""
    if state.ndim == 1:
        nrm = float(np.linalg.norm(state))
        if abs(nrm - 1) > 1e-9:
            raise ValueError(f"pure state norm {nrm}")
        return {"trace_error": abs(nrm**2 - 1), "hermiticity": 0.0, "min_eig": 0.0}
    tr = abs(np.trace(state) - 1)
    herm = float(np.max(np.abs(state - state.conj().T)))
    mine = float(np.min(np.linalg.eigvalsh(0.5 * (state + state.conj().T))))
    info = {"trace_error": float(tr), "hermiticity": herm, "min_eig": mine}
    if tr > tol_trace or herm > tol_herm or mine < -tol_eig:
        raise ValueError(f"invalid density matrix: {info}")
    return info


def write_trajectory_csv(
    fh,
    traj: Trajectory,
    space: HilbertSpace,
    target: Optional[np.ndarray] = None,
) -> None:
    w = csv.writer(fh)
    header = ["time_s"] + [f"P_{s.name}" for s in space.levels] + [f"n_mode{k}" for k in range(space.n_modes)] + ["purity"]
    if target is not None:
        header.append("fidelity")
    w.writerow(header)
    pops = [space.projector(s) for s in space.levels]
    nums = [space.number(k) for k in range(space.n_modes)]
    for t, st in zip(traj.times, traj.states):
        row = [t] + [expectation(P, st) for P in pops] + [expectation(N, st) for N in nums] + [purity(st)]
        if target is not None:
            row.append(fidelity(st, target))
        w.writerow([repr(float(x)) for x in row])
