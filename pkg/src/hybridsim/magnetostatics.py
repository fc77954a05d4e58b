"""Analytic fields of uniformly magnetized rectangular prisms plus a uniform bias.

Coordinates: z = 0 is the atom-side surface of the mirror membrane and +z points
away from the chip toward the atoms, so the cantilever magnets sit at z < 0.

Each prism is treated through its surface pole density sigma = M.n. A rectangular
face carrying uniform sigma has the closed-form field

    H = sigma/(4 pi) * sum_corners s * (-ln(v+R), -ln(u+R), atan(u v / (w R)))

with (u, v, w) the offsets from the corner in face coordinates. Gradients come from
differentiating the same corner terms, so no finite differences are involved.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .physcore import MU_0

__all__ = [
    "Magnet",
    "MagnetAssembly",
    "FieldSample",
    "GeometryError",
    "ChipGeometry",
    "prism_field",
    "prism_field_and_gradient",
    "assembly_field",
    "field_gradient",
    "tip_gradient_Gm",
    "solve_bias_x",
    "default_assembly",
    "trap_point",
]

# Query points closer than this to an edge line or a magnet face are rejected.
SINGULAR_TOL = 1e-12


class GeometryError(ValueError):
    """Field requested inside a magnet or on one of the analytic formula's singular lines."""


def _vec3(x) -> tuple[float, float, float]:
    a = np.asarray(x, dtype=float).reshape(3)
    return (float(a[0]), float(a[1]), float(a[2]))


@dataclass(frozen=True)
class Magnet:
    center: tuple[float, float, float]
    half_extents: tuple[float, float, float]
    magnetization: tuple[float, float, float]  # A/m
    mobile: bool = True  # moves with a cantilever (contributes to G_m)
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center))
        object.__setattr__(self, "half_extents", _vec3(self.half_extents))
        object.__setattr__(self, "magnetization", _vec3(self.magnetization))
        if min(self.half_extents) <= 0:
            raise ValueError(f"half extents must be positive, got {self.half_extents}")

    @property
    def volume(self) -> float:
        hx, hy, hz = self.half_extents
        return 8 * hx * hy * hz

    @property
    def moment(self) -> np.ndarray:
        return np.asarray(self.magnetization) * self.volume

    def shifted(self, offset) -> "Magnet":
        return replace(self, center=tuple(np.asarray(self.center) + np.asarray(offset, dtype=float)))

    def contains(self, p, tol: float = 0.0) -> bool:
        d = np.abs(np.asarray(p, dtype=float) - self.center)
        return bool(np.all(d <= np.asarray(self.half_extents) + tol))


@dataclass(frozen=True)
class MagnetAssembly:
    magnets: tuple[Magnet, ...] = ()
    bias_field: tuple[float, float, float] = (0.0, 0.0, 0.0)  # T

    def __post_init__(self):
        object.__setattr__(self, "magnets", tuple(self.magnets))
        object.__setattr__(self, "bias_field", _vec3(self.bias_field))

    def with_bias(self, bx=None, by=None, bz=None) -> "MagnetAssembly":
        b = list(self.bias_field)
        for i, v in enumerate((bx, by, bz)):
            if v is not None:
                b[i] = float(v)
        return replace(self, bias_field=tuple(b))

    def subset(self, magnets: Sequence[Magnet], keep_bias: bool = False) -> "MagnetAssembly":
        return MagnetAssembly(tuple(magnets), self.bias_field if keep_bias else (0.0, 0.0, 0.0))

    def shifted(self, offset) -> "MagnetAssembly":
        return replace(self, magnets=tuple(m.shifted(offset) for m in self.magnets))

    @property
    def mobile(self) -> tuple[Magnet, ...]:
        return tuple(m for m in self.magnets if m.mobile)


@dataclass(frozen=True)
class FieldSample:
    B: np.ndarray  # T
    grad_B_tensor: np.ndarray  # T/m, [i, j] = dB_i/dx_j
    grad_Bmag: np.ndarray  # T/m

    @property
    def Bmag(self) -> float:
        return float(np.linalg.norm(self.B))


# ---------------------------------------------------------------------------
# single charged face, vectorized over (..., corners)


def _log_sum(a, b, c, R):
    """ln(a + R) with R = sqrt(a^2 + b^2 + c^2), stable for a < 0."""
    bc = b * b + c * c
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = np.log(a + R)
        neg = np.log(bc) - np.log(R - a)
    return np.where(a >= 0, pos, neg)


def _inv_sum(a, b, c, R):
    """1 / (a + R), stable for a < 0."""
    bc = b * b + c * c
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = 1.0 / (a + R)
        neg = (R - a) / bc
    return np.where(a >= 0, pos, neg)


def _face_terms(u, v, w, want_grad):
    R = np.sqrt(u * u + v * v + w * w)
    Fx = -_log_sum(v, u, w, R)
    Fy = -_log_sum(u, v, w, R)
    with np.errstate(divide="ignore", invalid="ignore"):
        Fz = np.where(w != 0, np.arctan(u * v / (w * R)), 0.0)
    F = np.stack([Fx, Fy, Fz], axis=-1)
    if not want_grad:
        return F, None
    iv = _inv_sum(v, u, w, R)
    iu = _inv_sum(u, v, w, R)
    uw2 = u * u + w * w
    vw2 = v * v + w * w
    with np.errstate(divide="ignore", invalid="ignore"):
        dFx = [-u * iv / R, -1.0 / R, -w * iv / R]
        dFy = [-1.0 / R, -v * iu / R, -w * iu / R]
        dFz = [
            v * w / (uw2 * R),
            u * w / (vw2 * R),
            -u * v * (R * R + w * w) / (R * uw2 * vw2),
        ]
    dF = np.stack([np.stack(dFx, -1), np.stack(dFy, -1), np.stack(dFz, -1)], axis=-2)
    return F, dF


_PERMS = {2: (0, 1, 2), 0: (1, 2, 0), 1: (2, 0, 1)}
_CORNER_SIGNS = np.array([1.0, -1.0, -1.0, 1.0])


def _check_point(m: Magnet, p: np.ndarray) -> None:
    rel = np.abs(p - np.asarray(m.center))
    he = np.asarray(m.half_extents)
    gap = rel - he  # > 0 means outside the slab along that axis
    inside = np.all(gap <= SINGULAR_TOL, axis=-1)
    if np.any(inside):
        raise GeometryError(f"point inside or on the surface of magnet {m.name or m.center}")
    on_plane = np.abs(gap) <= SINGULAR_TOL
    edge = np.sum(on_plane, axis=-1) >= 2
    if np.any(edge):
        raise GeometryError("point lies on the extension of a magnet edge (formula singular)")


def prism_field_and_gradient(m: Magnet, p, want_grad: bool = True):
    """Return (B, dB/dx) of one prism at point(s) p with shape (..., 3)."""
    p = np.asarray(p, dtype=float)
    _check_point(m, p)
    rel = p - np.asarray(m.center)
    he = np.asarray(m.half_extents)
    B = np.zeros(p.shape)
    G = np.zeros(p.shape + (3,)) if want_grad else None
    for k in range(3):
        Mk = m.magnetization[k]
        if Mk == 0.0:
            continue
        perm = _PERMS[k]
        a, b, c = (rel[..., perm[i]] for i in range(3))
        ha, hb, hc = (he[perm[i]] for i in range(3))
        # corner offsets in the face plane; order matches _CORNER_SIGNS
        u = np.stack([a + ha, a + ha, a - ha, a - ha], axis=-1)
        v = np.stack([b + hb, b - hb, b + hb, b - hb], axis=-1)
        Hloc = np.zeros(p.shape)
        Gloc = np.zeros(p.shape + (3,)) if want_grad else None
        for face_c, sigma in ((hc, Mk), (-hc, -Mk)):
            w = np.broadcast_to((c - face_c)[..., None], u.shape)
            F, dF = _face_terms(u, v, w, want_grad)
            Hloc += sigma * np.einsum("...ci,c->...i", F, _CORNER_SIGNS)
            if want_grad:
                Gloc += sigma * np.einsum("...cij,c->...ij", dF, _CORNER_SIGNS)
        Hloc /= 4 * np.pi
        idx = list(perm)
        B[..., idx] += MU_0 * Hloc
        if want_grad:
            Gloc /= 4 * np.pi
            for i in range(3):
                for j in range(3):
                    G[..., idx[i], idx[j]] += MU_0 * Gloc[..., i, j]
    if not np.all(np.isfinite(B)) or (want_grad and not np.all(np.isfinite(G))):
        raise GeometryError("field evaluation hit a singular point of the closed-form expression")
    return B, G


def prism_field(m: Magnet, p) -> np.ndarray:
    """Field (T) of a uniformly magnetized prism at exterior point(s) p."""
    return prism_field_and_gradient(m, p, want_grad=False)[0]


def assembly_field(a: MagnetAssembly, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    B = np.broadcast_to(np.asarray(a.bias_field), p.shape).copy()
    for m in a.magnets:
        B += prism_field(m, p)
    return B


def field_gradient(a: MagnetAssembly, p) -> FieldSample:
    p = np.asarray(p, dtype=float).reshape(3)
    B = np.asarray(a.bias_field, dtype=float).copy()
    G = np.zeros((3, 3))
    for m in a.magnets:
        b, g = prism_field_and_gradient(m, p)
        B += b
        G += g
    Bmag = np.linalg.norm(B)
    grad_mag = G.T @ B / Bmag if Bmag > 0 else np.zeros(3)
    return FieldSample(B=B, grad_B_tensor=G, grad_Bmag=grad_mag)


def _nearest_mobile(a: MagnetAssembly, p) -> Optional[Magnet]:
    mob = a.mobile
    if not mob:
        return None
    p = np.asarray(p, dtype=float)
    return min(mob, key=lambda m: float(np.hypot(*(p[:2] - np.asarray(m.center[:2])))))


def tip_gradient_Gm(
    a: MagnetAssembly,
    atom_position,
    motion_axis=(0.0, 0.0, 1.0),
    tip: Optional[Magnet] = None,
    quantization_axis=None,
) -> float:
    """Coupling gradient G_m (T/m) of a cantilever tip at the atom.

    G_m is the magnitude of the part of d B_tip / d(motion_axis) that is
    perpendicular to the quantization axis: displacing the tip modulates this
    transverse field at the cantilever frequency, which is what drives the
    Delta m_F = +-1 transitions. The longitudinal part only modulates the Larmor
    frequency and drops out under the rotating-wave approximation.

    `tip` defaults to the mobile magnet laterally closest to the atom and the
    quantization axis to the direction of the total static field there.
    """
    p = np.asarray(atom_position, dtype=float).reshape(3)
    n = np.asarray(motion_axis, dtype=float)
    n = n / np.linalg.norm(n)
    tip = tip if tip is not None else _nearest_mobile(a, p)
    if tip is None:
        return 0.0
    _, G = prism_field_and_gradient(tip, p)
    D = G @ n
    if quantization_axis is None:
        Btot = assembly_field(a, p)
        if np.linalg.norm(Btot) == 0:
            raise ValueError("total field vanishes at the atom: no quantization axis")
        q = Btot / np.linalg.norm(Btot)
    else:
        q = np.asarray(quantization_axis, dtype=float)
        q = q / np.linalg.norm(q)
    D_perp = D - np.dot(D, q) * q
    return float(np.linalg.norm(D_perp))


def solve_bias_x(a: MagnetAssembly, p) -> float:
    """Uniform B_x (T) that makes the total B_x vanish at p (replaces any existing x bias)."""
    Bx_magnets = float(assembly_field(a, p)[0]) - a.bias_field[0]
    return -Bx_magnets


# ---------------------------------------------------------------------------
# chip geometry


@dataclass(frozen=True)
class ChipGeometry:
    """Layout parameters for the cantilever/compensation-magnet array (SI units)."""

    tip_size: tuple[float, float, float] = (700e-9, 200e-9, 150e-9)
    comp_size: tuple[float, float, float] = (5.1e-6, 200e-9, 150e-9)
    comp_gap: float = 100e-9  # x-separation between tip and compensation magnet
    magnetization: float = 1e6  # A/m, along +x
    gap_r: float = 250e-9  # magnet face to membrane
    membrane_h: float = 150e-9  # 120 nm membrane + 30 nm Pt
    lambda_eff: float = 1.5e-6
    lattice_j: int = 8
    n_cantilevers: int = 3
    bias_y: float = 160e-6
    comp_polarity: Optional[int] = None  # None: pick the sign minimizing |grad B| at the trap

    @property
    def pitch(self) -> float:
        return self.lattice_j * self.lambda_eff / 2

    @property
    def magnet_z_center(self) -> float:
        return -(self.membrane_h + self.gap_r + self.tip_size[2] / 2)


def trap_point(d: float, site: int = 0, geometry: ChipGeometry = ChipGeometry()) -> np.ndarray:
    """Lattice-site position at height d above the membrane, over cantilever `site` (0 = central)."""
    return np.array([site * geometry.pitch, 0.0, d])


def _array_magnets(g: ChipGeometry, polarity: int) -> list[Magnet]:
    n = g.n_cantilevers
    xs = [(i - (n - 1) / 2) * g.pitch for i in range(n)]
    zc = g.magnet_z_center
    tip_h = np.asarray(g.tip_size) / 2
    comp_h = np.asarray(g.comp_size) / 2
    M = (g.magnetization, 0.0, 0.0)
    Mc = (polarity * g.magnetization, 0.0, 0.0)
    mags = [Magnet((x, 0.0, zc), tip_h, M, mobile=True, name=f"tip{i}") for i, x in enumerate(xs)]
    offset = tip_h[0] + g.comp_gap + comp_h[0]
    comp_x = [xs[0] - offset]
    comp_x += [(xs[i] + xs[i + 1]) / 2 for i in range(n - 1)]
    comp_x.append(xs[-1] + offset)
    comps = [Magnet((x, 0.0, zc), comp_h, Mc, mobile=False, name=f"comp{i}") for i, x in enumerate(comp_x)]
    for c in comps:
        for t in mags:
            if abs(c.center[0] - t.center[0]) < comp_h[0] + tip_h[0]:
                raise ValueError("compensation magnets overlap the cantilever tips for this pitch")
    return mags + comps


def default_assembly(d: float = 375e-9, geometry: ChipGeometry = ChipGeometry(), solve_bias: bool = True) -> MagnetAssembly:
    """Array of cantilever tips with gradient-compensation magnets and bias fields.

    The x bias is solved so that B_x vanishes at the central trap site at height d.
    """
    p = trap_point(d, 0, geometry)
    polarity = geometry.comp_polarity
    if polarity is None:
        norms = {}
        for s in (1, -1):
            fs = field_gradient(MagnetAssembly(_array_magnets(geometry, s)), p)
            norms[s] = np.linalg.norm(fs.grad_B_tensor)
        polarity = min(norms, key=norms.get)
    a = MagnetAssembly(_array_magnets(geometry, polarity), (0.0, geometry.bias_y, 0.0))
    if solve_bias:
        a = a.with_bias(bx=solve_bias_x(a, p))
    return a
