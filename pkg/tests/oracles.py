"""Independent reference calculations used only by the tests."""
import numpy as np

from hybridsim.physcore import H, MU_B, MU_0, RB87


def spin_matrices(j):
    m = np.arange(j, -j - 1, -1)
    jp = np.diag(np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1)), 1)
    jx = (jp + jp.T) / 2
    jy = (jp - jp.T) / (2j)
    jz = np.diag(m)
    return jx, jy, jz


def hyperfine_zeeman_levels(B, atom=RB87, g_I=None):
    """Eigenvalues of A I.J + mu_B B (g_J J_z + g_I I_z), labelled by (F, m_F).

    Labels come from adiabatic continuation: at each total m = m_I + m_J the
    upper eigenvalue belongs to F=2 (except the stretched states, which are
    1-dimensional blocks).
    """
    g_I = atom.g_I if g_I is None else g_I
    I, J = atom.nuclear_spin, 0.5
    dE = H * atom.hyperfine_splitting
    A = dE / (I + 0.5)
    Ix, Iy, Iz = spin_matrices(I)
    Jx, Jy, Jz = spin_matrices(J)
    eyeI, eyeJ = np.eye(int(2 * I + 1)), np.eye(2)
    IdotJ = sum(np.kron(a, b) for a, b in ((Ix, Jx), (Iy, Jy), (Iz, Jz)))
    Hm = A * np.real(IdotJ) + MU_B * B * (atom.g_J * np.kron(eyeI, Jz) + g_I * np.kron(Iz, eyeJ))
    mtot = np.real(np.diag(np.kron(Iz, eyeJ) + np.kron(eyeI, Jz)))
    out = {}
    for m in np.unique(mtot):
        idx = np.where(np.isclose(mtot, m))[0]
        ev = np.sort(np.linalg.eigvalsh(Hm[np.ix_(idx, idx)]))
        mi = int(round(m))
        if len(ev) == 1:
            out[(2, mi)] = ev[0]
        else:
            out[(1, mi)], out[(2, mi)] = ev[0], ev[1]
    return out


def dipole_sum_field(magnet, p, n=50):
    """Field of a uniformly magnetized box approximated by n^3 point dipoles."""
    c = np.asarray(magnet.center)
    h = np.asarray(magnet.half_extents)
    M = np.asarray(magnet.magnetization)
    axes = [c[i] + h[i] * ((np.arange(n) + 0.5) / n * 2 - 1) for i in range(3)]
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    src = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
    m = M * (8 * h.prod()) / n**3
    r = np.asarray(p, dtype=float) - src
    rn = np.linalg.norm(r, axis=1)
    rhat = r / rn[:, None]
    B = MU_0 / (4 * np.pi) * (3 * rhat * (rhat @ m)[:, None] - m) / rn[:, None] ** 3
    return B.sum(axis=0)


def cnot_oracle():
    """Spin operator on (down, up) for phonon 0 and phonon 1, composed from the three pulses by hand.

    pi/2 drive with phase phi: exp(-i (pi/4) (e^{-i phi}|d><u| + h.c.)).
    2pi JC pulse: identity for phonon 0, diag(1, -1) for phonon 1 (only |up,1> is coupled).
    """
    def drive(phi):
        s = np.array([[0, np.exp(-1j * phi)], [np.exp(1j * phi), 0]])  # basis (down, up)
        return np.cos(np.pi / 4) * np.eye(2) - 1j * np.sin(np.pi / 4) * s

    R1, R2 = drive(np.pi / 2), drive(-np.pi / 2)
    U0 = R2 @ np.eye(2) @ R1
    U1 = R2 @ np.diag([1, -1]) @ R1
    return U0, U1
