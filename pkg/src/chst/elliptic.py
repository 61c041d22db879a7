"""Per-wavenumber elliptic solvers on the staggered channel grid.

Every problem decouples in the Fourier index k.  For k != 0 the shifted
Stokes system

    (lam - nu Lap_h) u + grad_h p = f,   div_h u = 0,

is assembled as a banded matrix with unknowns interleaved as
(u1_{1/2}, p_{1/2}, u2_1, u1_{3/2}, p_{3/2}, u2_2, ...), which gives three
sub- and three super-diagonals, and factorized once with LAPACK ``zgbtrf``.
For k = 0 the vertical velocity vanishes identically, ``u1`` solves a
tridiagonal problem and the pressure is recovered by vertical integration
and normalized to zero mean.

Wall rows: ``u1 = 0`` at z = 0 (ghost ``-u1_{1/2}``), ``d_z u1 = g`` at
z = a (ghost ``u1_{n-1/2} + dz g``), ``u2 = 0`` at both walls.
Only k >= 0 is solved; negative wavenumbers are filled by conjugate
symmetry and the Nyquist mode is set to zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import solve_banded
from scipy.linalg.lapack import zgbtrf, zgbtrs

from .fields import BoundaryField, ScalarField, VelocityField
from .grid import (
    Closure,
    Grid,
    ddz_center_to_interior,
    ddz_center_to_node,
    ddz_node_to_center,
)

__all__ = [
    "ModeSystem",
    "StokesSolver",
    "laplacian",
    "pressure_gradient",
    "helmholtz_project",
    "helmholtz_potential",
    "stokes_resolvent",
    "stokes_solve",
    "neumann_map",
    "steady_stokes",
    "stokes_operator",
    "stokes_residual",
    "stokes_eigenmodes",
]

_KL = _KU = 3


def _hermitian_fill(out: np.ndarray, grid: Grid) -> np.ndarray:
    """Overwrite negative wavenumbers with conjugates of the positive ones."""
    n = grid.n_x
    half = n // 2
    out[half] = 0.0
    out[half + 1:] = np.conj(out[1:half][::-1])
    out[0] = out[0].real
    return out


def _shear_coefs(g, grid: Grid) -> np.ndarray:
    if g is None:
        return np.zeros(grid.n_x, complex)
    vals = g.values if isinstance(g, BoundaryField) else np.asarray(g, dtype=complex)
    if vals.shape != (grid.n_x,):
        raise ValueError(f"dimension mismatch: boundary datum has length {vals.shape}, grid has n_x={grid.n_x}")
    return vals


# --- explicit operators (independent of the factorized systems) ---------


def laplacian(u: VelocityField, shear=None) -> VelocityField:
    """Discrete vector Laplacian with the channel's wall closures.

    ``shear`` is the top-wall Neumann datum of ``u1``; default is the datum
    carried by ``u`` (zero when absent).
    """
    g = u.grid
    if shear is None:
        shear = u.shear if u.shear is not None else 0.0
    else:
        shear = _shear_coefs(shear, g)
    ik2 = (g.ik ** 2).real[:, None]
    d1 = ddz_center_to_node(u.u1, g, lower=Closure("dirichlet", 0.0), upper=Closure("neumann", shear))
    l1 = ik2 * u.u1 + ddz_node_to_center(d1, g)
    l2 = np.zeros_like(u.u2)
    l2[:, 1:-1] = ik2 * u.u2[:, 1:-1] + ddz_center_to_interior(ddz_node_to_center(u.u2, g), g)
    return VelocityField(l1, l2, g, u.t)


def pressure_gradient(p: ScalarField) -> VelocityField:
    if p.layout != "center":
        raise ValueError("pressure must live at cell centers")
    g = p.grid
    g2 = np.zeros((g.n_x, g.n_z + 1), complex)
    g2[:, 1:-1] = ddz_center_to_interior(p.values, g)
    return VelocityField(g.ik[:, None] * p.values, g2, g, p.t)


# --- Helmholtz projection -------------------------------------------------


def _thomas(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Batched tridiagonal solve along the last axis (no pivoting).

    ``lower``/``upper`` are scalars per batch row; ``diag`` has the full
    last-axis length.  Only used for diagonally dominant systems.
    """
    n = rhs.shape[-1]
    c = np.empty_like(rhs)
    d = np.empty_like(rhs)
    denom = diag[..., 0]
    c[..., 0] = upper / denom
    d[..., 0] = rhs[..., 0] / denom
    for i in range(1, n):
        denom = diag[..., i] - lower * c[..., i - 1]
        c[..., i] = upper / denom
        d[..., i] = (rhs[..., i] - lower * d[..., i - 1]) / denom
    x = np.empty_like(rhs)
    x[..., -1] = d[..., -1]
    for i in range(n - 2, -1, -1):
        x[..., i] = d[..., i] - c[..., i] * x[..., i + 1]
    return x


def helmholtz_potential(f: VelocityField) -> ScalarField:
    """Potential psi with Lap_h psi = div_h f and zero normal flux, mean zero."""
    g = f.grid
    dz2 = g.dz ** 2
    half = g.n_x // 2
    rhs = g.ik[:, None] * f.u1 + ddz_node_to_center(f.u2, g)
    psi = np.zeros((g.n_x, g.n_z), complex)
    m = np.arange(1, half)
    if m.size:
        k2 = g.k2[m][:, None]
        diag = np.broadcast_to(-k2 - 2.0 / dz2, (m.size, g.n_z)).astype(complex).copy()
        diag[:, 0] += 1.0 / dz2
        diag[:, -1] += 1.0 / dz2
        off = np.full((m.size, 1), 1.0 / dz2)
        psi[m] = _thomas(off[:, 0], diag, off[:, 0], rhs[m])
    # k = 0: d_z psi = f2 at interior nodes, zero flux at the walls
    col = np.concatenate([[0.0], np.cumsum(f.u2[0, 1:-1].real * g.dz)])
    psi[0] = col - col.mean()
    _hermitian_fill(psi, g)
    return ScalarField(psi, "center", g, f.t)


def helmholtz_project(f: VelocityField) -> VelocityField:
    """Discrete Leray projection f - grad_h psi_f (flagged solenoidal)."""
    g = f.grid
    psi = helmholtz_potential(f)
    grad = pressure_gradient(psi)
    u1 = f.u1 - grad.u1
    u2 = f.u2 - grad.u2
    # modes the potential cannot reach: Nyquist (d/dx symbol is zero) and
    # the k = 0 vertical component (forced to zero by zero flux)
    u1[g.nyquist] = 0.0
    u2[g.nyquist] = 0.0
    u2[0] = 0.0
    return VelocityField(u1, u2, g, f.t, solenoidal=True)


# --- shifted Stokes systems -----------------------------------------------


def _iu1(j):
    return 3 * j


def _ip(j):
    return 3 * j + 1


def _iu2(j):
    # node j = 1..n_z-1
    return 3 * j - 1


@dataclass(frozen=True)
class ModeSystem:
    """Factorized banded saddle-point system for one wavenumber k != 0."""

    k: int
    lam: float
    nu: float
    n_z: int
    dz: float
    lu: np.ndarray
    piv: np.ndarray

    @classmethod
    def assemble(cls, k: int, lam: float, nu: float, n_z: int, dz: float) -> "ModeSystem":
        n = 3 * n_z - 1
        ab = np.zeros((2 * _KL + _KU + 1, n), complex)

        def put(i, j, val):
            ab[_KL + _KU + i - j, j] += val

        ik = 1j * k
        s = nu / dz ** 2
        base = lam + nu * k * k
        for j in range(n_z):
            r = _iu1(j)
            wall = 3.0 if j == 0 else (1.0 if j == n_z - 1 else 2.0)
            put(r, r, base + wall * s)
            if j > 0:
                put(r, _iu1(j - 1), -s)
            if j < n_z - 1:
                put(r, _iu1(j + 1), -s)
            put(r, _ip(j), ik)
            r = _ip(j)
            put(r, _iu1(j), ik)
            if j + 1 <= n_z - 1:
                put(r, _iu2(j + 1), 1.0 / dz)
            if j >= 1:
                put(r, _iu2(j), -1.0 / dz)
        for j in range(1, n_z):
            r = _iu2(j)
            put(r, r, base + 2.0 * s)
            if j > 1:
                put(r, _iu2(j - 1), -s)
            if j < n_z - 1:
                put(r, _iu2(j + 1), -s)
            put(r, _ip(j), 1.0 / dz)
            put(r, _ip(j - 1), -1.0 / dz)
        lu, piv, info = zgbtrf(ab, _KL, _KU)
        if info != 0:
            raise np.linalg.LinAlgError(f"singular Stokes mode system at k={k} (info={info})")
        return cls(k, lam, nu, n_z, dz, lu, piv)

    def solve(self, f1: np.ndarray, f2_interior: np.ndarray, g: complex) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        n_z = self.n_z
        rhs = np.zeros(3 * n_z - 1, complex)
        rhs[0::3] = f1
        rhs[_iu1(n_z - 1)] += self.nu * g / self.dz
        rhs[2::3] = f2_interior
        x, info = zgbtrs(self.lu, _KL, _KU, rhs, self.piv)
        if info != 0:
            raise np.linalg.LinAlgError(f"banded solve failed at k={self.k}")
        return x[0::3], x[2::3], x[1::3]


class StokesSolver:
    """All mode systems of (lam - nu Lap_h) u + grad_h p = f for one grid."""

    def __init__(self, grid: Grid, lam: float = 0.0, nu: float = 1.0):
        if not (np.isfinite(lam) and lam >= 0):
            raise ValueError(f"lam must be finite and nonnegative, got {lam!r}")
        if not (np.isfinite(nu) and nu > 0):
            raise ValueError(f"nu must be finite and positive, got {nu!r}")
        self.grid = grid
        self.lam = float(lam)
        self.nu = float(nu)
        half = grid.n_x // 2
        self.modes = [ModeSystem.assemble(m, self.lam, self.nu, grid.n_z, grid.dz) for m in range(1, half)]
        s = self.nu / grid.dz ** 2
        diag = np.full(grid.n_z, self.lam + 2 * s)
        diag[0] = self.lam + 3 * s
        diag[-1] = self.lam + s
        self._mode0 = np.vstack([np.full(grid.n_z, -s), diag, np.full(grid.n_z, -s)])

    def solve(self, f1: np.ndarray, f2: np.ndarray, g: Optional[np.ndarray] = None):
        """Solve for coefficient arrays; returns (u1, u2, p)."""
        grid = self.grid
        n_z = grid.n_z
        g = np.zeros(grid.n_x, complex) if g is None else g
        u1 = np.zeros((grid.n_x, n_z), complex)
        u2 = np.zeros((grid.n_x, n_z + 1), complex)
        p = np.zeros((grid.n_x, n_z), complex)
        for sys_ in self.modes:
            m = sys_.k
            u1[m], u2[m, 1:-1], p[m] = sys_.solve(f1[m], f2[m, 1:-1], g[m])
        rhs0 = f1[0].real.copy()
        rhs0[-1] += self.nu * g[0].real / grid.dz
        u1[0] = solve_banded((1, 1), self._mode0, rhs0)
        col = np.concatenate([[0.0], np.cumsum(f2[0, 1:-1].real * grid.dz)])
        p[0] = col - col.mean()
        for arr in (u1, u2, p):
            _hermitian_fill(arr, grid)
        return u1, u2, p


@lru_cache(maxsize=64)
def _cached_solver(grid: Grid, lam: float, nu: float) -> StokesSolver:
    return StokesSolver(grid, lam, nu)


def get_solver(grid: Grid, lam: float, nu: float = 1.0) -> StokesSolver:
    if not np.isfinite(lam):
        raise ValueError(f"lam must be finite, got {lam!r}")
    return _cached_solver(grid, float(lam), float(nu))


def stokes_solve(
    f: Optional[VelocityField], lam: float, g=None, nu: float = 1.0, grid: Optional[Grid] = None
) -> Tuple[VelocityField, ScalarField]:
    """Velocity and mean-zero pressure of the shifted Stokes problem."""
    if f is None and grid is None:
        raise ValueError("stokes_solve needs a forcing field or a grid")
    grid = f.grid if f is not None else grid
    if f is None:
        f1 = np.zeros((grid.n_x, grid.n_z), complex)
        f2 = np.zeros((grid.n_x, grid.n_z + 1), complex)
        t = 0.0
    else:
        f1, f2, t = f.u1, f.u2, f.t
    gc = _shear_coefs(g, grid)
    u1, u2, p = get_solver(grid, lam, nu).solve(f1, f2, gc)
    shear = gc.copy() if np.any(gc) else None
    u = VelocityField(u1, u2, grid, t, solenoidal=True, shear=shear)
    return u, ScalarField(p, "center", grid, t)


def stokes_resolvent(f: VelocityField, lam: float, g=None, nu: float = 1.0) -> VelocityField:
    """Solve (lam - nu Lap_h) u + grad p = f, div u = 0, d_z u1 = g on top."""
    return stokes_solve(f, lam, g, nu)[0]


def neumann_map(g: BoundaryField, grid: Grid, nu: float = 1.0) -> Tuple[VelocityField, ScalarField]:
    """Steady Stokes flow driven only by the top-wall shear datum ``g``."""
    return stokes_solve(None, 0.0, g, nu, grid=grid)


def steady_stokes(f: VelocityField, nu: float = 1.0) -> Tuple[VelocityField, ScalarField]:
    """Steady Stokes problem with homogeneous wall data."""
    return stokes_solve(f, 0.0, None, nu)


def stokes_operator(u: VelocityField, nu: float = 1.0) -> VelocityField:
    """Discrete Stokes operator A u = -P_h (nu Lap_h u), homogeneous closures."""
    lap = laplacian(u, shear=np.zeros(u.grid.n_x))
    return helmholtz_project(lap * (-nu))


def stokes_residual(
    u: VelocityField, p: ScalarField, f: Optional[VelocityField], lam: float, g=None, nu: float = 1.0
) -> Tuple[float, float]:
    """Max-norm residuals (momentum, continuity) of a shifted Stokes solution.

    Uses :func:`laplacian` and :func:`pressure_gradient`, not the banded
    assembly, so it checks the factorized systems independently.
    """
    grid = u.grid
    gc = _shear_coefs(g, grid)
    lap = laplacian(u, shear=gc)
    gp = pressure_gradient(p)
    r1 = lam * u.u1 - nu * lap.u1 + gp.u1
    r2 = lam * u.u2 - nu * lap.u2 + gp.u2
    if f is not None:
        r1 = r1 - f.u1
        r2 = r2 - f.u2
    keep = np.ones(grid.n_x, bool)
    keep[grid.nyquist] = False
    mom = max(np.max(np.abs(r1[keep])), np.max(np.abs(r2[keep][:, 1:-1])))
    div = grid.ik[:, None] * u.u1 + ddz_node_to_center(u.u2, grid)
    return float(mom), float(np.max(np.abs(div)))


def stokes_eigenmodes(grid: Grid, k: int, nu: float = 1.0) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Eigenpairs of the discrete Stokes operator restricted to wavenumber k >= 0.

    Returns (eigenvalues ascending, u1 profiles, u2 profiles); profile i is
    the i-th column, normalized so that dz * sum |u|^2 = 1 over the column.
    """
    if not 0 <= k < grid.n_x // 2:
        raise ValueError(f"wavenumber must satisfy 0 <= k < n_x/2, got {k}")
    n_z, dz = grid.n_z, grid.dz
    s = 1.0 / dz ** 2
    lz1 = np.diag(np.full(n_z, -2 * s)) + np.diag(np.full(n_z - 1, s), 1) + np.diag(np.full(n_z - 1, s), -1)
    lz1[0, 0] = -3 * s
    lz1[-1, -1] = -s
    if k == 0:
        lam, vec = np.linalg.eigh(-nu * lz1)
        return lam, vec / np.sqrt(dz), np.zeros((n_z - 1, n_z))
    m = n_z - 1
    lz2 = np.diag(np.full(m, -2 * s)) + np.diag(np.full(m - 1, s), 1) + np.diag(np.full(m - 1, s), -1)
    lap = np.zeros((n_z + m, n_z + m), complex)
    lap[:n_z, :n_z] = lz1 - k * k * np.eye(n_z)
    lap[n_z:, n_z:] = lz2 - k * k * np.eye(m)
    # divergence: i k u1_c + (u2_{c+1} - u2_c)/dz with wall u2 = 0
    dn = np.zeros((n_z, m))
    for c in range(n_z):
        if c < m:
            dn[c, c] += 1.0 / dz
        if c >= 1:
            dn[c, c - 1] -= 1.0 / dz
    div = np.hstack([1j * k * np.eye(n_z), dn.astype(complex)])
    # orthonormal basis of the discrete solenoidal subspace
    _, sv, vh = np.linalg.svd(div)
    rank = int(np.sum(sv > sv.max() * 1e-12))
    basis = vh[rank:].conj().T
    a_red = basis.conj().T @ (-nu * lap) @ basis
    a_red = 0.5 * (a_red + a_red.conj().T)
    lam, vec = np.linalg.eigh(a_red)
    full = basis @ vec / np.sqrt(dz)
    return lam, full[:n_z], full[n_z:]
