"""Field containers, norms, curl/divergence and the advection trilinear form.

All containers hold Fourier-x coefficients (FFT order, axis 0) and a
z-layout on the staggered grid of :mod:`chst.grid`.  The discrete inner
product is

    <f, g> = 2*pi * sum_k Re(f_k conj(g_k)) * dz * sum_z (...)

with midpoint weights at centers and trapezoid weights at nodes (the wall
values of the vertical velocity are zero, so only interior nodes count).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from .grid import (
    Closure,
    Grid,
    avg_center_to_interior,
    avg_node_to_center,
    ddx,
    ddz_center_to_interior,
    ddz_center_to_node,
    ddz_node_to_center,
    dealias_23,
    interior_to_nodes,
    inverse_transform_x,
    transform_x,
)

__all__ = [
    "VelocityField",
    "ScalarField",
    "BoundaryField",
    "inner",
    "norm_L2",
    "norm_H1",
    "grad_norm_sq",
    "norm_L4",
    "curl",
    "divergence",
    "besov_boundary_norm",
    "trilinear_b",
    "trilinear_quadrature",
    "advection",
    "random_velocity",
    "zero_velocity",
]

TWO_PI = 2.0 * np.pi


@dataclass
class BoundaryField:
    """Function on the top wall, stored as Fourier coefficients."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.ndim != 1:
            raise ValueError("BoundaryField values must be one-dimensional")

    @property
    def n_x(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_physical(cls, samples) -> "BoundaryField":
        return cls(transform_x(np.asarray(samples, dtype=float)))

    @classmethod
    def constant(cls, n_x: int, c: float) -> "BoundaryField":
        v = np.zeros(n_x, dtype=complex)
        v[0] = c
        return cls(v)

    @classmethod
    def cosine(cls, n_x: int, k: int, amplitude: float = 1.0) -> "BoundaryField":
        x = np.arange(n_x) * TWO_PI / n_x
        return cls.from_physical(amplitude * np.cos(k * x))

    def physical(self, n_x: Optional[int] = None) -> np.ndarray:
        return inverse_transform_x(self.values, n_x)

    def __add__(self, other: "BoundaryField") -> "BoundaryField":
        return BoundaryField(self.values + other.values)

    def __mul__(self, c: float) -> "BoundaryField":
        return BoundaryField(self.values * c)

    __rmul__ = __mul__


@dataclass
class ScalarField:
    """Scalar on centers (``layout="center"``) or nodes (``layout="node"``).

    ``untrusted`` lists z-rows filled by extrapolation rather than by the
    operator itself.
    """

    values: np.ndarray
    layout: str
    grid: Grid
    t: float = 0.0
    untrusted: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.layout not in ("center", "node"):
            raise ValueError(f"layout must be 'center' or 'node', got {self.layout!r}")
        nz = self.grid.n_z if self.layout == "center" else self.grid.n_z + 1
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.n_x, nz):
            raise ValueError(
                f"dimension mismatch: expected {(self.grid.n_x, nz)}, got {self.values.shape}"
            )

    def physical(self) -> np.ndarray:
        return inverse_transform_x(self.values)


@dataclass
class VelocityField:
    """Two-component velocity on the staggered grid.

    ``u1`` has shape (n_x, n_z) at centers, ``u2`` has shape (n_x, n_z + 1)
    at nodes with zero wall rows.  ``shear`` optionally records the top-wall
    Neumann datum of ``u1`` (coefficients, length n_x) that the field was
    built with; ``None`` means homogeneous.
    """

    u1: np.ndarray
    u2: np.ndarray
    grid: Grid
    t: float = 0.0
    solenoidal: bool = False
    shear: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        g = self.grid
        self.u1 = np.asarray(self.u1, dtype=complex)
        self.u2 = np.asarray(self.u2, dtype=complex)
        if self.u1.shape != (g.n_x, g.n_z):
            raise ValueError(f"dimension mismatch: u1 must be {(g.n_x, g.n_z)}, got {self.u1.shape}")
        if self.u2.shape != (g.n_x, g.n_z + 1):
            raise ValueError(
                f"dimension mismatch: u2 must be {(g.n_x, g.n_z + 1)}, got {self.u2.shape}"
            )
        if np.any(self.u2[:, 0] != 0) or np.any(self.u2[:, -1] != 0):
            raise ValueError("u2 must vanish at both walls")
        if self.shear is not None:
            self.shear = np.asarray(self.shear, dtype=complex)
            if self.shear.shape != (g.n_x,):
                raise ValueError("shear datum must have length n_x")

    # value-type arithmetic -------------------------------------------------

    def _combine(self, other: "VelocityField", sign: float) -> "VelocityField":
        if other.grid != self.grid:
            raise ValueError("dimension mismatch: fields live on different grids")
        if self.shear is None and other.shear is None:
            shear = None
        else:
            s0 = self.shear if self.shear is not None else 0.0
            s1 = other.shear if other.shear is not None else 0.0
            shear = s0 + sign * s1
        return VelocityField(
            self.u1 + sign * other.u1,
            self.u2 + sign * other.u2,
            self.grid,
            self.t,
            self.solenoidal and other.solenoidal,
            shear,
        )

    def __add__(self, other: "VelocityField") -> "VelocityField":
        return self._combine(other, 1.0)

    def __sub__(self, other: "VelocityField") -> "VelocityField":
        return self._combine(other, -1.0)

    def __mul__(self, c: float) -> "VelocityField":
        shear = None if self.shear is None else self.shear * c
        return VelocityField(self.u1 * c, self.u2 * c, self.grid, self.t, self.solenoidal, shear)

    __rmul__ = __mul__

    def __neg__(self) -> "VelocityField":
        return self * -1.0

    def with_time(self, t: float) -> "VelocityField":
        return replace(self, t=float(t))

    def copy(self) -> "VelocityField":
        shear = None if self.shear is None else self.shear.copy()
        return VelocityField(self.u1.copy(), self.u2.copy(), self.grid, self.t, self.solenoidal, shear)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.u1)) and np.all(np.isfinite(self.u2)))

    def physical(self) -> Tuple[np.ndarray, np.ndarray]:
        return inverse_transform_x(self.u1), inverse_transform_x(self.u2)

    @classmethod
    def from_physical(cls, u1, u2, grid: Grid, **kwargs) -> "VelocityField":
        u2 = np.array(u2, dtype=float)
        u2[:, 0] = 0.0
        u2[:, -1] = 0.0
        c2 = transform_x(u2)
        c2[:, 0] = 0.0
        c2[:, -1] = 0.0
        return cls(transform_x(np.asarray(u1, dtype=float)), c2, grid, **kwargs)

    def dealiased(self) -> "VelocityField":
        return VelocityField(
            dealias_23(self.u1, self.grid), dealias_23(self.u2, self.grid), self.grid, self.t, False
        )


def zero_velocity(grid: Grid, t: float = 0.0) -> VelocityField:
    return VelocityField(
        np.zeros((grid.n_x, grid.n_z), complex),
        np.zeros((grid.n_x, grid.n_z + 1), complex),
        grid,
        t,
        True,
    )


def random_velocity(
    grid: Grid, rng: np.random.Generator, dealias: bool = True, smooth: float = 0.0
) -> VelocityField:
    """Random real velocity field (not solenoidal).

    ``smooth > 0`` damps mode |k| by (1 + |k|)^-smooth in x and applies the
    same number of passes of a [1, 2, 1] / 4 filter in z.
    """
    u1 = rng.standard_normal((grid.n_x, grid.n_z))
    u2 = rng.standard_normal((grid.n_x, grid.n_z + 1))
    u2[:, [0, -1]] = 0.0
    c1, c2 = transform_x(u1), transform_x(u2)
    if smooth > 0:
        damp = (1.0 + np.abs(grid.k)) ** (-smooth)
        c1 *= damp[:, None]
        c2 *= damp[:, None]
        for _ in range(int(np.ceil(smooth))):
            c1[:, 1:-1] = 0.25 * (c1[:, :-2] + 2 * c1[:, 1:-1] + c1[:, 2:])
            c2[:, 1:-1] = 0.25 * (c2[:, :-2] + 2 * c2[:, 1:-1] + c2[:, 2:])
    c2[:, [0, -1]] = 0.0
    c1[grid.nyquist] = 0.0
    c2[grid.nyquist] = 0.0
    u = VelocityField(c1, c2, grid)
    return u.dealiased() if dealias else u


# --- inner products and norms -------------------------------------------


def _modal_sum(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.real(np.sum(a * np.conj(b))))


def inner(u: VelocityField, v: VelocityField) -> float:
    """Discrete L2 inner product of two velocity fields."""
    g = u.grid
    if v.grid != g:
        raise ValueError("dimension mismatch: fields live on different grids")
    s = _modal_sum(u.u1, v.u1) + _modal_sum(u.u2[:, 1:-1], v.u2[:, 1:-1])
    return TWO_PI * g.dz * s


def scalar_inner(f: ScalarField, h: ScalarField, rows: Optional[slice] = None) -> float:
    rows = rows if rows is not None else slice(None)
    w = np.ones(f.values.shape[1])
    if f.layout == "node" and rows == slice(None):
        w[[0, -1]] = 0.5
    s = np.real(np.sum((f.values * np.conj(h.values))[:, rows] * w[rows]))
    return TWO_PI * f.grid.dz * float(s)


def norm_L2(u: VelocityField) -> float:
    return float(np.sqrt(max(inner(u, u), 0.0)))


def _u1_dz_nodes(u: VelocityField) -> np.ndarray:
    shear = u.shear if u.shear is not None else 0.0
    return ddz_center_to_node(
        u.u1, u.grid, lower=Closure("dirichlet", 0.0), upper=Closure("neumann", shear)
    )


def grad_norm_sq(u: VelocityField) -> float:
    """Discrete ||grad u||^2, consistent with the solver's Laplacian.

    For fields with homogeneous boundary data this equals <-Lap_h u, u>
    exactly (summation by parts on the staggered grid).
    """
    g = u.grid
    k2 = g.k2.copy()
    k2[g.nyquist] = 0.0
    x_part = np.sum(k2[:, None] * np.abs(u.u1) ** 2) + np.sum(k2[:, None] * np.abs(u.u2[:, 1:-1]) ** 2)
    d1 = np.abs(_u1_dz_nodes(u)) ** 2
    z1 = np.sum(d1[:, 1:-1]) + 0.5 * (np.sum(d1[:, 0]) + np.sum(d1[:, -1]))
    z2 = np.sum(np.abs(ddz_node_to_center(u.u2, g)) ** 2)
    return TWO_PI * g.dz * float(x_part + z1 + z2)


def norm_H1(u: VelocityField) -> float:
    return float(np.sqrt(inner(u, u) + grad_norm_sq(u)))


def norm_L4(u: VelocityField) -> float:
    """L4 norm of |u| evaluated at cell centers on a 2x zero-padded x grid."""
    g = u.grid
    m = 2 * g.n_x
    p1 = inverse_transform_x(dealias_23(u.u1, g), m)
    p2 = avg_node_to_center(inverse_transform_x(dealias_23(u.u2, g), m))
    integrand = (p1 ** 2 + p2 ** 2) ** 2
    return float((TWO_PI / m * g.dz * np.sum(integrand)) ** 0.25)


# --- differential operators ---------------------------------------------


def curl(u: VelocityField) -> ScalarField:
    """Vorticity d_x u2 - d_z u1 at nodes.

    Wall rows are linear extrapolations from the interior and are listed in
    ``untrusted``.
    """
    g = u.grid
    om = np.empty((g.n_x, g.n_z + 1), dtype=complex)
    om[:, 1:-1] = ddx(u.u2[:, 1:-1], g) - ddz_center_to_interior(u.u1, g)
    om[:, 0] = 2 * om[:, 1] - om[:, 2]
    om[:, -1] = 2 * om[:, -2] - om[:, -3]
    return ScalarField(om, "node", g, u.t, untrusted=(0, g.n_z))


def divergence(u: VelocityField) -> ScalarField:
    g = u.grid
    return ScalarField(ddx(u.u1, g) + ddz_node_to_center(u.u2, g), "center", g, u.t)


# --- Besov norm on the boundary -----------------------------------------


def besov_boundary_norm(g: BoundaryField, s: float, q: float, oversample: int = 8) -> float:
    """Littlewood-Paley B^s_{q,q}(T) norm of a boundary function.

    Dyadic blocks are {k = 0} and {2^(m-1) <= |k| < 2^m}; each block's L^q
    norm is evaluated in physical space on an ``oversample``-times finer grid.
    """
    vals = np.asarray(g.values)
    if not np.all(np.isfinite(vals)) or not np.isfinite(s) or not np.isfinite(q):
        raise ValueError("besov_boundary_norm: non-finite input")
    if not abs(s) < 10:
        raise ValueError(f"smoothness s must satisfy |s| < 10, got {s}")
    if not 1.01 <= q <= 100:
        raise ValueError(f"integrability q must lie in [1.01, 100], got {q}")
    n = vals.shape[0]
    k = np.abs(np.fft.fftfreq(n, d=1.0 / n).round().astype(int))
    m_pts = oversample * n
    dx = TWO_PI / m_pts
    block_index = np.where(k == 0, 0, np.floor(np.log2(np.maximum(k, 1))).astype(int) + 1)
    total = 0.0
    for m in np.unique(block_index):
        block = np.where(block_index == m, vals, 0.0)
        if not np.any(block):
            continue
        f = inverse_transform_x(block, m_pts)
        lq = (dx * np.sum(np.abs(f) ** q)) ** (1.0 / q)
        total += (2.0 ** (m * s) * lq) ** q
    return float(total ** (1.0 / q))


# --- trilinear form -----------------------------------------------------


def _phys(c: np.ndarray) -> np.ndarray:
    return inverse_transform_x(c)


def _check_same_grid(*fields: VelocityField) -> Grid:
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise ValueError("dimension mismatch: fields live on different grids")
    return g


class _Physical:
    """Dealiased physical-space values and derivatives of one velocity field."""

    __slots__ = ("g", "c1", "c2", "p1", "p2")

    def __init__(self, u: VelocityField):
        g = u.grid
        self.g = g
        self.c1 = dealias_23(u.u1, g)
        self.c2 = dealias_23(u.u2, g)
        self.p1 = _phys(self.c1)
        self.p2 = _phys(self.c2)

    def dx1(self):
        return _phys(ddx(self.c1, self.g))

    def dx2(self):
        return _phys(ddx(self.c2, self.g))


def trilinear_quadrature(u: VelocityField, v: VelocityField, w: VelocityField) -> float:
    """Plain quadrature of int (u . grad v) . w on the staggered grid."""
    g = _check_same_grid(u, v, w)
    U, V, W = _Physical(u), _Physical(v), _Physical(w)
    t1 = np.sum(U.p1 * V.dx1() * W.p1)
    t2 = np.sum(U.p2[:, 1:-1] * ddz_center_to_interior(V.p1, g) * avg_center_to_interior(W.p1))
    t3 = np.sum(avg_center_to_interior(U.p1) * V.dx2()[:, 1:-1] * W.p2[:, 1:-1])
    t4 = np.sum(avg_node_to_center(U.p2) * ddz_node_to_center(V.p2, g) * avg_node_to_center(W.p2))
    return float(g.dx * g.dz * (t1 + t2 + t3 + t4))


def trilinear_b(u: VelocityField, v: VelocityField, w: VelocityField) -> float:
    """Skew-symmetric trilinear form, b(u, v, w) = -b(u, w, v) exactly."""
    return 0.5 * (trilinear_quadrature(u, v, w) - trilinear_quadrature(u, w, v))


def _advective_part(U: _Physical, V: _Physical, g: Grid) -> Tuple[np.ndarray, np.ndarray]:
    """Riesz representer of w -> quadrature(u, v, w), physical values."""
    x = interior_to_nodes(U.p2[:, 1:-1] * ddz_center_to_interior(V.p1, g))
    r1 = U.p1 * V.dx1() + avg_node_to_center(x)
    z = avg_node_to_center(U.p2) * ddz_node_to_center(V.p2, g)
    r2 = avg_center_to_interior(U.p1) * V.dx2()[:, 1:-1] + avg_center_to_interior(z)
    return r1, r2


def _transport_part(U: _Physical, W: _Physical, g: Grid) -> Tuple[np.ndarray, np.ndarray]:
    """Riesz representer of v -> quadrature(u, v, w), as (center, interior-node) spectra."""
    a1 = transform_x(U.p1 * W.p1)
    y = interior_to_nodes(U.p2[:, 1:-1] * avg_center_to_interior(W.p1))
    h1 = -ddx(dealias_23(a1, g), g) - transform_x(ddz_node_to_center(y, g))
    a2 = transform_x(avg_center_to_interior(U.p1) * W.p2[:, 1:-1])
    zc = avg_node_to_center(U.p2) * avg_node_to_center(W.p2)
    h2 = -ddx(dealias_23(a2, g), g) - transform_x(ddz_center_to_interior(zc, g))
    return h1, h2


def advection(u: VelocityField, v: VelocityField) -> VelocityField:
    """Velocity field B(u, v) with <B(u, v), phi> = trilinear_b(u, v, phi) for all phi."""
    g = _check_same_grid(u, v)
    U, V = _Physical(u), _Physical(v)
    r1, r2 = _advective_part(U, V, g)
    h1, h2 = _transport_part(U, V, g)
    c1 = dealias_23(0.5 * (transform_x(r1) - h1), g)
    c2n = interior_to_nodes(0.5 * (transform_x(r2) - h2))
    c2 = dealias_23(c2n, g)
    c2[:, [0, -1]] = 0.0
    return VelocityField(c1, c2, g, u.t)
