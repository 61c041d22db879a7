"""Discretization of the periodic channel T x (0, a).

Fourier collocation in x (period 2*pi), uniform staggered grid in z.
Horizontal velocity and pressure live at cell centers z_{j+1/2}; vertical
velocity and vorticity live at nodes z_j.

Spectral arrays use numpy's full FFT ordering along axis 0 with the
normalization ``coef = fft(values) / N_x``, so a constant field 1 has
coefficient 1 at k = 0 and cos(3x) has coefficients 1/2 at k = +-3.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Tuple

import numpy as np

__all__ = [
    "Grid",
    "Closure",
    "ClosureError",
    "transform_x",
    "inverse_transform_x",
    "ddx",
    "ddz_node_to_center",
    "ddz_center_to_node",
    "ddz_center_to_interior",
    "avg_center_to_interior",
    "avg_node_to_center",
    "dealias_23",
]


class ClosureError(ValueError):
    """Raised when a z-derivative needs a boundary closure that was not given."""


@dataclass(frozen=True)
class Grid:
    """Geometry and resolution of the channel.

    Parameters
    ----------
    n_x : int
        Number of Fourier collocation points in x (even, >= 4).
    n_z : int
        Number of cells in z (>= 4).
    a : float
        Channel height.
    """

    n_x: int
    n_z: int
    a: float = 1.0

    def __post_init__(self):
        if not isinstance(self.n_x, (int, np.integer)) or self.n_x < 4 or self.n_x % 2:
            raise ValueError(f"n_x must be an even integer >= 4, got {self.n_x!r}")
        if not isinstance(self.n_z, (int, np.integer)) or self.n_z < 4:
            raise ValueError(f"n_z must be an integer >= 4, got {self.n_z!r}")
        if not (np.isfinite(self.a) and self.a > 0):
            raise ValueError(f"a must be positive and finite, got {self.a!r}")
        object.__setattr__(self, "n_x", int(self.n_x))
        object.__setattr__(self, "n_z", int(self.n_z))
        object.__setattr__(self, "a", float(self.a))

    length_x = 2.0 * np.pi

    @property
    def dx(self) -> float:
        return self.length_x / self.n_x

    @property
    def dz(self) -> float:
        return self.a / self.n_z

    @cached_property
    def k(self) -> np.ndarray:
        """Integer wavenumbers in FFT order (Nyquist stored as -n_x/2)."""
        return np.fft.fftfreq(self.n_x, d=1.0 / self.n_x).round().astype(int)

    @property
    def nyquist(self) -> int:
        """Index of the Nyquist mode in FFT order."""
        return self.n_x // 2

    @property
    def cutoff(self) -> int:
        """Largest |k| kept by the 2/3 rule."""
        return self.n_x // 3

    @cached_property
    def ik(self) -> np.ndarray:
        """Symbol of d/dx; zero at the Nyquist mode so real fields stay real."""
        sym = 1j * self.k.astype(float)
        sym[self.nyquist] = 0.0
        return sym

    @cached_property
    def k2(self) -> np.ndarray:
        return self.k.astype(float) ** 2

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        return np.abs(self.k) <= self.cutoff

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.n_x) * self.dx

    @cached_property
    def z_nodes(self) -> np.ndarray:
        return np.arange(self.n_z + 1) * self.dz

    @cached_property
    def z_centers(self) -> np.ndarray:
        return (np.arange(self.n_z) + 0.5) * self.dz

    def refined(self, n_x: Optional[int] = None, n_z: Optional[int] = None) -> "Grid":
        return Grid(n_x or self.n_x, n_z or self.n_z, self.a)


def _check_length(values: np.ndarray, n: int, axis: int = 0) -> None:
    if values.shape[axis] != n:
        raise ValueError(
            f"dimension mismatch: expected length {n} along axis {axis}, got {values.shape[axis]}"
        )


def transform_x(values: np.ndarray, n_x: Optional[int] = None) -> np.ndarray:
    """Physical samples (axis 0) to Fourier coefficients."""
    values = np.asarray(values)
    if n_x is not None:
        _check_length(values, n_x)
    return np.fft.fft(values, axis=0) / values.shape[0]


def inverse_transform_x(coefs: np.ndarray, n_x: Optional[int] = None, real: bool = True) -> np.ndarray:
    """Fourier coefficients (axis 0) to physical samples.

    With ``n_x`` larger than the number of coefficients the spectrum is
    zero-padded, which evaluates the same trigonometric polynomial on a
    finer collocation grid (used for exact quadrature of products).
    """
    coefs = np.asarray(coefs)
    n = coefs.shape[0]
    if n_x is not None and n_x != n:
        if n_x < n or n_x % 2:
            raise ValueError(f"cannot evaluate {n} coefficients on {n_x} points")
        padded = np.zeros((n_x,) + coefs.shape[1:], dtype=complex)
        half = n // 2
        padded[:half] = coefs[:half]
        padded[n_x - half + 1:] = coefs[half + 1:]
        # split the Nyquist coefficient so the padded polynomial stays real
        padded[half] = 0.5 * coefs[half]
        padded[n_x - half] = 0.5 * coefs[half]
        coefs, n = padded, n_x
    out = np.fft.ifft(coefs, axis=0) * n
    return out.real if real else out


def ddx(coefs: np.ndarray, grid: Grid) -> np.ndarray:
    """Spectral x-derivative of coefficients laid out along axis 0."""
    coefs = np.asarray(coefs)
    _check_length(coefs, grid.n_x)
    sym = grid.ik.reshape((-1,) + (1,) * (coefs.ndim - 1))
    return sym * coefs


def dealias_23(coefs: np.ndarray, grid: Grid) -> np.ndarray:
    """Zero every coefficient with |k| > n_x // 3."""
    coefs = np.asarray(coefs)
    _check_length(coefs, grid.n_x)
    mask = grid.dealias_mask.reshape((-1,) + (1,) * (coefs.ndim - 1))
    return np.where(mask, coefs, 0.0)


# --- z operators (act on the last axis) ---------------------------------


def ddz_node_to_center(f: np.ndarray, grid: Grid) -> np.ndarray:
    """(f_{j+1} - f_j) / dz from nodes 0..n_z to centers."""
    _check_length(f, grid.n_z + 1, axis=-1)
    return np.diff(f, axis=-1) / grid.dz


def ddz_center_to_interior(f: np.ndarray, grid: Grid) -> np.ndarray:
    """(f_{j+1/2} - f_{j-1/2}) / dz at interior nodes 1..n_z-1."""
    _check_length(f, grid.n_z, axis=-1)
    return np.diff(f, axis=-1) / grid.dz


@dataclass(frozen=True)
class Closure:
    """Boundary closure for a center-located quantity at one wall.

    ``kind`` is ``"dirichlet"`` (value of f at the wall) or ``"neumann"``
    (value of df/dz at the wall). ``value`` broadcasts against the leading
    axes of the field.
    """

    kind: str
    value: object = 0.0

    def __post_init__(self):
        if self.kind not in ("dirichlet", "neumann"):
            raise ValueError(f"unknown closure kind {self.kind!r}")


def _wall_derivative(f_adj: np.ndarray, closure: Closure, dz: float, sign: float) -> np.ndarray:
    if closure.kind == "neumann":
        return np.broadcast_to(np.asarray(closure.value), f_adj.shape).astype(np.result_type(f_adj, float))
    # ghost = 2 g - f_adj, derivative = sign * (f_adj - ghost) / dz
    return sign * 2.0 * (f_adj - np.asarray(closure.value)) / dz


def ddz_center_to_node(
    f: np.ndarray,
    grid: Grid,
    lower: Optional[Closure] = None,
    upper: Optional[Closure] = None,
) -> np.ndarray:
    """Derivative of a center field at all nodes 0..n_z.

    The wall rows need a closure at each wall; omitting one raises
    :class:`ClosureError`.
    """
    if lower is None or upper is None:
        raise ClosureError("ddz_center_to_node needs a closure at both walls")
    _check_length(f, grid.n_z, axis=-1)
    out = np.empty(f.shape[:-1] + (grid.n_z + 1,), dtype=np.result_type(f, float))
    out[..., 1:-1] = np.diff(f, axis=-1) / grid.dz
    out[..., 0] = _wall_derivative(f[..., 0], lower, grid.dz, 1.0)
    out[..., -1] = _wall_derivative(f[..., -1], upper, grid.dz, -1.0)
    return out


def avg_center_to_interior(f: np.ndarray) -> np.ndarray:
    """Mean of the two adjacent centers at each interior node."""
    return 0.5 * (f[..., 1:] + f[..., :-1])


def avg_node_to_center(f: np.ndarray) -> np.ndarray:
    """Mean of the two adjacent nodes at each center (all nodes supplied)."""
    return 0.5 * (f[..., 1:] + f[..., :-1])


def interior_to_nodes(f: np.ndarray) -> np.ndarray:
    """Pad an interior-node array with zero wall values."""
    pad = [(0, 0)] * (f.ndim - 1) + [(1, 1)]
    return np.pad(f, pad)


def grid_shape(grid: Grid) -> Tuple[Tuple[int, int], Tuple[int, int]]:
    """Array shapes of (center, node) fields."""
    return (grid.n_x, grid.n_z), (grid.n_x, grid.n_z + 1)
