"""Initial-condition presets."""

from __future__ import annotations

import numpy as np

from .elliptic import stokes_eigenmodes
from .fields import VelocityField, norm_L2, zero_velocity
from .grid import Grid

__all__ = ["single_mode", "zero"]


def zero(grid: Grid) -> VelocityField:
    return zero_velocity(grid)


def single_mode(grid: Grid, k: int, m: int = 0, amplitude: float = 0.1, nu: float = 1.0) -> VelocityField:
    """m-th discrete Stokes eigenmode at wavenumber k, scaled to L2 norm ``amplitude``."""
    if not 0 <= k < grid.n_x // 2:
        raise ValueError(f"wavenumber must satisfy 0 <= k < n_x/2, got {k}")
    _, p1, p2 = stokes_eigenmodes(grid, k, nu)
    if not 0 <= m < p1.shape[1]:
        raise ValueError(f"mode index must satisfy 0 <= m < {p1.shape[1]}, got {m}")
    u = zero_velocity(grid)
    u1 = np.zeros_like(u.u1)
    u2 = np.zeros_like(u.u2)
    c1, c2 = p1[:, m], p2[:, m]
    # fix the phase so the largest u1 entry is real
    phase = np.exp(-1j * np.angle(c1[np.argmax(np.abs(c1))]))
    c1, c2 = c1 * phase, c2 * phase
    if k == 0:
        u1[0] = c1.real
    else:
        u1[k], u1[-k] = c1, np.conj(c1)
        u2[k, 1:-1], u2[-k, 1:-1] = c2, np.conj(c2)
    out = VelocityField(u1, u2, grid, solenoidal=True)
    return out * (amplitude / norm_L2(out))
