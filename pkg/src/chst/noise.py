"""Truncated cylindrical Brownian motion on the top wall.

The noise space is truncated to J channels.  Channel j (0-based) has shape
phi_j from the sequence 1, cos x, sin x, cos 2x, sin 2x, ... and amplitude
sigma_j = sigma0 * (1 + j)^(-beta).  Gaussians are drawn from a Philox
counter-based generator keyed by the seed, so every draw is a pure
function of (seed, path_index, step_index, channel).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from .fields import BoundaryField, besov_boundary_norm

__all__ = [
    "BoundaryNoiseModel",
    "NoiseIncrement",
    "channel_shape",
    "gaussians",
    "sample_increment",
    "measure_path_regularity",
]

_MASK64 = (1 << 64) - 1


def channel_shape(j: int, n_x: int) -> BoundaryField:
    """Default channel shape: 1, cos x, sin x, cos 2x, sin 2x, ..."""
    if j == 0:
        return BoundaryField.constant(n_x, 1.0)
    m = (j + 1) // 2
    if m >= n_x // 2:
        raise ValueError(f"channel {j} (wavenumber {m}) is not resolved on n_x={n_x}")
    v = np.zeros(n_x, complex)
    if j % 2:
        v[m] = v[-m] = 0.5
    else:
        v[m] = -0.5j
        v[-m] = 0.5j
    return BoundaryField(v)


@dataclass(frozen=True)
class BoundaryNoiseModel:
    """Spatial colour and randomness of the boundary forcing.

    ``schedule`` is a tuple of (start_time, factor) breakpoints; the
    amplitude factor in force at time t is that of the last breakpoint with
    start_time <= t (1.0 before the first one).
    """

    J: int = 16
    sigma0: float = 0.1
    beta: float = 1.0
    seed: int = 0
    schedule: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        if int(self.J) != self.J or self.J < 1:
            raise ValueError(f"J must be a positive integer, got {self.J!r}")
        if not (np.isfinite(self.sigma0) and self.sigma0 >= 0):
            raise ValueError(f"sigma0 must be finite and nonnegative, got {self.sigma0!r}")
        if not (np.isfinite(self.beta) and self.beta >= 0):
            raise ValueError(f"beta must be finite and nonnegative, got {self.beta!r}")
        object.__setattr__(self, "J", int(self.J))
        object.__setattr__(self, "seed", int(self.seed) & _MASK64)
        sched = tuple(sorted((float(t), float(c)) for t, c in self.schedule))
        if any(not np.isfinite(c) for _, c in sched):
            raise ValueError("schedule factors must be finite")
        object.__setattr__(self, "schedule", sched)

    @property
    def amplitudes(self) -> np.ndarray:
        return self.sigma0 * (1.0 + np.arange(self.J)) ** (-self.beta)

    def factor(self, t: float) -> float:
        out = 1.0
        for start, c in self.schedule:
            if start <= t + 1e-12:
                out = c
        return out

    def shapes(self, n_x: int) -> np.ndarray:
        """Channel shapes as a (J, n_x) coefficient array."""
        return np.stack([channel_shape(j, n_x).values for j in range(self.J)])

    def colour(self, n_x: int) -> np.ndarray:
        """sigma_j * phi_j as a (J, n_x) coefficient array."""
        return self.amplitudes[:, None] * self.shapes(n_x)

    def impulse(self, xi: np.ndarray, n_x: int, t: float = 0.0) -> BoundaryField:
        """Boundary field sum_j factor(t) sigma_j phi_j xi_j."""
        return BoundaryField(self.factor(t) * (xi @ self.colour(n_x)))

    def with_(self, **changes) -> "BoundaryNoiseModel":
        d = dict(J=self.J, sigma0=self.sigma0, beta=self.beta, seed=self.seed, schedule=self.schedule)
        d.update(changes)
        return BoundaryNoiseModel(**d)


def gaussians(seed: int, path_index: int, step_index: int, n: int) -> np.ndarray:
    """First ``n`` standard normals of the stream at (seed, path, step)."""
    counter = [0, 0, int(step_index) & _MASK64, int(path_index) & _MASK64]
    bitgen = np.random.Philox(key=int(seed) & _MASK64, counter=counter)
    return np.random.Generator(bitgen).standard_normal(n)


@dataclass
class NoiseIncrement:
    """Brownian increments over one step and the boundary impulse they produce."""

    dW: np.ndarray
    impulse: BoundaryField
    step_index: int
    dt: float = field(default=0.0)


def sample_increment(
    model: BoundaryNoiseModel,
    dt: float,
    path_index: int,
    step_index: int,
    n_x: int,
    substeps: int = 1,
) -> NoiseIncrement:
    """Increment of W over step ``step_index`` of size ``dt``.

    With ``substeps > 1`` the increment is the sum of ``substeps`` finer
    increments of size dt / substeps taken at fine steps
    step_index * substeps + r, so paths on nested time grids coincide.
    """
    if not (np.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be positive, got {dt!r}")
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    fine = dt / substeps
    dW = np.zeros(model.J)
    for r in range(substeps):
        dW += np.sqrt(fine) * gaussians(model.seed, path_index, step_index * substeps + r, model.J)
    t = step_index * dt
    return NoiseIncrement(dW, model.impulse(dW, n_x, t), int(step_index), float(dt))


def measure_path_regularity(
    model: BoundaryNoiseModel,
    s: float,
    q: float,
    n_samples: int,
    n_x: int = 64,
    path_index: int = 0,
) -> dict:
    """Besov B^{-s}_{q,q} norms of h_b applied to unit Gaussian directions.

    Sample i uses the normalized Gaussian vector xi / |xi| drawn at
    (seed, path_index, step i), so different colours are compared on the
    same directions.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    colour = model.colour(n_x)
    norms = np.empty(n_samples)
    for i in range(n_samples):
        xi = gaussians(model.seed, path_index, i, model.J)
        xi = xi / np.linalg.norm(xi)
        norms[i] = besov_boundary_norm(BoundaryField(xi @ colour), -s, q)
    return {
        "mean": float(norms.mean()),
        "max": float(norms.max()),
        "min": float(norms.min()),
        "n_samples": int(n_samples),
        "s": float(s),
        "q": float(q),
    }
