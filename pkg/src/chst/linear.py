"""Boundary-driven stochastic Stokes problem.

Each step is one implicit-Euler solve of the shifted Stokes system with the
noise impulse imposed as the top-wall shear datum over the step:

    (w_{n+1} - w_n) / dt = nu Lap_h w_{n+1} - grad p,
    d_z w1 = (sum_j sigma_j phi_j dW_j) / dt   at z = a.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import partial
from typing import List, Optional, Tuple

import numpy as np

from .elliptic import stokes_resolvent
from .fields import VelocityField, norm_L2, norm_L4, zero_velocity
from .grid import Grid
from .noise import BoundaryNoiseModel, NoiseIncrement, sample_increment
from .parallel import ordered_map

__all__ = [
    "BlowUpError",
    "LinearPath",
    "step_w",
    "simulate_w",
    "ou_mode0_exact_variance",
    "ou_mode0_oracle",
    "n_steps",
]


class BlowUpError(FloatingPointError):
    """A time march produced non-finite values."""

    def __init__(self, step: int, what: str = "field"):
        super().__init__(f"non-finite {what} at step {step}")
        self.step = step


def n_steps(T: float, dt: float) -> int:
    if not (np.isfinite(T) and T > 0):
        raise ValueError(f"T must be positive, got {T!r}")
    if not (np.isfinite(dt) and 0 < dt <= T * (1 + 1e-12)):
        raise ValueError(f"dt must satisfy 0 < dt <= T, got {dt!r}")
    n = int(round(T / dt))
    if abs(n * dt - T) > 1e-9 * T:
        raise ValueError(f"T={T} is not an integer multiple of dt={dt}")
    return n


@dataclass
class LinearPath:
    """Recorded trajectory of the linear problem."""

    grid: Grid
    model: BoundaryNoiseModel
    dt: float
    path_index: int
    times: List[float] = field(default_factory=list)
    snapshots: List[VelocityField] = field(default_factory=list)
    sup_L2: float = 0.0
    int_L4: float = 0.0
    impulse_energy: List[float] = field(default_factory=list)
    final: Optional[VelocityField] = None

    def snapshot_at(self, t: float) -> VelocityField:
        i = int(np.argmin(np.abs(np.asarray(self.times) - t)))
        return self.snapshots[i]


def step_w(w_n: VelocityField, dt: float, incr: NoiseIncrement, nu: float = 1.0) -> VelocityField:
    """Advance the linear problem by one implicit step."""
    if not (np.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be positive, got {dt!r}")
    w = stokes_resolvent(w_n * (1.0 / dt), 1.0 / dt, incr.impulse.values / dt, nu)
    w.t = w_n.t + dt
    return w


def simulate_w(
    model: BoundaryNoiseModel,
    grid: Grid,
    T: float,
    dt: float,
    nu: float = 1.0,
    path_index: int = 0,
    substeps: int = 1,
    stride: int = 1,
    record_from: float = 0.0,
) -> LinearPath:
    """March the linear problem from w(0) = 0 to time T.

    Snapshots are kept every ``stride`` steps for t >= ``record_from``;
    ``final`` always holds w(T).  ``int_L4`` is the left-endpoint sum of
    dt * ||w_n||_{L4}^4.
    """
    n = n_steps(T, dt)
    path = LinearPath(grid, model, dt, path_index)
    w = zero_velocity(grid)
    path.times.append(0.0)
    path.snapshots.append(w)
    for i in range(n):
        path.int_L4 += dt * norm_L4(w) ** 4
        incr = sample_increment(model, dt, path_index, i, grid.n_x, substeps)
        path.impulse_energy.append(2 * np.pi * float(np.sum(np.abs(incr.impulse.values) ** 2)))
        w = step_w(w, dt, incr, nu)
        w.t = (i + 1) * dt
        if not w.is_finite():
            raise BlowUpError(i + 1, "linear field")
        path.sup_L2 = max(path.sup_L2, norm_L2(w))
        if (i + 1) % stride == 0 and w.t >= record_from - 1e-12:
            path.times.append(w.t)
            path.snapshots.append(w)
    if record_from > 0:
        keep = [j for j, t in enumerate(path.times) if t >= record_from - 1e-12]
        path.times = [path.times[j] for j in keep]
        path.snapshots = [path.snapshots[j] for j in keep]
    path.final = w
    return path


# --- k = 0 Ornstein-Uhlenbeck oracle --------------------------------------


def _mode0_operator(n_z: int, dz: float, nu: float) -> np.ndarray:
    """nu * d_zz at centers, Dirichlet below and Neumann above (dense)."""
    main = np.full(n_z, -2.0)
    main[0] = -3.0
    main[-1] = -1.0
    L = np.diag(main) + np.diag(np.ones(n_z - 1), 1) + np.diag(np.ones(n_z - 1), -1)
    return nu * L / dz ** 2


def ou_mode0_exact_variance(
    model: BoundaryNoiseModel, grid: Grid, T: float, dt: float, z_star: float, nu: float = 1.0
) -> float:
    """Variance of the k = 0 horizontal velocity at the center nearest z_star.

    The k = 0 slice of the implicit step is the linear recursion
    x' = M x + M b xi with M = (I - dt nu L)^-1, b = nu sigma_0 e_top / dz
    and xi ~ N(0, dt).  The covariance is propagated in the eigenbasis of
    the symmetric matrix L, where M is diagonal.
    """
    n = n_steps(T, dt)
    L = _mode0_operator(grid.n_z, grid.dz, nu)
    lam, Q = np.linalg.eigh(L)
    mu = 1.0 / (1.0 - dt * lam)
    # channel 0 is the constant shape; other channels have no k = 0 part
    amp0 = model.amplitudes[0]
    e_top = np.zeros(grid.n_z)
    e_top[-1] = 1.0
    b_hat = mu * (Q.T @ (nu * amp0 * e_top / grid.dz))
    j = int(np.argmin(np.abs(grid.z_centers - z_star)))
    probe = Q[j]
    cov = np.zeros((grid.n_z, grid.n_z))
    mm = np.outer(mu, mu)
    for i in range(n):
        f = model.factor(i * dt)
        cov = mm * cov + dt * f * f * np.outer(b_hat, b_hat)
    return float(probe @ cov @ probe)


def _final_mode0(args, model, grid, T, dt, nu, j):
    path = simulate_w(model, grid, T, dt, nu, path_index=args, stride=10 ** 9)
    return float(path.final.u1[0, j].real)


def ou_mode0_oracle(
    model: BoundaryNoiseModel,
    grid: Grid,
    T: float,
    dt: float,
    z_star: float,
    nu: float = 1.0,
    n_paths: int = 1000,
    workers: Optional[int] = None,
) -> Tuple[float, float, float]:
    """(exact variance, Monte Carlo variance, its standard error) of w1 at
    k = 0 and z_star.

    The Monte Carlo estimate uses the full solver over ``n_paths`` paths
    and the known zero mean.
    """
    exact = ou_mode0_exact_variance(model, grid, T, dt, z_star, nu)
    j = int(np.argmin(np.abs(grid.z_centers - z_star)))
    fn = partial(_final_mode0, model=model, grid=grid, T=T, dt=dt, nu=nu, j=j)
    samples = np.asarray(ordered_map(fn, range(n_paths), workers))
    sq = samples ** 2
    return exact, float(np.mean(sq)), float(np.std(sq, ddof=1) / np.sqrt(n_paths))
